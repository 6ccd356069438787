#pragma once

#include <string>

#include <json.hpp>

#include "idgraph/model.hpp"

namespace idgraph {

using json = nlohmann::ordered_json;

// Parses the diagram document format:
//   { "nodes": [ {"id": "x", "kind": "probabilistic", "observed": false} ],
//     "arcs":  [ ["x", "y"] ] }
// "observed" defaults to false. An optional {"meta": {"dynamic_unroll":
// true}} block survives round-trips.
inline InfluenceDiagram parse_diagram(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("syntax error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("arcs"))
    throw parse_error("document must be an object with \"nodes\" and \"arcs\"");
  if (!doc["nodes"].is_array() || !doc["arcs"].is_array())
    throw parse_error("\"nodes\" and \"arcs\" must be arrays");

  std::vector<Node> nodes;
  std::size_t i = 0;
  for (const auto& entry : doc["nodes"]) {
    std::string where = "nodes[" + std::to_string(i++) + "]";
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("kind"))
      throw parse_error(where + ": expected {\"id\", \"kind\"[, \"observed\"]}");
    if (!entry["id"].is_string() || entry["id"].get<std::string>().empty())
      throw parse_error(where + ": \"id\" must be a non-empty string");
    Node n;
    n.id = entry["id"].get<std::string>();
    if (!entry["kind"].is_string())
      throw parse_error(where + ": \"kind\" must be a string");
    auto kind = parse_node_kind(entry["kind"].get<std::string>());
    if (!kind)
      throw semantic_error(where + ": unknown kind \"" +
                               entry["kind"].get<std::string>() + "\" for \"" +
                               n.id + "\"",
                           {n.id});
    n.kind = *kind;
    if (entry.contains("observed")) {
      if (!entry["observed"].is_boolean())
        throw parse_error(where + ": \"observed\" must be a boolean");
      n.observed = entry["observed"].get<bool>();
    }
    nodes.push_back(std::move(n));
  }

  std::vector<Arc> arcs;
  i = 0;
  for (const auto& entry : doc["arcs"]) {
    std::string where = "arcs[" + std::to_string(i++) + "]";
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
        !entry[1].is_string())
      throw parse_error(where + ": expected [\"from\", \"to\"]");
    arcs.push_back({entry[0].get<std::string>(), entry[1].get<std::string>()});
  }

  DiagramMeta meta;
  if (doc.contains("meta")) {
    if (!doc["meta"].is_object()) throw parse_error("\"meta\" must be an object");
    if (doc["meta"].contains("dynamic_unroll"))
      meta.dynamic_unroll = doc["meta"]["dynamic_unroll"].get<bool>();
  }

  try {
    return InfluenceDiagram(std::move(nodes), std::move(arcs), meta);
  } catch (const semantic_error&) {
    throw;
  }
}

inline json diagram_to_json(const InfluenceDiagram& d) {
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : d.nodes()) {
    json entry;
    entry["id"] = n.id;
    entry["kind"] = to_string(n.kind);
    entry["observed"] = n.observed;
    doc["nodes"].push_back(std::move(entry));
  }
  doc["arcs"] = json::array();
  for (const Arc& a : d.arcs()) doc["arcs"].push_back({a.from, a.to});
  if (d.meta().dynamic_unroll) doc["meta"] = {{"dynamic_unroll", true}};
  return doc;
}

// Canonical text form: nodes and arcs sorted by id, stable key order, so
// equal diagrams serialize to identical bytes.
inline std::string serialize_diagram(const InfluenceDiagram& d) {
  return diagram_to_json(d).dump(2) + "\n";
}

}  // namespace idgraph
