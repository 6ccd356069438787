#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "idgraph/model.hpp"

namespace idgraph {

// Optional overlays from an analysis report.
struct DotAnnotations {
  std::set<std::string> known;                        // evidence nodes
  std::set<std::string> deduced;                      // observable/controlled
  std::vector<std::vector<std::string>> paths;        // certificate paths
};

namespace detail {
inline std::string dot_quote(const std::string& id) {
  std::string out = "\"";
  for (char c : id) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

// Node shape encodes kind: ellipse = probabilistic, doublecircle =
// deterministic, box = decision, diamond = value. Observed nodes are shaded;
// annotated nodes and certificate paths are highlighted.
inline std::string export_dot(const InfluenceDiagram& d,
                              const DotAnnotations& ann = {}) {
  std::set<std::string> on_path;
  std::set<std::pair<std::string, std::string>> path_arcs;
  for (const auto& path : ann.paths) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      on_path.insert(path[i]);
      if (i + 1 < path.size()) path_arcs.insert({path[i], path[i + 1]});
    }
  }

  std::ostringstream out;
  out << "digraph influence_diagram {\n";
  out << "  rankdir=LR;\n";
  for (const Node& n : d.nodes()) {
    out << "  " << detail::dot_quote(n.id) << " [shape=";
    switch (n.kind) {
      case NodeKind::Probabilistic: out << "ellipse"; break;
      case NodeKind::Deterministic: out << "doublecircle"; break;
      case NodeKind::Decision: out << "box"; break;
      case NodeKind::Value: out << "diamond"; break;
    }
    if (n.observed || ann.known.count(n.id))
      out << ", style=filled, fillcolor=gray85";
    else if (ann.deduced.count(n.id))
      out << ", style=filled, fillcolor=palegreen";
    if (on_path.count(n.id)) out << ", color=red, penwidth=2";
    out << "];\n";
  }
  for (const Arc& a : d.arcs()) {
    out << "  " << detail::dot_quote(a.from) << " -> " << detail::dot_quote(a.to);
    if (path_arcs.count({a.from, a.to})) out << " [color=red, penwidth=2]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace idgraph
