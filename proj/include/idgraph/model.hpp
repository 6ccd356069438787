#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idgraph {

// Base for everything this library throws.
class diagram_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document text (bad JSON, wrong schema shape).
class parse_error : public diagram_error {
 public:
  using diagram_error::diagram_error;
};

// Structurally impossible diagram content: duplicate ids, unknown endpoints,
// self-loops, duplicate arcs, unknown kinds. Carries the offending ids.
class semantic_error : public diagram_error {
 public:
  semantic_error(const std::string& message, std::vector<std::string> ids = {})
      : diagram_error(message), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

// Bad arguments to a query (unknown target id, duplicate targets, ...).
class input_error : public diagram_error {
 public:
  using diagram_error::diagram_error;
};

enum class NodeKind { Probabilistic, Deterministic, Decision, Value };

inline const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Probabilistic: return "probabilistic";
    case NodeKind::Deterministic: return "deterministic";
    case NodeKind::Decision: return "decision";
    case NodeKind::Value: return "value";
  }
  return "?";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view text) {
  if (text == "probabilistic") return NodeKind::Probabilistic;
  if (text == "deterministic") return NodeKind::Deterministic;
  if (text == "decision") return NodeKind::Decision;
  if (text == "value") return NodeKind::Value;
  return std::nullopt;
}

// Value nodes are deterministic functions of their parents; both kinds are
// treated alike by the structural rules.
inline bool is_functional(NodeKind kind) {
  return kind == NodeKind::Deterministic || kind == NodeKind::Value;
}

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Probabilistic;
  bool observed = false;

  friend bool operator==(const Node&, const Node&) = default;
};

struct Arc {
  std::string from;
  std::string to;

  friend bool operator==(const Arc&, const Arc&) = default;
  friend bool operator<(const Arc& a, const Arc& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  }
};

struct DiagramMeta {
  bool dynamic_unroll = false;

  friend bool operator==(const DiagramMeta&, const DiagramMeta&) = default;
};

struct Violation {
  std::string code;
  std::string message;
  std::vector<std::string> ids;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

// Immutable DAG of probabilistic / deterministic / decision / value nodes.
// Construction rejects malformed input (duplicate ids, dangling endpoints,
// self-loops, duplicate arcs); higher-level properties (acyclicity, value
// nodes without children, unobserved decisions) are reported by validate().
//
// Arcs into decision nodes are informational: they are kept for
// serialization and rendering but the structural engines never consult them,
// which is what the functional_* accessors expose.
class InfluenceDiagram {
 public:
  InfluenceDiagram() = default;

  InfluenceDiagram(std::vector<Node> nodes, std::vector<Arc> arcs,
                   DiagramMeta meta = {})
      : meta_(meta) {
    std::sort(nodes.begin(), nodes.end(),
              [](const Node& a, const Node& b) { return a.id < b.id; });
    for (const Node& n : nodes) {
      if (n.id.empty()) throw semantic_error("node with empty id");
      if (!index_.emplace(n.id, nodes_.size()).second)
        throw semantic_error("duplicate node id \"" + n.id + "\"", {n.id});
      nodes_.push_back(n);
    }
    std::sort(arcs.begin(), arcs.end());
    parents_.resize(nodes_.size());
    children_.resize(nodes_.size());
    functional_children_.resize(nodes_.size());
    for (const Arc& a : arcs) {
      auto from = index_.find(a.from);
      auto to = index_.find(a.to);
      if (from == index_.end())
        throw semantic_error("arc endpoint \"" + a.from + "\" is not declared",
                             {a.from});
      if (to == index_.end())
        throw semantic_error("arc endpoint \"" + a.to + "\" is not declared",
                             {a.to});
      if (a.from == a.to)
        throw semantic_error("self-loop on \"" + a.from + "\"", {a.from});
      if (!arcs_.empty() && arcs_.back() == a)
        throw semantic_error(
            "duplicate arc " + a.from + " -> " + a.to, {a.from, a.to});
      arcs_.push_back(a);
      parents_[to->second].push_back(a.from);
      children_[from->second].push_back(a.to);
      if (nodes_[to->second].kind != NodeKind::Decision)
        functional_children_[from->second].push_back(a.to);
    }
    // Arc sort order makes children lists sorted; parent lists need a pass.
    for (auto& p : parents_) std::sort(p.begin(), p.end());
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const DiagramMeta& meta() const { return meta_; }

  bool has_node(const std::string& id) const { return index_.count(id) > 0; }

  const Node& node(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw input_error("unknown node id \"" + id + "\"");
    return nodes_[it->second];
  }

  NodeKind kind(const std::string& id) const { return node(id).kind; }
  bool observed(const std::string& id) const { return node(id).observed; }

  const std::vector<std::string>& parents(const std::string& id) const {
    return parents_[require(id)];
  }

  const std::vector<std::string>& children(const std::string& id) const {
    return children_[require(id)];
  }

  // Parents as consulted by the engines: decision nodes are exogenous, so
  // their incoming (informational) arcs are invisible here.
  const std::vector<std::string>& functional_parents(
      const std::string& id) const {
    std::size_t i = require(id);
    if (nodes_[i].kind == NodeKind::Decision) return empty_;
    return parents_[i];
  }

  const std::vector<std::string>& functional_children(
      const std::string& id) const {
    return functional_children_[require(id)];
  }

  bool has_arc(const std::string& from, const std::string& to) const {
    return std::binary_search(arcs_.begin(), arcs_.end(), Arc{from, to});
  }

  std::vector<std::string> node_ids() const {
    std::vector<std::string> ids;
    ids.reserve(nodes_.size());
    for (const Node& n : nodes_) ids.push_back(n.id);
    return ids;
  }

  std::set<std::string> observed_ids() const {
    std::set<std::string> out;
    for (const Node& n : nodes_)
      if (n.observed) out.insert(n.id);
    return out;
  }

  std::vector<std::string> ids_of_kind(NodeKind kind) const {
    std::vector<std::string> out;
    for (const Node& n : nodes_)
      if (n.kind == kind) out.push_back(n.id);
    return out;
  }

  // All nodes reachable from `id` along functional arcs, excluding `id`.
  std::set<std::string> functional_descendants(const std::string& id) const {
    std::set<std::string> seen;
    std::vector<std::string> stack{id};
    while (!stack.empty()) {
      std::string v = stack.back();
      stack.pop_back();
      for (const std::string& c : functional_children(v))
        if (seen.insert(c).second) stack.push_back(c);
    }
    seen.erase(id);
    return seen;
  }

  friend bool operator==(const InfluenceDiagram& a, const InfluenceDiagram& b) {
    return a.nodes_ == b.nodes_ && a.arcs_ == b.arcs_ && a.meta_ == b.meta_;
  }

 private:
  std::size_t require(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw input_error("unknown node id \"" + id + "\"");
    return it->second;
  }

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> parents_;
  std::vector<std::vector<std::string>> children_;
  std::vector<std::vector<std::string>> functional_children_;
  DiagramMeta meta_;
  inline static const std::vector<std::string> empty_{};
};

// Kahn's algorithm with a lexicographic ready set, over all arcs. Returns
// nullopt when the diagram has a cycle.
inline std::optional<std::vector<std::string>> topological_order(
    const InfluenceDiagram& d) {
  std::map<std::string, int> indegree;
  for (const Node& n : d.nodes()) indegree[n.id] = 0;
  for (const Arc& a : d.arcs()) ++indegree[a.to];
  std::set<std::string> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.insert(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (const std::string& c : d.children(v))
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (order.size() != d.nodes().size()) return std::nullopt;
  return order;
}

// One directed cycle from a diagram that failed topological ordering.
inline std::vector<std::string> find_cycle(const InfluenceDiagram& d) {
  std::map<std::string, int> state;  // 0 unvisited, 1 on stack, 2 done
  std::map<std::string, std::string> came_from;
  std::vector<std::string> cycle;

  auto dfs = [&](auto&& self, const std::string& v) -> bool {
    state[v] = 1;
    for (const std::string& c : d.children(v)) {
      if (state[c] == 1) {
        // Unwind v -> ... -> c.
        cycle.push_back(c);
        for (std::string w = v; w != c; w = came_from[w]) cycle.push_back(w);
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (state[c] == 0) {
        came_from[c] = v;
        if (self(self, c)) return true;
      }
    }
    state[v] = 2;
    return false;
  };

  for (const Node& n : d.nodes())
    if (state[n.id] == 0 && dfs(dfs, n.id)) break;
  return cycle;
}

inline ValidationReport validate(const InfluenceDiagram& d) {
  ValidationReport report;
  if (!topological_order(d)) {
    std::vector<std::string> cycle = find_cycle(d);
    std::string msg = "cycle:";
    for (const std::string& v : cycle) msg += " " + v;
    report.violations.push_back({"cycle", msg, cycle});
  }
  for (const Node& n : d.nodes()) {
    if (n.kind == NodeKind::Value && !d.children(n.id).empty())
      report.violations.push_back(
          {"value_node_with_children",
           "value node \"" + n.id + "\" has outgoing arcs",
           {n.id}});
    if (n.kind == NodeKind::Decision && n.observed)
      report.violations.push_back(
          {"observed_decision",
           "decision node \"" + n.id + "\" is marked observed",
           {n.id}});
  }
  report.ok = report.violations.empty();
  return report;
}

}  // namespace idgraph
