#pragma once

#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "idgraph/model.hpp"

namespace idgraph {

// Unit-capacity network for node-disjoint path search. Every eligible
// deterministic/value node is split into an in/out pair joined by a
// capacity-1 edge; probabilistic nodes have capacity zero, i.e. they are
// absent. Decision sources are single vertices fed from the super-source.
// Observed deterministic nodes are eligible only as sinks, and then only to
// terminate a path.
class FlowNetwork {
 public:
  FlowNetwork(const InfluenceDiagram& d, const std::set<std::string>& sources,
              const std::set<std::string>& sinks,
              const std::set<std::string>& excluded = {}) {
    source_ = new_vertex("");
    sink_ = new_vertex("");

    for (const Node& n : d.nodes()) {
      if (!is_functional(n.kind)) continue;
      if (excluded.count(n.id)) continue;
      bool is_sink = sinks.count(n.id) > 0;
      if (n.observed && !is_sink) continue;
      int in = new_vertex("");
      int out = new_vertex(n.id);  // paths record a node at its out vertex
      in_vertex_[n.id] = in;
      out_vertex_[n.id] = out;
      add_edge(in, out, 1);
      ++split_pairs_;
    }
    for (const std::string& id : sources) {
      if (excluded.count(id)) continue;
      int v = new_vertex(id);
      in_vertex_[id] = v;
      out_vertex_[id] = v;
      add_edge(source_, v, 1);
    }
    for (const std::string& id : sinks) {
      auto it = out_vertex_.find(id);
      if (it != out_vertex_.end()) add_edge(it->second, sink_, 1);
    }
    for (const Arc& a : d.arcs()) {
      if (d.node(a.to).kind == NodeKind::Decision) continue;
      auto from = out_vertex_.find(a.from);
      auto to = in_vertex_.find(a.to);
      if (from == out_vertex_.end() || to == in_vertex_.end()) continue;
      if (d.node(a.from).observed) continue;  // observed sinks terminate only
      add_edge(from->second, to->second, 1);
    }
  }

  int vertex_count() const { return static_cast<int>(labels_.size()); }
  int split_pair_count() const { return split_pairs_; }
  bool has_split_pair(const std::string& id) const {
    return in_vertex_.count(id) > 0 && in_vertex_.at(id) != out_vertex_.at(id);
  }
  bool has_vertex(const std::string& id) const {
    return in_vertex_.count(id) > 0;
  }

  // Edmonds-Karp. Adjacency is built in sorted node/arc order, so the
  // augmenting paths and the final flow are deterministic.
  int max_flow() {
    int total = 0;
    while (augment()) ++total;
    flow_value_ = total;
    return total;
  }

  // Walks saturated forward edges from each used source. Unit capacities
  // make the successor unique, so this decomposes the flow into
  // source-to-sink paths of node ids.
  std::vector<std::vector<std::string>> decompose_paths() const {
    std::vector<std::vector<std::string>> paths;
    for (const Edge& first : adj_[source_]) {
      if (first.cap != 0) continue;  // this source is unused
      std::vector<std::string> path;
      int v = first.to;
      while (v != sink_) {
        if (!labels_[v].empty()) path.push_back(labels_[v]);
        int next = -1;
        for (const Edge& e : adj_[v]) {
          if (e.forward && e.cap == 0) {
            next = e.to;
            break;
          }
        }
        v = next;
      }
      paths.push_back(std::move(path));
    }
    return paths;
  }

  int flow_value() const { return flow_value_; }

 private:
  struct Edge {
    int to;
    int cap;
    int rev;
    bool forward;
  };

  int new_vertex(std::string label) {
    labels_.push_back(std::move(label));
    adj_.emplace_back();
    return static_cast<int>(labels_.size()) - 1;
  }

  void add_edge(int from, int to, int cap) {
    adj_[from].push_back({to, cap, static_cast<int>(adj_[to].size()), true});
    adj_[to].push_back(
        {from, 0, static_cast<int>(adj_[from].size()) - 1, false});
  }

  bool augment() {
    std::vector<int> prev_vertex(labels_.size(), -1);
    std::vector<int> prev_edge(labels_.size(), -1);
    std::queue<int> q;
    q.push(source_);
    prev_vertex[source_] = source_;
    while (!q.empty() && prev_vertex[sink_] == -1) {
      int v = q.front();
      q.pop();
      for (std::size_t i = 0; i < adj_[v].size(); ++i) {
        const Edge& e = adj_[v][i];
        if (e.cap <= 0 || prev_vertex[e.to] != -1) continue;
        prev_vertex[e.to] = v;
        prev_edge[e.to] = static_cast<int>(i);
        q.push(e.to);
      }
    }
    if (prev_vertex[sink_] == -1) return false;
    for (int v = sink_; v != source_; v = prev_vertex[v]) {
      Edge& e = adj_[prev_vertex[v]][prev_edge[v]];
      e.cap -= 1;
      adj_[e.to][e.rev].cap += 1;
    }
    return true;
  }

  std::vector<std::string> labels_;
  std::vector<std::vector<Edge>> adj_;
  std::map<std::string, int> in_vertex_, out_vertex_;
  int source_ = 0, sink_ = 0, flow_value_ = 0, split_pairs_ = 0;
};

inline FlowNetwork build_flow_network(
    const InfluenceDiagram& d, const std::set<std::string>& sources,
    const std::set<std::string>& sinks,
    const std::set<std::string>& excluded = {}) {
  return FlowNetwork(d, sources, sinks, excluded);
}

// Maximum set of node-disjoint decision-to-target paths.
inline std::vector<std::vector<std::string>> max_node_disjoint_paths(
    FlowNetwork net) {
  net.max_flow();
  return net.decompose_paths();
}

}  // namespace idgraph
