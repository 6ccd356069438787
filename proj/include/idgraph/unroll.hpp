#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "idgraph/model.hpp"

namespace idgraph {

// Zero/nonzero pattern of a system matrix.
struct PatternMatrix {
  int rows = 0;
  int cols = 0;
  std::set<std::pair<int, int>> nonzeros;

  void check_bounds(const std::string& name) const {
    for (const auto& [r, c] : nonzeros)
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw semantic_error(name + " entry (" + std::to_string(r) + "," +
                             std::to_string(c) + ") is out of bounds");
  }
};

// x(t+1) = A x(t) + B u(t), optionally y(t) = C x(t), unrolled for
// t = 0..horizon. Only the patterns matter; coefficients live in the
// numeric oracle.
struct UnrollSpec {
  PatternMatrix a;                  // n x n
  PatternMatrix b;                  // n x m
  std::optional<PatternMatrix> c;   // p x n
  int horizon = 1;
  bool initial_observed = false;
};

namespace detail {
inline std::string state_id(int i, int t) {
  return "X" + std::to_string(i) + "_" + std::to_string(t);
}
inline std::string input_id(int j, int t) {
  return "U" + std::to_string(j) + "_" + std::to_string(t);
}
inline std::string output_id(int k, int t) {
  return "Y" + std::to_string(k) + "_" + std::to_string(t);
}
}  // namespace detail

// Stage-by-stage expansion into an influence diagram: initial states are
// exogenous (probabilistic, observed on request), later states are
// deterministic functions of the previous stage, inputs are decisions, and
// outputs read the same-stage states. Acyclic by construction.
inline InfluenceDiagram unroll(const UnrollSpec& spec) {
  const int n = spec.a.rows;
  const int m = spec.b.cols;
  if (spec.a.cols != n)
    throw semantic_error("A must be square");
  if (spec.b.rows != n)
    throw semantic_error("B must have as many rows as A");
  if (spec.c && spec.c->cols != n)
    throw semantic_error("C must have as many columns as A");
  if (spec.horizon < 1) throw semantic_error("horizon must be >= 1");
  spec.a.check_bounds("A");
  spec.b.check_bounds("B");
  if (spec.c) spec.c->check_bounds("C");

  std::vector<Node> nodes;
  std::vector<Arc> arcs;
  const int T = spec.horizon;
  for (int t = 0; t <= T; ++t)
    for (int i = 0; i < n; ++i) {
      Node node;
      node.id = detail::state_id(i, t);
      node.kind = t == 0 ? NodeKind::Probabilistic : NodeKind::Deterministic;
      node.observed = t == 0 && spec.initial_observed;
      nodes.push_back(node);
    }
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < m; ++j)
      nodes.push_back({detail::input_id(j, t), NodeKind::Decision, false});
  if (spec.c)
    for (int t = 1; t <= T; ++t)
      for (int k = 0; k < spec.c->rows; ++k)
        nodes.push_back(
            {detail::output_id(k, t), NodeKind::Deterministic, false});

  for (int t = 0; t < T; ++t) {
    for (const auto& [row, col] : spec.a.nonzeros)
      arcs.push_back({detail::state_id(col, t), detail::state_id(row, t + 1)});
    for (const auto& [row, col] : spec.b.nonzeros)
      arcs.push_back({detail::input_id(col, t), detail::state_id(row, t + 1)});
  }
  if (spec.c)
    for (int t = 1; t <= T; ++t)
      for (const auto& [row, col] : spec.c->nonzeros)
        arcs.push_back({detail::state_id(col, t), detail::output_id(row, t)});

  DiagramMeta meta;
  meta.dynamic_unroll = true;
  return InfluenceDiagram(std::move(nodes), std::move(arcs), meta);
}

// Spec file format, 0-based (row, col) nonzero lists:
//   {"n": 3, "m": 1, "A": [[1,0],[1,1],[1,2],[2,0]], "B": [[0,0]],
//    "T": 3, "initial_observed": true}
// Optional "C" (with optional "p" to pin the output count) adds outputs.
inline UnrollSpec parse_unroll_spec(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("syntax error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("n") || !doc.contains("m") ||
      !doc.contains("A") || !doc.contains("B") || !doc.contains("T"))
    throw parse_error("unroll spec needs \"n\", \"m\", \"A\", \"B\", \"T\"");

  auto read_pairs = [](const nlohmann::json& list, const std::string& name) {
    std::set<std::pair<int, int>> out;
    if (!list.is_array())
      throw parse_error("\"" + name + "\" must be an array of [row, col]");
    for (const auto& entry : list) {
      if (!entry.is_array() || entry.size() != 2)
        throw parse_error("\"" + name + "\" must be an array of [row, col]");
      out.insert({entry[0].get<int>(), entry[1].get<int>()});
    }
    return out;
  };

  UnrollSpec spec;
  int n = doc["n"].get<int>();
  int m = doc["m"].get<int>();
  spec.a = {n, n, read_pairs(doc["A"], "A")};
  spec.b = {n, m, read_pairs(doc["B"], "B")};
  spec.horizon = doc["T"].get<int>();
  if (doc.contains("initial_observed"))
    spec.initial_observed = doc["initial_observed"].get<bool>();
  if (doc.contains("C")) {
    auto pairs = read_pairs(doc["C"], "C");
    int p = 0;
    for (const auto& [r, c] : pairs) p = std::max(p, r + 1);
    if (doc.contains("p")) p = doc["p"].get<int>();
    spec.c = PatternMatrix{p, n, std::move(pairs)};
  }
  return spec;
}

}  // namespace idgraph
