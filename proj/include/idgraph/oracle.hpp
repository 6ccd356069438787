#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "idgraph/model.hpp"

namespace idgraph {

class oracle_error : public diagram_error {
 public:
  using diagram_error::diagram_error;
};

// Dense row-major double matrix, just big enough for the rank tests.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

struct RankResult {
  int rank = 0;
  // A pivot candidate landed suspiciously close to the tolerance cut; the
  // caller should resample rather than trust the verdict.
  bool indeterminate = false;
};

// Numeric rank by Gaussian elimination with partial pivoting. Pivots below
// tol times the largest initial entry count as zero.
inline RankResult rank_with_tolerance(Matrix m, double tol) {
  RankResult res;
  double scale = 0.0;
  for (double v : m.data) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return res;
  const double threshold = tol * scale;

  int row = 0;
  for (int col = 0; col < m.cols && row < m.rows; ++col) {
    int pivot = row;
    for (int r = row + 1; r < m.rows; ++r)
      if (std::abs(m.at(r, col)) > std::abs(m.at(pivot, col))) pivot = r;
    double value = std::abs(m.at(pivot, col));
    if (value > threshold / 100.0 && value < threshold * 100.0)
      res.indeterminate = true;
    if (value <= threshold) continue;
    if (pivot != row)
      for (int c = 0; c < m.cols; ++c) std::swap(m.at(pivot, c), m.at(row, c));
    for (int r = row + 1; r < m.rows; ++r) {
      double factor = m.at(r, col) / m.at(row, col);
      if (factor == 0.0) continue;
      for (int c = col; c < m.cols; ++c) m.at(r, c) -= factor * m.at(row, c);
    }
    ++row;
  }
  res.rank = row;
  return res;
}

inline int rank(const Matrix& m, double tol = 1e-8) {
  return rank_with_tolerance(m, tol).rank;
}

// Random linear member of the diagram's structure class: one nonzero
// coefficient per arc, one exogenous noise variable per probabilistic node.
// Coefficient magnitudes stay in [0.1, 2] so the rank tolerance cleanly
// separates generic rank from true degeneracy.
struct LinearInstantiation {
  std::map<std::pair<std::string, std::string>, double> coefficients;
  std::map<std::string, int> noise_index;
  std::uint64_t seed = 0;

  double coefficient(const std::string& from, const std::string& to) const {
    return coefficients.at({from, to});
  }
};

namespace detail {

// Deterministic across platforms (no std::uniform_real_distribution).
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace detail

inline LinearInstantiation instantiate_linear(const InfluenceDiagram& d,
                                              std::uint64_t seed) {
  LinearInstantiation inst;
  inst.seed = seed;
  detail::SplitRng rng(seed);
  for (const Arc& a : d.arcs()) {
    double magnitude = 0.1 + rng.uniform01() * 1.9;
    double sign = (rng.next() & 1) ? 1.0 : -1.0;
    inst.coefficients[{a.from, a.to}] = sign * magnitude;
  }
  int noise = 0;
  for (const Node& n : d.nodes())
    if (n.kind == NodeKind::Probabilistic) inst.noise_index[n.id] = noise++;
  return inst;
}

namespace detail {

// Homogeneous constraint system over node variables and noise variables:
// one row per deterministic/value node (node minus weighted parents = 0) and
// one per probabilistic node (node minus weighted parents minus its noise
// variable = 0). Decisions are free variables with no equation.
inline Matrix constraint_matrix(const InfluenceDiagram& d,
                                const LinearInstantiation& inst,
                                std::map<std::string, int>& var_index,
                                int& n_vars) {
  int next = 0;
  for (const Node& n : d.nodes()) var_index[n.id] = next++;
  const int noise_base = next;
  n_vars = next + static_cast<int>(inst.noise_index.size());

  int n_equations = 0;
  for (const Node& n : d.nodes())
    if (n.kind != NodeKind::Decision) ++n_equations;

  Matrix m(n_equations, n_vars);
  int row = 0;
  for (const Node& n : d.nodes()) {
    if (n.kind == NodeKind::Decision) continue;
    m.at(row, var_index[n.id]) = 1.0;
    for (const std::string& p : d.functional_parents(n.id))
      m.at(row, var_index[p]) = -inst.coefficient(p, n.id);
    if (n.kind == NodeKind::Probabilistic)
      m.at(row, noise_base + inst.noise_index.at(n.id)) = -1.0;
    ++row;
  }
  return m;
}

}  // namespace detail

// True when fixing the observed variables pins the query variable: the
// query's unit row lies in the span of the constraint rows plus one unit row
// per observed variable.
inline bool numeric_observable(const InfluenceDiagram& d,
                               const LinearInstantiation& inst,
                               const std::set<std::string>& observed,
                               const std::string& query, double tol = 1e-8) {
  if (observed.count(query))
    throw input_error("query \"" + query + "\" is already observed");

  auto evaluate = [&](const LinearInstantiation& li, RankResult& base,
                      RankResult& extended) {
    std::map<std::string, int> var_index;
    int n_vars = 0;
    Matrix constraints = detail::constraint_matrix(d, li, var_index, n_vars);
    Matrix with_known(constraints.rows + static_cast<int>(observed.size()) + 1,
                      n_vars);
    for (int r = 0; r < constraints.rows; ++r)
      for (int c = 0; c < n_vars; ++c)
        with_known.at(r, c) = constraints.at(r, c);
    int row = constraints.rows;
    for (const std::string& id : observed) with_known.at(row++, var_index.at(id)) = 1.0;

    Matrix base_m = with_known;
    base_m.rows -= 1;  // the query row stays zero in the base system
    base = rank_with_tolerance(base_m, tol);
    with_known.at(row, var_index.at(query)) = 1.0;
    extended = rank_with_tolerance(with_known, tol);
  };

  RankResult base, extended;
  evaluate(inst, base, extended);
  if (base.indeterminate || extended.indeterminate) {
    LinearInstantiation retry =
        instantiate_linear(d, detail::SplitRng(inst.seed).next());
    evaluate(retry, base, extended);
    if (base.indeterminate || extended.indeterminate)
      throw oracle_error("rank test indeterminate for seeds " +
                         std::to_string(inst.seed) + " and " +
                         std::to_string(retry.seed));
  }
  return extended.rank == base.rank;
}

// Sensitivity of the targets with respect to the decision variables, by
// forward substitution in topological order. Noise terms, unobserved roots,
// and any node in `held_fixed` stay put.
inline bool numeric_controllable(const InfluenceDiagram& d,
                                 const LinearInstantiation& inst,
                                 const std::set<std::string>& decisions,
                                 const std::set<std::string>& targets,
                                 const std::set<std::string>& held_fixed = {},
                                 double tol = 1e-8) {
  for (const std::string& t : targets)
    if (decisions.count(t) && d.kind(t) != NodeKind::Decision)
      throw input_error("targets must be disjoint from decisions");
  if (targets.empty()) return true;
  if (decisions.empty()) return false;

  std::vector<std::string> decision_list(decisions.begin(), decisions.end());
  std::map<std::string, int> decision_col;
  for (std::size_t i = 0; i < decision_list.size(); ++i)
    decision_col[decision_list[i]] = static_cast<int>(i);

  auto evaluate = [&](const LinearInstantiation& li) {
    auto order = topological_order(d);
    if (!order) throw input_error("diagram has a cycle");
    std::map<std::string, std::vector<double>> sens;
    for (const std::string& id : *order) {
      std::vector<double> grad(decision_list.size(), 0.0);
      if (d.kind(id) == NodeKind::Decision) {
        auto it = decision_col.find(id);
        if (it != decision_col.end()) grad[it->second] = 1.0;
      } else {
        for (const std::string& p : d.functional_parents(id)) {
          double coeff = li.coefficient(p, id);
          const std::vector<double>& pg = sens.at(p);
          for (std::size_t k = 0; k < grad.size(); ++k)
            grad[k] += coeff * pg[k];
        }
      }
      if (held_fixed.count(id)) std::fill(grad.begin(), grad.end(), 0.0);
      sens[id] = std::move(grad);
    }
    Matrix m(static_cast<int>(targets.size()),
             static_cast<int>(decision_list.size()));
    int row = 0;
    for (const std::string& t : targets) {
      const std::vector<double>& grad = sens.at(t);
      for (std::size_t k = 0; k < grad.size(); ++k)
        m.at(row, static_cast<int>(k)) = grad[k];
      ++row;
    }
    return rank_with_tolerance(m, tol);
  };

  RankResult res = evaluate(inst);
  if (res.indeterminate) {
    LinearInstantiation retry =
        instantiate_linear(d, detail::SplitRng(inst.seed).next());
    res = evaluate(retry);
    if (res.indeterminate)
      throw oracle_error("sensitivity rank indeterminate for seeds " +
                         std::to_string(inst.seed) + " and " +
                         std::to_string(retry.seed));
  }
  return res.rank == static_cast<int>(targets.size());
}

}  // namespace idgraph
