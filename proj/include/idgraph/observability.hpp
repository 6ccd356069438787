#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "idgraph/bipartite.hpp"
#include "idgraph/model.hpp"

namespace idgraph {

enum class Rule { AllParentsKnown, KByKMatching };

inline const char* to_string(Rule rule) {
  return rule == Rule::AllParentsKnown ? "AllParentsKnown" : "KByKMatching";
}

// One deduction step. For AllParentsKnown, children holds the single
// deterministic node that became known. For KByKMatching, newly_known are
// the k parents deduced from the k known children via `matching`
// (parent -> child pairs over real arcs).
struct RuleFiring {
  Rule rule = Rule::AllParentsKnown;
  std::vector<std::string> children;
  std::vector<std::string> newly_known;
  std::vector<std::pair<std::string, std::string>> matching;
};

struct RedundancyWarning {
  std::vector<std::string> children;
  std::vector<std::string> parents;
};

// Mutable bookkeeping for one closure run. Arcs consumed by a firing are
// blocked: they contribute nothing to later matching passes.
struct KnowledgeState {
  std::set<std::string> known;
  std::set<Arc> blocked_arcs;
  std::vector<RuleFiring> trace;

  bool is_known(const std::string& id) const { return known.count(id) > 0; }
  bool is_blocked(const std::string& from, const std::string& to) const {
    return blocked_arcs.count(Arc{from, to}) > 0;
  }
};

struct ObservabilityReport {
  std::vector<std::string> known_initial;
  std::vector<std::string> observable;
  std::vector<std::string> unknown;
  std::vector<RuleFiring> trace;
  std::vector<RedundancyWarning> redundancy_warnings;

  bool is_known_or_observable(const std::string& id) const {
    return std::binary_search(known_initial.begin(), known_initial.end(), id) ||
           std::binary_search(observable.begin(), observable.end(), id);
  }
};

struct FamilyClassPartition {
  std::vector<std::vector<std::string>> classes;  // each sorted, disjoint
};

struct ClosureOptions {
  // Extra evidence on top of the diagram's observed flags.
  std::set<std::string> extra_observed;
  // Treat decision nodes as known (post-decision analysis).
  bool decisions_known = false;
  // Test hook: permutes scan orders; the resulting observable set must not
  // change.
  std::optional<unsigned> shuffle_seed;
  // Test hook for the blocked-arc sensitivity question: when false, firings
  // do not block arcs. The observable set must not change either way.
  bool respect_blocking = true;
};

namespace detail {

inline std::vector<std::string> maybe_shuffle(
    std::vector<std::string> items, const std::optional<unsigned>& seed,
    unsigned salt) {
  if (seed) {
    std::mt19937 rng(*seed + salt);
    std::shuffle(items.begin(), items.end(), rng);
  }
  return items;
}

inline std::vector<std::string> unknown_functional_parents(
    const InfluenceDiagram& d, const KnowledgeState& state,
    const std::string& child, bool skip_blocked) {
  std::vector<std::string> out;
  for (const std::string& p : d.functional_parents(child)) {
    if (state.is_known(p)) continue;
    if (skip_blocked && state.is_blocked(p, child)) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

// Theorem-1 pass: every unknown deterministic (or value) node whose parents
// are all known becomes known. Probabilistic nodes never qualify; their
// noise term is not determined by the parents. Returns the nodes added.
inline std::vector<std::string> rule_all_parents_known(
    const InfluenceDiagram& d, KnowledgeState& state,
    const std::optional<unsigned>& shuffle_seed = std::nullopt) {
  std::vector<std::string> added;
  // Newly added nodes may unblock others within the same pass.
  bool progress = true;
  unsigned salt = 0;
  while (progress) {
    progress = false;
    for (const std::string& id :
         detail::maybe_shuffle(d.node_ids(), shuffle_seed, salt++)) {
      if (state.is_known(id) || !is_functional(d.kind(id))) continue;
      const auto& parents = d.functional_parents(id);
      bool all_known = std::all_of(
          parents.begin(), parents.end(),
          [&](const std::string& p) { return state.is_known(p); });
      if (!all_known) continue;
      state.known.insert(id);
      for (const std::string& p : parents)
        state.blocked_arcs.insert(Arc{p, id});
      state.trace.push_back({Rule::AllParentsKnown, {id}, {id}, {}});
      added.push_back(id);
      progress = true;
    }
  }
  std::sort(added.begin(), added.end());
  return added;
}

// Finest partition of the given known deterministic nodes closing the
// siblings-through-an-unknown-parent relation transitively. Children with no
// unknown parents form singleton classes.
inline FamilyClassPartition partition_family_classes(
    const InfluenceDiagram& d, const std::vector<std::string>& known_det,
    const KnowledgeState& state) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < known_det.size(); ++i) index[known_det[i]] = i;

  // Union-find over the children.
  std::vector<std::size_t> parent_of(known_det.size());
  for (std::size_t i = 0; i < parent_of.size(); ++i) parent_of[i] = i;
  auto find = [&](std::size_t x) {
    while (parent_of[x] != x) x = parent_of[x] = parent_of[parent_of[x]];
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_of[std::max(a, b)] = std::min(a, b);
  };

  std::map<std::string, std::size_t> first_child_of_parent;
  for (std::size_t i = 0; i < known_det.size(); ++i) {
    for (const std::string& p : detail::unknown_functional_parents(
             d, state, known_det[i], /*skip_blocked=*/true)) {
      auto [it, inserted] = first_child_of_parent.emplace(p, i);
      if (!inserted) unite(it->second, i);
    }
  }

  std::map<std::size_t, std::vector<std::string>> grouped;
  for (std::size_t i = 0; i < known_det.size(); ++i)
    grouped[find(i)].push_back(known_det[i]);
  FamilyClassPartition partition;
  for (auto& [root, members] : grouped) {
    std::sort(members.begin(), members.end());
    partition.classes.push_back(std::move(members));
  }
  return partition;
}

struct MatchingOutcome {
  std::vector<std::string> newly_known;
  std::vector<RuleFiring> firings;
  std::vector<RedundancyWarning> warnings;
};

// Theorem-2 pass over one family class: a set U of unknown parents becomes
// known exactly when some subset S of the class has unknownParents(S) = U,
// |U| = |S|, and a perfect matching U -> S over unblocked arcs. The blocks
// of the bipartite analysis enumerate all such U; overdetermined coverage is
// reported as a redundancy warning without blocking the deduction.
inline MatchingOutcome rule_matching(const InfluenceDiagram& d,
                                     KnowledgeState& state,
                                     const std::vector<std::string>& family) {
  MatchingOutcome out;

  std::vector<std::string> children;
  std::set<std::string> parent_set;
  for (const std::string& c : family) {
    auto unknown = detail::unknown_functional_parents(
        d, state, c, /*skip_blocked=*/true);
    if (unknown.empty()) continue;
    children.push_back(c);
    parent_set.insert(unknown.begin(), unknown.end());
  }
  if (children.empty()) return out;
  std::sort(children.begin(), children.end());
  std::vector<std::string> parents(parent_set.begin(), parent_set.end());

  std::map<std::string, int> parent_index, child_index;
  for (std::size_t i = 0; i < parents.size(); ++i)
    parent_index[parents[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < children.size(); ++i)
    child_index[children[i]] = static_cast<int>(i);

  std::vector<std::vector<int>> adj(parents.size());
  for (const std::string& c : children)
    for (const std::string& p : detail::unknown_functional_parents(
             d, state, c, /*skip_blocked=*/true))
      adj[parent_index[p]].push_back(child_index[c]);
  for (auto& list : adj) std::sort(list.begin(), list.end());

  BipartiteAnalysis analysis = analyze_bipartite(
      static_cast<int>(parents.size()), static_cast<int>(children.size()), adj);

  for (const auto& [warn_children, warn_parents] : analysis.overdetermined) {
    RedundancyWarning w;
    for (int c : warn_children) w.children.push_back(children[c]);
    for (int p : warn_parents) w.parents.push_back(parents[p]);
    out.warnings.push_back(std::move(w));
  }

  for (const SolvableBlock& block : analysis.blocks) {
    RuleFiring firing;
    firing.rule = Rule::KByKMatching;
    for (std::size_t i = 0; i < block.parents.size(); ++i) {
      const std::string& p = parents[block.parents[i]];
      const std::string& c = children[block.children[i]];
      firing.newly_known.push_back(p);
      firing.children.push_back(c);
      firing.matching.push_back({p, c});
    }
    std::sort(firing.newly_known.begin(), firing.newly_known.end());
    std::sort(firing.children.begin(), firing.children.end());
    std::sort(firing.matching.begin(), firing.matching.end());
    for (const std::string& p : firing.newly_known) state.known.insert(p);
    // Consume every arc between the block's parents and children.
    for (const std::string& p : firing.newly_known)
      for (const std::string& c : firing.children)
        if (d.has_arc(p, c)) state.blocked_arcs.insert(Arc{p, c});
    out.newly_known.insert(out.newly_known.end(), firing.newly_known.begin(),
                           firing.newly_known.end());
    state.trace.push_back(firing);
    out.firings.push_back(std::move(firing));
  }
  std::sort(out.newly_known.begin(), out.newly_known.end());
  return out;
}

// Least fixed point of the Theorem-1 and Theorem-2 rules. The chain rule
// (Corollary 2) and the all-but-one rule (Corollary 1) emerge from
// re-iteration with k = 1 matchings.
inline ObservabilityReport observability_closure(
    const InfluenceDiagram& d, const ClosureOptions& options = {}) {
  KnowledgeState state;
  for (const Node& n : d.nodes()) {
    if (n.observed) state.known.insert(n.id);
    if (options.decisions_known && n.kind == NodeKind::Decision)
      state.known.insert(n.id);
  }
  for (const std::string& id : options.extra_observed) {
    d.node(id);  // throws input_error on unknown ids
    state.known.insert(id);
  }

  ObservabilityReport report;
  report.known_initial.assign(state.known.begin(), state.known.end());

  std::vector<RedundancyWarning> warnings;
  unsigned salt = 1000;
  while (true) {
    std::size_t before = state.known.size();

    rule_all_parents_known(d, state, options.shuffle_seed);
    if (!options.respect_blocking) state.blocked_arcs.clear();

    std::vector<std::string> known_det;
    for (const Node& n : d.nodes())
      if (is_functional(n.kind) && state.is_known(n.id))
        known_det.push_back(n.id);
    FamilyClassPartition partition =
        partition_family_classes(d, known_det, state);
    std::vector<std::vector<std::string>> classes = partition.classes;
    if (options.shuffle_seed) {
      std::mt19937 rng(*options.shuffle_seed + salt++);
      std::shuffle(classes.begin(), classes.end(), rng);
    }
    for (const auto& family : classes) {
      MatchingOutcome outcome = rule_matching(d, state, family);
      warnings.insert(warnings.end(), outcome.warnings.begin(),
                      outcome.warnings.end());
      if (!options.respect_blocking) state.blocked_arcs.clear();
    }

    if (state.known.size() == before) break;
  }

  for (const Node& n : d.nodes()) {
    if (std::binary_search(report.known_initial.begin(),
                           report.known_initial.end(), n.id))
      continue;
    if (state.is_known(n.id))
      report.observable.push_back(n.id);
    else
      report.unknown.push_back(n.id);
  }
  report.trace = std::move(state.trace);
  report.redundancy_warnings = std::move(warnings);
  return report;
}

// Corollary-2 convenience predicate. `chain` must be a directed path of
// deterministic nodes in which every node after the first has no unknown
// parent besides its predecessor; then knowing any one member makes the
// whole chain observable.
inline bool is_chain_observable(const InfluenceDiagram& d,
                                const std::vector<std::string>& chain) {
  if (chain.empty()) throw std::invalid_argument("empty chain");
  std::set<std::string> members(chain.begin(), chain.end());
  if (members.size() != chain.size())
    throw std::invalid_argument("chain repeats a node");
  for (const std::string& id : chain)
    if (!is_functional(d.kind(id)))
      throw std::invalid_argument("chain node \"" + id +
                                  "\" is not deterministic");
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (!d.has_arc(chain[i - 1], chain[i]))
      throw std::invalid_argument("missing arc " + chain[i - 1] + " -> " +
                                  chain[i]);
    for (const std::string& p : d.functional_parents(chain[i]))
      if (p != chain[i - 1] && !d.observed(p))
        throw std::invalid_argument("chain node \"" + chain[i] +
                                    "\" has another unknown parent \"" + p +
                                    "\"");
  }
  return std::any_of(chain.begin(), chain.end(),
                     [&](const std::string& id) { return d.observed(id); });
}

inline nlohmann::ordered_json firing_to_json(const RuleFiring& firing) {
  nlohmann::ordered_json entry;
  entry["rule"] = to_string(firing.rule);
  entry["children"] = firing.children;
  entry["newly_known"] = firing.newly_known;
  if (firing.rule == Rule::KByKMatching) {
    auto matching = nlohmann::ordered_json::array();
    for (const auto& [p, c] : firing.matching)
      matching.push_back({p, c});
    entry["matching"] = matching;
  }
  return entry;
}

inline nlohmann::ordered_json report_to_json(const ObservabilityReport& r) {
  nlohmann::ordered_json doc;
  doc["known_initial"] = r.known_initial;
  doc["observable"] = r.observable;
  doc["unknown"] = r.unknown;
  doc["trace"] = nlohmann::ordered_json::array();
  for (const RuleFiring& firing : r.trace)
    doc["trace"].push_back(firing_to_json(firing));
  doc["redundancy_warnings"] = nlohmann::ordered_json::array();
  for (const RedundancyWarning& w : r.redundancy_warnings)
    doc["redundancy_warnings"].push_back(
        {{"children", w.children}, {"parents", w.parents}});
  return doc;
}

}  // namespace idgraph
