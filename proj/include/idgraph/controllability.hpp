#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "idgraph/flow.hpp"
#include "idgraph/model.hpp"
#include "idgraph/observability.hpp"

namespace idgraph {

struct ControlQuery {
  std::vector<std::string> targets;
  // Decisions usable as controls; defaults to every decision node.
  std::optional<std::vector<std::string>> allowed_decisions;
  int retry_limit = 100;
  int recursion_depth = 3;
};

enum class Verdict { Controllable, NotControllable, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Controllable: return "controllable";
    case Verdict::NotControllable: return "not_controllable";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct PathCertificate;

// Justification for one off-path parent (a member of P - Y): either it is
// structurally observable given the evidence plus the certificate's own
// decisions, or it is controllable by decisions the certificate left free.
struct SideCondition {
  enum class By { Observable, ControllableBy };
  std::string node;
  By by = By::Observable;
  std::shared_ptr<PathCertificate> sub;  // set for ControllableBy
};

struct PathCertificate {
  std::vector<std::vector<std::string>> paths;
  std::vector<SideCondition> side_conditions;

  std::set<std::string> sources() const {
    std::set<std::string> out;
    for (const auto& p : paths)
      if (!p.empty()) out.insert(p.front());
    return out;
  }
  std::set<std::string> path_nodes() const {
    std::set<std::string> out;
    for (const auto& p : paths) out.insert(p.begin(), p.end());
    return out;
  }
};

struct ControllabilityReport {
  Verdict verdict = Verdict::Inconclusive;
  std::optional<PathCertificate> certificate;
  std::string reason;
  std::vector<std::string> nodes;  // offending/unresolved node ids
  int max_flow = -1;
  int required = -1;
  int attempts = 0;
  std::optional<std::string> advisory;
};

namespace detail {

// Off-path parents: parents of every non-decision path node, minus the path
// nodes themselves. Decisions are exogenous, so their (informational)
// parents are not part of P.
inline std::vector<std::string> off_path_parents(
    const InfluenceDiagram& d,
    const std::vector<std::vector<std::string>>& paths) {
  std::set<std::string> y;
  for (const auto& p : paths) y.insert(p.begin(), p.end());
  std::set<std::string> result;
  for (const std::string& v : y) {
    if (d.kind(v) == NodeKind::Decision) continue;
    for (const std::string& parent : d.functional_parents(v))
      if (!y.count(parent)) result.insert(parent);
  }
  return {result.begin(), result.end()};
}

inline std::string pathset_key(
    const std::vector<std::vector<std::string>>& paths) {
  std::vector<std::string> flat;
  for (const auto& p : paths) {
    std::string s;
    for (const auto& v : p) s += v + ">";
    flat.push_back(s);
  }
  std::sort(flat.begin(), flat.end());
  std::string key;
  for (const auto& s : flat) key += s + "|";
  return key;
}

}  // namespace detail

struct SideCheckResult {
  bool ok = false;
  std::vector<SideCondition> conditions;
  std::string failing_node;
};

inline ControllabilityReport check_controllability(const InfluenceDiagram& d,
                                                   const ControlQuery& q);

// Verifies Theorem-4's fourth condition for a concrete path set: every node
// in P - Y must be observable (given the evidence and the values of the
// decisions the paths consume) or controllable by decisions outside
// `used_decisions`. Decisions granted to a recursive sub-certificate are
// consumed for the conditions that follow.
inline SideCheckResult check_side_conditions(
    const InfluenceDiagram& d,
    const std::vector<std::vector<std::string>>& paths,
    const std::set<std::string>& allowed_decisions,
    const std::set<std::string>& used_decisions, int depth,
    int retry_limit = 100) {
  SideCheckResult result;

  ClosureOptions opts;
  opts.extra_observed = used_decisions;
  ObservabilityReport closure = observability_closure(d, opts);

  std::set<std::string> available;
  for (const std::string& id : allowed_decisions)
    if (!used_decisions.count(id)) available.insert(id);

  for (const std::string& p : detail::off_path_parents(d, paths)) {
    if (closure.is_known_or_observable(p)) {
      result.conditions.push_back({p, SideCondition::By::Observable, nullptr});
      continue;
    }
    if (d.kind(p) == NodeKind::Decision) {
      // A free decision controls itself; one already committed elsewhere
      // cannot be reused.
      if (available.count(p)) {
        auto sub = std::make_shared<PathCertificate>();
        sub->paths = {{p}};
        available.erase(p);
        result.conditions.push_back(
            {p, SideCondition::By::ControllableBy, sub});
        continue;
      }
    } else if (is_functional(d.kind(p)) && depth > 0 && !available.empty()) {
      ControlQuery sub;
      sub.targets = {p};
      sub.allowed_decisions =
          std::vector<std::string>(available.begin(), available.end());
      sub.recursion_depth = depth - 1;
      sub.retry_limit = retry_limit;
      ControllabilityReport sub_report = check_controllability(d, sub);
      if (sub_report.verdict == Verdict::Controllable) {
        auto sub_cert =
            std::make_shared<PathCertificate>(*sub_report.certificate);
        for (const std::string& s : sub_cert->sources()) available.erase(s);
        result.conditions.push_back(
            {p, SideCondition::By::ControllableBy, sub_cert});
        continue;
      }
    }
    result.failing_node = p;
    return result;
  }
  result.ok = true;
  return result;
}

// Distinct maximal node-disjoint path sets, in the order the engine retries
// them: the unconstrained max-flow solution first, then re-solves with each
// failure-implicated node removed, then with each used interior node
// removed. Sets that no longer reach the unconstrained flow value are
// skipped.
inline std::vector<std::vector<std::vector<std::string>>>
enumerate_alternative_path_sets(const InfluenceDiagram& d,
                                const std::set<std::string>& sources,
                                const std::set<std::string>& sinks,
                                const std::vector<std::string>& previous_failures,
                                int limit) {
  if (limit < 1) throw input_error("path set enumeration limit must be >= 1");
  std::vector<std::vector<std::vector<std::string>>> results;
  std::set<std::string> seen;

  FlowNetwork base(d, sources, sinks);
  int best = base.max_flow();
  if (best == 0) return results;
  auto base_paths = base.decompose_paths();
  seen.insert(detail::pathset_key(base_paths));
  results.push_back(base_paths);

  std::set<std::string> interiors;
  for (const auto& p : base_paths)
    for (std::size_t i = 1; i + 1 < p.size(); ++i) interiors.insert(p[i]);

  std::vector<std::string> exclusions(previous_failures.begin(),
                                      previous_failures.end());
  exclusions.insert(exclusions.end(), interiors.begin(), interiors.end());
  for (const std::string& excl : exclusions) {
    if (static_cast<int>(results.size()) >= limit) break;
    FlowNetwork net(d, sources, sinks, {excl});
    if (net.max_flow() != best) continue;
    auto paths = net.decompose_paths();
    if (seen.insert(detail::pathset_key(paths)).second)
      results.push_back(std::move(paths));
  }
  return results;
}

// Theorem-4 decision procedure:
//   1. probabilistic targets are rejected outright; decision targets are
//      controllable by themselves and are peeled off,
//   2. enough decisions must remain for the residual targets,
//   3. decisions upstream of observed evidence are predetermined and cannot
//      serve as controls,
//   4. max flow on the split network must route one node-disjoint path per
//      target,
//   5. every off-path parent needs a side-condition justification,
//   6. on failure, alternative path sets are tried within the retry budget;
//      exhausting it is Inconclusive, never NotControllable.
inline ControllabilityReport check_controllability(const InfluenceDiagram& d,
                                                   const ControlQuery& q) {
  ControllabilityReport report;
  if (d.meta().dynamic_unroll)
    report.advisory =
        "unrolled stationary dynamic system: verdicts for partial target "
        "sets rest on the path-based sufficient condition only";

  if (q.targets.empty()) throw input_error("empty target set");
  std::set<std::string> target_set;
  for (const std::string& t : q.targets) {
    d.node(t);
    if (!target_set.insert(t).second)
      throw input_error("target \"" + t + "\" listed more than once");
  }

  std::set<std::string> allowed;
  if (q.allowed_decisions) {
    for (const std::string& id : *q.allowed_decisions) {
      if (d.kind(id) != NodeKind::Decision)
        throw input_error("allowed decision \"" + id +
                          "\" is not a decision node");
      allowed.insert(id);
    }
  } else {
    for (const Node& n : d.nodes())
      if (n.kind == NodeKind::Decision) allowed.insert(n.id);
  }

  std::vector<std::string> probabilistic, decisions, residual;
  for (const std::string& t : target_set) {
    switch (d.kind(t)) {
      case NodeKind::Probabilistic: probabilistic.push_back(t); break;
      case NodeKind::Decision: decisions.push_back(t); break;
      default: residual.push_back(t);
    }
  }
  if (!probabilistic.empty()) {
    report.verdict = Verdict::NotControllable;
    report.reason = "probabilistic_target";
    report.nodes = probabilistic;
    return report;
  }

  // Decision targets are their own controls (trivial length-1 paths) and
  // are no longer available as sources for the rest.
  std::vector<std::vector<std::string>> trivial_paths;
  for (const std::string& t : decisions) {
    trivial_paths.push_back({t});
    allowed.erase(t);
  }

  if (static_cast<int>(allowed.size()) < static_cast<int>(residual.size())) {
    report.verdict = Verdict::NotControllable;
    report.reason = "insufficient_decisions";
    report.max_flow = static_cast<int>(allowed.size());
    report.required = static_cast<int>(residual.size());
    return report;
  }

  // Decisions that are ancestors of observed evidence are predetermined.
  std::set<std::string> observed = d.observed_ids();
  std::set<std::string> usable;
  for (const std::string& id : allowed) {
    std::set<std::string> reach = d.functional_descendants(id);
    bool predetermined = false;
    for (const std::string& v : reach)
      if (observed.count(v)) {
        predetermined = true;
        break;
      }
    if (!predetermined) usable.insert(id);
  }

  std::set<std::string> sinks(residual.begin(), residual.end());

  if (residual.empty()) {
    PathCertificate cert;
    cert.paths = trivial_paths;
    report.verdict = Verdict::Controllable;
    report.certificate = cert;
    report.attempts = 1;
    return report;
  }

  FlowNetwork base(d, usable, sinks);
  int flow = base.max_flow();
  report.max_flow = flow;
  report.required = static_cast<int>(residual.size());
  if (flow < static_cast<int>(residual.size())) {
    report.verdict = Verdict::NotControllable;
    report.reason = "insufficient_disjoint_paths";
    return report;
  }

  // Retry loop over exclusion sets, breadth-first, deterministic.
  std::deque<std::set<std::string>> queue;
  std::set<std::set<std::string>> seen_exclusions;
  std::set<std::string> seen_pathsets;
  std::set<std::string> unresolved;
  queue.push_back({});
  seen_exclusions.insert({});
  int budget = q.retry_limit;

  while (!queue.empty() && budget > 0) {
    std::set<std::string> exclusions = queue.front();
    queue.pop_front();
    --budget;

    FlowNetwork net(d, usable, sinks, exclusions);
    if (net.max_flow() < static_cast<int>(residual.size()))
      continue;  // this exclusion set cannot route every target
    std::vector<std::vector<std::string>> paths = net.decompose_paths();
    std::vector<std::vector<std::string>> all_paths = trivial_paths;
    all_paths.insert(all_paths.end(), paths.begin(), paths.end());
    if (!seen_pathsets.insert(detail::pathset_key(all_paths)).second) continue;
    ++report.attempts;

    std::set<std::string> used;
    for (const auto& p : all_paths) used.insert(p.front());
    SideCheckResult side = check_side_conditions(
        d, all_paths, allowed, used, q.recursion_depth, q.retry_limit);
    if (side.ok) {
      PathCertificate cert;
      cert.paths = all_paths;
      cert.side_conditions = side.conditions;
      report.verdict = Verdict::Controllable;
      report.certificate = cert;
      return report;
    }
    unresolved.insert(side.failing_node);

    // Next candidates, in priority order: interiors that pull the failing
    // parent into P, then the other used interiors, then a source swap.
    std::set<std::string> implicated, other;
    for (const auto& p : paths)
      for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        if (d.has_arc(side.failing_node, p[i]))
          implicated.insert(p[i]);
        else
          other.insert(p[i]);
      }
    for (const auto& p : paths) other.insert(p.front());
    std::vector<std::string> next(implicated.begin(), implicated.end());
    next.insert(next.end(), other.begin(), other.end());
    for (const std::string& n : next) {
      std::set<std::string> candidate = exclusions;
      candidate.insert(n);
      if (seen_exclusions.insert(candidate).second)
        queue.push_back(std::move(candidate));
    }
  }

  report.verdict = Verdict::Inconclusive;
  report.reason = "side_conditions_unresolved";
  report.nodes.assign(unresolved.begin(), unresolved.end());
  return report;
}

// Independent re-check of a certificate against the diagram: path shape,
// kinds, disjointness, source eligibility, and every side condition. Side
// conditions missing from the certificate are derived; extraneous ones fail.
inline bool verify_certificate(const InfluenceDiagram& d, const ControlQuery& q,
                               const PathCertificate& cert) {
  if (q.targets.empty()) return false;
  std::set<std::string> targets(q.targets.begin(), q.targets.end());
  if (targets.size() != q.targets.size()) return false;
  for (const std::string& t : targets)
    if (!d.has_node(t)) return false;

  std::set<std::string> allowed;
  if (q.allowed_decisions)
    allowed.insert(q.allowed_decisions->begin(), q.allowed_decisions->end());
  else
    for (const Node& n : d.nodes())
      if (n.kind == NodeKind::Decision) allowed.insert(n.id);

  if (cert.paths.size() != targets.size()) return false;

  std::set<std::string> observed = d.observed_ids();
  std::set<std::string> seen_nodes, seen_targets, seen_sources;
  for (const auto& path : cert.paths) {
    if (path.empty()) return false;
    for (const std::string& v : path) {
      if (!d.has_node(v)) return false;
      if (!seen_nodes.insert(v).second) return false;  // disjointness
    }
    const std::string& source = path.front();
    const std::string& target = path.back();
    if (d.kind(source) != NodeKind::Decision) return false;
    if (!allowed.count(source)) return false;
    if (!targets.count(target)) return false;
    if (!seen_targets.insert(target).second) return false;
    if (!seen_sources.insert(source).second) return false;
    if (path.size() == 1) continue;  // decision controlling itself

    // A predetermined decision cannot drive a real path.
    for (const std::string& v : d.functional_descendants(source))
      if (observed.count(v)) return false;

    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      if (!d.has_arc(path[i], path[i + 1])) return false;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      if (d.kind(path[i]) != NodeKind::Deterministic) return false;
      if (d.observed(path[i])) return false;
    }
    if (!is_functional(d.kind(target))) return false;
  }
  if (seen_targets != targets) return false;

  // Side conditions must cover exactly P - Y.
  std::vector<std::string> p_m_y = detail::off_path_parents(d, cert.paths);
  std::set<std::string> required(p_m_y.begin(), p_m_y.end());
  std::map<std::string, const SideCondition*> provided;
  for (const SideCondition& sc : cert.side_conditions) {
    if (!required.count(sc.node)) return false;
    if (!provided.emplace(sc.node, &sc).second) return false;
  }

  ClosureOptions opts;
  opts.extra_observed = cert.sources();
  ObservabilityReport closure = observability_closure(d, opts);

  std::set<std::string> available;
  for (const std::string& id : allowed)
    if (!cert.sources().count(id)) available.insert(id);

  for (const std::string& node : p_m_y) {
    auto it = provided.find(node);
    if (it != provided.end() &&
        it->second->by == SideCondition::By::ControllableBy) {
      const SideCondition& sc = *it->second;
      if (!sc.sub) return false;
      ControlQuery sub;
      sub.targets = {node};
      sub.allowed_decisions =
          std::vector<std::string>(available.begin(), available.end());
      if (!verify_certificate(d, sub, *sc.sub)) return false;
      for (const std::string& s : sc.sub->sources()) available.erase(s);
      continue;
    }
    if (closure.is_known_or_observable(node)) continue;
    if (it != provided.end()) return false;  // claimed Observable, is not
    // Not annotated and not observable: derive a controllability
    // justification with the free decisions.
    if (d.kind(node) == NodeKind::Decision) {
      if (!available.count(node)) return false;
      available.erase(node);
      continue;
    }
    ControlQuery sub;
    sub.targets = {node};
    sub.allowed_decisions =
        std::vector<std::string>(available.begin(), available.end());
    ControllabilityReport sub_report = check_controllability(d, sub);
    if (sub_report.verdict != Verdict::Controllable) return false;
    for (const std::string& s : sub_report.certificate->sources())
      available.erase(s);
  }
  return true;
}

inline nlohmann::ordered_json certificate_to_json(const PathCertificate& cert) {
  nlohmann::ordered_json doc;
  doc["paths"] = cert.paths;
  doc["side_conditions"] = nlohmann::ordered_json::array();
  for (const SideCondition& sc : cert.side_conditions) {
    nlohmann::ordered_json entry;
    entry["node"] = sc.node;
    entry["by"] = sc.by == SideCondition::By::Observable ? "observable"
                                                         : "controllable";
    if (sc.sub) entry["certificate"] = certificate_to_json(*sc.sub);
    doc["side_conditions"].push_back(std::move(entry));
  }
  return doc;
}

inline nlohmann::ordered_json report_to_json(const ControllabilityReport& r) {
  nlohmann::ordered_json doc;
  doc["verdict"] = to_string(r.verdict);
  switch (r.verdict) {
    case Verdict::Controllable: {
      nlohmann::ordered_json cert = certificate_to_json(*r.certificate);
      doc["paths"] = cert["paths"];
      doc["side_conditions"] = cert["side_conditions"];
      break;
    }
    case Verdict::NotControllable:
      doc["reason"] = r.reason;
      if (!r.nodes.empty()) doc["nodes"] = r.nodes;
      if (r.reason == "insufficient_disjoint_paths" ||
          r.reason == "insufficient_decisions") {
        doc["max_flow"] = r.max_flow;
        doc["required"] = r.required;
      }
      break;
    case Verdict::Inconclusive:
      doc["reason"] = r.reason;
      if (!r.nodes.empty()) doc["unresolved"] = r.nodes;
      break;
  }
  doc["attempts"] = r.attempts;
  if (r.advisory) doc["advisory"] = *r.advisory;
  return doc;
}

}  // namespace idgraph
