#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idgraph/controllability.hpp"
#include "idgraph/dot.hpp"
#include "idgraph/json_io.hpp"
#include "idgraph/model.hpp"
#include "idgraph/observability.hpp"
#include "idgraph/oracle.hpp"
#include "idgraph/unroll.hpp"

namespace {

// 0 = property holds / success, 1 = property does not hold,
// 2 = inconclusive, 3 = invalid input, 4 = internal error.
enum ExitStatus {
  kHolds = 0,
  kDoesNotHold = 1,
  kInconclusive = 2,
  kInvalidInput = 3,
  kInternalError = 4,
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw idgraph::input_error("cannot read \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_output(const std::optional<std::string>& path,
                  const std::string& text) {
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary);
  if (!out) throw idgraph::input_error("cannot write \"" + path.value() + "\"");
  out << text;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

idgraph::InfluenceDiagram load_diagram(const std::string& path) {
  idgraph::InfluenceDiagram d = idgraph::parse_diagram(read_file(path));
  idgraph::ValidationReport report = idgraph::validate(d);
  if (!report.ok) {
    std::ostringstream msg;
    msg << "invalid diagram \"" << path << "\":";
    for (const auto& v : report.violations) msg << "\n  [" << v.code << "] " << v.message;
    throw idgraph::input_error(msg.str());
  }
  return d;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("IDGRAPH_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 12345;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += " ";
    out += s;
  }
  return out;
}

int run_validate(const std::string& model, bool as_json) {
  idgraph::InfluenceDiagram d = idgraph::parse_diagram(read_file(model));
  idgraph::ValidationReport report = idgraph::validate(d);
  if (as_json) {
    nlohmann::ordered_json doc;
    doc["ok"] = report.ok;
    doc["violations"] = nlohmann::ordered_json::array();
    for (const auto& v : report.violations)
      doc["violations"].push_back(
          {{"code", v.code}, {"message", v.message}, {"ids", v.ids}});
    std::cout << doc.dump(2) << "\n";
  } else if (report.ok) {
    std::cout << "ok: " << d.nodes().size() << " nodes, " << d.arcs().size()
              << " arcs\n";
  } else {
    for (const auto& v : report.violations)
      std::cout << "[" << v.code << "] " << v.message << "\n";
  }
  return report.ok ? kHolds : kInvalidInput;
}

int run_observe(const std::string& model, const std::string& observed_csv,
                const std::string& query, bool decisions_known, bool as_json) {
  idgraph::InfluenceDiagram d = load_diagram(model);
  idgraph::ClosureOptions opts;
  for (const std::string& id : split_commas(observed_csv))
    opts.extra_observed.insert(id);
  opts.decisions_known = decisions_known;
  idgraph::ObservabilityReport report = idgraph::observability_closure(d, opts);

  if (as_json) {
    std::cout << idgraph::report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << "known (" << report.known_initial.size()
              << "): " << join(report.known_initial) << "\n";
    std::cout << "observable (" << report.observable.size()
              << "): " << join(report.observable) << "\n";
    std::cout << "unknown (" << report.unknown.size()
              << "): " << join(report.unknown) << "\n";
    if (!report.trace.empty()) std::cout << "trace:\n";
    for (const auto& firing : report.trace) {
      std::cout << "  " << join(firing.newly_known) << " <- "
                << idgraph::to_string(firing.rule) << " via "
                << join(firing.children);
      if (!firing.matching.empty()) {
        std::cout << " [";
        for (std::size_t i = 0; i < firing.matching.size(); ++i) {
          if (i) std::cout << ", ";
          std::cout << firing.matching[i].first << "->"
                    << firing.matching[i].second;
        }
        std::cout << "]";
      }
      std::cout << "\n";
    }
    for (const auto& w : report.redundancy_warnings)
      std::cout << "redundancy: children {" << join(w.children)
                << "} overdetermine parents {" << join(w.parents) << "}\n";
  }

  if (!query.empty()) {
    d.node(query);  // unknown id -> invalid input
    bool known = report.is_known_or_observable(query);
    if (!as_json)
      std::cout << "query " << query << ": "
                << (known ? "observable" : "not observable") << "\n";
    return known ? kHolds : kDoesNotHold;
  }
  return kHolds;
}

int run_control(const std::string& model, const std::string& targets_csv,
                const std::string& decisions_csv, int retry_limit,
                bool as_json) {
  idgraph::InfluenceDiagram d = load_diagram(model);
  idgraph::ControlQuery q;
  q.targets = split_commas(targets_csv);
  if (!decisions_csv.empty()) q.allowed_decisions = split_commas(decisions_csv);
  q.retry_limit = retry_limit;
  idgraph::ControllabilityReport report = idgraph::check_controllability(d, q);

  if (as_json) {
    std::cout << idgraph::report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << "verdict: " << idgraph::to_string(report.verdict) << "\n";
    if (report.certificate) {
      std::cout << "paths:\n";
      for (const auto& path : report.certificate->paths) {
        std::cout << "  ";
        for (std::size_t i = 0; i < path.size(); ++i)
          std::cout << (i ? " -> " : "") << path[i];
        std::cout << "\n";
      }
      if (!report.certificate->side_conditions.empty())
        std::cout << "side conditions:\n";
      for (const auto& sc : report.certificate->side_conditions)
        std::cout << "  " << sc.node << ": "
                  << (sc.by == idgraph::SideCondition::By::Observable
                          ? "observable"
                          : "controllable")
                  << "\n";
    } else {
      std::cout << "reason: " << report.reason << "\n";
      if (!report.nodes.empty()) std::cout << "nodes: " << join(report.nodes) << "\n";
      if (report.reason == "insufficient_disjoint_paths")
        std::cout << "max flow " << report.max_flow << " < required "
                  << report.required << "\n";
    }
    std::cout << "attempts: " << report.attempts << "\n";
    if (report.advisory) std::cout << "advisory: " << *report.advisory << "\n";
  }

  switch (report.verdict) {
    case idgraph::Verdict::Controllable: return kHolds;
    case idgraph::Verdict::NotControllable: return kDoesNotHold;
    case idgraph::Verdict::Inconclusive: return kInconclusive;
  }
  return kInternalError;
}

int run_unroll(const std::string& spec_path,
               const std::optional<std::string>& out) {
  idgraph::UnrollSpec spec = idgraph::parse_unroll_spec(read_file(spec_path));
  idgraph::InfluenceDiagram d = idgraph::unroll(spec);
  write_output(out, idgraph::serialize_diagram(d));
  return kHolds;
}

idgraph::PathCertificate certificate_from_json(const nlohmann::json& doc) {
  idgraph::PathCertificate cert;
  if (!doc.contains("paths"))
    throw idgraph::parse_error("certificate needs a \"paths\" array");
  for (const auto& path : doc["paths"])
    cert.paths.push_back(path.get<std::vector<std::string>>());
  if (doc.contains("side_conditions")) {
    for (const auto& entry : doc["side_conditions"]) {
      idgraph::SideCondition sc;
      sc.node = entry.at("node").get<std::string>();
      std::string by = entry.at("by").get<std::string>();
      sc.by = by == "observable" ? idgraph::SideCondition::By::Observable
                                 : idgraph::SideCondition::By::ControllableBy;
      if (entry.contains("certificate"))
        sc.sub = std::make_shared<idgraph::PathCertificate>(
            certificate_from_json(entry["certificate"]));
      cert.side_conditions.push_back(std::move(sc));
    }
  }
  return cert;
}

int run_verify(const std::string& model, const std::string& cert_path,
               const std::string& targets_csv,
               const std::string& decisions_csv) {
  idgraph::InfluenceDiagram d = load_diagram(model);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(cert_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw idgraph::parse_error(std::string("certificate: ") + e.what());
  }
  idgraph::PathCertificate cert = certificate_from_json(doc);
  idgraph::ControlQuery q;
  q.targets = split_commas(targets_csv);
  if (!decisions_csv.empty()) q.allowed_decisions = split_commas(decisions_csv);
  bool ok = idgraph::verify_certificate(d, q, cert);
  std::cout << (ok ? "certificate verifies\n" : "certificate does not verify\n");
  return ok ? kHolds : kDoesNotHold;
}

int run_cross_check(const std::string& model, int n_seeds, std::uint64_t seed,
                    bool as_json) {
  idgraph::InfluenceDiagram d = load_diagram(model);
  idgraph::ObservabilityReport structural = idgraph::observability_closure(d);
  std::set<std::string> observed(structural.known_initial.begin(),
                                 structural.known_initial.end());

  std::vector<std::string> sound_violations, unstable, numeric_determined;
  int structurally_observable = 0, agreeing = 0;
  for (const idgraph::Node& n : d.nodes()) {
    if (observed.count(n.id)) continue;
    bool structural_yes = structural.is_known_or_observable(n.id);
    int yes = 0;
    for (int s = 0; s < n_seeds; ++s) {
      idgraph::LinearInstantiation inst =
          idgraph::instantiate_linear(d, seed + static_cast<std::uint64_t>(s));
      if (idgraph::numeric_observable(d, inst, observed, n.id)) ++yes;
    }
    bool numeric_all = yes == n_seeds;
    if (yes != 0 && !numeric_all) unstable.push_back(n.id);
    if (numeric_all) numeric_determined.push_back(n.id);
    if (structural_yes) {
      ++structurally_observable;
      if (numeric_all)
        ++agreeing;
      else
        sound_violations.push_back(n.id);
    }
  }

  double completeness =
      numeric_determined.empty()
          ? 1.0
          : static_cast<double>(agreeing) /
                static_cast<double>(numeric_determined.size());

  if (as_json) {
    nlohmann::ordered_json doc;
    doc["seeds"] = n_seeds;
    doc["base_seed"] = seed;
    doc["structurally_observable"] = structurally_observable;
    doc["numerically_determined"] = numeric_determined;
    doc["soundness_violations"] = sound_violations;
    doc["unstable"] = unstable;
    doc["completeness_rate"] = completeness;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "seeds: " << n_seeds << " starting at " << seed << "\n";
    std::cout << "structurally observable: " << structurally_observable << "\n";
    std::cout << "numerically determined: " << numeric_determined.size()
              << " (" << join(numeric_determined) << ")\n";
    std::cout << "soundness violations: "
              << (sound_violations.empty() ? "none" : join(sound_violations))
              << "\n";
    if (!unstable.empty())
      std::cout << "unstable across seeds: " << join(unstable) << "\n";
    std::cout << "completeness: " << agreeing << "/" << numeric_determined.size()
              << "\n";
  }
  return sound_violations.empty() ? kHolds : kDoesNotHold;
}

int run_dot(const std::string& model, const std::string& report_path,
            const std::optional<std::string>& out) {
  idgraph::InfluenceDiagram d = idgraph::parse_diagram(read_file(model));
  idgraph::DotAnnotations ann;
  if (!report_path.empty()) {
    nlohmann::json doc = nlohmann::json::parse(read_file(report_path));
    if (doc.contains("verdict")) {
      if (doc.contains("paths"))
        for (const auto& path : doc["paths"]) {
          ann.paths.push_back(path.get<std::vector<std::string>>());
          for (const auto& v : ann.paths.back()) ann.deduced.insert(v);
        }
    } else {
      if (doc.contains("known_initial"))
        for (const auto& v : doc["known_initial"])
          ann.known.insert(v.get<std::string>());
      if (doc.contains("observable"))
        for (const auto& v : doc["observable"])
          ann.deduced.insert(v.get<std::string>());
    }
  }
  write_output(out, idgraph::export_dot(d, ann));
  return kHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structural observability/controllability analysis of influence diagrams"};
  app.require_subcommand(1);

  std::string model, observed_csv, query, targets_csv, decisions_csv;
  std::string cert_path, report_path, spec_path;
  std::optional<std::string> out_path;
  bool as_json = false, decisions_known = false;
  int retry_limit = 100, n_seeds = 5;
  std::uint64_t seed = default_seed();

  CLI::App* validate = app.add_subcommand("validate", "check well-formedness");
  validate->add_option("model", model)->required();
  validate->add_flag("--json", as_json);

  CLI::App* observe =
      app.add_subcommand("observe", "structural observability closure");
  observe->add_option("model", model)->required();
  observe->add_option("--observed", observed_csv,
                      "extra evidence ids, comma separated");
  observe->add_option("--query", query, "exit 0/1 for this node");
  observe->add_flag("--decisions-known", decisions_known,
                    "treat decision nodes as known");
  observe->add_flag("--json", as_json);

  CLI::App* control =
      app.add_subcommand("control", "structural controllability of a target set");
  control->add_option("model", model)->required();
  control->add_option("--targets", targets_csv)->required();
  control->add_option("--decisions", decisions_csv,
                      "usable decisions (default: all)");
  control->add_option("--retry-limit", retry_limit);
  control->add_flag("--json", as_json);

  CLI::App* unroll_cmd =
      app.add_subcommand("unroll", "expand a dynamic-system pattern spec");
  unroll_cmd->add_option("spec", spec_path)->required();
  unroll_cmd->add_option("-o,--output", out_path);

  CLI::App* verify = app.add_subcommand("verify", "re-check a certificate");
  verify->add_option("model", model)->required();
  verify->add_option("--certificate", cert_path)->required();
  verify->add_option("--targets", targets_csv)->required();
  verify->add_option("--decisions", decisions_csv);

  CLI::App* cross =
      app.add_subcommand("cross-check", "structural vs numeric oracle agreement");
  cross->add_option("model", model)->required();
  cross->add_option("--seeds", n_seeds);
  cross->add_option("--seed", seed, "base oracle seed (or env IDGRAPH_SEED)");
  cross->add_flag("--json", as_json);

  CLI::App* dot = app.add_subcommand("dot", "Graphviz export");
  dot->add_option("model", model)->required();
  dot->add_option("--report", report_path, "observability/controllability report JSON");
  dot->add_option("-o,--output", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kInvalidInput;
  }

  try {
    if (app.got_subcommand(validate)) return run_validate(model, as_json);
    if (app.got_subcommand(observe))
      return run_observe(model, observed_csv, query, decisions_known, as_json);
    if (app.got_subcommand(control))
      return run_control(model, targets_csv, decisions_csv, retry_limit, as_json);
    if (app.got_subcommand(unroll_cmd)) return run_unroll(spec_path, out_path);
    if (app.got_subcommand(verify))
      return run_verify(model, cert_path, targets_csv, decisions_csv);
    if (app.got_subcommand(cross))
      return run_cross_check(model, n_seeds, seed, as_json);
    if (app.got_subcommand(dot)) return run_dot(model, report_path, out_path);
  } catch (const idgraph::diagram_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}
