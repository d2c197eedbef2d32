#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmapf/bench.hpp"
#include "mmapf/explain.hpp"
#include "mmapf/json_io.hpp"
#include "mmapf/service.hpp"
#include "mmapf/solver.hpp"

namespace {

using namespace mmapf;

constexpr int kExitOk = 0;
constexpr int kExitNotSolution = 1;
constexpr int kExitInput = 2;
constexpr int kExitPremise = 3;
constexpr int kExitInfeasible = 10;
constexpr int kExitUnknown = 11;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep))
    if (!part.empty()) out.push_back(part);
  return out;
}

/// "makespan,total_plan_length" -> descending priorities in list order.
std::optional<std::vector<std::pair<ObjectiveTerm, int>>> parse_objective(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto names = split(text, ',');
  std::vector<std::pair<ObjectiveTerm, int>> out;
  int p = static_cast<int>(names.size());
  for (const auto& n : names) out.emplace_back(objective_from_string(n), p--);
  return out;
}

std::string plan_text(const Plan& plan) {
  std::string out;
  for (const auto& p : plan.agents) {
    out += "Robot " + std::to_string(p.agent) + ":";
    for (const auto& s : p.steps) out += " " + to_string(s.loc) + "(" + std::to_string(s.battery) + ")";
    out += "\n";
  }
  return out;
}

struct Common {
  std::string objective;
  double anytime = 0.0;
  std::string format = "json";
  std::uint64_t seed = 0;

  SolveConfig solve_config(const Instance& inst) const {
    SolveConfig cfg;
    cfg.objective = parse_objective(objective);
    if (cfg.objective) objective_priorities(inst, cfg);
    if (anytime > 0) {
      cfg.mode = SearchMode::anytime;
      cfg.budget_seconds = anytime;
    }
    return cfg;
  }
};

int cmd_solve(const std::string& instance_path, const std::string& out_path, const Common& c) {
  const Instance inst = load_instance(read_file(instance_path));
  const Outcome o = solve(inst, Program{}, c.solve_config(inst));
  if (o.plan && !out_path.empty()) write_file(out_path, save_plan(*o.plan) + "\n");
  if (c.format == "text") {
    std::cout << "status: " << to_string(o.status) << "\n";
    if (o.plan) std::cout << "makespan: " << o.plan->makespan() << "\n" << plan_text(*o.plan);
    std::cout << "nodes: " << o.stats.nodes << ", time_ms: " << o.stats.time_ms << "\n";
  } else {
    json j{{"status", to_string(o.status)}, {"stats", o.stats.to_json()}};
    if (o.plan) {
      j["plan"] = plan_to_json(*o.plan);
      j["cost"] = o.cost.without_tie_break().to_json();
    }
    std::cout << j.dump(2) << "\n";
  }
  switch (o.status) {
    case SolveStatus::optimal:
    case SolveStatus::best_so_far: return kExitOk;
    case SolveStatus::infeasible: return kExitInfeasible;
    case SolveStatus::unknown: return kExitUnknown;
  }
  return kExitUnknown;
}

int cmd_validate(const std::string& instance_path, const std::string& plan_path, const Common& c) {
  const Instance inst = load_instance(read_file(instance_path));
  const Plan plan = load_plan(read_file(plan_path), inst, EndRule::anywhere);
  const ValidationReport r = validate(inst, plan);
  if (c.format == "text") {
    std::cout << (r.is_solution() ? "solution" : "not a solution") << "\n";
    for (const auto& a : r.violations) std::cout << "  " << to_string(a) << "\n";
  } else {
    std::cout << report_to_json(r).dump(2) << "\n";
  }
  return r.is_solution() ? kExitOk : kExitNotSolution;
}

int cmd_explain(const std::string& instance_path, const std::string& plan_path, const std::string& query_text,
                const std::string& session_path, bool accumulate_unsat, const Common& c) {
  std::optional<Session> session;
  if (!session_path.empty() && std::filesystem::exists(session_path)) {
    session.emplace(Session::from_json(detail::parse_text(read_file(session_path))));
  } else {
    Instance inst = load_instance(read_file(instance_path));
    SessionConfig cfg;
    cfg.solve = c.solve_config(inst);
    cfg.accumulate_unsat = accumulate_unsat;
    if (plan_path.empty() || plan_path == "-") {
      session.emplace(Session::create(std::move(inst), cfg));
    } else {
      Plan plan = load_plan(read_file(plan_path), inst);
      session.emplace(std::move(inst), std::move(plan), cfg);
    }
  }
  const std::string qtext =
      std::filesystem::exists(query_text) ? read_file(query_text) : query_text;  // path or inline JSON
  const Query q = parse_query(qtext);
  Explanation e;
  try {
    e = session->answer(q);
  } catch (const PremiseNotObserved& ex) {
    std::cerr << "premise not observed: " << ex.what() << "\n";
    return kExitPremise;
  }
  if (!session_path.empty()) write_file(session_path, session->to_json().dump(2) + "\n");
  if (c.format == "text")
    std::cout << e.text << "\n";
  else
    std::cout << e.to_json().dump(2) << "\n";
  return e.unknown ? kExitUnknown : kExitOk;
}

int cmd_bench(const std::string& instance_path, const std::string& plan_path, const std::string& kinds_text,
              const std::string& csv_path, const Common& c) {
  const Instance inst = load_instance(read_file(instance_path));
  SessionConfig cfg;
  cfg.solve = c.solve_config(inst);
  Plan plan;
  if (plan_path.empty() || plan_path == "-") {
    SolveConfig exact = cfg.solve;
    exact.mode = SearchMode::exact;
    const Outcome o = solve(inst, Program{}, exact);
    if (!o.plan) {
      std::cerr << "instance has no plan\n";
      return kExitInfeasible;
    }
    plan = *o.plan;
  } else {
    plan = load_plan(read_file(plan_path), inst);
  }
  std::vector<QueryKind> kinds;
  if (kinds_text.empty()) {
    kinds.assign(kAllQueryKinds.begin(), kAllQueryKinds.end() - 1);
  } else {
    for (const auto& k : split(kinds_text, ',')) kinds.push_back(query_kind_from_string(k));
  }
  const BenchResult r = run_bench(inst, plan, kinds, cfg);
  const std::string csv = bench_csv(r.rows);
  if (!csv_path.empty()) write_file(csv_path, csv);
  if (c.format == "json") {
    json rows = json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"kind", to_string(row.kind)},
                      {"instances", row.instances},
                      {"alternatives", row.alternatives},
                      {"calls", row.calls},
                      {"models", row.models},
                      {"avg_ms", row.avg_ms}});
    std::cout << rows.dump(2) << "\n";
  } else {
    std::cout << bench_table(r.rows) << "\n" << csv;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery-aware multi-modal multi-agent path finding with query-driven explanations"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--objective", common.objective, "Comma-separated objective terms, highest priority first");
    sub->add_option("--anytime", common.anytime, "Anytime search with this budget in seconds");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"json", "text"}));
    sub->add_option("--seed", common.seed, "Reserved; exact mode is deterministic");
  };

  std::string instance_path, plan_path, out_path, query_text, session_path, kinds, csv_path;
  bool accumulate_unsat = false;

  auto* solve_cmd = app.add_subcommand("solve", "Compute an optimal plan");
  solve_cmd->add_option("instance", instance_path, "Instance JSON")->required();
  solve_cmd->add_option("--out", out_path, "Write the plan JSON here");
  add_common(solve_cmd);

  auto* validate_cmd = app.add_subcommand("validate", "Check a plan against the semantics");
  validate_cmd->add_option("instance", instance_path, "Instance JSON")->required();
  validate_cmd->add_option("plan", plan_path, "Plan JSON")->required();
  add_common(validate_cmd);

  auto* explain_cmd = app.add_subcommand("explain", "Answer one query");
  explain_cmd->add_option("instance", instance_path, "Instance JSON")->required();
  explain_cmd->add_option("plan", plan_path, "Plan JSON, or - to solve for one")->required();
  explain_cmd->add_option("query", query_text, "Query JSON (inline or a file path)")->required();
  explain_cmd->add_option("--session", session_path, "Session state file, created or updated");
  explain_cmd->add_flag("--accumulate-unsat", accumulate_unsat, "Also keep constraints of counterfactual answers");
  add_common(explain_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "Answer every query instance grounded in a plan");
  bench_cmd->add_option("instance", instance_path, "Instance JSON")->required();
  bench_cmd->add_option("plan", plan_path, "Plan JSON, or - to solve for one");
  bench_cmd->add_option("--kinds", kinds, "Comma-separated query kinds (default: all plan-grounded kinds)");
  bench_cmd->add_option("--csv", csv_path, "Also write the CSV here");
  add_common(bench_cmd);

  ServiceOptions service_opts;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", service_opts.host, "Bind address")->envname("MMAPF_HOST");
  serve_cmd->add_option("--port", service_opts.port, "Port")->envname("MMAPF_PORT");
  serve_cmd->add_option("--data-dir", service_opts.data_dir, "Session storage directory")->envname("MMAPF_DATA_DIR");
  serve_cmd->add_option("--anytime", service_opts.default_budget, "Default anytime budget in seconds (0 = exact)")
      ->envname("MMAPF_BUDGET");
  serve_cmd->add_option("--cors-origin", service_opts.cors_origin, "Allowed CORS origin")->envname("MMAPF_CORS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*solve_cmd) return cmd_solve(instance_path, out_path, common);
    if (*validate_cmd) return cmd_validate(instance_path, plan_path, common);
    if (*explain_cmd) return cmd_explain(instance_path, plan_path, query_text, session_path, accumulate_unsat, common);
    if (*bench_cmd) return cmd_bench(instance_path, plan_path, kinds, csv_path, common);
    if (*serve_cmd) {
      Service service(service_opts);
      std::cerr << "listening on " << service_opts.host << ":" << service_opts.port << "\n";
      return service.listen() ? kExitOk : kExitInput;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
