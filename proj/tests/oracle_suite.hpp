#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmapf/solver.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace oracle {

struct SuiteReport {
  int instances = 0;
  int checks = 0;
  int infeasible = 0;
  std::vector<std::string> failures;
};

/// Post-hoc soundness and cost correctness of one solver outcome.
inline std::string audit(const Instance& inst, const mmapf::Program& prog, const mmapf::Outcome& o) {
  using namespace mmapf;
  if (!o.plan) return {};
  const Plan& p = *o.plan;
  try {
    check_plan_structure(p, inst, prog.softened().contains(Family::goal) ? EndRule::anywhere : EndRule::at_goal);
  } catch (const std::exception& e) {
    return std::string("structure: ") + e.what();
  }
  const ValidationReport r = validate(inst, p);
  if (!r.checks_pass()) return "traversal or battery check failed";
  std::int64_t level7 = 0;
  for (const auto& a : r.violations) {
    if (!prog.softened().contains(a.family())) return "hard-family atom " + to_string(a);
    ++level7;
  }
  for (const auto& hc : prog.hard)
    if (!hc.holds(inst, p)) return "hard constraint violated: " + hc.render();
  CostVector want = objective_cost(inst, p, list_priorities(inst));
  want[kViolationPriority] += level7;
  if (!(o.cost.without_tie_break() == want)) return "cost " + o.cost.str() + " but recomputed " + want.str();
  return {};
}

/// Solver against brute force over `count` generated instances.
inline SuiteReport run_suite(int count, unsigned seed) {
  using namespace mmapf;
  SuiteReport rep;
  std::mt19937 rng(seed);
  auto fail = [&](int i, const std::string& what) {
    std::ostringstream os;
    os << "instance " << i << ": " << what;
    rep.failures.push_back(os.str());
  };
  for (int i = 0; i < count; ++i) {
    const Instance inst = support::tiny_instance(rng);
    ++rep.instances;
    const auto prio = list_priorities(inst);

    FamilySet random_soft;
    for (Family f : kAllFamilies)
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) random_soft = random_soft.with(f);
    std::vector<FamilySet> programs{FamilySet::none(), random_soft, FamilySet::all()};

    for (FamilySet soft : programs) {
      const Program prog = Program::soften({}, soft);
      const Outcome o = solve(inst, prog);
      Options opt;
      opt.soft = soft;
      opt.prio = prio;
      const Result want = brute_force(inst, opt);
      ++rep.checks;
      const bool got_plan = o.status == SolveStatus::optimal;
      if (o.status != SolveStatus::optimal && o.status != SolveStatus::infeasible) {
        fail(i, std::string("unexpected status ") + to_string(o.status));
        continue;
      }
      if (got_plan != want.feasible) {
        fail(i, std::string("status ") + to_string(o.status) + " but oracle feasible=" +
                    (want.feasible ? "true" : "false") + " soft=" + std::to_string(soft.list().size()));
        continue;
      }
      if (!got_plan) {
        ++rep.infeasible;
        continue;
      }
      if (!(o.cost.without_tie_break() == want.cost))
        fail(i, "cost " + o.cost.str() + " but oracle " + want.cost.str());
      if (auto why = audit(inst, prog, o); !why.empty()) fail(i, why);
      // The oracle's witness must cost what the oracle says.
      const Plan witness = to_plan(want.plan);
      std::int64_t atoms = 0;
      for (const auto& a : validate(inst, witness).violations) atoms += soft.contains(a.family()) ? 1 : 0;
      CostVector wc = objective_cost(inst, witness, prio);
      wc[kViolationPriority] += atoms;
      if (!(wc == want.cost)) fail(i, "oracle witness cost " + wc.str() + " differs from " + want.cost.str());
    }

    // Hard/soft consistency per family.
    const bool base_infeasible = solve(inst, Program{}).status == SolveStatus::infeasible;
    for (Family f : kAllFamilies) {
      const Outcome soft = solve(inst, Program::soften({}, FamilySet::none().with(f)));
      ++rep.checks;
      const bool blocked = soft.status == SolveStatus::infeasible || soft.cost[kViolationPriority] > 0;
      // A visited-but-left goal satisfies the goal atom yet not the hard end
      // rule, so for that family only one direction holds.
      const bool consistent = f == Family::goal ? (base_infeasible || !blocked) : blocked == base_infeasible;
      if (!consistent) fail(i, std::string("hard/soft inconsistency for family ") + to_string(f));
    }
  }
  return rep;
}

}  // namespace oracle
