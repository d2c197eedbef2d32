#include <gtest/gtest.h>

#include "mmapf/solver.hpp"
#include "oracle_suite.hpp"
#include "support.hpp"

using namespace mmapf;

namespace {

bool waits_at(const AgentPlan& p, VertexId x) {
  for (int t = 0; t < p.length(); ++t)
    if (p.at(t) == Location(x) && p.at(t + 1) == Location(x)) return true;
  return false;
}

HardConstraint forbid_wait(AgentId a, VertexId x) { return HardConstraint(ForbidWait{a, x}); }

}  // namespace

TEST(Solver, Scenario1MakespanFour) {
  const auto s = support::fixture("scenario1");
  const Outcome o = solve(s.inst, Program{});
  ASSERT_EQ(o.status, SolveStatus::optimal);
  EXPECT_EQ(o.plan->makespan(), 4);
  EXPECT_TRUE(validate(s.inst, *o.plan).is_solution());
}

TEST(Solver, ForbiddingTheWaitKeepsMakespanFour) {
  const auto s = support::fixture("scenario1");
  Program p;
  p.hard.push_back(forbid_wait(2, 8));
  const Outcome o = solve(s.inst, p);
  ASSERT_EQ(o.status, SolveStatus::optimal);
  EXPECT_EQ(o.plan->makespan(), 4);
  EXPECT_FALSE(waits_at(o.plan->of(2), 8));

  p.hard.push_back(forbid_wait(1, 11));
  EXPECT_EQ(solve(s.inst, p).status, SolveStatus::infeasible);
}

TEST(Solver, TwoByTwoGridNeedsTwoSteps) {
  const Instance inst = instance_from_json(json{{"grid", support::grid_doc(2, 2)},
                                                {"max_battery", 9},
                                                {"tau", 2},
                                                {"objective", {"makespan"}},
                                                {"agents", {{{"id", 1}, {"init", 1}, {"goal", 4}}}}});
  const Outcome o = solve(inst, Program{});
  ASSERT_EQ(o.status, SolveStatus::optimal);
  EXPECT_EQ(o.plan->makespan(), 2);
  oracle::Options opt;
  opt.prio = oracle::list_priorities(inst);
  EXPECT_EQ(oracle::brute_force(inst, opt).cost, o.cost.without_tie_break());
}

TEST(Solver, ZeroHorizonWithDistinctGoalIsInfeasible) {
  // tau must be positive, so the closest case is a goal farther than tau.
  const Instance inst = instance_from_json(json{{"grid", support::grid_doc(1, 3)},
                                                {"max_battery", 9},
                                                {"tau", 1},
                                                {"objective", {"makespan"}},
                                                {"agents", {{{"id", 1}, {"init", 1}, {"goal", 3}}}}});
  EXPECT_EQ(solve(inst, Program{}).status, SolveStatus::infeasible);
}

TEST(Solver, Scenario2SoftCollisionsMatchBruteForce) {
  const auto s = support::fixture("scenario1");
  const std::vector<HardConstraint> hard{forbid_wait(2, 8), forbid_wait(1, 11)};
  const Program prog = Program::soften(hard, FamilySet::none().with(Family::collision));
  const Outcome o = solve(s.inst, prog);
  ASSERT_EQ(o.status, SolveStatus::optimal);
  ASSERT_EQ(oracle::audit(s.inst, prog, o), "");

  oracle::Options opt;
  opt.soft = FamilySet::none().with(Family::collision);
  opt.prio = oracle::list_priorities(s.inst);
  opt.admit = [](const naive::Seq& q) {
    const int x = q.id == 1 ? 11 : 8;
    for (int t = 0; t < q.length(); ++t)
      if (q.loc[static_cast<std::size_t>(t)] == x && q.loc[static_cast<std::size_t>(t + 1)] == x) return false;
    return true;
  };
  const oracle::Result want = oracle::brute_force(s.inst, opt);
  ASSERT_TRUE(want.feasible);
  EXPECT_EQ(o.cost[kViolationPriority], want.cost[kViolationPriority]);
  EXPECT_EQ(o.cost.without_tie_break(), want.cost);
  bool at7 = false;
  for (const auto& a : o.violations) at7 |= a.kind == ViolationKind::collision && a.args[3] == 7;
  EXPECT_TRUE(at7);
}

TEST(Solver, OracleEquivalenceSample) {
  const oracle::SuiteReport rep = oracle::run_suite(40, 7);
  for (const auto& f : rep.failures) ADD_FAILURE() << f;
  EXPECT_EQ(rep.instances, 40);
}

TEST(Solver, FixedTraversalOffChargersForcesDecrement) {
  const Instance inst = instance_from_json(json{{"grid", support::grid_doc(1, 4)},
                                                {"max_battery", 9},
                                                {"tau", 5},
                                                {"objective", {"makespan"}},
                                                {"agents", {{{"id", 1}, {"init", 1}, {"goal", 4}, {"init_battery", 5}}}}});
  Program p;
  p.hard.emplace_back(FixTraversal{1, {Location(1), Location(2), Location(3), Location(4)}});
  const Outcome o = solve_fixed_traversal(inst, p);
  ASSERT_EQ(o.status, SolveStatus::optimal);
  EXPECT_EQ(o.cost[kViolationPriority], 0);
  std::vector<int> levels;
  for (const auto& st : o.plan->of(1).steps) levels.push_back(st.battery);
  EXPECT_EQ(levels, (std::vector<int>{5, 4, 3, 2}));
}

TEST(Solver, FixedTraversalBeyondBatteryIsInfeasible) {
  const Instance inst = instance_from_json(json{{"grid", support::grid_doc(1, 4)},
                                                {"max_battery", 9},
                                                {"tau", 5},
                                                {"objective", {"makespan"}},
                                                {"agents", {{{"id", 1}, {"init", 1}, {"goal", 4}, {"init_battery", 2}}}}});
  Program p;
  p.hard.emplace_back(FixTraversal{1, {Location(1), Location(2), Location(3), Location(4)}});
  EXPECT_EQ(solve_fixed_traversal(inst, p).status, SolveStatus::infeasible);
  const Outcome soft = solve_fixed_traversal(inst, Program::soften(p.hard, FamilySet::none().with(Family::battery)));
  ASSERT_EQ(soft.status, SolveStatus::optimal);
  EXPECT_EQ(soft.violations, (std::vector<ViolationAtom>{ViolationAtom::min_battery(1, 2, Location(3))}));
}

TEST(Solver, IllegalFixedTraversalNamesTheStep) {
  const auto s = support::fixture("scenario1");
  Program p;
  p.hard.emplace_back(FixTraversal{1, {Location(11), Location(5)}});
  p.hard.emplace_back(FixTraversal{2, {Location(8), Location(7), Location(6), Location(2)}});
  try {
    solve_fixed_traversal(s.inst, p);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("t=1"), std::string::npos) << e.what();
  }
}

TEST(Solver, NodeLimitYieldsUnknown) {
  const auto s = support::fixture("m1");
  SolveConfig cfg;
  cfg.max_nodes = 10;
  EXPECT_EQ(solve(s.inst, Program{}, cfg).status, SolveStatus::unknown);
}

TEST(Solver, ReferenceOnlyBreaksTies) {
  const auto s = support::fixture("scenario1");
  SolveConfig cfg;
  cfg.reference = s.plan;
  const Outcome with = solve(s.inst, Program{}, cfg);
  const Outcome without = solve(s.inst, Program{});
  EXPECT_EQ(with.cost.without_tie_break(), without.cost.without_tie_break());
}

TEST(Solver, ObjectiveOverrideChangesPriorities) {
  const auto s = support::fixture("m1");
  SolveConfig cfg;
  cfg.objective = std::vector<std::pair<ObjectiveTerm, int>>{{ObjectiveTerm::total_plan_length, 3},
                                                             {ObjectiveTerm::makespan, 2}};
  const Outcome o = solve(s.inst, Program{}, cfg);
  ASSERT_EQ(o.status, SolveStatus::optimal);
  EXPECT_EQ(o.cost[3], o.plan->of(1).length() + o.plan->of(2).length());
  EXPECT_EQ(o.cost[2], o.plan->makespan());
  cfg.objective = std::vector<std::pair<ObjectiveTerm, int>>{{ObjectiveTerm::makespan, 7}};
  EXPECT_THROW(solve(s.inst, Program{}, cfg), ValidationError);
}

TEST(AnytimeStream, Scenario1EndsAtMakespanFour) {
  const auto s = support::fixture("scenario1");
  SolveConfig cfg;
  cfg.mode = SearchMode::anytime;
  cfg.budget_seconds = 5;
  const auto incs = improvement_stream(s.inst, Program{}, cfg);
  ASSERT_FALSE(incs.empty());
  EXPECT_EQ(incs.back().plan.makespan(), 4);
  for (std::size_t i = 1; i < incs.size(); ++i) EXPECT_LT(incs[i].cost, incs[i - 1].cost);
}

TEST(AnytimeStream, InfeasibleProgramStreamsNothing) {
  const auto s = support::fixture("scenario1");
  Program p;
  p.hard.push_back(forbid_wait(2, 8));
  p.hard.push_back(forbid_wait(1, 11));
  SolveConfig cfg;
  cfg.mode = SearchMode::anytime;
  cfg.budget_seconds = 5;
  ImprovementStream stream(s.inst, p, cfg);
  EXPECT_FALSE(stream.next().has_value());
  EXPECT_EQ(stream.outcome().status, SolveStatus::infeasible);
}

TEST(AnytimeStream, DominatedByExact) {
  std::mt19937 rng(99);
  for (int i = 0; i < 30; ++i) {
    const Instance inst = support::tiny_instance(rng);
    const Outcome exact = solve(inst, Program{});
    SolveConfig cfg;
    cfg.mode = SearchMode::anytime;
    cfg.budget_seconds = 2;
    const auto incs = improvement_stream(inst, Program{}, cfg);
    if (exact.status == SolveStatus::infeasible) {
      EXPECT_TRUE(incs.empty());
      continue;
    }
    ASSERT_FALSE(incs.empty());
    for (const auto& inc : incs) EXPECT_LE(exact.cost.without_tie_break(), inc.cost.without_tie_break());
    EXPECT_EQ(exact.cost.without_tie_break(), incs.back().cost.without_tie_break());
  }
}

TEST(AnytimeStream, NonPositiveBudgetIsRejected) {
  const auto s = support::fixture("scenario1");
  SolveConfig cfg;
  cfg.mode = SearchMode::anytime;
  EXPECT_THROW(solve(s.inst, Program{}, cfg), ValidationError);
}
