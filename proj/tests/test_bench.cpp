#include <gtest/gtest.h>

#include "mmapf/bench.hpp"
#include "support.hpp"

using namespace mmapf;

TEST(Bench, CallsFollowTheEscalationFormula) {
  const auto f = support::fixture("scenario1");
  const std::vector<QueryKind> kinds(kAllQueryKinds.begin(), kAllQueryKinds.end());
  const BenchResult r = run_bench(f.inst, *f.plan, kinds);
  ASSERT_FALSE(r.records.empty());
  for (const auto& rec : r.records) EXPECT_EQ(rec.calls, expected_calls(rec.query.kind, rec.kind)) << to_string(rec.query);
  int from_rows = 0;
  for (const auto& row : r.rows) from_rows += row.instances;
  EXPECT_EQ(from_rows, static_cast<int>(r.records.size()));
}

TEST(Bench, M1HasNoWaitRowsAndThreeRecharges) {
  const auto f = support::fixture("m1");
  const BenchResult r =
      run_bench(f.inst, *f.plan, {QueryKind::QW1, QueryKind::QW2, QueryKind::QW3, QueryKind::QW4, QueryKind::QC1});
  ASSERT_EQ(r.rows.size(), 5u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r.rows[static_cast<std::size_t>(i)].instances, 0);
    EXPECT_EQ(r.rows[static_cast<std::size_t>(i)].calls, 0);
  }
  EXPECT_EQ(r.rows[4].instances, 3);
  for (const auto& rec : r.records) EXPECT_EQ(rec.calls, expected_calls(rec.query.kind, rec.kind));
}

TEST(Bench, ExactModeIsDeterministicAndCsvMatchesTable) {
  const auto f = support::fixture("scenario1");
  const std::vector<QueryKind> kinds{QueryKind::QW1, QueryKind::QP4};
  const BenchResult a = run_bench(f.inst, *f.plan, kinds);
  const BenchResult b = run_bench(f.inst, *f.plan, kinds);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].query, b.records[i].query);
    EXPECT_EQ(a.records[i].kind, b.records[i].kind);
    EXPECT_EQ(a.records[i].calls, b.records[i].calls);
    EXPECT_EQ(a.records[i].models, b.records[i].models);
  }
  const std::string csv = bench_csv(a.rows);
  const std::string table = bench_table(a.rows);
  for (const auto& row : a.rows) {
    const std::string line = std::string(to_string(row.kind)) + "," + std::to_string(row.instances) + "," +
                             std::to_string(row.alternatives) + "," + std::to_string(row.calls);
    EXPECT_NE(csv.find(line), std::string::npos) << csv;
    EXPECT_NE(table.find(to_string(row.kind)), std::string::npos);
  }
}

TEST(Bench, ExpectedCalls) {
  EXPECT_EQ(expected_calls(QueryKind::QW1, ExplanationKind::alternative), 1);
  EXPECT_EQ(expected_calls(QueryKind::QW3, ExplanationKind::counterfactual), 3);
  EXPECT_EQ(expected_calls(QueryKind::QC4, ExplanationKind::infeasibility), 3);
  EXPECT_EQ(expected_calls(QueryKind::QP2, ExplanationKind::counterfactual), 2);
  EXPECT_EQ(expected_calls(QueryKind::QU, ExplanationKind::infeasibility), 2);
}
