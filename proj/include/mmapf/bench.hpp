#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "mmapf/explain.hpp"
#include "mmapf/queries.hpp"

namespace mmapf {

/// One answered query instance.
struct BenchRecord {
  Query query;
  ExplanationKind kind = ExplanationKind::alternative;
  int calls = 0;
  std::uint64_t models = 0;
  std::int64_t time_ms = 0;
};

struct BenchRow {
  QueryKind kind = QueryKind::QW1;
  int instances = 0;
  int alternatives = 0;
  int calls = 0;
  std::uint64_t models = 0;
  double avg_ms = 0.0;
};

struct BenchResult {
  std::vector<BenchRecord> records;
  std::vector<BenchRow> rows;
};

/// Answers every enumerated query instance in a fresh session of its own.
inline BenchResult run_bench(const Instance& inst, const Plan& plan, const std::vector<QueryKind>& kinds,
                             const SessionConfig& cfg = {}) {
  BenchResult out;
  const std::vector<Query> queries = enumerate_queries(inst, plan, kinds);
  for (const Query& q : queries) {
    Session s(inst, plan, cfg);
    const Explanation e = s.answer(q);
    out.records.push_back(BenchRecord{q, e.kind, e.calls, e.models, e.time_ms});
  }
  for (QueryKind k : kinds) {
    BenchRow row;
    row.kind = k;
    std::int64_t total_ms = 0;
    for (const auto& r : out.records) {
      if (r.query.kind != k) continue;
      ++row.instances;
      if (r.kind == ExplanationKind::alternative) ++row.alternatives;
      row.calls += r.calls;
      row.models += r.models;
      total_ms += r.time_ms;
    }
    row.avg_ms = row.instances ? static_cast<double>(total_ms) / row.instances : 0.0;
    out.rows.push_back(row);
  }
  return out;
}

/// Solver calls the escalation makes for one answer: 1 when an alternative exists,
/// otherwise 3 for wait/charge, 2 for path and infeasibility queries.
inline int expected_calls(QueryKind k, ExplanationKind answered) {
  if (k == QueryKind::QU) return 2;
  if (answered == ExplanationKind::alternative) return 1;
  const QueryGroup g = group_of(k);
  return g == QueryGroup::wait || g == QueryGroup::charge ? 3 : 2;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "kind,instances,alternatives,calls,models,avg_ms\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.1f", r.avg_ms);
    os << to_string(r.kind) << ',' << r.instances << ',' << r.alternatives << ',' << r.calls << ',' << r.models
       << ',' << buf << '\n';
  }
  return os.str();
}

inline std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-5s %10s %13s %8s %8s %10s\n", "kind", "instances", "alternatives", "calls",
                "models", "avg_ms");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-5s %10d %13d %8d %8llu %10.1f\n", to_string(r.kind), r.instances,
                  r.alternatives, r.calls, static_cast<unsigned long long>(r.models), r.avg_ms);
    os << buf;
  }
  return os.str();
}

}  // namespace mmapf
