#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mmapf/constraints.hpp"
#include "mmapf/json_io.hpp"
#include "mmapf/model.hpp"
#include "mmapf/semantics.hpp"

namespace mmapf {

enum class QueryKind : std::uint8_t { QW1, QW2, QW3, QW4, QC1, QC2, QC3, QC4, QP1, QP2, QP3, QP4, QP5, QU };

inline constexpr std::array<QueryKind, 14> kAllQueryKinds{
    QueryKind::QW1, QueryKind::QW2, QueryKind::QW3, QueryKind::QW4, QueryKind::QC1,
    QueryKind::QC2, QueryKind::QC3, QueryKind::QC4, QueryKind::QP1, QueryKind::QP2,
    QueryKind::QP3, QueryKind::QP4, QueryKind::QP5, QueryKind::QU};

inline const char* to_string(QueryKind k) {
  static constexpr const char* names[] = {"QW1", "QW2", "QW3", "QW4", "QC1", "QC2", "QC3",
                                          "QC4", "QP1", "QP2", "QP3", "QP4", "QP5", "QU"};
  return names[static_cast<int>(k)];
}

inline QueryKind query_kind_from_string(std::string_view s) {
  for (auto k : kAllQueryKinds)
    if (s == to_string(k)) return k;
  throw ParseError("unknown query kind '" + std::string(s) + "'");
}

enum class QueryGroup : std::uint8_t { wait, charge, path, infeasibility };

inline QueryGroup group_of(QueryKind k) {
  if (k <= QueryKind::QW4) return QueryGroup::wait;
  if (k <= QueryKind::QC4) return QueryGroup::charge;
  if (k <= QueryKind::QP5) return QueryGroup::path;
  return QueryGroup::infeasibility;
}

/// Unused parameters stay 0.
struct Query {
  QueryKind kind = QueryKind::QU;
  AgentId agent = 0;
  VertexId x = 0;
  VertexId y = 0;
  int s = 0;
  int n = 0;
  int m = 0;
  int l = 0;

  auto key() const { return std::tie(kind, agent, x, y, s, n, m, l); }
  friend bool operator==(const Query& a, const Query& b) { return a.key() == b.key(); }
  friend bool operator<(const Query& a, const Query& b) { return a.key() < b.key(); }
};

namespace detail {

/// Parameter names used by each kind, in canonical order.
inline std::vector<std::string_view> query_params(QueryKind k) {
  switch (k) {
    case QueryKind::QW1: return {"agent", "x"};
    case QueryKind::QW2: return {"agent", "x", "s"};
    case QueryKind::QW3:
    case QueryKind::QW4: return {"agent", "x", "s", "n"};
    case QueryKind::QC1: return {"agent", "x"};
    case QueryKind::QC2: return {"agent", "s"};
    case QueryKind::QC3: return {"agent", "x", "s"};
    case QueryKind::QC4: return {"agent", "m"};
    case QueryKind::QP1: return {"agent", "l"};
    case QueryKind::QP2: return {"agent", "x"};
    case QueryKind::QP3: return {"agent", "x", "s"};
    case QueryKind::QP4: return {"agent", "x", "y"};
    case QueryKind::QP5: return {"agent", "x", "y", "s"};
    case QueryKind::QU: return {};
  }
  return {};
}

inline int* query_field(Query& q, std::string_view name) {
  if (name == "agent") return &q.agent;
  if (name == "x") return &q.x;
  if (name == "y") return &q.y;
  if (name == "s") return &q.s;
  if (name == "n") return &q.n;
  if (name == "m") return &q.m;
  if (name == "l") return &q.l;
  return nullptr;
}

}  // namespace detail

inline Query query_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("query: expected an object");
  const json& kind = detail::require(j, "kind", "query");
  if (!kind.is_string()) throw ParseError("query.kind: expected a string");
  Query q;
  q.kind = query_kind_from_string(kind.get<std::string>());
  const auto params = detail::query_params(q.kind);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "kind") continue;
    if (std::find(params.begin(), params.end(), it.key()) == params.end())
      throw ParseError(std::string("query: key '") + it.key() + "' is not a parameter of " + to_string(q.kind));
  }
  for (auto p : params) {
    const std::string name(p);
    *detail::query_field(q, p) = detail::as_int(detail::require(j, name.c_str(), "query"), "query." + name);
  }
  return q;
}

inline Query parse_query(std::string_view text) { return query_from_json(detail::parse_text(text)); }

inline json query_to_json(const Query& q) {
  json j;
  j["kind"] = to_string(q.kind);
  Query copy = q;
  for (auto p : detail::query_params(q.kind)) j[std::string(p)] = *detail::query_field(copy, p);
  return j;
}

inline std::string to_string(const Query& q) { return query_to_json(q).dump(); }

/// Throws ValidationError when a parameter is out of range for `inst`.
inline void validate_query(const Query& q, const Instance& inst) {
  const std::string k = to_string(q.kind);
  if (q.kind == QueryKind::QU) return;
  if (!inst.find_agent(q.agent)) throw ValidationError(k + ": unknown agent " + std::to_string(q.agent));
  const auto params = detail::query_params(q.kind);
  auto uses = [&](std::string_view p) { return std::find(params.begin(), params.end(), p) != params.end(); };
  if (uses("x") && !inst.has_vertex(q.x)) throw ValidationError(k + ": unknown vertex " + std::to_string(q.x));
  if (uses("y") && !inst.has_vertex(q.y)) throw ValidationError(k + ": unknown vertex " + std::to_string(q.y));
  if (uses("y") && !inst.edge_mode(q.x, q.y))
    throw ValidationError(k + ": no edge between " + std::to_string(q.x) + " and " + std::to_string(q.y));
  if (uses("s")) {
    // A visit may be asked about at the horizon itself; everything else is a transition.
    const int hi = q.kind == QueryKind::QP3 ? inst.tau() : inst.tau() - 1;
    if (q.s < 0 || q.s > hi) throw ValidationError(k + ": time step out of range");
  }
  if (uses("n") && q.n < 1) throw ValidationError(k + ": n must be at least 1");
  if (uses("m") && q.m < 1) throw ValidationError(k + ": m must be at least 1");
  if (uses("l") && q.l < 0) throw ValidationError(k + ": l must be non-negative");
  if ((q.kind == QueryKind::QC1 || q.kind == QueryKind::QC3) && !inst.is_charging(q.x))
    throw ValidationError(k + ": Cell " + std::to_string(q.x) + " is not a charging station");
}

struct CompiledQuery {
  std::optional<HardConstraint> hard;  // absent for QU
  FamilySet relevant;
  std::string template_id;
};

inline FamilySet relevant_families(QueryKind k) {
  switch (group_of(k)) {
    case QueryGroup::wait:
      return FamilySet::none().with(Family::collision).with(Family::obstacle).with(Family::waypoint);
    case QueryGroup::charge:
      return FamilySet::none().with(Family::battery).with(Family::goal).with(Family::obstacle).with(Family::waypoint);
    case QueryGroup::path:
    case QueryGroup::infeasibility: return FamilySet::all();
  }
  return FamilySet::all();
}

inline CompiledQuery compile(const Query& q, const Instance& inst) {
  validate_query(q, inst);
  CompiledQuery c;
  c.relevant = relevant_families(q.kind);
  c.template_id = to_string(q.kind);
  const std::string tag = std::string("query:") + to_string(q.kind);
  const AgentId a = q.agent;
  auto set = [&](ConstraintBody body) { c.hard = HardConstraint(std::move(body), tag); };
  switch (q.kind) {
    case QueryKind::QW1: set(ForbidWait{a, q.x}); break;
    case QueryKind::QW2: set(ForbidWaitAt{a, q.x, q.s}); break;
    case QueryKind::QW3: set(ForbidWaitRun{a, q.x, q.s, q.n}); break;
    case QueryKind::QW4: set(CapWaitCount{a, q.x, q.s, q.n}); break;
    case QueryKind::QC1: set(ForbidChargeAt{a, q.x}); break;
    case QueryKind::QC2: set(ForbidChargeTime{a, q.s}); break;
    case QueryKind::QC3: set(ForbidChargeAtTime{a, q.x, q.s}); break;
    case QueryKind::QC4: set(CapChargeCount{a, q.m}); break;
    case QueryKind::QP1: set(CapPlanLength{a, q.l}); break;
    case QueryKind::QP2: set(ForbidVisit{a, q.x}); break;
    case QueryKind::QP3: set(ForbidVisitAt{a, q.x, q.s}); break;
    case QueryKind::QP4: set(ForbidMove{a, q.x, q.y}); break;
    case QueryKind::QP5: set(ForbidMoveAt{a, q.x, q.y, q.s}); break;
    case QueryKind::QU: break;
  }
  return c;
}

/// A maximal run of waits: the agent stays at x over times s..s+n (n >= 1).
struct WaitRun {
  VertexId x;
  int s;
  int n;
};

inline std::vector<WaitRun> wait_runs(const AgentPlan& p) {
  std::vector<WaitRun> runs;
  const int len = p.length();
  for (int t = 0; t < len;) {
    const Location here = p.at(t);
    if (here.is_vertex() && p.at(t + 1) == here) {
      int e = t + 1;
      while (e < len && p.at(e + 1) == here) ++e;
      runs.push_back({here.vertex(), t, e - t});
      t = e;
    } else {
      ++t;
    }
  }
  return runs;
}

/// Recharge transitions: at charging vertex x at s, battery b at s+1.
inline std::vector<std::pair<VertexId, int>> recharges(const Instance& inst, const AgentPlan& p) {
  std::vector<std::pair<VertexId, int>> out;
  for (int t = 0; t < p.length(); ++t) {
    const Location x = p.at(t);
    if (x.is_vertex() && inst.is_charging(x.vertex()) && p.battery_at(t + 1) == inst.max_battery())
      out.emplace_back(x.vertex(), t);
  }
  return out;
}

/// Directed moves (x, y, s): a normal move at s or a slow crossing started at s.
inline std::vector<std::tuple<VertexId, VertexId, int>> moves_of(const AgentPlan& p) {
  std::vector<std::tuple<VertexId, VertexId, int>> out;
  for (int t = 0; t < p.length(); ++t) {
    const Location x = p.at(t), y = p.at(t + 1);
    if (!x.is_vertex()) continue;
    if (y.is_vertex() && y != x) out.emplace_back(x.vertex(), y.vertex(), t);
    if (y.is_intransit() && t + 2 <= p.length()) out.emplace_back(x.vertex(), p.at(t + 2).vertex(), t);
  }
  return out;
}

/// Every query instance whose phenomenon the plan exhibits, deduplicated and
/// ordered by (kind, agent, parameters). QU is never grounded in a plan.
inline std::vector<Query> enumerate_queries(const Instance& inst, const Plan& plan,
                                            const std::vector<QueryKind>& kinds) {
  const ValidationReport report = validate(inst, plan);
  if (!report.is_solution()) throw ValidationError("enumerate_queries: plan is not a solution");
  std::set<Query> out;
  auto want = [&](QueryKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  for (const auto& p : plan.agents) {
    const AgentId a = p.agent;
    for (const auto& r : wait_runs(p)) {
      if (want(QueryKind::QW1)) out.insert({QueryKind::QW1, a, r.x});
      if (want(QueryKind::QW2)) out.insert({QueryKind::QW2, a, r.x, 0, r.s});
      if (want(QueryKind::QW3)) out.insert({QueryKind::QW3, a, r.x, 0, r.s, r.n});
      if (want(QueryKind::QW4)) out.insert({QueryKind::QW4, a, r.x, 0, r.s, r.n});
    }
    const auto rc = recharges(inst, p);
    for (auto [x, s] : rc) {
      if (want(QueryKind::QC1)) out.insert({QueryKind::QC1, a, x});
      if (want(QueryKind::QC2)) out.insert({QueryKind::QC2, a, 0, 0, s});
      if (want(QueryKind::QC3)) out.insert({QueryKind::QC3, a, x, 0, s});
    }
    if (want(QueryKind::QC4) && !rc.empty()) {
      Query q{QueryKind::QC4, a};
      q.m = static_cast<int>(rc.size());
      out.insert(q);
    }
    if (want(QueryKind::QP1)) {
      Query q{QueryKind::QP1, a};
      q.l = p.length();
      out.insert(q);
    }
    for (int t = 0; t <= p.length(); ++t) {
      const Location x = p.at(t);
      if (!x.is_vertex()) continue;
      if (want(QueryKind::QP2)) out.insert({QueryKind::QP2, a, x.vertex()});
      if (want(QueryKind::QP3)) out.insert({QueryKind::QP3, a, x.vertex(), 0, t});
    }
    for (auto [x, y, s] : moves_of(p)) {
      if (want(QueryKind::QP4)) out.insert({QueryKind::QP4, a, x, y});
      if (want(QueryKind::QP5)) out.insert({QueryKind::QP5, a, x, y, s});
    }
  }
  return {out.begin(), out.end()};
}

inline std::vector<Query> enumerate_queries(const Instance& inst, const Plan& plan) {
  return enumerate_queries(inst, plan, std::vector<QueryKind>(kAllQueryKinds.begin(), kAllQueryKinds.end()));
}

}  // namespace mmapf
