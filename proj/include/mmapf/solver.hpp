#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mmapf/constraints.hpp"
#include "mmapf/model.hpp"
#include "mmapf/semantics.hpp"

namespace mmapf {

inline constexpr int kLevels = 8;
inline constexpr int kViolationPriority = 7;
/// Lowest level; holds the similarity-to-reference tie-breaker.
inline constexpr int kTieBreakLevel = 0;

/// Accumulated cost per priority level, compared from the highest level down.
class CostVector {
 public:
  std::int64_t operator[](int level) const { return v_[static_cast<std::size_t>(level)]; }
  std::int64_t& operator[](int level) { return v_[static_cast<std::size_t>(level)]; }

  CostVector& operator+=(const CostVector& o) {
    for (int i = 0; i < kLevels; ++i) v_[static_cast<std::size_t>(i)] += o.v_[static_cast<std::size_t>(i)];
    return *this;
  }
  friend CostVector operator+(CostVector a, const CostVector& b) { return a += b; }

  friend std::strong_ordering operator<=>(const CostVector& a, const CostVector& b) {
    for (int i = kLevels - 1; i >= 0; --i)
      if (auto c = a[i] <=> b[i]; c != 0) return c;
    return std::strong_ordering::equal;
  }
  friend bool operator==(const CostVector& a, const CostVector& b) = default;

  /// Copy with the tie-break level cleared.
  CostVector without_tie_break() const {
    CostVector c = *this;
    c[kTieBreakLevel] = 0;
    return c;
  }

  json to_json() const {
    json j = json::object();
    for (int i = kLevels - 1; i >= 0; --i)
      if (v_[static_cast<std::size_t>(i)] != 0) j[std::to_string(i)] = v_[static_cast<std::size_t>(i)];
    return j;
  }

  std::string str() const {
    std::string s = "[";
    bool first = true;
    for (int i = kLevels - 1; i >= 0; --i) {
      if (v_[static_cast<std::size_t>(i)] == 0) continue;
      s += (first ? "" : " ") + std::to_string(v_[static_cast<std::size_t>(i)]) + "@" + std::to_string(i);
      first = false;
    }
    return s + "]";
  }

 private:
  std::array<std::int64_t, kLevels> v_{};
};

struct SoftConstraint {
  Family family = Family::collision;
  int weight = 1;
  int priority = kViolationPriority;
};

/// Hard constraints plus the families that are softened into weighted costs.
/// Builtin families not listed in `soft` stay hard.
struct Program {
  std::vector<HardConstraint> hard;
  std::vector<SoftConstraint> soft;

  FamilySet softened() const {
    FamilySet s;
    for (const auto& c : soft) s = s.with(c.family);
    return s;
  }

  static Program soften(std::vector<HardConstraint> hard, FamilySet families, int weight = 1,
                        int priority = kViolationPriority) {
    Program p;
    p.hard = std::move(hard);
    for (Family f : families.list()) p.soft.push_back({f, weight, priority});
    return p;
  }
};

enum class SearchMode : std::uint8_t { exact, anytime };

struct SolveConfig {
  SearchMode mode = SearchMode::exact;
  double budget_seconds = 0.0;  // anytime only; must be > 0 there
  /// Overrides the instance objective: (term, priority) pairs.
  std::optional<std::vector<std::pair<ObjectiveTerm, int>>> objective;
  /// Cost-equal optima are broken toward plans that stay on cells this plan
  /// already visits (per agent).
  std::optional<Plan> reference;
  /// 0 = unlimited. Exceeding the limit yields an unknown outcome.
  std::uint64_t max_nodes = 0;
};

enum class SolveStatus : std::uint8_t { optimal, infeasible, best_so_far, unknown };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::best_so_far: return "best_so_far";
    case SolveStatus::unknown: return "unknown";
  }
  return "?";
}

struct SolveStats {
  std::uint64_t nodes = 0;
  std::uint64_t models = 0;
  std::int64_t time_ms = 0;

  json to_json() const { return json{{"nodes", nodes}, {"models", models}, {"time_ms", time_ms}}; }
};

struct Outcome {
  SolveStatus status = SolveStatus::unknown;
  std::optional<Plan> plan;
  CostVector cost;
  /// Atoms of the softened families in `plan`.
  std::vector<ViolationAtom> violations;
  SolveStats stats;

  bool has_plan() const { return plan.has_value(); }
};

struct Incumbent {
  Plan plan;
  CostVector cost;
};

/// Priority per objective term for this instance/config; -1 when unused.
inline std::array<int, 3> objective_priorities(const Instance& inst, const SolveConfig& cfg) {
  std::array<int, 3> prio{-1, -1, -1};
  if (cfg.objective) {
    for (auto [term, p] : *cfg.objective) {
      if (p < 1 || p >= kViolationPriority) throw ValidationError("objective priorities must lie in [1, 6]");
      prio[static_cast<std::size_t>(term)] = p;
    }
    return prio;
  }
  const auto& terms = inst.objective();
  int p = static_cast<int>(terms.size());
  for (auto term : terms) prio[static_cast<std::size_t>(term)] = p--;
  return prio;
}

/// Objective part of a plan's cost, recomputed from its definition.
inline CostVector objective_cost(const Instance& inst, const Plan& plan, const std::array<int, 3>& prio) {
  CostVector c;
  std::int64_t makespan = 0, total = 0, charges = 0;
  for (const auto& p : plan.agents) {
    makespan = std::max<std::int64_t>(makespan, p.length());
    total += p.length();
    for (int t = 1; t <= p.length(); ++t)
      if (p.battery_at(t) == inst.max_battery()) ++charges;
  }
  if (prio[0] >= 0) c[prio[0]] += makespan;
  if (prio[1] >= 0) c[prio[1]] += total;
  if (prio[2] >= 0) c[prio[2]] += charges;
  return c;
}

namespace detail {

inline constexpr int kInf = std::numeric_limits<int>::max() / 4;

/// Time-expanded joint search. Node layout (int32 words):
///   [t] then per agent [pos, target, battery, mask, done] then one word per
///   hard constraint state. `target` >= 0 marks a slow crossing in progress
///   from `pos` to `target`. Vertices are dense indices.
class Engine {
 public:
  static constexpr int kAgentWords = 5;
  static constexpr std::uint32_t kGoalBit = 1u << 30;

  Engine(const Instance& inst, const Program& prog, const SolveConfig& cfg)
      : inst_(inst), prog_(prog), cfg_(cfg), tau_(inst.tau()), b_(inst.max_battery()) {
    prio_ = objective_priorities(inst, cfg);
    for (auto& w : fam_weight_) w = -1;
    for (const auto& s : prog.soft) {
      if (s.weight <= 0) throw ValidationError("soft constraint weights must be positive");
      if (s.priority <= prio_max_objective() || s.priority >= kLevels)
        throw ValidationError("soft constraint priority must exceed every objective priority");
      fam_weight_[static_cast<std::size_t>(s.family)] = s.weight;
      fam_prio_[static_cast<std::size_t>(s.family)] = s.priority;
    }
    setup_agents();
    width_ = 1 + kAgentWords * static_cast<int>(agents_.size()) + static_cast<int>(prog.hard.size());
  }

  Outcome run_exact();
  Outcome run_anytime(const std::function<void(const Incumbent&)>& on_incumbent, std::stop_token stop);

 private:
  struct AgentInfo {
    AgentId id = 0;
    int init = 0;
    int goal = 0;
    std::vector<int> waypoints;     // dense
    std::uint32_t all_waypoints = 0;
    int init_battery = 0;
    std::vector<int> constraints;   // indices into prog_.hard
    std::vector<int> fixed;         // dense per t, -1 intransit; empty if free
    std::vector<std::uint8_t> novel;  // per dense vertex; empty without reference
    std::vector<int> dgoal;
    std::vector<int> dcharge;
    std::vector<std::vector<int>> dwp;
    std::vector<int> tsp;           // (1<<k) * V, or empty when k is large
    int deadline = 0;               // latest possible plan length
    bool must_end_at_goal = true;   // false when the goal is soft: it may then stop anywhere at its deadline
    std::vector<std::uint8_t> blocked;              // per dense vertex, never entered
    std::vector<std::pair<int, int>> blocked_moves; // dense (from, to), never taken
  };

  struct Option {
    bool finish = false;
    bool was_intransit = false;
    bool starts_slow = false;
    int from = -1;       // dense vertex at t (crossing origin when intransit)
    int to = -1;         // dense vertex at t+1; -1 when intransit at t+1
    int target = -1;     // crossing destination (starting or ongoing)
    int next[kAgentWords]{};
    CostVector delta;
    std::vector<int> cstates;
  };

  int prio_max_objective() const { return std::max({prio_[0], prio_[1], prio_[2], 0}); }
  bool soft(Family f) const { return fam_weight_[static_cast<std::size_t>(f)] > 0; }
  void charge(CostVector& c, Family f, std::int64_t count = 1) const {
    c[fam_prio_[static_cast<std::size_t>(f)]] += count * fam_weight_[static_cast<std::size_t>(f)];
  }

  std::vector<int> distances_from(int src, const AgentInfo* a = nullptr) const;
  void setup_agents();
  int remaining(const AgentInfo& a, const int* cur, int t) const;
  void violation_bound(const AgentInfo& a, const int* cur, int t, CostVector& h) const;
  bool battery_viable(const AgentInfo& a, const int* cur, int t) const;
  void agent_options(std::size_t ai, const int* node, std::vector<Option>& out) const;
  CostVector heuristic(const int* node) const;

  using ChildSink = std::function<void(const std::vector<int>&, const CostVector&, bool terminal)>;
  void expand(const int* node, const CostVector& g, const ChildSink& sink) const;
  bool make_root(std::vector<int>& root, CostVector& g) const;
  Plan reconstruct(const std::vector<const int*>& chain) const;
  Outcome finish_outcome(Outcome out) const;

  const Instance& inst_;
  const Program& prog_;
  const SolveConfig& cfg_;
  int tau_;
  int b_;
  std::array<int, 3> prio_{};
  std::array<int, 5> fam_weight_{};
  std::array<int, 5> fam_prio_{};
  std::vector<AgentInfo> agents_;
  int width_ = 0;
};

/// Distances to `src` (moves weigh 1, slow crossings 2), honouring the
/// agent's static blocks when `a` is given.
inline std::vector<int> Engine::distances_from(int src, const AgentInfo* a) const {
  const std::size_t n = inst_.vertex_count();
  std::vector<int> dist(n, kInf);
  if (a && a->blocked[static_cast<std::size_t>(src)]) return dist;
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(src)] = 0;
  pq.push({0, src});
  const bool avoid_obstacles = !soft(Family::obstacle);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d != dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& nb : inst_.neighbors(inst_.vertex_at(u))) {
      if (avoid_obstacles && inst_.is_obstacle(nb.vertex)) continue;
      const int v = inst_.index_of(nb.vertex);
      if (a) {
        if (a->blocked[static_cast<std::size_t>(v)]) continue;
        // Reverse search: relaxing u -> v stands for the forward move v -> u.
        if (std::find(a->blocked_moves.begin(), a->blocked_moves.end(), std::make_pair(v, u)) !=
            a->blocked_moves.end())
          continue;
      }
      const int nd = d + (nb.mode == EdgeMode::slow ? 2 : 1);
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        pq.push({nd, v});
      }
    }
  }
  return dist;
}

inline void Engine::setup_agents() {
  const std::size_t n = inst_.vertex_count();
  std::vector<int> charging;
  for (VertexId c : inst_.charging()) charging.push_back(inst_.index_of(c));

  for (const auto& spec : inst_.agents()) {
    AgentInfo a;
    a.id = spec.id;
    a.init = inst_.index_of(spec.init);
    a.goal = inst_.index_of(spec.goal);
    a.init_battery = spec.init_battery;
    if (spec.waypoints.size() > 30) throw ValidationError("at most 30 waypoints per agent are supported");
    for (VertexId w : spec.waypoints) a.waypoints.push_back(inst_.index_of(w));
    a.all_waypoints = (1u << a.waypoints.size()) - 1u;
    a.blocked.assign(n, 0);
    a.deadline = tau_;
    for (std::size_t ci = 0; ci < prog_.hard.size(); ++ci) {
      const auto& hc = prog_.hard[ci];
      if (hc.agent() != spec.id) continue;
      a.constraints.push_back(static_cast<int>(ci));
      if (const auto* fx = std::get_if<FixTraversal>(&hc.body())) {
        std::vector<int> seq;
        for (Location l : fx->sequence) {
          if (l.is_vertex() && !inst_.has_vertex(l.vertex()))
            throw ValidationError("fixed traversal names unknown vertex " + std::to_string(l.vertex()));
          seq.push_back(l.is_intransit() ? -1 : inst_.index_of(l.vertex()));
        }
        if (!a.fixed.empty() && a.fixed != seq) throw ValidationError("conflicting FixTraversal constraints");
        a.fixed = std::move(seq);
        a.deadline = std::min(a.deadline, static_cast<int>(a.fixed.size()) - 1);
      } else if (const auto* cap = std::get_if<CapPlanLength>(&hc.body())) {
        a.deadline = std::min(a.deadline, cap->l - 1);
      } else if (const auto* fv = std::get_if<ForbidVisit>(&hc.body())) {
        if (inst_.has_vertex(fv->x)) a.blocked[static_cast<std::size_t>(inst_.index_of(fv->x))] = 1;
      } else if (const auto* fm = std::get_if<ForbidMove>(&hc.body())) {
        if (inst_.has_vertex(fm->x) && inst_.has_vertex(fm->y))
          a.blocked_moves.emplace_back(inst_.index_of(fm->x), inst_.index_of(fm->y));
      }
    }
    a.must_end_at_goal = !soft(Family::goal);
    a.dgoal = distances_from(a.goal, &a);
    a.dcharge.assign(n, kInf);
    for (int c : charging) {
      auto d = distances_from(c, &a);
      for (std::size_t v = 0; v < n; ++v) a.dcharge[v] = std::min(a.dcharge[v], d[v]);
    }
    for (int w : a.waypoints) a.dwp.push_back(distances_from(w, &a));
    const std::size_t k = a.waypoints.size();
    if (k <= 12) {
      const std::size_t masks = std::size_t{1} << k;
      a.tsp.assign(masks * n, kInf);
      for (std::size_t m = masks; m-- > 0;) {
        for (std::size_t v = 0; v < n; ++v) {
          int best = kInf;
          if (m == masks - 1) {
            best = a.dgoal[v];
          } else {
            for (std::size_t w = 0; w < k; ++w) {
              if (m & (std::size_t{1} << w)) continue;
              const int d = a.dwp[w][v];
              const auto wv = static_cast<std::size_t>(a.waypoints[w]);
              const int rest = a.tsp[(m | (std::size_t{1} << w)) * n + wv];
              if (d < kInf && rest < kInf) best = std::min(best, d + rest);
            }
          }
          a.tsp[m * n + v] = best;
        }
      }
    }
    if (cfg_.reference) {
      a.novel.assign(n, 1);
      if (const AgentPlan* rp = cfg_.reference->find(spec.id))
        for (const auto& s : rp->steps)
          if (s.loc.is_vertex() && inst_.has_vertex(s.loc.vertex()))
            a.novel[static_cast<std::size_t>(inst_.index_of(s.loc.vertex()))] = 0;
    }
    agents_.push_back(std::move(a));
  }
}

/// Admissible lower bound on the steps agent `a` still needs from time t.
inline int Engine::remaining(const AgentInfo& a, const int* cur, int t) const {
  if (cur[4]) return 0;
  if (!a.fixed.empty()) return std::max(0, static_cast<int>(a.fixed.size()) - 1 - t);
  const bool intransit = cur[1] >= 0;
  const auto v = static_cast<std::size_t>(intransit ? cur[1] : cur[0]);
  const int extra = intransit ? 1 : 0;
  int base;
  if (soft(Family::waypoint)) {
    base = a.dgoal[v];
  } else {
    const std::uint32_t mask = static_cast<std::uint32_t>(cur[3]) & a.all_waypoints;
    if (!a.tsp.empty()) {
      base = a.tsp[static_cast<std::size_t>(mask) * inst_.vertex_count() + v];
    } else {
      base = a.dgoal[v];
      for (std::size_t w = 0; w < a.waypoints.size(); ++w)
        if (!(mask & (1u << w))) base = std::max(base, a.dwp[w][v]);
    }
  }
  int total = base >= kInf ? kInf : base + extra;
  if (!a.must_end_at_goal) total = std::min(total, a.deadline - t);
  return total;
}

/// Adds an admissible bound on soft-family atoms the agent can no longer avoid.
inline void Engine::violation_bound(const AgentInfo& a, const int* cur, int t, CostVector& h) const {
  if (cur[4]) return;
  const std::uint32_t mask = static_cast<std::uint32_t>(cur[3]);
  const bool want_wp = soft(Family::waypoint) && (mask & a.all_waypoints) != a.all_waypoints;
  const bool want_goal = soft(Family::goal) && !(mask & kGoalBit);
  if (!a.fixed.empty()) {
    if (!want_wp && !want_goal) return;
    std::uint32_t seen = mask;
    for (std::size_t i = static_cast<std::size_t>(t) + 1; i < a.fixed.size(); ++i) {
      const int v = a.fixed[i];
      if (v < 0) continue;
      for (std::size_t w = 0; w < a.waypoints.size(); ++w)
        if (a.waypoints[w] == v) seen |= 1u << w;
      if (v == a.goal) seen |= kGoalBit;
    }
    if (want_wp)
      for (std::size_t w = 0; w < a.waypoints.size(); ++w)
        if (!(seen & (1u << w))) charge(h, Family::waypoint);
    if (want_goal && !(seen & kGoalBit)) charge(h, Family::goal);
    return;
  }
  const bool intransit = cur[1] >= 0;
  const auto v = static_cast<std::size_t>(intransit ? cur[1] : cur[0]);
  const int extra = intransit ? 1 : 0;
  const int horizon = a.deadline - t - extra;
  if (want_wp) {
    for (std::size_t w = 0; w < a.waypoints.size(); ++w) {
      if (mask & (1u << w)) continue;
      const int reach = a.dwp[w][v];
      const int after = a.must_end_at_goal ? a.dgoal[static_cast<std::size_t>(a.waypoints[w])] : 0;
      if (reach >= kInf || after >= kInf || reach + after > horizon) charge(h, Family::waypoint);
    }
  }
  if (want_goal && !a.must_end_at_goal && a.dgoal[v] > horizon) charge(h, Family::goal);
  if (soft(Family::battery)) {
    const int need = remaining(a, cur, t);
    const int battery = cur[2];
    const int to_charger = a.dcharge[v] >= kInf ? kInf : a.dcharge[v] + extra;
    const int without = std::max(0, need - battery);
    const int with = to_charger >= kInf ? without : std::max(0, to_charger - battery);
    charge(h, Family::battery, std::min(without, with));
  }
}

inline bool Engine::battery_viable(const AgentInfo& a, const int* cur, int t) const {
  if (soft(Family::battery) || cur[4]) return true;
  const int need = remaining(a, cur, t);
  const int battery = cur[2];
  if (battery >= need) return true;
  const bool intransit = cur[1] >= 0;
  const auto v = static_cast<std::size_t>(intransit ? cur[1] : cur[0]);
  const int to_charger = a.dcharge[v];
  if (to_charger >= kInf) return false;
  return battery >= to_charger + (intransit ? 1 : 0) + 1;
}

inline void Engine::agent_options(std::size_t ai, const int* node, std::vector<Option>& out) const {
  out.clear();
  const AgentInfo& a = agents_[ai];
  const int t = node[0];
  const int* cur = node + 1 + kAgentWords * static_cast<int>(ai);
  const int* cstate = node + 1 + kAgentWords * static_cast<int>(agents_.size());
  const std::uint32_t mask = static_cast<std::uint32_t>(cur[3]);
  const bool intransit = cur[1] >= 0;

  auto base_states = [&](Option& o) {
    o.cstates.clear();
    for (int ci : a.constraints) o.cstates.push_back(cstate[ci]);
  };

  // Finish at t.
  if (!intransit) {
    const bool at_goal = cur[0] == a.goal;
    const bool wps_done = (mask & a.all_waypoints) == a.all_waypoints;
    bool allowed = at_goal && (wps_done || soft(Family::waypoint));
    if (!allowed && t == a.deadline && soft(Family::goal) && (wps_done || soft(Family::waypoint))) allowed = true;
    if (allowed) {
      Option o;
      o.finish = true;
      o.from = cur[0];
      base_states(o);
      bool ok = true;
      for (std::size_t k = 0; k < a.constraints.size() && ok; ++k)
        ok = prog_.hard[static_cast<std::size_t>(a.constraints[k])].check_final(o.cstates[k], t);
      if (ok) {
        if (!(mask & kGoalBit)) charge(o.delta, Family::goal);
        if (!wps_done)
          for (std::size_t w = 0; w < a.waypoints.size(); ++w)
            if (!(mask & (1u << w))) charge(o.delta, Family::waypoint);
        out.push_back(std::move(o));
      }
    }
  }
  if (t >= tau_) return;

  // Continue past t.
  const int battery = cur[2];
  CostVector stay_cost;
  if (battery == 0) {
    if (!soft(Family::battery)) return;
    charge(stay_cost, Family::battery);
  }
  const bool at_charger = !intransit && inst_.is_charging(inst_.vertex_at(cur[0]));
  int levels[2] = {drained(battery), b_};
  const int nlevels = at_charger && levels[0] != b_ ? 2 : 1;

  struct Move {
    int to;
    int target;
    bool slow;
  };
  Move moves[16];
  int nmoves = 0;
  std::vector<Move> extra;
  auto add = [&](Move m) {
    if (nmoves < 16)
      moves[nmoves++] = m;
    else
      extra.push_back(m);
  };
  if (intransit) {
    add({cur[1], -1, false});
  } else {
    add({cur[0], -1, false});
    for (const auto& nb : inst_.neighbors(inst_.vertex_at(cur[0]))) {
      const int v = inst_.index_of(nb.vertex);
      if (nb.mode == EdgeMode::slow) {
        if (t + 2 <= tau_) add({-1, v, true});
      } else {
        add({v, -1, false});
      }
    }
  }
  std::vector<Move> all(moves, moves + nmoves);
  all.insert(all.end(), extra.begin(), extra.end());

  const Location from_loc = intransit ? Location::intransit() : Location(inst_.vertex_at(cur[0]));
  for (const Move& m : all) {
    const int arrive = m.to;  // -1 when entering a crossing
    if (arrive >= 0 && !soft(Family::obstacle) && inst_.is_obstacle(inst_.vertex_at(arrive))) continue;
    if (m.slow && !soft(Family::obstacle) && inst_.is_obstacle(inst_.vertex_at(m.target))) continue;
    for (int li = 0; li < nlevels; ++li) {
      Option o;
      o.was_intransit = intransit;
      o.from = cur[0];
      o.to = arrive;
      o.starts_slow = m.slow;
      o.target = intransit ? cur[1] : m.target;
      o.delta = stay_cost;
      const int next_battery = levels[li];
      StepEvent e;
      e.t = t;
      e.from = from_loc;
      e.to = arrive >= 0 ? Location(inst_.vertex_at(arrive)) : Location::intransit();
      e.slow_target = m.slow ? inst_.vertex_at(m.target) : 0;
      e.battery_next = next_battery;
      e.from_charging = at_charger;
      base_states(o);
      bool ok = true;
      for (std::size_t k = 0; k < a.constraints.size() && ok; ++k)
        ok = prog_.hard[static_cast<std::size_t>(a.constraints[k])].step(o.cstates[k], e, b_);
      if (!ok) continue;
      std::uint32_t nmask = mask;
      if (arrive >= 0) {
        for (std::size_t w = 0; w < a.waypoints.size(); ++w)
          if (a.waypoints[w] == arrive) nmask |= 1u << w;
        if (arrive == a.goal) nmask |= kGoalBit;
        if (inst_.is_obstacle(inst_.vertex_at(arrive))) charge(o.delta, Family::obstacle);
        if (!a.novel.empty() && a.novel[static_cast<std::size_t>(arrive)]) o.delta[kTieBreakLevel] += 1;
      }
      if (prio_[1] >= 0) o.delta[prio_[1]] += 1;
      if (prio_[2] >= 0 && next_battery == b_) o.delta[prio_[2]] += 1;
      o.next[0] = arrive >= 0 ? arrive : cur[0];
      o.next[1] = arrive >= 0 ? -1 : m.target;
      o.next[2] = next_battery;
      o.next[3] = static_cast<int>(nmask);
      o.next[4] = 0;
      const int need = remaining(a, o.next, t + 1);
      if (need >= kInf || t + 1 + need > a.deadline) continue;
      if (!battery_viable(a, o.next, t + 1)) continue;
      out.push_back(std::move(o));
    }
  }
}

inline CostVector Engine::heuristic(const int* node) const {
  CostVector h;
  const int t = node[0];
  int makespan = 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const int* cur = node + 1 + kAgentWords * static_cast<int>(i);
    if (cur[4]) continue;
    const int r = remaining(agents_[i], cur, t);
    makespan = std::max(makespan, r);
    total += r;
    violation_bound(agents_[i], cur, t, h);
  }
  if (prio_[0] >= 0) h[prio_[0]] = makespan;
  if (prio_[1] >= 0) h[prio_[1]] = total;
  return h;
}

inline void Engine::expand(const int* node, const CostVector& g, const ChildSink& sink) const {
  const std::size_t na = agents_.size();
  const int t = node[0];
  std::vector<std::vector<Option>> opts(na);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < na; ++i) {
    const int* cur = node + 1 + kAgentWords * static_cast<int>(i);
    if (cur[4]) continue;
    agent_options(i, node, opts[i]);
    if (opts[i].empty()) return;  // dead end
    active.push_back(i);
  }

  std::vector<const Option*> chosen(na, nullptr);
  std::vector<int> child(static_cast<std::size_t>(width_));
  const bool collisions_soft = soft(Family::collision);

  auto pair_atoms = [&](std::size_t i, const Option& oi, std::size_t j, const Option& oj) -> int {
    // i < j in agent order; both continue.
    int atoms = 0;
    if (oi.to >= 0 && oi.to == oj.to) ++atoms;
    if (!oi.was_intransit && !oj.was_intransit && oi.to >= 0 && oj.to >= 0 && oi.from != oi.to &&
        oi.from == oj.to && oj.from == oi.to)
      ++atoms;
    if (oi.starts_slow && oj.starts_slow && oi.from == oj.target && oi.target == oj.from) ++atoms;
    if (oi.starts_slow && oj.was_intransit && oj.from == oi.target && oj.target == oi.from) ++atoms;
    if (oj.starts_slow && oi.was_intransit && oi.from == oj.target && oi.target == oj.from) ++atoms;
    (void)i;
    (void)j;
    return atoms;
  };

  std::function<void(std::size_t, CostVector)> rec = [&](std::size_t k, CostVector acc) {
    if (k == active.size()) {
      bool any = false;
      child[0] = t + 1;
      for (std::size_t i = 0; i < na; ++i) {
        int* dst = child.data() + 1 + kAgentWords * static_cast<int>(i);
        const int* cur = node + 1 + kAgentWords * static_cast<int>(i);
        const Option* o = chosen[i];
        if (cur[4] || o == nullptr || o->finish) {
          dst[0] = -1;
          dst[1] = -1;
          dst[2] = 0;
          dst[3] = 0;
          dst[4] = 1;
        } else {
          std::copy(o->next, o->next + kAgentWords, dst);
          any = true;
        }
      }
      int* cdst = child.data() + 1 + kAgentWords * static_cast<int>(na);
      std::fill(cdst, child.data() + width_, 0);
      for (std::size_t i = 0; i < na; ++i) {
        const Option* o = chosen[i];
        if (!o || o->finish) continue;
        const auto& cs = agents_[i].constraints;
        for (std::size_t c = 0; c < cs.size(); ++c) cdst[cs[c]] = o->cstates[c];
      }
      if (any && prio_[0] >= 0) acc[prio_[0]] += 1;
      sink(child, g + acc, !any);
      return;
    }
    const std::size_t i = active[k];
    for (const Option& o : opts[i]) {
      CostVector next = acc;
      next += o.delta;
      if (!o.finish) {
        int atoms = 0;
        for (std::size_t q = 0; q < k; ++q) {
          const std::size_t j = active[q];
          if (chosen[j]->finish) continue;
          atoms += pair_atoms(j, *chosen[j], i, o);
        }
        if (atoms > 0) {
          if (!collisions_soft) continue;
          charge(next, Family::collision, atoms);
        }
      }
      chosen[i] = &o;
      rec(k + 1, next);
      chosen[i] = nullptr;
    }
  };
  rec(0, CostVector{});
}

inline bool Engine::make_root(std::vector<int>& root, CostVector& g) const {
  root.assign(static_cast<std::size_t>(width_), 0);
  root[0] = 0;
  g = CostVector{};
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const AgentInfo& a = agents_[i];
    int* cur = root.data() + 1 + kAgentWords * static_cast<int>(i);
    cur[0] = a.init;
    cur[1] = -1;
    cur[2] = a.init_battery;
    std::uint32_t mask = 0;
    for (std::size_t w = 0; w < a.waypoints.size(); ++w)
      if (a.waypoints[w] == a.init) mask |= 1u << w;
    if (a.init == a.goal) mask |= kGoalBit;
    cur[3] = static_cast<int>(mask);
    cur[4] = 0;
    for (int ci : a.constraints)
      if (!prog_.hard[static_cast<std::size_t>(ci)].check_initial(Location(inst_.vertex_at(a.init)))) return false;
    if (inst_.is_obstacle(inst_.vertex_at(a.init))) {
      if (!soft(Family::obstacle)) return false;
      charge(g, Family::obstacle);
    }
    if (!a.novel.empty() && a.novel[static_cast<std::size_t>(a.init)]) g[kTieBreakLevel] += 1;
    for (std::size_t j = 0; j < i; ++j) {
      if (agents_[j].init != a.init) continue;
      if (!soft(Family::collision)) return false;
      charge(g, Family::collision);
    }
    const int need = remaining(a, cur, 0);
    if (need >= kInf || need > a.deadline) return false;
    if (!battery_viable(a, cur, 0)) return false;
  }
  return true;
}

inline Plan Engine::reconstruct(const std::vector<const int*>& chain) const {
  Plan plan;
  for (const auto& a : agents_) plan.agents.push_back(AgentPlan{a.id, {}});
  for (const int* node : chain) {
    const int t = node[0];
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      const int* cur = node + 1 + kAgentWords * static_cast<int>(i);
      if (cur[4]) continue;
      Step s;
      s.t = t;
      s.loc = cur[1] >= 0 ? Location::intransit() : Location(inst_.vertex_at(cur[0]));
      s.battery = cur[2];
      plan.agents[i].steps.push_back(s);
    }
  }
  return plan;
}

inline Outcome Engine::finish_outcome(Outcome out) const {
  if (out.plan) out.violations = enumerate_violations(inst_, *out.plan, prog_.softened());
  return out;
}

struct SpanHash {
  const std::vector<int>* arena;
  int width;
  std::size_t operator()(std::uint32_t idx) const noexcept {
    const int* p = arena->data() + static_cast<std::size_t>(idx) * static_cast<std::size_t>(width);
    std::uint64_t h = 1469598103934665603ull;
    for (int i = 0; i < width; ++i) {
      h ^= static_cast<std::uint32_t>(p[i]);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

struct SpanEq {
  const std::vector<int>* arena;
  int width;
  bool operator()(std::uint32_t a, std::uint32_t b) const noexcept {
    const int* p = arena->data() + static_cast<std::size_t>(a) * static_cast<std::size_t>(width);
    const int* q = arena->data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(width);
    return std::equal(p, p + width, q);
  }
};

inline Outcome Engine::run_exact() {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  std::vector<int> root;
  CostVector g0;
  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  };
  if (!make_root(root, g0)) {
    out.status = SolveStatus::infeasible;
    out.stats.time_ms = elapsed_ms();
    return out;
  }

  std::vector<int> arena;
  std::vector<std::uint32_t> parent;
  std::vector<CostVector> gs;
  std::vector<std::uint8_t> terminal;
  std::unordered_map<std::uint32_t, std::uint32_t, SpanHash, SpanEq> best(
      1024, SpanHash{&arena, width_}, SpanEq{&arena, width_});

  struct Open {
    CostVector f;
    int t;
    std::uint64_t seq;
    std::uint32_t node;
  };
  auto worse = [](const Open& a, const Open& b) {
    if (auto c = a.f <=> b.f; c != 0) return c > 0;
    if (a.t != b.t) return a.t < b.t;  // deeper first
    return a.seq > b.seq;
  };
  std::priority_queue<Open, std::vector<Open>, decltype(worse)> open(worse);
  std::uint64_t seq = 0;

  auto add_node = [&](const std::vector<int>& state, const CostVector& g, std::uint32_t par, bool term) {
    const auto idx = static_cast<std::uint32_t>(gs.size());
    arena.insert(arena.end(), state.begin(), state.end());
    parent.push_back(par);
    gs.push_back(g);
    terminal.push_back(term ? 1 : 0);
    if (!term) {
      auto it = best.find(idx);
      if (it != best.end()) {
        if (!(g < gs[it->second])) {
          arena.resize(arena.size() - static_cast<std::size_t>(width_));
          parent.pop_back();
          gs.pop_back();
          terminal.pop_back();
          return;
        }
        it->second = idx;
      } else {
        best.emplace(idx, idx);
      }
    }
    const CostVector f = term ? g : g + heuristic(state.data());
    open.push(Open{f, state[0], seq++, idx});
  };

  add_node(root, g0, std::numeric_limits<std::uint32_t>::max(), false);
  std::uint32_t current = 0;
  auto sink = [&](const std::vector<int>& child, const CostVector& g, bool term) {
    add_node(child, g, current, term);
  };

  while (!open.empty()) {
    const Open top = open.top();
    open.pop();
    const std::uint32_t idx = top.node;
    if (terminal[idx]) {
      std::vector<std::uint32_t> path;
      for (std::uint32_t p = idx; p != std::numeric_limits<std::uint32_t>::max(); p = parent[p]) path.push_back(p);
      std::reverse(path.begin(), path.end());
      std::vector<const int*> chain;
      for (auto p : path) chain.push_back(arena.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(width_));
      out.status = SolveStatus::optimal;
      out.plan = reconstruct(chain);
      out.cost = gs[idx];
      out.stats.models = 1;
      out.stats.time_ms = elapsed_ms();
      return finish_outcome(std::move(out));
    }
    auto it = best.find(idx);
    if (it != best.end() && it->second != idx) continue;  // stale entry
    ++out.stats.nodes;
    if (cfg_.max_nodes && out.stats.nodes > cfg_.max_nodes) {
      out.status = SolveStatus::unknown;
      out.stats.time_ms = elapsed_ms();
      return out;
    }
    current = idx;
    std::vector<int> state(arena.begin() + static_cast<std::ptrdiff_t>(idx) * width_,
                           arena.begin() + static_cast<std::ptrdiff_t>(idx + 1) * width_);
    const CostVector g = gs[idx];
    expand(state.data(), g, sink);
  }
  out.status = SolveStatus::infeasible;
  out.stats.time_ms = elapsed_ms();
  return out;
}

inline Outcome Engine::run_anytime(const std::function<void(const Incumbent&)>& on_incumbent,
                                   std::stop_token stop) {
  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(cfg_.budget_seconds));
  Outcome out;
  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  };
  std::vector<int> root;
  CostVector g0;
  if (!make_root(root, g0)) {
    out.status = SolveStatus::infeasible;
    out.stats.time_ms = elapsed_ms();
    return out;
  }

  struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const noexcept {
      std::uint64_t h = 1469598103934665603ull;
      for (int x : v) {
        h ^= static_cast<std::uint32_t>(x);
        h *= 1099511628211ull;
      }
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  std::unordered_map<std::vector<int>, CostVector, VecHash> seen;
  std::optional<CostVector> incumbent;
  bool expired = false;
  std::vector<const int*> path;

  struct Child {
    std::vector<int> state;
    CostVector g;
    CostVector f;
    bool terminal;
  };

  std::function<void(const std::vector<int>&, const CostVector&)> dfs = [&](const std::vector<int>& node,
                                                                            const CostVector& g) {
    if (expired) return;
    if ((++out.stats.nodes & 255u) == 0) {
      if (std::chrono::steady_clock::now() >= deadline || stop.stop_requested()) {
        expired = true;
        return;
      }
    }
    if (cfg_.max_nodes && out.stats.nodes > cfg_.max_nodes) {
      expired = true;
      return;
    }
    std::vector<Child> children;
    expand(node.data(), g, [&](const std::vector<int>& c, const CostVector& cg, bool term) {
      children.push_back(Child{c, cg, term ? cg : cg + heuristic(c.data()), term});
    });
    std::stable_sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
      if (auto c = a.f <=> b.f; c != 0) return c < 0;
      return a.terminal && !b.terminal;
    });
    path.push_back(node.data());
    for (const Child& c : children) {
      if (expired) break;
      if (incumbent && !(c.f < *incumbent)) break;
      if (c.terminal) {
        incumbent = c.g;
        out.plan = reconstruct(path);
        out.cost = c.g;
        ++out.stats.models;
        if (on_incumbent) on_incumbent(Incumbent{*out.plan, c.g});
        continue;
      }
      auto it = seen.find(c.state);
      if (it != seen.end() && !(c.g < it->second)) continue;
      seen[c.state] = c.g;
      dfs(c.state, c.g);
    }
    path.pop_back();
  };
  dfs(root, g0);

  if (expired)
    out.status = out.plan ? SolveStatus::best_so_far : SolveStatus::unknown;
  else
    out.status = out.plan ? SolveStatus::optimal : SolveStatus::infeasible;
  out.stats.time_ms = elapsed_ms();
  return finish_outcome(std::move(out));
}

}  // namespace detail

/// Exact (A*) or anytime (depth-first branch and bound) optimization over
/// joint timed plans. Exact mode returns optimal or infeasible; anytime mode
/// returns the best incumbent found within the budget.
inline Outcome solve(const Instance& inst, const Program& program, const SolveConfig& cfg = {},
                     const std::function<void(const Incumbent&)>& on_incumbent = {},
                     std::stop_token stop = {}) {
  if (cfg.mode == SearchMode::anytime && !(cfg.budget_seconds > 0))
    throw ValidationError("anytime budget must be positive");
  detail::Engine engine(inst, program, cfg);
  if (cfg.mode == SearchMode::exact) {
    Outcome o = engine.run_exact();
    if (o.plan && on_incumbent) on_incumbent(Incumbent{*o.plan, o.cost});
    return o;
  }
  return engine.run_anytime(on_incumbent, stop);
}

/// The location sequence of an agent plan.
inline std::vector<Location> traversal_of(const AgentPlan& p) {
  std::vector<Location> seq;
  for (const auto& s : p.steps) seq.push_back(s.loc);
  return seq;
}

/// Solves with every agent's traversal pinned; only charge decisions remain.
/// Throws ValidationError naming the first illegal step of a fixed traversal.
inline Outcome solve_fixed_traversal(const Instance& inst, const Program& program, const SolveConfig& cfg = {}) {
  for (const auto& spec : inst.agents()) {
    const FixTraversal* fixed = nullptr;
    for (const auto& hc : program.hard)
      if (const auto* f = std::get_if<FixTraversal>(&hc.body()); f && f->agent == spec.id) fixed = f;
    if (!fixed) throw ValidationError("agent " + std::to_string(spec.id) + " has no fixed traversal");
    std::vector<Step> steps;
    for (std::size_t t = 0; t < fixed->sequence.size(); ++t)
      steps.push_back(Step{static_cast<int>(t), fixed->sequence[t], 0});
    const Verdict v = check_traversal(inst, spec, steps);
    if (!v.ok)
      throw ValidationError("fixed traversal of agent " + std::to_string(spec.id) + " is illegal at t=" +
                            std::to_string(v.first_bad_t) + ": " + v.reason);
    if (static_cast<int>(steps.size()) - 1 > inst.tau())
      throw ValidationError("fixed traversal of agent " + std::to_string(spec.id) + " exceeds tau");
  }
  return solve(inst, program, cfg);
}

/// FIFO of strictly improving incumbents fed by a background anytime search.
class ImprovementStream {
 public:
  ImprovementStream(Instance inst, Program program, SolveConfig cfg)
      : inst_(std::move(inst)), program_(std::move(program)), cfg_(std::move(cfg)) {
    cfg_.mode = SearchMode::anytime;
    if (!(cfg_.budget_seconds > 0)) throw ValidationError("anytime budget must be positive");
    worker_ = std::jthread([this](std::stop_token st) {
      Outcome o;
      try {
        o = solve(
            inst_, program_, cfg_,
            [this](const Incumbent& inc) {
              std::lock_guard lk(mu_);
              queue_.push_back(inc);
              cv_.notify_all();
            },
            st);
      } catch (...) {
        o.status = SolveStatus::unknown;
      }
      std::lock_guard lk(mu_);
      outcome_ = std::move(o);
      done_ = true;
      cv_.notify_all();
    });
  }

  ImprovementStream(const ImprovementStream&) = delete;
  ImprovementStream& operator=(const ImprovementStream&) = delete;

  ~ImprovementStream() {
    worker_.request_stop();
    if (worker_.joinable()) worker_.join();
  }

  /// Blocks until the next incumbent or completion (nullopt).
  std::optional<Incumbent> next() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !queue_.empty() || done_; });
    if (queue_.empty()) return std::nullopt;
    Incumbent inc = std::move(queue_.front());
    queue_.pop_front();
    return inc;
  }

  /// Final outcome; blocks until the search has finished.
  Outcome outcome() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return done_; });
    return outcome_;
  }

 private:
  Instance inst_;
  Program program_;
  SolveConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Incumbent> queue_;
  bool done_ = false;
  Outcome outcome_;
  std::jthread worker_;
};

/// Collects the whole improvement sequence synchronously.
inline std::vector<Incumbent> improvement_stream(const Instance& inst, const Program& program, SolveConfig cfg) {
  ImprovementStream stream(inst, program, std::move(cfg));
  std::vector<Incumbent> out;
  while (auto inc = stream.next()) out.push_back(std::move(*inc));
  return out;
}

}  // namespace mmapf
