#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmapf/json_io.hpp"
#include "mmapf/model.hpp"

namespace mmapf {

// ---------------------------------------------------------------------------
// Constraint families and violation atoms
// ---------------------------------------------------------------------------

enum class Family : std::uint8_t { collision, goal, waypoint, obstacle, battery };

inline constexpr std::array<Family, 5> kAllFamilies{Family::collision, Family::goal, Family::waypoint,
                                                    Family::obstacle, Family::battery};

inline const char* to_string(Family f) {
  switch (f) {
    case Family::collision: return "collision";
    case Family::goal: return "goal";
    case Family::waypoint: return "waypoint";
    case Family::obstacle: return "obstacle";
    case Family::battery: return "battery";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  for (Family f : kAllFamilies)
    if (s == to_string(f)) return f;
  throw ParseError("unknown constraint family '" + s + "'");
}

class FamilySet {
 public:
  constexpr FamilySet() = default;
  constexpr FamilySet(std::initializer_list<Family> fs) {
    for (Family f : fs) bits_ |= bit(f);
  }
  static constexpr FamilySet all() { return FamilySet(0x1F); }
  static constexpr FamilySet none() { return FamilySet(); }

  constexpr bool contains(Family f) const { return (bits_ & bit(f)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr FamilySet with(Family f) const { return FamilySet(static_cast<std::uint8_t>(bits_ | bit(f))); }
  constexpr FamilySet without(Family f) const { return FamilySet(static_cast<std::uint8_t>(bits_ & ~bit(f))); }
  constexpr FamilySet operator|(FamilySet o) const { return FamilySet(static_cast<std::uint8_t>(bits_ | o.bits_)); }
  constexpr FamilySet operator&(FamilySet o) const { return FamilySet(static_cast<std::uint8_t>(bits_ & o.bits_)); }
  constexpr FamilySet complement() const { return FamilySet(static_cast<std::uint8_t>(~bits_ & 0x1F)); }
  constexpr bool subset_of(FamilySet o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  std::vector<Family> list() const {
    std::vector<Family> out;
    for (Family f : kAllFamilies)
      if (contains(f)) out.push_back(f);
    return out;
  }

  friend constexpr bool operator==(FamilySet, FamilySet) = default;

 private:
  constexpr explicit FamilySet(std::uint8_t bits) : bits_(bits) {}
  static constexpr std::uint8_t bit(Family f) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f)); }
  std::uint8_t bits_ = 0;
};

enum class ViolationKind : std::uint8_t {
  collision,
  swap,
  slow_collision1,
  slow_collision2,
  goal,
  waypoint,
  obstacle,
  min_battery
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::collision: return "collision";
    case ViolationKind::swap: return "swap";
    case ViolationKind::slow_collision1: return "slow_collision1";
    case ViolationKind::slow_collision2: return "slow_collision2";
    case ViolationKind::goal: return "goal";
    case ViolationKind::waypoint: return "waypoint";
    case ViolationKind::obstacle: return "obstacle";
    case ViolationKind::min_battery: return "min_battery";
  }
  return "?";
}

inline ViolationKind violation_kind_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(ViolationKind::min_battery); ++i)
    if (s == to_string(static_cast<ViolationKind>(i))) return static_cast<ViolationKind>(i);
  throw ParseError("unknown violation kind '" + s + "'");
}

inline Family family_of(ViolationKind k) {
  switch (k) {
    case ViolationKind::collision:
    case ViolationKind::swap:
    case ViolationKind::slow_collision1:
    case ViolationKind::slow_collision2: return Family::collision;
    case ViolationKind::goal: return Family::goal;
    case ViolationKind::waypoint: return Family::waypoint;
    case ViolationKind::obstacle: return Family::obstacle;
    case ViolationKind::min_battery: return Family::battery;
  }
  return Family::collision;
}

inline std::size_t arity(ViolationKind k) {
  switch (k) {
    case ViolationKind::collision: return 4;
    case ViolationKind::swap:
    case ViolationKind::slow_collision1:
    case ViolationKind::slow_collision2: return 5;
    case ViolationKind::goal:
    case ViolationKind::waypoint: return 2;
    case ViolationKind::obstacle:
    case ViolationKind::min_battery: return 3;
  }
  return 0;
}

/// One grounded constraint violation, e.g. collision(a1,a2,t,x). Location
/// arguments use Location::raw(), so 0 stands for intransit.
struct ViolationAtom {
  ViolationKind kind = ViolationKind::collision;
  std::vector<int> args;

  Family family() const { return family_of(kind); }

  static ViolationAtom collision(AgentId a1, AgentId a2, int t, VertexId x) {
    return {ViolationKind::collision, {a1, a2, t, x}};
  }
  static ViolationAtom swap(AgentId a1, AgentId a2, int t, VertexId x, VertexId y) {
    return {ViolationKind::swap, {a1, a2, t, x, y}};
  }
  static ViolationAtom slow_collision1(AgentId a1, AgentId a2, int t, VertexId x, VertexId y) {
    return {ViolationKind::slow_collision1, {a1, a2, t, x, y}};
  }
  static ViolationAtom slow_collision2(AgentId a1, AgentId a2, int t, VertexId x, VertexId y) {
    return {ViolationKind::slow_collision2, {a1, a2, t, x, y}};
  }
  static ViolationAtom goal(AgentId a, VertexId x) { return {ViolationKind::goal, {a, x}}; }
  static ViolationAtom waypoint(AgentId a, VertexId x) { return {ViolationKind::waypoint, {a, x}}; }
  static ViolationAtom obstacle(AgentId a, int t, VertexId x) { return {ViolationKind::obstacle, {a, t, x}}; }
  static ViolationAtom min_battery(AgentId a, int t, Location loc) {
    return {ViolationKind::min_battery, {a, t, loc.raw()}};
  }

  friend bool operator==(const ViolationAtom&, const ViolationAtom&) = default;
  friend auto operator<=>(const ViolationAtom&, const ViolationAtom&) = default;
};

inline std::string to_string(const ViolationAtom& atom) {
  std::string s = std::string("violate_") + to_string(atom.kind) + "(";
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (i) s += ",";
    const bool loc_arg = atom.kind == ViolationKind::min_battery && i == 2;
    s += loc_arg ? to_string(Location(atom.args[i])) : std::to_string(atom.args[i]);
  }
  return s + ")";
}

inline json atom_to_json(const ViolationAtom& atom) {
  json args = json::array();
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (atom.kind == ViolationKind::min_battery && i == 2)
      args.push_back(location_to_json(Location(atom.args[i])));
    else
      args.push_back(atom.args[i]);
  }
  return json{{"kind", to_string(atom.kind)}, {"args", args}};
}

inline ViolationAtom atom_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"kind", "args"}, "violation atom");
  ViolationAtom atom;
  atom.kind = violation_kind_from_string(detail::require(j, "kind", "violation atom").get<std::string>());
  const json& args = detail::require(j, "args", "violation atom");
  if (!args.is_array() || args.size() != arity(atom.kind)) throw ParseError("violation atom: bad arity");
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (atom.kind == ViolationKind::min_battery && i == 2)
      atom.args.push_back(location_from_json(args[i]).raw());
    else
      atom.args.push_back(detail::as_int(args[i], "violation atom arg"));
  }
  return atom;
}

inline json atoms_to_json(std::vector<ViolationAtom> atoms) {
  std::sort(atoms.begin(), atoms.end());
  json out = json::array();
  for (const auto& a : atoms) out.push_back(atom_to_json(a));
  return out;
}

// ---------------------------------------------------------------------------
// Per-agent checks
// ---------------------------------------------------------------------------

struct Verdict {
  bool ok = true;
  int first_bad_t = -1;
  std::string reason;

  static Verdict fail(int t, std::string why) { return {false, t, std::move(why)}; }
};

/// Battery after a non-recharging step; an empty battery stays empty.
constexpr int drained(int level) { return level > 0 ? level - 1 : 0; }

inline Verdict check_traversal(const Instance& inst, const AgentSpec& agent, const std::vector<Step>& steps) {
  if (steps.empty()) return Verdict::fail(0, "no steps");
  if (steps.front().loc != Location(agent.init)) return Verdict::fail(0, "does not start at the initial location");
  const int last = static_cast<int>(steps.size()) - 1;
  for (int t = 0; t <= last; ++t) {
    const Location here = steps[static_cast<std::size_t>(t)].loc;
    if (here.is_vertex() && !inst.has_vertex(here.vertex())) return Verdict::fail(t, "unknown vertex");
    if (here.is_intransit()) {
      if (t == 0 || t == last) return Verdict::fail(t, "intransit at a plan boundary");
      const Location before = steps[static_cast<std::size_t>(t - 1)].loc;
      const Location after = steps[static_cast<std::size_t>(t + 1)].loc;
      if (before.is_intransit() || after.is_intransit()) return Verdict::fail(t, "consecutive intransit steps");
      auto mode = inst.edge_mode(before.vertex(), after.vertex());
      if (mode != EdgeMode::slow) return Verdict::fail(t, "intransit without a slow edge crossing");
      continue;
    }
    if (t == last) break;
    const Location next = steps[static_cast<std::size_t>(t + 1)].loc;
    if (next.is_intransit() || next == here) continue;  // crossing validated at t+1
    auto mode = inst.edge_mode(here.vertex(), next.vertex());
    if (!mode) return Verdict::fail(t + 1, "moves along a non-edge");
    if (*mode == EdgeMode::slow) return Verdict::fail(t + 1, "crosses a slow edge in one step");
  }
  return {};
}

inline Verdict check_battery(const Instance& inst, const AgentSpec& agent, const std::vector<Step>& steps) {
  if (steps.empty()) return Verdict::fail(0, "no steps");
  const int b = inst.max_battery();
  if (steps.front().battery != agent.init_battery) return Verdict::fail(0, "initial level differs from init_battery");
  for (std::size_t t = 0; t < steps.size(); ++t)
    if (steps[t].battery < 0 || steps[t].battery > b)
      return Verdict::fail(static_cast<int>(t), "level outside [0, max_battery]");
  for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
    const int level = steps[t].battery;
    const int next = steps[t + 1].battery;
    const Location loc = steps[t].loc;
    const bool at_charger = loc.is_vertex() && inst.is_charging(loc.vertex());
    const bool ok = next == drained(level) || (at_charger && next == b);
    if (!ok) return Verdict::fail(static_cast<int>(t + 1), "level does not follow the battery recurrence");
  }
  return {};
}

// ---------------------------------------------------------------------------
// Violation enumeration
// ---------------------------------------------------------------------------

namespace detail {

/// Whether the agent starts a slow crossing x -> intransit -> y at time t.
inline bool slow_start(const AgentPlan& p, int t, VertexId& x, VertexId& y) {
  if (t < 0 || t + 2 > p.length()) return false;
  if (!p.at(t).is_vertex() || !p.at(t + 1).is_intransit()) return false;
  x = p.at(t).vertex();
  y = p.at(t + 2).vertex();
  return true;
}

}  // namespace detail

/// All grounded violation atoms of the requested families, sorted.
inline std::vector<ViolationAtom> enumerate_violations(const Instance& inst, const Plan& plan, FamilySet families) {
  std::vector<ViolationAtom> out;
  const auto& ps = plan.agents;

  if (families.contains(Family::collision)) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = i + 1; j < ps.size(); ++j) {
        const AgentPlan& p1 = ps[i];
        const AgentPlan& p2 = ps[j];
        const int both = std::min(p1.length(), p2.length());
        for (int t = 0; t <= both; ++t) {
          const Location x = p1.at(t);
          if (x.is_vertex() && x == p2.at(t)) out.push_back(ViolationAtom::collision(p1.agent, p2.agent, t, x.vertex()));
        }
        for (int t = 0; t + 1 <= both; ++t) {
          const Location x = p1.at(t), y = p1.at(t + 1);
          if (!x.is_vertex() || !y.is_vertex() || x == y) continue;
          if (p2.at(t) == y && p2.at(t + 1) == x && inst.edge_mode(x.vertex(), y.vertex()) == EdgeMode::normal)
            out.push_back(ViolationAtom::swap(p1.agent, p2.agent, t, x.vertex(), y.vertex()));
        }
        // Opposite crossings of one slow edge.
        const int horizon = std::max(p1.length(), p2.length());
        for (int t = 0; t <= horizon; ++t) {
          VertexId x1 = 0, y1 = 0, x2 = 0, y2 = 0;
          const bool s1 = detail::slow_start(p1, t, x1, y1);
          const bool s2 = detail::slow_start(p2, t, x2, y2);
          if (s1 && s2 && x1 == y2 && y1 == x2)
            out.push_back(ViolationAtom::slow_collision2(p1.agent, p2.agent, t, x1, y1));
          if (t > 0) {
            VertexId px = 0, py = 0;
            if (s1 && detail::slow_start(p2, t - 1, px, py) && px == y1 && py == x1)
              out.push_back(ViolationAtom::slow_collision1(p1.agent, p2.agent, t, x1, y1));
            if (s2 && detail::slow_start(p1, t - 1, px, py) && px == y2 && py == x2)
              out.push_back(ViolationAtom::slow_collision1(p2.agent, p1.agent, t, x2, y2));
          }
        }
      }
    }
  }

  for (const AgentPlan& p : ps) {
    const AgentSpec* spec = inst.find_agent(p.agent);
    if (!spec) continue;
    auto visited = [&](VertexId v) {
      return std::any_of(p.steps.begin(), p.steps.end(), [&](const Step& s) { return s.loc == Location(v); });
    };
    if (families.contains(Family::goal) && !visited(spec->goal))
      out.push_back(ViolationAtom::goal(p.agent, spec->goal));
    if (families.contains(Family::waypoint))
      for (VertexId w : spec->waypoints)
        if (!visited(w)) out.push_back(ViolationAtom::waypoint(p.agent, w));
    if (families.contains(Family::obstacle))
      for (const Step& s : p.steps)
        if (s.loc.is_vertex() && inst.is_obstacle(s.loc.vertex()))
          out.push_back(ViolationAtom::obstacle(p.agent, s.t, s.loc.vertex()));
    if (families.contains(Family::battery))
      for (int t = 0; t < p.length(); ++t)
        if (p.battery_at(t) == 0) out.push_back(ViolationAtom::min_battery(p.agent, t, p.at(t)));
  }

  std::sort(out.begin(), out.end());
  return out;
}

struct AgentVerdicts {
  AgentId agent = 0;
  Verdict traversal;
  Verdict battery;
};

struct ValidationReport {
  std::vector<AgentVerdicts> agents;
  std::vector<ViolationAtom> violations;

  bool checks_pass() const {
    return std::all_of(agents.begin(), agents.end(),
                       [](const AgentVerdicts& a) { return a.traversal.ok && a.battery.ok; });
  }
  bool is_solution() const { return checks_pass() && violations.empty(); }
};

/// Composes traversal, battery and violation checks over every family.
/// Violations are only enumerated when the per-agent checks pass.
inline ValidationReport validate(const Instance& inst, const Plan& plan, FamilySet families = FamilySet::all()) {
  ValidationReport report;
  for (const AgentPlan& p : plan.agents) {
    AgentVerdicts v;
    v.agent = p.agent;
    const AgentSpec& spec = inst.agent(p.agent);
    v.traversal = check_traversal(inst, spec, p.steps);
    v.battery = check_battery(inst, spec, p.steps);
    report.agents.push_back(std::move(v));
  }
  if (report.checks_pass()) report.violations = enumerate_violations(inst, plan, families);
  return report;
}

inline json report_to_json(const ValidationReport& r) {
  json agents = json::array();
  for (const auto& a : r.agents) {
    auto verdict = [](const Verdict& v) {
      json j{{"ok", v.ok}};
      if (!v.ok) {
        j["first_bad_t"] = v.first_bad_t;
        j["reason"] = v.reason;
      }
      return j;
    };
    agents.push_back({{"id", a.agent}, {"traversal", verdict(a.traversal)}, {"battery", verdict(a.battery)}});
  }
  return json{{"solution", r.is_solution()}, {"agents", agents}, {"violations", atoms_to_json(r.violations)}};
}

}  // namespace mmapf
