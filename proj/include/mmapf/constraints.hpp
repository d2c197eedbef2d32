#pragma once

#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mmapf/json_io.hpp"
#include "mmapf/model.hpp"

namespace mmapf {

// Builtin hard constraint forms. Every form is about one agent.
struct ForbidWait { AgentId agent; VertexId x; };
struct ForbidWaitAt { AgentId agent; VertexId x; int s; };
/// Forbids occupying x at every t in [s, s+n].
struct ForbidWaitRun { AgentId agent; VertexId x; int s; int n; };
/// Fewer than n waits at x among transitions t in [s, s+n).
struct CapWaitCount { AgentId agent; VertexId x; int s; int n; };
struct ForbidChargeAt { AgentId agent; VertexId x; };
struct ForbidChargeTime { AgentId agent; int s; };
struct ForbidChargeAtTime { AgentId agent; VertexId x; int s; };
/// Fewer than m time steps t > 0 at full battery.
struct CapChargeCount { AgentId agent; int m; };
/// Plan length strictly below l.
struct CapPlanLength { AgentId agent; int l; };
struct ForbidVisit { AgentId agent; VertexId x; };
struct ForbidVisitAt { AgentId agent; VertexId x; int s; };
/// Covers both a normal move x->y and a slow crossing x->intransit->y.
struct ForbidMove { AgentId agent; VertexId x; VertexId y; };
struct ForbidMoveAt { AgentId agent; VertexId x; VertexId y; int s; };
/// Pins the whole location sequence (and therefore the plan length).
struct FixTraversal { AgentId agent; std::vector<Location> sequence; };

using ConstraintBody =
    std::variant<ForbidWait, ForbidWaitAt, ForbidWaitRun, CapWaitCount, ForbidChargeAt, ForbidChargeTime,
                 ForbidChargeAtTime, CapChargeCount, CapPlanLength, ForbidVisit, ForbidVisitAt, ForbidMove,
                 ForbidMoveAt, FixTraversal>;

/// What an agent does between t and t+1, as seen by constraint monitors.
struct StepEvent {
  int t = 0;
  Location from;
  Location to;
  VertexId slow_target = 0;  // set when `to` is intransit
  int battery_next = 0;
  bool from_charging = false;
};

class HardConstraint {
 public:
  HardConstraint() = default;
  HardConstraint(ConstraintBody body, std::string tag = "builtin") : body_(std::move(body)), tag_(std::move(tag)) {}

  const ConstraintBody& body() const { return body_; }
  const std::string& tag() const { return tag_; }

  AgentId agent() const {
    return std::visit([](const auto& c) { return c.agent; }, body_);
  }

  const char* type_name() const;
  std::string render() const;

  // Incremental monitor. A rejection on a prefix implies rejection of all of
  // its extensions. `state` starts at 0.

  bool check_initial(Location loc0) const {
    return std::visit(
        [&](const auto& c) -> bool {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, ForbidVisit>) return loc0 != Location(c.x);
          if constexpr (std::is_same_v<C, ForbidVisitAt>) return !(c.s == 0 && loc0 == Location(c.x));
          if constexpr (std::is_same_v<C, CapPlanLength>) return c.l > 0;
          if constexpr (std::is_same_v<C, FixTraversal>) return !c.sequence.empty() && c.sequence.front() == loc0;
          return true;
        },
        body_);
  }

  bool step(int& state, const StepEvent& e, int max_battery) const {
    const bool waits = e.from.is_vertex() && e.from == e.to;
    const bool recharged = e.from_charging && e.battery_next == max_battery;
    return std::visit(
        [&](const auto& c) -> bool {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, ForbidWait>) {
            return !(waits && e.from == Location(c.x));
          } else if constexpr (std::is_same_v<C, ForbidWaitAt>) {
            return !(waits && e.t == c.s && e.from == Location(c.x));
          } else if constexpr (std::is_same_v<C, ForbidWaitRun>) {
            if (state < 0 || e.t < c.s || e.t >= c.s + c.n) return true;
            if (waits && e.from == Location(c.x) && state == e.t - c.s) {
              ++state;
              return state < c.n;
            }
            state = -1;
            return true;
          } else if constexpr (std::is_same_v<C, CapWaitCount>) {
            if (waits && e.from == Location(c.x) && e.t >= c.s && e.t < c.s + c.n) ++state;
            return state < c.n;
          } else if constexpr (std::is_same_v<C, ForbidChargeAt>) {
            return !(recharged && e.from == Location(c.x));
          } else if constexpr (std::is_same_v<C, ForbidChargeTime>) {
            return !(recharged && e.t == c.s);
          } else if constexpr (std::is_same_v<C, ForbidChargeAtTime>) {
            return !(recharged && e.t == c.s && e.from == Location(c.x));
          } else if constexpr (std::is_same_v<C, CapChargeCount>) {
            if (e.battery_next == max_battery) ++state;
            return state < c.m;
          } else if constexpr (std::is_same_v<C, CapPlanLength>) {
            return e.t + 1 < c.l;
          } else if constexpr (std::is_same_v<C, ForbidVisit>) {
            return e.to != Location(c.x);
          } else if constexpr (std::is_same_v<C, ForbidVisitAt>) {
            return !(e.t + 1 == c.s && e.to == Location(c.x));
          } else if constexpr (std::is_same_v<C, ForbidMove>) {
            return !moves(e, c.x, c.y);
          } else if constexpr (std::is_same_v<C, ForbidMoveAt>) {
            return !(e.t == c.s && moves(e, c.x, c.y));
          } else if constexpr (std::is_same_v<C, FixTraversal>) {
            const auto next = static_cast<std::size_t>(e.t + 1);
            return next < c.sequence.size() && c.sequence[next] == e.to;
          }
          return true;
        },
        body_);
  }

  bool check_final(int /*state*/, int length) const {
    return std::visit(
        [&](const auto& c) -> bool {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, CapPlanLength>) return length < c.l;
          if constexpr (std::is_same_v<C, FixTraversal>) return length + 1 == static_cast<int>(c.sequence.size());
          return true;
        },
        body_);
  }

  /// Evaluates the constraint on a complete plan.
  bool holds(const Instance& inst, const Plan& plan) const {
    const AgentPlan* p = plan.find(agent());
    if (!p) return true;
    return holds(inst, *p);
  }

  bool holds(const Instance& inst, const AgentPlan& p) const {
    if (p.steps.empty()) return true;
    if (!check_initial(p.at(0))) return false;
    int state = 0;
    for (int t = 0; t < p.length(); ++t) {
      StepEvent e;
      e.t = t;
      e.from = p.at(t);
      e.to = p.at(t + 1);
      if (e.to.is_intransit() && t + 2 <= p.length()) e.slow_target = p.at(t + 2).vertex();
      e.battery_next = p.battery_at(t + 1);
      e.from_charging = e.from.is_vertex() && inst.is_charging(e.from.vertex());
      if (!step(state, e, inst.max_battery())) return false;
    }
    return check_final(state, p.length());
  }

  friend bool operator==(const HardConstraint& a, const HardConstraint& b) {
    return a.to_json_body() == b.to_json_body();
  }

  json to_json() const {
    json j = to_json_body();
    j["tag"] = tag_;
    j["text"] = render();
    return j;
  }

 private:
  static bool moves(const StepEvent& e, VertexId x, VertexId y) {
    if (e.from != Location(x)) return false;
    if (e.to == Location(y)) return true;
    return e.to.is_intransit() && e.slow_target == y;
  }

  json to_json_body() const;

  ConstraintBody body_{ForbidWait{0, 0}};
  std::string tag_ = "builtin";
};

inline const char* HardConstraint::type_name() const {
  return std::visit(
      [](const auto& c) -> const char* {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, ForbidWait>) return "ForbidWait";
        if constexpr (std::is_same_v<C, ForbidWaitAt>) return "ForbidWaitAt";
        if constexpr (std::is_same_v<C, ForbidWaitRun>) return "ForbidWaitRun";
        if constexpr (std::is_same_v<C, CapWaitCount>) return "CapWaitCount";
        if constexpr (std::is_same_v<C, ForbidChargeAt>) return "ForbidChargeAt";
        if constexpr (std::is_same_v<C, ForbidChargeTime>) return "ForbidChargeTime";
        if constexpr (std::is_same_v<C, ForbidChargeAtTime>) return "ForbidChargeAtTime";
        if constexpr (std::is_same_v<C, CapChargeCount>) return "CapChargeCount";
        if constexpr (std::is_same_v<C, CapPlanLength>) return "CapPlanLength";
        if constexpr (std::is_same_v<C, ForbidVisit>) return "ForbidVisit";
        if constexpr (std::is_same_v<C, ForbidVisitAt>) return "ForbidVisitAt";
        if constexpr (std::is_same_v<C, ForbidMove>) return "ForbidMove";
        if constexpr (std::is_same_v<C, ForbidMoveAt>) return "ForbidMoveAt";
        if constexpr (std::is_same_v<C, FixTraversal>) return "FixTraversal";
        return "?";
      },
      body_);
}

inline std::string HardConstraint::render() const {
  auto robot = [](AgentId a) { return "Robot " + std::to_string(a); };
  auto cell = [](VertexId x) { return "Cell " + std::to_string(x); };
  auto at = [](int s) { return " at time step " + std::to_string(s); };
  return std::visit(
      [&](const auto& c) -> std::string {
        using C = std::decay_t<decltype(c)>;
        const std::string r = robot(c.agent);
        if constexpr (std::is_same_v<C, ForbidWait>) return r + " never waits at " + cell(c.x);
        if constexpr (std::is_same_v<C, ForbidWaitAt>) return r + " does not wait at " + cell(c.x) + at(c.s);
        if constexpr (std::is_same_v<C, ForbidWaitRun>)
          return r + " does not stay at " + cell(c.x) + " from time step " + std::to_string(c.s) + " to " +
                 std::to_string(c.s + c.n);
        if constexpr (std::is_same_v<C, CapWaitCount>)
          return r + " waits fewer than " + std::to_string(c.n) + " times at " + cell(c.x) + " within time steps " +
                 std::to_string(c.s) + ".." + std::to_string(c.s + c.n - 1);
        if constexpr (std::is_same_v<C, ForbidChargeAt>) return r + " never charges at " + cell(c.x);
        if constexpr (std::is_same_v<C, ForbidChargeTime>) return r + " does not charge" + at(c.s);
        if constexpr (std::is_same_v<C, ForbidChargeAtTime>) return r + " does not charge at " + cell(c.x) + at(c.s);
        if constexpr (std::is_same_v<C, CapChargeCount>)
          return r + " is fully charged fewer than " + std::to_string(c.m) + " times";
        if constexpr (std::is_same_v<C, CapPlanLength>)
          return r + " has a plan shorter than " + std::to_string(c.l);
        if constexpr (std::is_same_v<C, ForbidVisit>) return r + " never visits " + cell(c.x);
        if constexpr (std::is_same_v<C, ForbidVisitAt>) return r + " is not at " + cell(c.x) + at(c.s);
        if constexpr (std::is_same_v<C, ForbidMove>) return r + " never moves from " + cell(c.x) + " to " + cell(c.y);
        if constexpr (std::is_same_v<C, ForbidMoveAt>)
          return r + " does not move from " + cell(c.x) + " to " + cell(c.y) + at(c.s);
        if constexpr (std::is_same_v<C, FixTraversal>) {
          std::string s = r + " follows";
          for (std::size_t i = 0; i < c.sequence.size(); ++i) s += (i ? ", " : " ") + to_string(c.sequence[i]);
          return s;
        }
        return "?";
      },
      body_);
}

inline json HardConstraint::to_json_body() const {
  json j;
  j["type"] = type_name();
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        j["agent"] = c.agent;
        if constexpr (requires { c.x; }) j["x"] = c.x;
        if constexpr (requires { c.y; }) j["y"] = c.y;
        if constexpr (requires { c.s; }) j["s"] = c.s;
        if constexpr (requires { c.n; }) j["n"] = c.n;
        if constexpr (requires { c.m; }) j["m"] = c.m;
        if constexpr (requires { c.l; }) j["l"] = c.l;
        if constexpr (std::is_same_v<C, FixTraversal>) {
          json seq = json::array();
          for (auto loc : c.sequence) seq.push_back(location_to_json(loc));
          j["sequence"] = seq;
        }
      },
      body_);
  return j;
}

/// Inverse of HardConstraint::to_json (the "text" key is ignored).
inline HardConstraint constraint_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ParseError("constraint: expected an object");
  const std::string type = require(j, "type", "constraint").get<std::string>();
  const AgentId a = as_int(require(j, "agent", "constraint"), "constraint.agent");
  auto get = [&](const char* k) { return as_int(require(j, k, "constraint"), std::string("constraint.") + k); };
  const std::string tag = j.value("tag", std::string("builtin"));
  if (type == "ForbidWait") return {ForbidWait{a, get("x")}, tag};
  if (type == "ForbidWaitAt") return {ForbidWaitAt{a, get("x"), get("s")}, tag};
  if (type == "ForbidWaitRun") return {ForbidWaitRun{a, get("x"), get("s"), get("n")}, tag};
  if (type == "CapWaitCount") return {CapWaitCount{a, get("x"), get("s"), get("n")}, tag};
  if (type == "ForbidChargeAt") return {ForbidChargeAt{a, get("x")}, tag};
  if (type == "ForbidChargeTime") return {ForbidChargeTime{a, get("s")}, tag};
  if (type == "ForbidChargeAtTime") return {ForbidChargeAtTime{a, get("x"), get("s")}, tag};
  if (type == "CapChargeCount") return {CapChargeCount{a, get("m")}, tag};
  if (type == "CapPlanLength") return {CapPlanLength{a, get("l")}, tag};
  if (type == "ForbidVisit") return {ForbidVisit{a, get("x")}, tag};
  if (type == "ForbidVisitAt") return {ForbidVisitAt{a, get("x"), get("s")}, tag};
  if (type == "ForbidMove") return {ForbidMove{a, get("x"), get("y")}, tag};
  if (type == "ForbidMoveAt") return {ForbidMoveAt{a, get("x"), get("y"), get("s")}, tag};
  if (type == "FixTraversal") {
    FixTraversal f{a, {}};
    const json& seq = require(j, "sequence", "constraint");
    if (!seq.is_array()) throw ParseError("constraint.sequence: expected an array");
    for (const auto& l : seq) f.sequence.push_back(location_from_json(l));
    return {f, tag};
  }
  throw ParseError("constraint: unknown type '" + type + "'");
}

}  // namespace mmapf
