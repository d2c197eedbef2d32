#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmapf/model.hpp"
#include "mmapf/queries.hpp"
#include "mmapf/semantics.hpp"

namespace mmapf {

enum class Tense : std::uint8_t { present, future };

namespace text {

inline std::string robot(AgentId a) { return "Robot " + std::to_string(a); }
inline std::string cell(VertexId x) { return "Cell " + std::to_string(x); }
inline std::string at_time(int t) { return " at time step " + std::to_string(t); }

/// "a", "a and b", "a, b and c".
inline std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

/// One clause per collision pair or per atom; battery atoms only cite the
/// earliest time per agent. `self` becomes "it"/"its".
inline std::vector<std::string> phrases(const std::vector<ViolationAtom>& atoms, Tense tense, AgentId self = 0) {
  const bool fut = tense == Tense::future;
  auto subject = [&](AgentId a) { return a == self ? std::string("it") : robot(a); };
  auto verb = [&](const char* present3, const char* base) {
    return fut ? std::string("will ") + base : std::string(present3);
  };
  std::vector<std::string> out;
  std::map<std::pair<int, int>, std::vector<std::string>> collisions;
  std::vector<std::pair<int, int>> pair_order;
  std::map<int, int> first_empty;
  for (const auto& a : atoms) {
    const auto& g = a.args;
    switch (a.kind) {
      case ViolationKind::collision: {
        const auto key = std::make_pair(g[0], g[1]);
        if (!collisions.count(key)) pair_order.push_back(key);
        collisions[key].push_back("at " + cell(g[3]) + at_time(g[2]));
        break;
      }
      default: break;
    }
  }
  for (const auto& key : pair_order) {
    out.push_back(robot(key.first) + " and " + robot(key.second) + " " +
                  (fut ? "will collide with each other " : "collide ") + join(collisions[key]));
  }
  for (const auto& a : atoms) {
    const auto& g = a.args;
    switch (a.kind) {
      case ViolationKind::collision: break;
      case ViolationKind::swap:
        out.push_back(robot(g[0]) + " and " + robot(g[1]) + " " + verb("swap", "swap") + " " + cell(g[3]) +
                      " and " + cell(g[4]) + at_time(g[2]));
        break;
      case ViolationKind::slow_collision1:
      case ViolationKind::slow_collision2:
        out.push_back(robot(g[0]) + " and " + robot(g[1]) + " " + verb("meet", "meet") +
                      " on the slow edge between " + cell(g[3]) + " and " + cell(g[4]) + at_time(g[2]));
        break;
      case ViolationKind::goal:
        out.push_back(subject(g[0]) + (fut ? " will not be able to reach " : " cannot reach ") +
                      "its goal at " + cell(g[1]));
        break;
      case ViolationKind::waypoint:
        out.push_back(subject(g[0]) + (fut ? " will not be able to visit " : " cannot visit ") +
                      "its waypoint at " + cell(g[1]));
        break;
      case ViolationKind::obstacle:
        out.push_back(subject(g[0]) + " " + verb("collides", "collide") + " with the obstacle at " + cell(g[2]) +
                      at_time(g[1]));
        break;
      case ViolationKind::min_battery: {
        if (!first_empty.emplace(g[0], g[1]).second) break;
        const std::string owner = g[0] == self ? std::string("its") : robot(g[0]) + "'s";
        out.push_back(owner + " battery " + verb("runs", "run") + " out" + at_time(g[1]));
        break;
      }
    }
  }
  return out;
}

/// "Robot a: 11, 11, 7, 6, 5" per line.
inline std::string plan_lines(const Plan& plan) {
  std::string out;
  for (const auto& p : plan.agents) {
    out += "\n" + robot(p.agent) + ":";
    for (std::size_t i = 0; i < p.steps.size(); ++i) out += (i ? ", " : " ") + to_string(p.steps[i].loc);
  }
  return out;
}

/// The claim an alternative plan refutes.
inline std::string alternative_head(const Query& q) {
  const std::string r = robot(q.agent);
  const std::string x = cell(q.x);
  switch (q.kind) {
    case QueryKind::QW1: return "Actually, " + r + " does not have to wait at " + x + ".";
    case QueryKind::QW2: return "Actually, " + r + " does not have to wait at " + x + at_time(q.s) + ".";
    case QueryKind::QW3:
      return "Actually, " + r + " does not have to wait at " + x + at_time(q.s) + " for " + std::to_string(q.n) +
             " steps.";
    case QueryKind::QW4:
      return "Actually, " + r + " can wait at " + x + at_time(q.s) + " for less than " + std::to_string(q.n) +
             " steps.";
    case QueryKind::QC1: return "Actually, " + r + " does not have to charge at " + x + ".";
    case QueryKind::QC2: return "Actually, " + r + " does not have to charge" + at_time(q.s) + ".";
    case QueryKind::QC3: return "Actually, " + r + " does not have to charge at " + x + at_time(q.s) + ".";
    case QueryKind::QC4: return "Actually, " + r + " can charge less than " + std::to_string(q.m) + " times.";
    case QueryKind::QP1:
      return "Actually, " + r + " can follow a shorter plan whose length is smaller than " + std::to_string(q.l) + ".";
    case QueryKind::QP2: return "Actually, " + r + " does not have to visit " + x + ".";
    case QueryKind::QP3: return "Actually, " + r + " does not have to visit " + x + at_time(q.s) + ".";
    case QueryKind::QP4: return "Actually, " + r + " does not have to move from " + x + " to " + cell(q.y) + ".";
    case QueryKind::QP5:
      return "Actually, " + r + " does not have to move from " + x + " to " + cell(q.y) + at_time(q.s) + ".";
    case QueryKind::QU: break;
  }
  return "";
}

/// The claim a counterfactual supports (no trailing punctuation).
inline std::string counterfactual_head(const Query& q) {
  const std::string r = robot(q.agent);
  const std::string x = cell(q.x);
  switch (q.kind) {
    case QueryKind::QW1: return r + " has to wait at " + x;
    case QueryKind::QW2: return r + " has to wait at " + x + at_time(q.s);
    case QueryKind::QW3: return r + " has to wait at " + x + at_time(q.s) + " for " + std::to_string(q.n) + " steps";
    case QueryKind::QW4:
      return r + " cannot wait at " + x + at_time(q.s) + " for less than " + std::to_string(q.n) + " steps";
    case QueryKind::QC1: return r + " has to charge at " + x;
    case QueryKind::QC2: return r + " has to charge" + at_time(q.s);
    case QueryKind::QC3: return r + " has to charge at " + x + at_time(q.s);
    case QueryKind::QC4: return r + " cannot charge less than " + std::to_string(q.m) + " times";
    case QueryKind::QP1:
      return r + " cannot follow a shorter plan whose length is smaller than " + std::to_string(q.l);
    case QueryKind::QP2: return r + " has to visit " + x;
    case QueryKind::QP3: return r + " has to visit " + x + at_time(q.s);
    case QueryKind::QP4: return r + " has to move from " + x + " to " + cell(q.y);
    case QueryKind::QP5: return r + " has to move from " + x + " to " + cell(q.y) + at_time(q.s);
    case QueryKind::QU: break;
  }
  return "";
}

}  // namespace text
}  // namespace mmapf
