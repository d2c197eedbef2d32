#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "mmapf/fixtures.hpp"
#include "mmapf/json_io.hpp"
#include "mmapf/model.hpp"
#include "naive.hpp"

namespace support {

using namespace mmapf;

struct Loaded {
  Instance inst;
  std::optional<Plan> plan;
};

inline Loaded fixture(const std::string& name) {
  for (const auto& f : bundled_fixtures()) {
    if (f.name != name) continue;
    Loaded l{load_instance(f.instance), std::nullopt};
    if (!f.plan.empty()) l.plan = load_plan(f.plan, l.inst);
    return l;
  }
  throw std::runtime_error("no bundled fixture named " + name);
}

inline json grid_doc(int rows, int cols, std::vector<int> slow = {}, std::vector<int> obstacles = {},
                     std::vector<int> charging = {}) {
  return json{{"rows", rows}, {"cols", cols}, {"slow", slow}, {"obstacles", obstacles}, {"charging", charging}};
}

/// Tiny random instance: grid <= 3x3, <= 2 agents, tau <= 6, b <= 4, <= 1
/// waypoint each. Large settings are drawn less often so that two-agent
/// instances stay small enough for exhaustive enumeration.
inline Instance tiny_instance(std::mt19937& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int rows = pick(1, 3);
  const int cols = pick(rows == 1 ? 2 : 1, 3);
  const int n = rows * cols;
  const int agents = n >= 2 && pick(0, 2) > 0 ? 2 : 1;
  const int tau_cap = agents == 2 && n >= 9 ? 5 : 6;
  const int tau = pick(2, tau_cap);
  const int b = pick(2, 4);

  std::vector<int> cells;
  for (int c = 1; c <= n; ++c) cells.push_back(c);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<int> slow, obstacles, charging;
  for (int c = 1; c <= n; ++c) {
    if (pick(0, 3) == 0) slow.push_back(c);
  }
  std::size_t next = 0;
  // Endpoints first so that obstacles never land on them.
  std::vector<json> agent_docs;
  std::vector<int> reserved;
  for (int a = 1; a <= agents; ++a) {
    const int init = cells[next++ % cells.size()];
    const int goal = pick(0, 3) == 0 ? init : cells[static_cast<std::size_t>(pick(0, n - 1))];
    std::vector<int> wps;
    if (pick(0, 1) == 1) wps.push_back(cells[static_cast<std::size_t>(pick(0, n - 1))]);
    reserved.push_back(init);
    reserved.push_back(goal);
    for (int w : wps) reserved.push_back(w);
    agent_docs.push_back(
        json{{"id", a}, {"init", init}, {"goal", goal}, {"waypoints", wps}, {"init_battery", pick(1, b)}});
  }
  for (int c = 1; c <= n; ++c) {
    if (std::find(reserved.begin(), reserved.end(), c) != reserved.end()) continue;
    const int r = pick(0, 9);
    if (r == 0) obstacles.push_back(c);
    else if (r <= 2) charging.push_back(c);
  }
  for (int c : reserved)
    if (pick(0, 5) == 0 && std::find(charging.begin(), charging.end(), c) == charging.end()) charging.push_back(c);

  static const std::vector<std::vector<std::string>> objectives{
      {"makespan"},
      {"makespan", "total_plan_length"},
      {"total_plan_length", "makespan"},
      {"makespan", "total_plan_length", "total_charge_count"},
      {"total_charge_count", "total_plan_length"}};
  json doc{{"grid", grid_doc(rows, cols, slow, obstacles, charging)},
           {"max_battery", b},
           {"tau", tau},
           {"objective", objectives[static_cast<std::size_t>(pick(0, 4))]},
           {"agents", agent_docs}};
  return instance_from_json(doc);
}

/// Random walk that follows the movement rules; battery follows the
/// recurrence with random charging choices. Ends wherever the walk stops.
inline naive::Seq random_walk(const Instance& inst, const AgentSpec& a, std::mt19937& rng, int max_len) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  naive::Seq s;
  s.id = a.id;
  s.loc.push_back(a.init);
  s.bat.push_back(a.init_battery);
  const int len = pick(0, max_len);
  int pending = 0;
  while (s.length() < len || s.loc.back() == 0) {
    const int here = s.loc.back();
    const int bat = s.bat.back();
    int next;
    if (here == 0) {
      next = pending;
    } else {
      const auto& nbrs = inst.neighbors(here);
      const int k = pick(0, static_cast<int>(nbrs.size()));
      if (k == static_cast<int>(nbrs.size())) {
        next = here;
      } else {
        const auto& nb = nbrs[static_cast<std::size_t>(k)];
        if (nb.mode == EdgeMode::slow && s.length() + 2 > len) {
          next = here;
        } else if (nb.mode == EdgeMode::slow) {
          next = 0;
          pending = nb.vertex;
        } else {
          next = nb.vertex;
        }
      }
    }
    const bool charger = here != 0 && inst.is_charging(here);
    const int level = charger && pick(0, 1) ? inst.max_battery() : (bat > 0 ? bat - 1 : 0);
    s.loc.push_back(next);
    s.bat.push_back(level);
  }
  return s;
}

inline Plan to_plan(const std::vector<naive::Seq>& seqs) {
  Plan p;
  for (const auto& s : seqs) p.agents.push_back(naive::to_plan(s));
  return p;
}

}  // namespace support
