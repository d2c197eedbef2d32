#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmapf {

using VertexId = int;
using AgentId = int;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EdgeMode : std::uint8_t { normal, slow };

struct Edge {
  VertexId u = 0;
  VertexId v = 0;
  EdgeMode mode = EdgeMode::normal;

  friend bool operator==(const Edge&, const Edge&) = default;
};

enum class ObjectiveTerm : std::uint8_t { makespan, total_plan_length, total_charge_count };

inline const char* to_string(ObjectiveTerm term) {
  switch (term) {
    case ObjectiveTerm::makespan: return "makespan";
    case ObjectiveTerm::total_plan_length: return "total_plan_length";
    case ObjectiveTerm::total_charge_count: return "total_charge_count";
  }
  return "?";
}

inline ObjectiveTerm objective_from_string(const std::string& s) {
  if (s == "makespan") return ObjectiveTerm::makespan;
  if (s == "total_plan_length") return ObjectiveTerm::total_plan_length;
  if (s == "total_charge_count") return ObjectiveTerm::total_charge_count;
  throw ParseError("unknown objective term '" + s + "'");
}

struct AgentSpec {
  AgentId id = 0;
  VertexId init = 0;
  VertexId goal = 0;
  std::vector<VertexId> waypoints;  // sorted, unique
  int init_battery = 0;

  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

/// A vertex id or the intransit pseudo-location. Vertex ids are positive, so
/// zero encodes intransit.
class Location {
 public:
  constexpr Location() = default;
  constexpr explicit Location(VertexId v) : v_(v) {}

  static constexpr Location intransit() { return Location{}; }

  constexpr bool is_intransit() const { return v_ == 0; }
  constexpr bool is_vertex() const { return v_ != 0; }
  constexpr VertexId vertex() const { return v_; }
  /// Raw encoding used in violation atom arguments (0 == intransit).
  constexpr int raw() const { return v_; }

  friend constexpr bool operator==(Location, Location) = default;
  friend constexpr auto operator<=>(Location, Location) = default;

 private:
  VertexId v_ = 0;
};

inline std::string to_string(Location loc) {
  return loc.is_intransit() ? std::string("intransit") : std::to_string(loc.vertex());
}

/// Warehouse world. Immutable after construction; use Instance::Builder or
/// the JSON loader.
class Instance {
 public:
  struct Neighbor {
    VertexId vertex;
    EdgeMode mode;
  };

  struct Data {
    std::vector<VertexId> vertices;
    std::vector<Edge> edges;
    std::vector<VertexId> obstacles;
    std::vector<VertexId> charging;
    std::optional<std::vector<VertexId>> endpoints;
    bool strict_endpoints = false;
    std::vector<AgentSpec> agents;
    int max_battery = 1;
    int tau = 1;
    std::vector<ObjectiveTerm> objective{ObjectiveTerm::makespan};
  };

  Instance() = default;

  /// Validates every invariant; throws ValidationError naming the first breach.
  explicit Instance(Data data) : d_(std::move(data)) {
    normalize();
    validate();
    index();
  }

  const std::vector<VertexId>& vertices() const { return d_.vertices; }
  const std::vector<Edge>& edges() const { return d_.edges; }
  const std::vector<VertexId>& obstacles() const { return d_.obstacles; }
  const std::vector<VertexId>& charging() const { return d_.charging; }
  const std::optional<std::vector<VertexId>>& endpoints() const { return d_.endpoints; }
  bool strict_endpoints() const { return d_.strict_endpoints; }
  const std::vector<AgentSpec>& agents() const { return d_.agents; }
  int max_battery() const { return d_.max_battery; }
  int tau() const { return d_.tau; }
  const std::vector<ObjectiveTerm>& objective() const { return d_.objective; }
  const Data& data() const { return d_; }

  bool has_vertex(VertexId v) const { return dense_.count(v) != 0; }
  /// Dense 0-based index of a vertex; throws for unknown ids.
  int index_of(VertexId v) const {
    auto it = dense_.find(v);
    if (it == dense_.end()) throw ValidationError("unknown vertex " + std::to_string(v));
    return it->second;
  }
  VertexId vertex_at(int index) const { return d_.vertices[static_cast<std::size_t>(index)]; }
  std::size_t vertex_count() const { return d_.vertices.size(); }

  bool is_obstacle(VertexId v) const { return obstacle_.count(v) != 0; }
  bool is_charging(VertexId v) const { return charging_.count(v) != 0; }

  /// Neighbors sorted by ascending vertex id.
  const std::vector<Neighbor>& neighbors(VertexId v) const {
    return adjacency_[static_cast<std::size_t>(index_of(v))];
  }

  std::optional<EdgeMode> edge_mode(VertexId u, VertexId v) const {
    if (!has_vertex(u)) return std::nullopt;
    for (const auto& n : neighbors(u))
      if (n.vertex == v) return n.mode;
    return std::nullopt;
  }

  const AgentSpec* find_agent(AgentId id) const {
    for (const auto& a : d_.agents)
      if (a.id == id) return &a;
    return nullptr;
  }
  const AgentSpec& agent(AgentId id) const {
    const auto* a = find_agent(id);
    if (!a) throw ValidationError("unknown agent " + std::to_string(id));
    return *a;
  }

  friend bool operator==(const Instance& a, const Instance& b) {
    const Data& x = a.d_;
    const Data& y = b.d_;
    return x.vertices == y.vertices && x.edges == y.edges && x.obstacles == y.obstacles &&
           x.charging == y.charging && x.endpoints == y.endpoints &&
           x.strict_endpoints == y.strict_endpoints && x.agents == y.agents &&
           x.max_battery == y.max_battery && x.tau == y.tau && x.objective == y.objective;
  }

 private:
  static void sort_unique(std::vector<VertexId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  void normalize() {
    sort_unique(d_.vertices);
    sort_unique(d_.obstacles);
    sort_unique(d_.charging);
    if (d_.endpoints) sort_unique(*d_.endpoints);
    for (auto& e : d_.edges)
      if (e.u > e.v) std::swap(e.u, e.v);
    std::sort(d_.edges.begin(), d_.edges.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.u, a.v) < std::pair(b.u, b.v);
    });
    for (auto& a : d_.agents) sort_unique(a.waypoints);
    std::sort(d_.agents.begin(), d_.agents.end(),
              [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError(what); };
    std::set<VertexId> vs(d_.vertices.begin(), d_.vertices.end());
    auto known = [&](VertexId v) { return vs.count(v) != 0; };
    if (d_.vertices.empty()) fail("instance has no vertices");
    for (VertexId v : d_.vertices)
      if (v <= 0) fail("vertex ids must be positive, got " + std::to_string(v));
    if (d_.max_battery <= 0) fail("max_battery must be positive");
    if (d_.tau <= 0) fail("tau must be positive");
    if (d_.objective.empty()) fail("objective must list at least one term");
    {
      std::set<ObjectiveTerm> seen;
      for (auto t : d_.objective)
        if (!seen.insert(t).second) fail(std::string("duplicate objective term ") + to_string(t));
    }
    for (std::size_t i = 0; i < d_.edges.size(); ++i) {
      const Edge& e = d_.edges[i];
      if (!known(e.u) || !known(e.v))
        fail("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") has an unknown endpoint");
      if (e.u == e.v) fail("self-loop edge at vertex " + std::to_string(e.u));
      if (i > 0 && d_.edges[i - 1].u == e.u && d_.edges[i - 1].v == e.v)
        fail("duplicate edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    }
    for (VertexId v : d_.obstacles)
      if (!known(v)) fail("obstacle " + std::to_string(v) + " is not a vertex");
    for (VertexId v : d_.charging) {
      if (!known(v)) fail("charging station " + std::to_string(v) + " is not a vertex");
      if (std::binary_search(d_.obstacles.begin(), d_.obstacles.end(), v))
        fail("vertex " + std::to_string(v) + " is both an obstacle and a charging station");
    }
    if (d_.endpoints)
      for (VertexId v : *d_.endpoints)
        if (!known(v)) fail("endpoint " + std::to_string(v) + " is not a vertex");
    auto is_obst = [&](VertexId v) {
      return std::binary_search(d_.obstacles.begin(), d_.obstacles.end(), v);
    };
    std::set<AgentId> ids;
    for (const auto& a : d_.agents) {
      const std::string who = "agent " + std::to_string(a.id);
      if (a.id <= 0) fail("agent ids must be positive, got " + std::to_string(a.id));
      if (!ids.insert(a.id).second) fail("duplicate agent id " + std::to_string(a.id));
      if (!known(a.init)) fail(who + ": init " + std::to_string(a.init) + " is not a vertex");
      if (!known(a.goal)) fail(who + ": goal " + std::to_string(a.goal) + " is not a vertex");
      if (is_obst(a.init)) fail(who + ": init " + std::to_string(a.init) + " is on an obstacle");
      if (is_obst(a.goal)) fail(who + ": goal " + std::to_string(a.goal) + " is on an obstacle");
      for (VertexId w : a.waypoints) {
        if (!known(w)) fail(who + ": waypoint " + std::to_string(w) + " is not a vertex");
        if (is_obst(w)) fail(who + ": waypoint " + std::to_string(w) + " is on an obstacle");
      }
      if (a.init_battery <= 0 || a.init_battery > d_.max_battery)
        fail(who + ": init_battery must lie in [1, max_battery]");
      if (d_.strict_endpoints && d_.endpoints) {
        const auto& s = *d_.endpoints;
        if (!std::binary_search(s.begin(), s.end(), a.init) ||
            !std::binary_search(s.begin(), s.end(), a.goal))
          fail(who + ": init/goal outside the endpoint set (strict mode)");
      }
    }
  }

  void index() {
    for (std::size_t i = 0; i < d_.vertices.size(); ++i) dense_[d_.vertices[i]] = static_cast<int>(i);
    adjacency_.assign(d_.vertices.size(), {});
    for (const auto& e : d_.edges) {
      adjacency_[static_cast<std::size_t>(dense_[e.u])].push_back({e.v, e.mode});
      adjacency_[static_cast<std::size_t>(dense_[e.v])].push_back({e.u, e.mode});
    }
    for (auto& adj : adjacency_)
      std::sort(adj.begin(), adj.end(),
                [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
    obstacle_ = std::set<VertexId>(d_.obstacles.begin(), d_.obstacles.end());
    charging_ = std::set<VertexId>(d_.charging.begin(), d_.charging.end());
  }

  Data d_;
  std::map<VertexId, int> dense_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::set<VertexId> obstacle_;
  std::set<VertexId> charging_;
};

/// Rectangular grid convenience encoding. Cells are numbered row-major from 1.
struct GridShorthand {
  int rows = 1;
  int cols = 1;
  std::vector<VertexId> slow_cells;
  std::vector<VertexId> obstacle_cells;
  std::vector<VertexId> charging_cells;

  /// 4-neighbor adjacency. An edge is slow iff both endpoint cells are slow.
  void expand_into(Instance::Data& out) const {
    if (rows <= 0 || cols <= 0) throw ValidationError("grid dimensions must be positive");
    const int n = rows * cols;
    auto check = [&](const std::vector<VertexId>& cells, const char* what) {
      for (VertexId c : cells)
        if (c < 1 || c > n)
          throw ValidationError(std::string(what) + " cell " + std::to_string(c) + " is outside the grid");
    };
    check(slow_cells, "slow");
    check(obstacle_cells, "obstacle");
    check(charging_cells, "charging");
    std::set<VertexId> slow(slow_cells.begin(), slow_cells.end());
    out.vertices.clear();
    out.edges.clear();
    for (int c = 1; c <= n; ++c) out.vertices.push_back(c);
    auto mode = [&](VertexId a, VertexId b) {
      return slow.count(a) && slow.count(b) ? EdgeMode::slow : EdgeMode::normal;
    };
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const VertexId id = r * cols + c + 1;
        if (c + 1 < cols) out.edges.push_back({id, id + 1, mode(id, id + 1)});
        if (r + 1 < rows) out.edges.push_back({id, id + cols, mode(id, id + cols)});
      }
    }
    out.obstacles = obstacle_cells;
    out.charging = charging_cells;
  }
};

/// One timed step of an agent's plan.
struct Step {
  int t = 0;
  Location loc;
  int battery = 0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct AgentPlan {
  AgentId agent = 0;
  std::vector<Step> steps;

  /// L_a: index of the last step.
  int length() const { return static_cast<int>(steps.size()) - 1; }
  Location at(int t) const { return steps[static_cast<std::size_t>(t)].loc; }
  int battery_at(int t) const { return steps[static_cast<std::size_t>(t)].battery; }

  friend bool operator==(const AgentPlan&, const AgentPlan&) = default;
};

struct Plan {
  std::vector<AgentPlan> agents;  // sorted by agent id

  const AgentPlan* find(AgentId id) const {
    for (const auto& a : agents)
      if (a.agent == id) return &a;
    return nullptr;
  }
  const AgentPlan& of(AgentId id) const {
    const auto* p = find(id);
    if (!p) throw ValidationError("plan has no entry for agent " + std::to_string(id));
    return *p;
  }
  int makespan() const {
    int m = 0;
    for (const auto& a : agents) m = std::max(m, a.length());
    return m;
  }

  friend bool operator==(const Plan&, const Plan&) = default;
};

/// Whether a plan must end on each agent's goal. Plans produced under a
/// softened goal family may end elsewhere.
enum class EndRule : std::uint8_t { at_goal, anywhere };

/// Structural checks only: contiguity, endpoints, horizon, battery upper bound.
/// Throws ValidationError.
inline void check_plan_structure(const Plan& plan, const Instance& inst,
                                 EndRule end_rule = EndRule::at_goal) {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  std::set<AgentId> seen;
  for (const auto& ap : plan.agents) {
    const std::string who = "agent " + std::to_string(ap.agent);
    const AgentSpec* spec = inst.find_agent(ap.agent);
    if (!spec) fail("plan mentions unknown " + who);
    if (!seen.insert(ap.agent).second) fail("plan lists " + who + " twice");
    if (ap.steps.empty()) fail(who + ": plan has no steps");
    for (std::size_t i = 0; i < ap.steps.size(); ++i) {
      const Step& s = ap.steps[i];
      if (s.t != static_cast<int>(i))
        fail(who + ": steps are not contiguous from t=0 (found t=" + std::to_string(s.t) + " at index " +
             std::to_string(i) + ")");
      if (s.loc.is_vertex() && !inst.has_vertex(s.loc.vertex()))
        fail(who + ": unknown vertex " + std::to_string(s.loc.vertex()) + " at t=" + std::to_string(s.t));
      if (s.battery > inst.max_battery() || s.battery < 0)
        fail(who + ": battery " + std::to_string(s.battery) + " outside [0, max_battery] at t=" +
             std::to_string(s.t));
    }
    if (ap.steps.front().loc != Location(spec->init)) fail(who + ": step 0 is not the initial location");
    if (ap.steps.back().loc.is_intransit()) fail(who + ": plan ends in transit");
    if (end_rule == EndRule::at_goal && ap.steps.back().loc != Location(spec->goal))
      fail(who + ": plan does not end at the goal");
    if (ap.length() > inst.tau())
      fail(who + ": plan length " + std::to_string(ap.length()) + " exceeds tau " + std::to_string(inst.tau()));
  }
  for (const auto& a : inst.agents())
    if (!seen.count(a.id)) fail("plan has no entry for agent " + std::to_string(a.id));
}

}  // namespace mmapf
