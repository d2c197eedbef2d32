#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mmapf/model.hpp"

namespace mmapf {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ParseError(where + ": unknown key '" + it.key() + "'");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

inline int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ParseError(where + ": expected an integer");
  return j.get<int>();
}

inline std::vector<int> as_int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& e : j) out.push_back(as_int(e, where));
  return out;
}

inline json parse_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

inline Instance instance_from_json(const json& doc) {
  using namespace detail;
  reject_unknown_keys(doc,
                      {"grid", "vertices", "edges", "max_battery", "tau", "objective", "agents", "endpoints",
                       "strict_endpoints", "obstacles", "charging", "name"},
                      "instance");
  Instance::Data d;
  if (doc.contains("grid")) {
    if (doc.contains("vertices") || doc.contains("edges"))
      throw ParseError("instance: 'grid' and 'vertices'/'edges' are mutually exclusive");
    if (doc.contains("obstacles") || doc.contains("charging"))
      throw ParseError("instance: with 'grid', obstacles and charging belong inside the grid object");
    const json& g = doc["grid"];
    reject_unknown_keys(g, {"rows", "cols", "slow", "obstacles", "charging"}, "grid");
    GridShorthand grid;
    grid.rows = as_int(require(g, "rows", "grid"), "grid.rows");
    grid.cols = as_int(require(g, "cols", "grid"), "grid.cols");
    if (g.contains("slow")) grid.slow_cells = as_int_list(g["slow"], "grid.slow");
    if (g.contains("obstacles")) grid.obstacle_cells = as_int_list(g["obstacles"], "grid.obstacles");
    if (g.contains("charging")) grid.charging_cells = as_int_list(g["charging"], "grid.charging");
    grid.expand_into(d);
  } else {
    d.vertices = as_int_list(require(doc, "vertices", "instance"), "vertices");
    const json& edges = require(doc, "edges", "instance");
    if (!edges.is_array()) throw ParseError("edges: expected an array");
    for (const auto& e : edges) {
      reject_unknown_keys(e, {"u", "v", "mode"}, "edge");
      Edge edge;
      edge.u = as_int(require(e, "u", "edge"), "edge.u");
      edge.v = as_int(require(e, "v", "edge"), "edge.v");
      const std::string mode = e.value("mode", std::string("normal"));
      if (mode == "normal")
        edge.mode = EdgeMode::normal;
      else if (mode == "slow")
        edge.mode = EdgeMode::slow;
      else
        throw ParseError("edge: unknown mode '" + mode + "'");
      d.edges.push_back(edge);
    }
    if (doc.contains("obstacles")) d.obstacles = as_int_list(doc["obstacles"], "obstacles");
    if (doc.contains("charging")) d.charging = as_int_list(doc["charging"], "charging");
  }
  if (doc.contains("endpoints")) d.endpoints = as_int_list(doc["endpoints"], "endpoints");
  if (doc.contains("strict_endpoints")) {
    if (!doc["strict_endpoints"].is_boolean()) throw ParseError("strict_endpoints: expected a boolean");
    d.strict_endpoints = doc["strict_endpoints"].get<bool>();
  }
  d.max_battery = as_int(require(doc, "max_battery", "instance"), "max_battery");
  d.tau = as_int(require(doc, "tau", "instance"), "tau");
  if (doc.contains("objective")) {
    const json& obj = doc["objective"];
    if (!obj.is_array()) throw ParseError("objective: expected an array of strings");
    d.objective.clear();
    for (const auto& t : obj) {
      if (!t.is_string()) throw ParseError("objective: expected an array of strings");
      d.objective.push_back(objective_from_string(t.get<std::string>()));
    }
  }
  const json& agents = require(doc, "agents", "instance");
  if (!agents.is_array()) throw ParseError("agents: expected an array");
  for (const auto& a : agents) {
    reject_unknown_keys(a, {"id", "init", "goal", "waypoints", "init_battery"}, "agent");
    AgentSpec s;
    s.id = as_int(require(a, "id", "agent"), "agent.id");
    s.init = as_int(require(a, "init", "agent"), "agent.init");
    s.goal = as_int(require(a, "goal", "agent"), "agent.goal");
    if (a.contains("waypoints")) s.waypoints = as_int_list(a["waypoints"], "agent.waypoints");
    s.init_battery = a.contains("init_battery") ? as_int(a["init_battery"], "agent.init_battery") : d.max_battery;
    d.agents.push_back(std::move(s));
  }
  return Instance(std::move(d));
}

inline Instance load_instance(std::string_view text) { return instance_from_json(detail::parse_text(text)); }

/// Explicit vertices/edges form; load_instance(save_instance(i)) == i.
inline json instance_to_json(const Instance& inst) {
  json doc;
  doc["vertices"] = inst.vertices();
  json edges = json::array();
  for (const auto& e : inst.edges())
    edges.push_back({{"u", e.u}, {"v", e.v}, {"mode", e.mode == EdgeMode::slow ? "slow" : "normal"}});
  doc["edges"] = edges;
  doc["obstacles"] = inst.obstacles();
  doc["charging"] = inst.charging();
  if (inst.endpoints()) doc["endpoints"] = *inst.endpoints();
  if (inst.strict_endpoints()) doc["strict_endpoints"] = true;
  doc["max_battery"] = inst.max_battery();
  doc["tau"] = inst.tau();
  json obj = json::array();
  for (auto t : inst.objective()) obj.push_back(to_string(t));
  doc["objective"] = obj;
  json agents = json::array();
  for (const auto& a : inst.agents())
    agents.push_back({{"id", a.id},
                      {"init", a.init},
                      {"goal", a.goal},
                      {"waypoints", a.waypoints},
                      {"init_battery", a.init_battery}});
  doc["agents"] = agents;
  return doc;
}

inline std::string save_instance(const Instance& inst) { return instance_to_json(inst).dump(2); }

inline json location_to_json(Location loc) {
  return loc.is_intransit() ? json("intransit") : json(loc.vertex());
}

inline Location location_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "intransit") throw ParseError("loc: expected a vertex id or \"intransit\"");
    return Location::intransit();
  }
  if (!j.is_number_integer()) throw ParseError("loc: expected a vertex id or \"intransit\"");
  const int v = j.get<int>();
  if (v <= 0) throw ParseError("loc: vertex ids are positive");
  return Location(v);
}

/// Parses without structural checks.
inline Plan plan_from_json(const json& doc) {
  using namespace detail;
  reject_unknown_keys(doc, {"agents"}, "plan");
  const json& agents = require(doc, "agents", "plan");
  if (!agents.is_array()) throw ParseError("plan.agents: expected an array");
  Plan plan;
  for (const auto& a : agents) {
    reject_unknown_keys(a, {"id", "steps"}, "plan agent");
    AgentPlan ap;
    ap.agent = as_int(require(a, "id", "plan agent"), "plan agent id");
    const json& steps = require(a, "steps", "plan agent");
    if (!steps.is_array()) throw ParseError("steps: expected an array");
    for (const auto& s : steps) {
      reject_unknown_keys(s, {"t", "loc", "battery"}, "step");
      Step st;
      st.t = as_int(require(s, "t", "step"), "step.t");
      st.loc = location_from_json(require(s, "loc", "step"));
      st.battery = as_int(require(s, "battery", "step"), "step.battery");
      ap.steps.push_back(st);
    }
    plan.agents.push_back(std::move(ap));
  }
  std::sort(plan.agents.begin(), plan.agents.end(),
            [](const AgentPlan& x, const AgentPlan& y) { return x.agent < y.agent; });
  return plan;
}

inline Plan load_plan(std::string_view text, const Instance& inst, EndRule end_rule = EndRule::at_goal) {
  Plan plan = plan_from_json(detail::parse_text(text));
  check_plan_structure(plan, inst, end_rule);
  return plan;
}

inline json plan_to_json(const Plan& plan) {
  json agents = json::array();
  for (const auto& ap : plan.agents) {
    json steps = json::array();
    for (const auto& s : ap.steps)
      steps.push_back({{"t", s.t}, {"loc", location_to_json(s.loc)}, {"battery", s.battery}});
    agents.push_back({{"id", ap.agent}, {"steps", steps}});
  }
  return json{{"agents", agents}};
}

inline std::string save_plan(const Plan& plan) { return plan_to_json(plan).dump(2); }

}  // namespace mmapf
