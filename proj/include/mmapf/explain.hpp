#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmapf/constraints.hpp"
#include "mmapf/json_io.hpp"
#include "mmapf/queries.hpp"
#include "mmapf/render.hpp"
#include "mmapf/semantics.hpp"
#include "mmapf/solver.hpp"

namespace mmapf {

/// The queried phenomenon does not occur in the session's current plan.
class PremiseNotObserved : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExplanationKind : std::uint8_t { alternative, counterfactual, infeasibility };
enum class Comparison : std::uint8_t { shorter, equal, longer };

inline const char* to_string(ExplanationKind k) {
  switch (k) {
    case ExplanationKind::alternative: return "alternative";
    case ExplanationKind::counterfactual: return "counterfactual";
    case ExplanationKind::infeasibility: return "infeasibility";
  }
  return "?";
}

inline const char* to_string(Comparison c) {
  switch (c) {
    case Comparison::shorter: return "shorter";
    case Comparison::equal: return "equal";
    case Comparison::longer: return "longer";
  }
  return "?";
}

struct Explanation {
  ExplanationKind kind = ExplanationKind::infeasibility;
  Query query;
  std::string text;
  std::optional<Plan> alternative_plan;
  std::optional<Comparison> comparison;
  std::optional<std::vector<ViolationAtom>> violations_current;
  std::optional<std::vector<ViolationAtom>> violations_any;
  /// QU only: atoms of the obstacle-only relaxation.
  std::optional<std::vector<ViolationAtom>> violations_infrastructure;
  std::optional<std::vector<VertexId>> remove_obstacles;
  /// Constraints that block the query when no relevant relaxation helps.
  std::vector<HardConstraint> blocking;
  bool unknown = false;
  int calls = 0;
  std::uint64_t models = 0;
  std::int64_t time_ms = 0;

  json to_json() const {
    json j;
    j["kind"] = to_string(kind);
    j["query"] = query_to_json(query);
    j["text"] = text;
    if (alternative_plan) j["alternative_plan"] = plan_to_json(*alternative_plan);
    if (comparison) j["comparison"] = to_string(*comparison);
    if (violations_current) j["violations_current"] = atoms_to_json(*violations_current);
    if (violations_any) j["violations_any"] = atoms_to_json(*violations_any);
    if (violations_infrastructure) j["violations_infrastructure"] = atoms_to_json(*violations_infrastructure);
    if (remove_obstacles) j["suggestion"] = json{{"remove_obstacles", *remove_obstacles}};
    if (!blocking.empty()) {
      json b = json::array();
      for (const auto& c : blocking) b.push_back(c.to_json());
      j["blocking"] = b;
    }
    if (unknown) j["unknown"] = true;
    j["stats"] = json{{"calls", calls}, {"models", models}, {"time_ms", time_ms}};
    return j;
  }
};

/// Per-agent location sequences; only the queried agent may differ from the
/// source plan.
struct RevisedPlan {
  std::vector<std::pair<AgentId, std::vector<Location>>> sequences;

  const std::vector<Location>* of(AgentId a) const {
    for (const auto& [id, seq] : sequences)
      if (id == a) return &seq;
    return nullptr;
  }
};

/// Removes the queried waits (QW*) or keeps every traversal verbatim (QC*).
inline RevisedPlan revise(const Plan& plan, const Query& q) {
  const QueryGroup g = group_of(q.kind);
  if (g != QueryGroup::wait && g != QueryGroup::charge) throw ValidationError("revise: only wait and charge queries");
  RevisedPlan r;
  for (const auto& p : plan.agents) r.sequences.emplace_back(p.agent, traversal_of(p));
  if (g == QueryGroup::charge) return r;

  const AgentPlan* p = plan.find(q.agent);
  if (!p) throw ValidationError("revise: agent not in plan");
  const int len = p->length();
  const Location x(q.x);
  auto waits_at = [&](int t) { return t < len && p->at(t) == x && p->at(t + 1) == x; };
  // drop[t] removes the step at t, i.e. the wait transition t-1 -> t.
  std::vector<bool> drop(static_cast<std::size_t>(len + 1), false);
  switch (q.kind) {
    case QueryKind::QW1:
      for (int t = 0; t < len; ++t)
        if (waits_at(t)) drop[static_cast<std::size_t>(t + 1)] = true;
      break;
    case QueryKind::QW2:
      if (waits_at(q.s)) drop[static_cast<std::size_t>(q.s + 1)] = true;
      break;
    case QueryKind::QW3:
      for (int t = q.s; t < q.s + q.n && t < len; ++t)
        if (waits_at(t)) drop[static_cast<std::size_t>(t + 1)] = true;
      break;
    case QueryKind::QW4: {
      std::vector<int> in_window;
      for (int t = q.s; t < q.s + q.n && t < len; ++t)
        if (waits_at(t)) in_window.push_back(t);
      const int excess = static_cast<int>(in_window.size()) - (q.n - 1);
      for (int i = 0; i < excess; ++i)
        drop[static_cast<std::size_t>(in_window[in_window.size() - 1 - static_cast<std::size_t>(i)] + 1)] = true;
      break;
    }
    default: break;
  }
  std::vector<Location> seq;
  for (int t = 0; t <= len; ++t)
    if (!drop[static_cast<std::size_t>(t)]) seq.push_back(p->at(t));
  for (auto& [id, s] : r.sequences)
    if (id == q.agent) s = std::move(seq);
  return r;
}

struct SessionConfig {
  SolveConfig solve;
  /// Also keep the constraint of queries answered with a counterfactual.
  bool accumulate_unsat = false;
};

struct HistoryEntry {
  Query query;
  json explanation;
  bool accumulated = false;
  std::optional<Plan> plan_before;
};

/// An interactive sequence of queries over one instance. Single writer.
class Session {
 public:
  /// `plan` must be a solution of `inst`; nullopt means the instance is
  /// unsolvable and only QU applies.
  Session(Instance inst, std::optional<Plan> plan, SessionConfig cfg = {})
      : inst_(std::move(inst)), initial_(std::move(plan)), current_(initial_), cfg_(std::move(cfg)) {
    if (current_) {
      check_plan_structure(*current_, inst_, EndRule::at_goal);
      if (!validate(inst_, *current_).is_solution()) throw ValidationError("session plan is not a solution");
    }
  }

  /// Solves for the initial plan; an infeasible instance yields a QU-only session.
  static Session create(Instance inst, SessionConfig cfg = {}) {
    SolveConfig sc = cfg.solve;
    sc.reference.reset();
    const Outcome o = solve(inst, Program{}, sc);
    if (o.status == SolveStatus::unknown) throw std::runtime_error("solver could not decide the instance");
    return Session(std::move(inst), o.plan, std::move(cfg));
  }

  const Instance& instance() const { return inst_; }
  const std::optional<Plan>& current_plan() const { return current_; }
  const std::optional<Plan>& initial_plan() const { return initial_; }
  const std::vector<HardConstraint>& accumulated() const { return accumulated_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  const SessionConfig& config() const { return cfg_; }
  SessionConfig& config() { return cfg_; }

  Explanation answer(const Query& q);

  /// Clears accumulated constraints and history; keeps the current plan.
  void reset() {
    accumulated_.clear();
    history_.clear();
  }

  /// Undoes the most recent query.
  void pop() {
    if (history_.empty()) throw std::logic_error("history is empty");
    const HistoryEntry& last = history_.back();
    if (last.accumulated) accumulated_.pop_back();
    current_ = last.plan_before;
    history_.pop_back();
  }

  json to_json() const {
    json j;
    j["instance"] = instance_to_json(inst_);
    if (initial_) j["initial_plan"] = plan_to_json(*initial_);
    if (current_) j["current_plan"] = plan_to_json(*current_);
    json acc = json::array();
    for (const auto& c : accumulated_) acc.push_back(c.to_json());
    j["accumulated"] = acc;
    json hist = json::array();
    for (const auto& h : history_) {
      json e{{"query", query_to_json(h.query)}, {"explanation", h.explanation}, {"accumulated", h.accumulated}};
      if (h.plan_before) e["plan_before"] = plan_to_json(*h.plan_before);
      hist.push_back(e);
    }
    j["history"] = hist;
    j["config"] = json{{"accumulate_unsat", cfg_.accumulate_unsat},
                       {"mode", cfg_.solve.mode == SearchMode::anytime ? "anytime" : "exact"},
                       {"budget_seconds", cfg_.solve.budget_seconds}};
    return j;
  }

  static Session from_json(const json& j) {
    Instance inst = instance_from_json(detail::require(j, "instance", "session"));
    SessionConfig cfg;
    if (j.contains("config")) {
      const json& c = j["config"];
      cfg.accumulate_unsat = c.value("accumulate_unsat", false);
      cfg.solve.mode = c.value("mode", std::string("exact")) == "anytime" ? SearchMode::anytime : SearchMode::exact;
      cfg.solve.budget_seconds = c.value("budget_seconds", 0.0);
    }
    std::optional<Plan> initial;
    if (j.contains("initial_plan")) initial = plan_from_json(j["initial_plan"]);
    Session s(std::move(inst), initial, cfg);
    if (j.contains("current_plan"))
      s.current_ = plan_from_json(j["current_plan"]);
    else
      s.current_.reset();
    for (const auto& c : j.value("accumulated", json::array())) s.accumulated_.push_back(constraint_from_json(c));
    for (const auto& h : j.value("history", json::array())) {
      HistoryEntry e;
      e.query = query_from_json(detail::require(h, "query", "history entry"));
      e.explanation = h.value("explanation", json::object());
      e.accumulated = h.value("accumulated", false);
      if (h.contains("plan_before")) e.plan_before = plan_from_json(h["plan_before"]);
      s.history_.push_back(std::move(e));
    }
    return s;
  }

 private:
  Explanation answer_infeasible_instance(const Query& q);
  Comparison compare(const Plan& alt) const {
    const auto prio = objective_priorities(inst_, cfg_.solve);
    const CostVector a = objective_cost(inst_, alt, prio), c = objective_cost(inst_, *current_, prio);
    if (a < c) return Comparison::shorter;
    if (c < a) return Comparison::longer;
    return Comparison::equal;
  }
  void record(const Query& q, const Explanation& e, bool accumulated, std::optional<Plan> before) {
    history_.push_back(HistoryEntry{q, e.to_json(), accumulated, std::move(before)});
  }

  Instance inst_;
  std::optional<Plan> initial_;
  std::optional<Plan> current_;
  SessionConfig cfg_;
  std::vector<HardConstraint> accumulated_;
  std::vector<HistoryEntry> history_;
};

inline Explanation Session::answer_infeasible_instance(const Query& q) {
  Explanation e;
  e.query = q;
  e.kind = ExplanationKind::infeasibility;
  SolveConfig sc = cfg_.solve;
  sc.reference.reset();
  const FamilySet relevant = relevant_families(q.kind);

  const Outcome w1 = solve(inst_, Program::soften(accumulated_, relevant.without(Family::obstacle)), sc);
  const Outcome w2 = solve(inst_, Program::soften(accumulated_, FamilySet::none().with(Family::obstacle)), sc);
  e.calls = 2;
  e.models = w1.stats.models + w2.stats.models;
  e.time_ms = w1.stats.time_ms + w2.stats.time_ms;
  e.unknown = w1.status == SolveStatus::unknown || w2.status == SolveStatus::unknown;

  std::string first;
  if (w1.plan) {
    e.violations_any = w1.violations;
    first = "There is no solution because " + text::join(text::phrases(w1.violations, Tense::present)) + ".";
  } else {
    e.violations_any = std::vector<ViolationAtom>{};
    first = w1.status == SolveStatus::unknown
                ? "The solver could not find the reason within its budget."
                : "There is no solution even if robots may collide, run out of battery or miss their targets.";
  }
  std::string second;
  if (w2.plan) {
    e.violations_infrastructure = w2.violations;
    std::vector<VertexId> cells;
    for (const auto& a : w2.violations)
      if (a.kind == ViolationKind::obstacle) cells.push_back(a.args[2]);
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    e.remove_obstacles = cells;
    second = "There is no solution because " + text::join(text::phrases(w2.violations, Tense::present)) +
             (cells.size() == 1 ? "; this suggests removing this obstacle." : "; this suggests removing these obstacles.");
  } else {
    e.violations_infrastructure = std::vector<ViolationAtom>{};
    second = w2.status == SolveStatus::unknown ? "The solver could not decide whether removing obstacles helps."
                                                : "Removing obstacles alone does not make the instance solvable.";
  }
  e.text = first + " " + second;
  record(q, e, false, current_);
  return e;
}

inline Explanation Session::answer(const Query& q) {
  validate_query(q, inst_);
  if (q.kind == QueryKind::QU) {
    if (current_) throw PremiseNotObserved("the instance has a solution");
    return answer_infeasible_instance(q);
  }
  if (!current_) throw PremiseNotObserved("there is no plan to ask about");
  const CompiledQuery cq = compile(q, inst_);
  if (cq.hard->holds(inst_, *current_))
    throw PremiseNotObserved("the current plan does not exhibit " + to_string(q));

  Explanation e;
  e.query = q;
  SolveConfig sc = cfg_.solve;
  sc.reference = current_;
  std::vector<HardConstraint> hard = accumulated_;
  hard.push_back(*cq.hard);
  auto tally = [&](const Outcome& o) {
    ++e.calls;
    e.models += o.stats.models;
    e.time_ms += o.stats.time_ms;
  };

  const Outcome h = solve(inst_, Program{hard, {}}, sc);
  tally(h);
  if (h.plan) {
    e.kind = ExplanationKind::alternative;
    e.alternative_plan = h.plan;
    e.comparison = compare(*h.plan);
    const char* intro = *e.comparison == Comparison::shorter  ? " Here is an alternative plan that is shorter:"
                        : *e.comparison == Comparison::longer ? " Here is an alternative plan which is longer:"
                                                              : " Here is an alternative plan:";
    e.text = text::alternative_head(q) + intro + text::plan_lines(*h.plan);
    std::optional<Plan> before = current_;
    accumulated_.push_back(*cq.hard);
    current_ = h.plan;
    record(q, e, true, std::move(before));
    return e;
  }
  if (h.status == SolveStatus::unknown) {
    e.kind = ExplanationKind::infeasibility;
    e.unknown = true;
    e.text = "The solver could not decide within its budget whether " + cq.hard->render() + " is possible.";
    record(q, e, false, current_);
    return e;
  }

  const Program pw = Program::soften(hard, cq.relevant);
  const QueryGroup group = group_of(q.kind);
  if (group == QueryGroup::wait || group == QueryGroup::charge) {
    const RevisedPlan revised = revise(*current_, q);
    Program pc = pw;
    for (const auto& [id, seq] : revised.sequences) pc.hard.push_back(HardConstraint(FixTraversal{id, seq}, "revised"));
    const Outcome c = solve_fixed_traversal(inst_, pc, sc);
    tally(c);
    e.violations_current = c.plan ? c.violations : std::vector<ViolationAtom>{};
  }
  const Outcome w = solve(inst_, pw, sc);
  tally(w);
  if (w.plan) e.violations_any = w.violations;

  const bool any = e.violations_any && !e.violations_any->empty();
  const bool cur = e.violations_current && !e.violations_current->empty();
  if (!any && !cur) {
    e.kind = ExplanationKind::infeasibility;
    e.unknown = w.status == SolveStatus::unknown;
    e.blocking = accumulated_;
    std::vector<std::string> names;
    for (const auto& b : accumulated_) names.push_back(b.render());
    e.text = text::counterfactual_head(q) + "; no relevant constraint is violated, the question is blocked by " +
             (names.empty() ? std::string("the constraints that stay hard for this question")
                            : text::join(names)) +
             ".";
  } else {
    e.kind = ExplanationKind::counterfactual;
    std::string body;
    if (cur) body = text::join(text::phrases(*e.violations_current, Tense::future, q.agent)) + " if it uses the current plan";
    if (any) {
      if (!body.empty()) body += " or ";
      body += text::join(text::phrases(*e.violations_any, Tense::future, q.agent)) + " with another plan";
    }
    e.text = text::counterfactual_head(q) + "; otherwise, " + body + ".";
  }
  const bool keep = cfg_.accumulate_unsat;
  if (keep) accumulated_.push_back(*cq.hard);
  record(q, e, keep, current_);
  return e;
}

}  // namespace mmapf
