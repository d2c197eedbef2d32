#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "mmapf/explain.hpp"
#include "mmapf/fixtures.hpp"
#include "mmapf/json_io.hpp"

namespace mmapf {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "mmapf-sessions";
  /// 0 = exact mode.
  double default_budget = 0.0;
  std::string cors_origin = "*";
  /// Queries still running after this long answer 202 with a poll token.
  double async_threshold_seconds = 2.0;
};

/// HTTP facade over sessions; one in-flight mutation per session.
class Service {
 public:
  explicit Service(ServiceOptions opts) : opts_(std::move(opts)), rng_(std::random_device{}()) {
    std::filesystem::create_directories(opts_.data_dir);
    load_persisted();
    routes();
  }

  ~Service() {
    stop();
    std::lock_guard lk(workers_mu_);
    for (auto& w : workers_)
      if (w.joinable()) w.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  bool listen() { return server_.listen(opts_.host, opts_.port); }
  /// Binds an ephemeral port; pair with listen_after_bind on another thread.
  int bind_to_any_port() { return server_.bind_to_any_port(opts_.host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  httplib::Server& server() { return server_; }

 private:
  struct Record {
    std::string id;
    std::mutex mu;  // held for the whole mutation, including async solves
    std::unique_ptr<Session> session;
    std::string created;
    std::string updated;
  };

  struct Job {
    std::mutex mu;
    bool done = false;
    int status = 202;
    json body;
  };

  static std::string now_iso() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string fresh_id() {
    std::lock_guard lk(rng_mu_);
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < 16; ++i) s += hex[rng_() & 15u];
    return s;
  }

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, json{{"error", message}});
  }

  std::filesystem::path path_of(const std::string& id) const {
    return std::filesystem::path(opts_.data_dir) / (id + ".json");
  }

  /// Caller holds rec.mu.
  void persist(const Record& rec) const {
    json j{{"id", rec.id}, {"created", rec.created}, {"updated", rec.updated}, {"session", rec.session->to_json()}};
    const auto tmp = path_of(rec.id).string() + ".tmp";
    write_file(tmp, j.dump());
    std::filesystem::rename(tmp, path_of(rec.id));
  }

  void load_persisted() {
    for (const auto& entry : std::filesystem::directory_iterator(opts_.data_dir)) {
      if (entry.path().extension() != ".json") continue;
      try {
        const json j = detail::parse_text(read_file(entry.path().string()));
        auto rec = std::make_shared<Record>();
        rec->id = j.at("id").get<std::string>();
        rec->created = j.value("created", now_iso());
        rec->updated = j.value("updated", rec->created);
        rec->session = std::make_unique<Session>(Session::from_json(j.at("session")));
        sessions_[rec->id] = rec;
      } catch (const std::exception&) {
        // Unreadable snapshots are skipped, not fatal.
      }
    }
  }

  std::shared_ptr<Record> find(const std::string& id) {
    std::lock_guard lk(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  static json summary(const Record& rec) {
    const Session& s = *rec.session;
    json j{{"session_id", rec.id}, {"created", rec.created}, {"updated", rec.updated}};
    j["instance"] = instance_to_json(s.instance());
    j["plan"] = s.current_plan() ? plan_to_json(*s.current_plan()) : json(nullptr);
    j["initial_plan"] = s.initial_plan() ? plan_to_json(*s.initial_plan()) : json(nullptr);
    json acc = json::array();
    for (const auto& c : s.accumulated()) acc.push_back(c.to_json());
    j["accumulated"] = acc;
    j["history_length"] = s.history().size();
    j["qu_only"] = !s.current_plan().has_value();
    return j;
  }

  SessionConfig config_from(const json& body) const {
    SessionConfig cfg;
    const double budget = body.value("anytime", opts_.default_budget);
    if (budget > 0) {
      cfg.solve.mode = SearchMode::anytime;
      cfg.solve.budget_seconds = budget;
    }
    cfg.accumulate_unsat = body.value("accumulate_unsat", false);
    return cfg;
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = detail::parse_text(req.body);
      if (!body.is_object() || !body.contains("instance")) throw ParseError("body: expected {instance, plan?}");
    } catch (const std::exception& e) {
      return error(res, 400, e.what());
    }
    std::unique_ptr<Session> session;
    int status = 200;
    std::string solve_status = "given";
    try {
      Instance inst = instance_from_json(body["instance"]);
      SessionConfig cfg = config_from(body);
      if (body.contains("plan") && !body["plan"].is_null()) {
        Plan plan = plan_from_json(body["plan"]);
        session = std::make_unique<Session>(std::move(inst), std::move(plan), cfg);
      } else {
        const Outcome o = solve(inst, Program{}, cfg.solve);
        solve_status = to_string(o.status);
        if (!o.plan) status = 422;
        session = std::make_unique<Session>(std::move(inst), o.plan, cfg);
      }
    } catch (const std::exception& e) {
      return error(res, 400, e.what());
    }
    auto rec = std::make_shared<Record>();
    rec->id = fresh_id();
    rec->created = rec->updated = now_iso();
    rec->session = std::move(session);
    {
      std::lock_guard lk(rec->mu);
      persist(*rec);
    }
    {
      std::lock_guard lk(sessions_mu_);
      sessions_[rec->id] = rec;
    }
    json out = summary(*rec);
    out["status"] = solve_status;
    if (status == 422) out["error"] = "the instance has no solution; only QU applies";
    reply(res, status, out);
  }

  /// Runs under the session lock; produces (status, body).
  std::pair<int, json> run_query(Record& rec, const Query& q, std::optional<double> budget) {
    Session& s = *rec.session;
    const SessionConfig saved = s.config();
    if (budget) {
      s.config().solve.mode = *budget > 0 ? SearchMode::anytime : SearchMode::exact;
      s.config().solve.budget_seconds = *budget;
    }
    std::pair<int, json> out;
    try {
      const Explanation e = s.answer(q);
      json j = e.to_json();
      json acc = json::array();
      for (const auto& c : s.accumulated()) acc.push_back(c.to_json());
      j["accumulated"] = acc;
      j["session_id"] = rec.id;
      out = {200, j};
    } catch (const PremiseNotObserved& e) {
      out = {422, json{{"error", "premise not observed"}, {"detail", e.what()}}};
    } catch (const ParseError& e) {
      out = {400, json{{"error", e.what()}}};
    } catch (const ValidationError& e) {
      out = {400, json{{"error", e.what()}}};
    } catch (const std::exception& e) {
      out = {500, json{{"error", e.what()}}};
    }
    s.config() = saved;
    rec.updated = now_iso();
    persist(rec);
    return out;
  }

  void query(const httplib::Request& req, httplib::Response& res) {
    auto rec = find(req.matches[1]);
    if (!rec) return error(res, 404, "unknown session");
    Query q;
    std::optional<double> budget;
    try {
      json body = detail::parse_text(req.body);
      if (!body.is_object()) throw ParseError("body: expected an object");
      if (body.contains("anytime")) {
        if (!body["anytime"].is_number()) throw ParseError("anytime: expected seconds");
        budget = body["anytime"].get<double>();
        body.erase("anytime");
      }
      q = query_from_json(body.contains("query") ? body["query"] : body);
      validate_query(q, rec->session->instance());
    } catch (const std::exception& e) {
      return error(res, 400, e.what());
    }
    std::unique_lock lock(rec->mu, std::try_to_lock);
    if (!lock.owns_lock()) return error(res, 409, "session busy");

    auto job = std::make_shared<Job>();
    auto promise = std::make_shared<std::promise<void>>();
    std::future<void> ready = promise->get_future();
    {
      std::lock_guard lk(workers_mu_);
      workers_.emplace_back([this, rec, q, budget, job, promise, lk = std::move(lock)]() mutable {
        auto [status, body] = run_query(*rec, q, budget);
        lk.unlock();
        {
          std::lock_guard jl(job->mu);
          job->status = status;
          job->body = std::move(body);
          job->done = true;
        }
        promise->set_value();
      });
    }
    const auto limit = std::chrono::duration<double>(opts_.async_threshold_seconds);
    if (ready.wait_for(limit) == std::future_status::ready) {
      std::lock_guard jl(job->mu);
      return reply(res, job->status, job->body);
    }
    const std::string token = fresh_id();
    {
      std::lock_guard lk(jobs_mu_);
      jobs_[token] = job;
    }
    reply(res, 202, json{{"token", token}, {"poll", "/api/jobs/" + token}});
  }

  void job_status(const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lk(jobs_mu_);
      auto it = jobs_.find(req.matches[1]);
      if (it != jobs_.end()) job = it->second;
    }
    if (!job) return error(res, 404, "unknown job");
    std::lock_guard jl(job->mu);
    if (!job->done) return reply(res, 202, json{{"status", "running"}});
    reply(res, job->status, job->body);
  }

  template <class F>
  void mutate(const httplib::Request& req, httplib::Response& res, F&& f) {
    auto rec = find(req.matches[1]);
    if (!rec) return error(res, 404, "unknown session");
    std::unique_lock lock(rec->mu, std::try_to_lock);
    if (!lock.owns_lock()) return error(res, 409, "session busy");
    if (!f(*rec, res)) return;
    rec->updated = now_iso();
    persist(*rec);
    reply(res, 200, summary(*rec));
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", opts_.cors_origin},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, json{{"status", "ok"}});
    });
    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      create_session(req, res);
    });
    server_.Post(R"(/api/sessions/([^/]+)/query)",
                 [this](const httplib::Request& req, httplib::Response& res) { query(req, res); });
    server_.Get(R"(/api/jobs/([^/]+))",
                [this](const httplib::Request& req, httplib::Response& res) { job_status(req, res); });
    server_.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto rec = find(req.matches[1]);
      if (!rec) return error(res, 404, "unknown session");
      std::unique_lock lock(rec->mu, std::try_to_lock);
      if (!lock.owns_lock()) return error(res, 409, "session busy");
      reply(res, 200, summary(*rec));
    });
    server_.Get(R"(/api/sessions/([^/]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
      auto rec = find(req.matches[1]);
      if (!rec) return error(res, 404, "unknown session");
      std::unique_lock lock(rec->mu, std::try_to_lock);
      if (!lock.owns_lock()) return error(res, 409, "session busy");
      json hist = json::array();
      for (const auto& h : rec->session->history())
        hist.push_back(json{{"query", query_to_json(h.query)}, {"explanation", h.explanation},
                            {"accumulated", h.accumulated}});
      reply(res, 200, hist);
    });
    server_.Post(R"(/api/sessions/([^/]+)/pop)", [this](const httplib::Request& req, httplib::Response& res) {
      mutate(req, res, [](Record& rec, httplib::Response& r) {
        if (rec.session->history().empty()) {
          error(r, 409, "history is empty");
          return false;
        }
        rec.session->pop();
        return true;
      });
    });
    server_.Post(R"(/api/sessions/([^/]+)/reset)", [this](const httplib::Request& req, httplib::Response& res) {
      mutate(req, res, [](Record& rec, httplib::Response&) {
        rec.session->reset();
        return true;
      });
    });
    server_.Get("/api/instances/examples", [](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& f : bundled_fixtures()) {
        json e{{"name", f.name}, {"instance", detail::parse_text(f.instance)}};
        if (!f.plan.empty()) e["plan"] = detail::parse_text(f.plan);
        out.push_back(e);
      }
      reply(res, 200, out);
    });
  }

  ServiceOptions opts_;
  httplib::Server server_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Record>> sessions_;
  std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

}  // namespace mmapf
