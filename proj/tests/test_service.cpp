#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "mmapf/service.hpp"
#include "support.hpp"

using namespace mmapf;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mmapf-service-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    start();
  }

  void TearDown() override {
    stop();
    std::filesystem::remove_all(dir_);
  }

  void start(double async_threshold = 30.0) {
    ServiceOptions o;
    o.data_dir = dir_.string();
    o.async_threshold_seconds = async_threshold;
    svc_ = std::make_unique<Service>(o);
    port_ = svc_->bind_to_any_port();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { svc_->listen_after_bind(); });
    svc_->wait_until_ready();
  }

  void stop() {
    if (!svc_) return;
    svc_->stop();
    thread_.join();
    svc_.reset();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }

  std::pair<int, json> post(const std::string& path, const json& body) const {
    auto r = client().Post(path, body.dump(), "application/json");
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }

  std::pair<int, json> post_raw(const std::string& path, const std::string& body) const {
    auto r = client().Post(path, body, "application/json");
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }

  std::pair<int, json> get(const std::string& path) const {
    auto r = client().Get(path);
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }

  std::string create(const char* fixture, bool with_plan) {
    const auto f = support::fixture(fixture);
    json body{{"instance", instance_to_json(f.inst)}};
    if (with_plan) body["plan"] = plan_to_json(*f.plan);
    auto [status, j] = post("/api/sessions", body);
    EXPECT_TRUE(status == 200 || status == 422) << j.dump();
    return j.value("session_id", "");
  }

  std::filesystem::path dir_;
  std::unique_ptr<Service> svc_;
  std::thread thread_;
  int port_ = 0;
};

const json kQW1_2_8{{"kind", "QW1"}, {"agent", 2}, {"x", 8}};
const json kQW1_1_11{{"kind", "QW1"}, {"agent", 1}, {"x", 11}};

}  // namespace

TEST_F(ServiceTest, HealthAndCors) {
  auto r = client().Get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
  auto o = client().Options("/api/sessions");
  ASSERT_TRUE(o);
  EXPECT_EQ(o->status, 204);
}

TEST_F(ServiceTest, CreateSolvesWhenPlanOmitted) {
  const auto f = support::fixture("scenario1");
  auto [status, j] = post("/api/sessions", json{{"instance", instance_to_json(f.inst)}});
  ASSERT_EQ(status, 200) << j.dump();
  const Plan plan = plan_from_json(j["plan"]);
  EXPECT_EQ(plan.makespan(), 4);
  EXPECT_TRUE(validate(f.inst, plan).is_solution());
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_FALSE(j["qu_only"].get<bool>());
}

TEST_F(ServiceTest, InfeasibleInstanceGivesQuOnlySession) {
  const auto f = support::fixture("scenario6");
  auto [status, j] = post("/api/sessions", json{{"instance", instance_to_json(f.inst)}});
  ASSERT_EQ(status, 422) << j.dump();
  EXPECT_TRUE(j["qu_only"].get<bool>());
  const std::string id = j["session_id"];
  auto [qs, qj] = post("/api/sessions/" + id + "/query", json{{"kind", "QU"}});
  ASSERT_EQ(qs, 200) << qj.dump();
  EXPECT_EQ(qj["kind"], "infeasibility");
  EXPECT_EQ(qj["suggestion"]["remove_obstacles"], json::array({2}));
  auto [ws, wj] = post("/api/sessions/" + id + "/query", kQW1_2_8);
  EXPECT_EQ(ws, 422);
}

TEST_F(ServiceTest, BadRequestsAre400) {
  EXPECT_EQ(post_raw("/api/sessions", "{not json").first, 400);
  EXPECT_EQ(post("/api/sessions", json{{"plan", nullptr}}).first, 400);
  json bad = instance_to_json(support::fixture("scenario1").inst);
  bad["tau"] = 0;
  EXPECT_EQ(post("/api/sessions", json{{"instance", bad}}).first, 400);
  const auto f = support::fixture("scenario1");
  Plan wrong = *f.plan;
  wrong.agents[1].steps[1].loc = Location(7);
  EXPECT_EQ(post("/api/sessions", json{{"instance", instance_to_json(f.inst)}, {"plan", plan_to_json(wrong)}}).first,
            400);

  const std::string id = create("scenario1", true);
  EXPECT_EQ(post("/api/sessions/" + id + "/query", json{{"kind", "QW1"}}).first, 400);
  EXPECT_EQ(post("/api/sessions/" + id + "/query", json{{"kind", "QW1"}, {"agent", 7}, {"x", 8}}).first, 400);
  EXPECT_EQ(post_raw("/api/sessions/" + id + "/query", "[").first, 400);
}

TEST_F(ServiceTest, UnknownIdsAre404) {
  EXPECT_EQ(get("/api/sessions/nope").first, 404);
  EXPECT_EQ(get("/api/sessions/nope/history").first, 404);
  EXPECT_EQ(post("/api/sessions/nope/query", kQW1_2_8).first, 404);
  EXPECT_EQ(post("/api/sessions/nope/pop", json::object()).first, 404);
  EXPECT_EQ(post("/api/sessions/nope/reset", json::object()).first, 404);
  EXPECT_EQ(get("/api/jobs/nope").first, 404);
}

TEST_F(ServiceTest, ScenarioOneAndTwoOverHttp) {
  const std::string id = create("scenario1", true);
  auto [s1, e1] = post("/api/sessions/" + id + "/query", kQW1_2_8);
  ASSERT_EQ(s1, 200) << e1.dump();
  EXPECT_EQ(e1["kind"], "alternative");
  EXPECT_EQ(e1["accumulated"].size(), 1u);

  auto [s2, e2] = post("/api/sessions/" + id + "/query", json{{"query", kQW1_1_11}});
  ASSERT_EQ(s2, 200) << e2.dump();
  EXPECT_EQ(e2["kind"], "counterfactual");
  const json want = atoms_to_json({ViolationAtom::collision(1, 2, 1, 7), ViolationAtom::collision(1, 2, 2, 6)});
  EXPECT_EQ(e2["violations_current"], want);

  // Already satisfied by the session plan.
  EXPECT_EQ(post("/api/sessions/" + id + "/query", kQW1_2_8).first, 422);

  auto [hs, h] = get("/api/sessions/" + id + "/history");
  ASSERT_EQ(hs, 200);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0]["query"], kQW1_2_8);
  EXPECT_EQ(h[1]["query"], kQW1_1_11);

  auto [ps, pj] = post("/api/sessions/" + id + "/pop", json::object());
  ASSERT_EQ(ps, 200);
  EXPECT_EQ(pj["history_length"], 1);
  EXPECT_EQ(get("/api/sessions/" + id + "/history").second.size(), 1u);

  auto [rs, rj] = post("/api/sessions/" + id + "/reset", json::object());
  ASSERT_EQ(rs, 200);
  EXPECT_EQ(rj["history_length"], 0);
  EXPECT_TRUE(rj["accumulated"].empty());
  EXPECT_EQ(post("/api/sessions/" + id + "/pop", json::object()).first, 409);
}

TEST_F(ServiceTest, ExamplesIncludeNamedFixtures) {
  auto [status, j] = get("/api/instances/examples");
  ASSERT_EQ(status, 200);
  std::set<std::string> names;
  for (const auto& e : j) {
    names.insert(e["name"].get<std::string>());
    EXPECT_NO_THROW(instance_from_json(e["instance"]));
  }
  EXPECT_GE(names.size(), 6u);
  EXPECT_TRUE(names.count("scenario1"));
  EXPECT_TRUE(names.count("m1"));
}

TEST_F(ServiceTest, SessionsSurviveRestart) {
  const std::string id = create("scenario1", true);
  ASSERT_EQ(post("/api/sessions/" + id + "/query", kQW1_2_8).first, 200);
  const json before = get("/api/sessions/" + id).second;
  stop();
  start();
  auto [status, after] = get("/api/sessions/" + id);
  ASSERT_EQ(status, 200);
  EXPECT_EQ(after["plan"], before["plan"]);
  EXPECT_EQ(after["accumulated"], before["accumulated"]);
  auto [s2, e2] = post("/api/sessions/" + id + "/query", kQW1_1_11);
  ASSERT_EQ(s2, 200);
  EXPECT_EQ(e2["kind"], "counterfactual");
}

TEST_F(ServiceTest, SlowQueryAnswersWithPollToken) {
  stop();
  start(0.05);
  const std::string id = create("m1", true);
  auto [status, j] = post("/api/sessions/" + id + "/query", json{{"kind", "QC4"}, {"agent", 2}, {"m", 2}});
  ASSERT_EQ(status, 202) << j.dump();
  const std::string poll = j["poll"];

  // While the solve runs the session is locked.
  EXPECT_EQ(post("/api/sessions/" + id + "/reset", json::object()).first, 409);

  int final_status = 202;
  json body;
  for (int i = 0; i < 600 && final_status == 202; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::tie(final_status, body) = get(poll);
  }
  ASSERT_EQ(final_status, 200) << body.dump();
  EXPECT_EQ(body["kind"], "counterfactual");
}

TEST_F(ServiceTest, ConcurrentQueriesOnOneSessionExactlyOneWins) {
  const std::string id = create("m1", true);
  const json q{{"kind", "QC4"}, {"agent", 2}, {"m", 2}};
  int a = 0, b = 0;
  std::thread t1([&] { a = post("/api/sessions/" + id + "/query", q).first; });
  std::thread t2([&] { b = post("/api/sessions/" + id + "/query", q).first; });
  t1.join();
  t2.join();
  EXPECT_EQ(std::min(a, b), 200);
  EXPECT_EQ(std::max(a, b), 409);
}
