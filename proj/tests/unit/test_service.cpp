#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <thread>

#include "fixtures.hpp"
#include "hydat/service.hpp"

namespace hydat {
namespace {

using json = nlohmann::json;
using testing::TempDir;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::load_cascade(store_, testing::small_cascade(1200));
    ServiceOptions options;
    options.train_defaults.epochs = 4;
    service_ = std::make_unique<Service>(store_, ModelRepository(dir_ / "models"), options);
  }

  ApiResponse get(const std::string& path, std::multimap<std::string, std::string> q = {}) {
    return service_->handle("GET", path, q, "");
  }
  ApiResponse post(const std::string& path, const json& body) { return service_->handle("POST", path, {}, body.dump()); }

  json train(const std::string& plant) {
    const auto r = post("/api/train", {{"plant", plant}});
    EXPECT_EQ(r.status, 202) << r.body.dump();
    service_->wait_idle();
    return get("/api/train/" + r.body["job_id"].get<std::string>()).body;
  }

  TempDir dir_;
  Store store_{":memory:"};
  std::unique_ptr<Service> service_;
};

TEST_F(ServiceTest, HealthAndPlants) {
  EXPECT_EQ(get("/api/health").body["status"], "ok");
  const auto r = get("/api/plants");
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body["plants"].size(), 2u);
  for (const auto& p : r.body["plants"]) {
    EXPECT_FALSE(p["has_model"].get<bool>());
    EXPECT_GT(p["unit_count"].get<int>(), 0);
  }
  EXPECT_EQ(get("/nope").status, 404);
  EXPECT_EQ(service_->handle("DELETE", "/api/plants", {}, "").status, 405);
}

TEST_F(ServiceTest, TimeseriesDay) {
  const auto r = get("/api/plants/UP/timeseries",
                     {{"start", "2013-01-05T00:00:00Z"}, {"end", "2013-01-06T00:00:00Z"}, {"fields", "flow,mw"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["timestamps"].size(), 24u);
  EXPECT_EQ(r.body["fields"], json({"flow", "mw"}));
  EXPECT_EQ(r.body["series"]["flow"].size(), 24u);
  EXPECT_FALSE(r.body["series"].contains("head"));
  EXPECT_EQ(r.body["timestamps"][0], "2013-01-05T00:00:00Z");
}

TEST_F(ServiceTest, TimeseriesErrors) {
  EXPECT_EQ(get("/api/plants/UP/timeseries", {{"start", "2013-01-06T00:00:00Z"}, {"end", "2013-01-05T00:00:00Z"}}).status,
            400);
  EXPECT_EQ(get("/api/plants/NOPE/timeseries").status, 404);
  EXPECT_EQ(get("/api/plants/UP/timeseries", {{"fields", "bogus"}}).status, 400);
  EXPECT_EQ(get("/api/plants/UP/timeseries", {{"start", "yesterday"}}).status, 400);
  const auto e = get("/api/plants/NOPE/timeseries").body;
  EXPECT_EQ(e["error"]["code"], "not_found");
  EXPECT_TRUE(e["error"].contains("message"));
}

TEST_F(ServiceTest, DispatchValidation) {
  EXPECT_EQ(service_->handle("POST", "/api/dispatch", {}, "{oops").status, 400);
  EXPECT_EQ(post("/api/dispatch", {{"plants", json::array()}}).status, 400);
  EXPECT_EQ(post("/api/dispatch", {{"plants", {"UP"}}}).status, 422);
  EXPECT_EQ(post("/api/dispatch", {{"plants", {"NOPE"}}, {"scenario", "dry:summer"}}).status, 422);
  EXPECT_EQ(post("/api/dispatch", {{"plants", {"UP"}}, {"scenario", "dry:monsoon"}}).status, 422);
  EXPECT_EQ(post("/api/dispatch", {{"plants", {"UP"}}, {"scenario", "dry:summer"}, {"threshold", 2}}).status, 422);
  const auto untrained = post("/api/dispatch", {{"plants", {"UP"}}, {"scenario", "dry:summer"}});
  EXPECT_EQ(untrained.status, 409);
  EXPECT_EQ(untrained.body["error"]["details"]["plants"], json({"UP"}));
  EXPECT_EQ(get("/api/dispatch/run-999999").status, 404);
  EXPECT_EQ(get("/api/train/train-999999").status, 404);
  EXPECT_EQ(post("/api/train", {{"plant", "NOPE"}}).status, 422);
  EXPECT_EQ(post("/api/train", json::object()).status, 400);
  EXPECT_EQ(post("/api/train", {{"plant", "UP"}, {"config", {{"epochs", "many"}}}}).status, 400);
}

TEST_F(ServiceTest, TrainThenDispatch) {
  const auto job = train("UP");
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["progress"], 1.0);
  EXPECT_TRUE(job["report"].is_object());

  const auto posted = post("/api/dispatch", {{"plants", {"UP"}},
                                             {"scenario", {{"start", "2013-01-10T00:00:00Z"}, {"end", "2013-01-20T00:00:00Z"}}}});
  ASSERT_EQ(posted.status, 202) << posted.body.dump();
  service_->wait_idle();
  const auto run = get("/api/dispatch/" + posted.body["run_id"].get<std::string>()).body;
  ASSERT_EQ(run["status"], "done") << run.dump();
  EXPECT_EQ(run["rows"].size(), store_.join_units_of("UP").size());
  EXPECT_TRUE(run["export_csv"].get<std::string>().rfind(kCaseHeader, 0) == 0);
  EXPECT_TRUE(run.contains("correction_log"));
  EXPECT_TRUE(get("/api/plants").body["plants"][1]["has_model"].get<bool>() ||
              get("/api/plants").body["plants"][0]["has_model"].get<bool>());
}

TEST_F(ServiceTest, DuplicateTrainingIsRejected) {
  ServiceOptions options;
  options.workers = 1;
  options.train_defaults.epochs = 30;
  Service slow(store_, ModelRepository(dir_ / "slow"), options);
  const auto first = slow.handle("POST", "/api/train", {}, json{{"plant", "DOWN"}}.dump());
  ASSERT_EQ(first.status, 202);
  const auto second = slow.handle("POST", "/api/train", {}, json{{"plant", "DOWN"}}.dump());
  EXPECT_EQ(second.status, 409);
  EXPECT_EQ(second.body["error"]["details"]["job_id"], first.body["job_id"]);
  slow.wait_idle();
  EXPECT_EQ(slow.handle("POST", "/api/train", {}, json{{"plant", "DOWN"}}.dump()).status, 202);
  slow.wait_idle();
}

TEST_F(ServiceTest, ServesOverHttp) {
  const int port = service_->start_background();
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
  res = client.Get("/api/plants/UP/timeseries?start=2013-01-05T00:00:00Z&end=2013-01-06T00:00:00Z&fields=head");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["timestamps"].size(), 24u);
  res = client.Post("/api/dispatch", R"({"plants":["UP"],"scenario":"dry:summer"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "untrained");
  service_->stop();
}

}  // namespace
}  // namespace hydat
