#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "hydat/dispatch.hpp"

namespace hydat {
namespace {

using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = (dir_ / "h.db").string();
    const auto synth = run({"synth", "--hours", "1500", "--seed", "42"});
    ASSERT_EQ(synth.code, 0) << synth.err;
    const auto ingest = run({"ingest", "--db", db_}, synth.out);
    ASSERT_EQ(ingest.code, 0) << ingest.err;
    EXPECT_NE(ingest.out.find("Plant_Data 3000"), std::string::npos) << ingest.out;
  }
  TempDir dir_;
  std::string db_;
};

TEST_F(CliTest, LagReportsTheSyntheticShift) {
  const auto r = run({"lag", "--db", db_, "--up", "UP", "--down", "DOWN", "--season", "winter"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nwinter,2,"), std::string::npos) << r.out;
  const auto all = run({"lag", "--db", db_, "--up", "UP", "--down", "DOWN", "--json"});
  ASSERT_EQ(all.code, 0) << all.err;
  const auto j = nlohmann::json::parse(all.out);
  ASSERT_FALSE(j["seasons"].empty());
  EXPECT_EQ(j["seasons"][0]["season"], "winter");
  EXPECT_EQ(j["seasons"][0]["best_lag_hours"], 2);
  EXPECT_NE(all.err.find("summer skipped"), std::string::npos);
}

TEST_F(CliTest, UsageAndRuntimeErrors) {
  EXPECT_EQ(run({"train", "--db", db_}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  const auto missing = run({"train", "--db", db_, "--plant", "NOPE", "--epochs", "1"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.rfind("error: code=not_found message=", 0), 0u) << missing.err;
  const auto bad_link = run({"dispatch", "--db", db_, "--plant", "UP", "--scenario", "dry:summer", "--link", "UP"});
  EXPECT_EQ(bad_link.code, 1);
  EXPECT_EQ(run({"dispatch", "--db", db_, "--plant", "UP", "--scenario", "monsoon"}).code, 1);
}

TEST_F(CliTest, TrainDispatchExport) {
  for (const char* p : {"UP", "DOWN"}) {
    const auto t = run({"train", "--db", db_, "--plant", p, "--epochs", "5"});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_NE(t.out.find("model_file"), std::string::npos);
  }
  const std::vector<std::string> args{"dispatch", "--db", db_, "--plant", "UP", "--plant", "DOWN", "--scenario",
                                      "hist:2013-01-10..2013-01-20", "--link", "UP:DOWN"};
  auto with_out = args;
  with_out.insert(with_out.end(), {"--out", (dir_ / "a.csv").string(), "--manifest", (dir_ / "m.json").string()});
  ASSERT_EQ(run(with_out).code, 0);
  const auto stdout_run = run(args);
  ASSERT_EQ(stdout_run.code, 0) << stdout_run.err;
  const auto file = testing::read_file(dir_ / "a.csv");
  EXPECT_EQ(file, stdout_run.out);
  EXPECT_EQ(file.rfind(std::string(kCaseHeader) + "\n", 0), 0u);
  std::istringstream in(file);
  EXPECT_EQ(read_case(in).size(), 15u);
  const auto m = nlohmann::json::parse(testing::read_file(dir_ / "m.json"));
  EXPECT_EQ(m["links"].size(), 1u);

  const auto exp = run({"export", "--db", db_, "--table", "static_unit", "--plant", "UP"});
  ASSERT_EQ(exp.code, 0) << exp.err;
  EXPECT_EQ(std::count(exp.out.begin(), exp.out.end(), '\n'), 10);
}

TEST_F(CliTest, EfficiencyCurves) {
  const auto r = run({"efficiency", "--db", db_, "--plant", "UP", "--plot", (dir_ / "svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("unit_id,head_ft,points", 0), 0u);
  EXPECT_FALSE(std::filesystem::is_empty(dir_ / "svg"));
}

}  // namespace
}  // namespace hydat
