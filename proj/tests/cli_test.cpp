#include "cares/cli.hpp"

#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace cares {
namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> run_args(const test::TempDir& dir, const std::string& name,
                                  std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"run", "--dataset-dir", test::fixture_dir().string(), "--out",
                                   (dir / name).string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

TEST(Cli, HelpAndUsageErrors) {
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"run", "sweep-theta", "calibrate-alpha", "gen-prompts", "stats", "validate-kb"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"run", "--bogus"}).code, 1);
  EXPECT_EQ(cli({"run", "--mode", "cares"}).code, 1);
}

TEST(Cli, ValidateKb) {
  const auto ok = cli({"validate-kb"});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("6 error types"), std::string::npos);
  EXPECT_EQ(ok.out.find("Expert"), std::string::npos);

  const auto routing = cli({"validate-kb", "--show-routing"});
  EXPECT_NE(routing.out.find("Instrument Control"), std::string::npos);
  EXPECT_NE(routing.out.find("Expert"), std::string::npos);
  EXPECT_EQ(count_lines(routing.out), 8u);

  test::TempDir dir;
  auto doc = nlohmann::json::parse(test::read_file(test::source_dir() / "kb" / "default.json"));
  doc["errors"][0]["tis"] = 5;
  test::write_file(dir / "bad.json", doc.dump());
  const auto bad = cli({"validate-kb", "--kb", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("InvalidRisk"), std::string::npos) << bad.err;
}

TEST(Cli, GenPromptsWritesFiftyFourFiles) {
  test::TempDir dir;
  const auto r = cli({"gen-prompts", "--out", (dir / "p").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "p")) ++files;
  EXPECT_EQ(files, 54u);
  const auto text = test::read_file(dir / "p" / "e6_expert_temporal.txt");
  EXPECT_NE(text.find("expert surgeon"), std::string::npos);
}

TEST(Cli, Stats) {
  const auto r = cli({"stats", "--dataset-dir", test::fixture_dir().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Tissue Handling"), std::string::npos);
  EXPECT_NE(r.out.find("900"), std::string::npos);
  EXPECT_NE(r.out.find("248"), std::string::npos);
  EXPECT_EQ(cli({"stats"}).code, 2);
}

TEST(Cli, RunWritesDeterministicOutputs) {
  test::TempDir dir;
  const auto a = cli(run_args(dir, "a", {"--runs", "2", "--mock-accuracy", "0.7", "--workers", "1"}));
  const auto b = cli(run_args(dir, "b", {"--runs", "2", "--mock-accuracy", "0.7", "--workers", "6"}));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"report.csv", "report.txt", "config.json", "run_0/detections.jsonl",
                        "run_1/detections.jsonl", "run_0/report.csv", "run_1/skipped.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(test::read_file(dir / "a" / f), test::read_file(dir / "b" / f)) << f;
  }
  EXPECT_NE(test::read_file(dir / "a" / "run_0/detections.jsonl"),
            test::read_file(dir / "a" / "run_1/detections.jsonl"));
  EXPECT_EQ(count_lines(test::read_file(dir / "a" / "run_0/detections.jsonl")), 63u * 6u);
  EXPECT_FALSE(std::filesystem::exists(dir / "a" / "INCOMPLETE"));
}

TEST(Cli, PerfectMockScoresPerfectly) {
  test::TempDir dir;
  const auto r = cli(run_args(dir, "o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = test::read_file(dir / "o" / "report.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_NE(line.find(",full,1,100.0000,0.0000,100.0000,0.0000,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 7);
  EXPECT_NE(r.out.find("inference requests: 1134"), std::string::npos) << r.out;
}

TEST(Cli, ErrorSelectionAndTraces) {
  test::TempDir dir;
  const auto r = cli(run_args(dir, "o", {"--errors", "5,2", "--no-traces", "--mode", "dynamic-majority"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stream = test::read_file(dir / "o" / "run_0/detections.jsonl");
  EXPECT_EQ(count_lines(stream), 126u);
  EXPECT_EQ(stream.find("\"trace\""), std::string::npos);
  EXPECT_EQ(stream.find("\"error_id\":1"), std::string::npos);
  const auto bad = cli(run_args(dir, "x", {"--errors", "9"}));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("UnknownErrorId"), std::string::npos);
}

TEST(Cli, OrderingIsEnforcedUnlessOverridden) {
  test::TempDir dir;
  const auto bad = cli(run_args(dir, "o", {"--alpha-t", "0.5"}));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("OrderingViolation"), std::string::npos);
  EXPECT_EQ(cli(run_args(dir, "o", {"--alpha-t", "0.5", "--allow-unordered-alpha", "--errors", "1"})).code, 0);
}

TEST(Cli, RemoteBackendNeedsFrames) {
  test::TempDir dir;
  const auto r = cli(run_args(dir, "o", {"--backend", "remote", "--backend-url", "http://127.0.0.1:9/v1"}));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("videos"), std::string::npos) << r.err;
}

TEST(Cli, SweepThetaFromFullRun) {
  test::TempDir dir;
  ASSERT_EQ(cli(run_args(dir, "full", {"--runs", "2", "--mock-accuracy", "0.8"})).code, 0);
  const auto r = cli({"sweep-theta", "--from", (dir / "full").string(), "--out", (dir / "sweep.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = test::read_file(dir / "sweep.csv");
  EXPECT_EQ(count_lines(csv), 1u + 47u * 7u);
  EXPECT_EQ(csv.rfind("theta,task,mf1,bacc,positives\n", 0), 0u);
  EXPECT_NE(csv.find("\n2.2500,mean,"), std::string::npos);

  const auto single = cli({"sweep-theta", "--detections", (dir / "full" / "run_0" / "detections.jsonl").string(),
                           "--theta-min", "2.0", "--theta-max", "2.5", "--theta-step", "0.25"});
  ASSERT_EQ(single.code, 0) << single.err;
  EXPECT_EQ(count_lines(single.out), 1u + 3u * 7u);
}

TEST(Cli, SweepThetaNeedsScores) {
  test::TempDir dir;
  const auto none = cli({"sweep-theta", "--from", (dir / "missing").string()});
  EXPECT_EQ(none.code, 2);
  EXPECT_NE(none.err.find("cares run --mode full"), std::string::npos) << none.err;
  ASSERT_EQ(cli(run_args(dir, "base", {"--mode", "baseline", "--errors", "1"})).code, 0);
  const auto scoreless = cli({"sweep-theta", "--from", (dir / "base").string()});
  EXPECT_EQ(scoreless.code, 2);
  EXPECT_NE(scoreless.err.find("ScorelessDetections"), std::string::npos);
}

TEST(Cli, CalibrateAlpha) {
  test::TempDir dir;
  const std::vector<std::string> base = {"calibrate-alpha", "--dataset-dir", test::fixture_dir().string(),
                                         "--out", (dir / "cal").string(), "--errors", "3",
                                         "--alpha-grid", "0.5,1.5"};
  const auto refused = cli(base);
  EXPECT_EQ(refused.code, 2);
  EXPECT_NE(refused.err.find("OrderingViolation"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "cal" / "alpha_calibration.csv"));

  auto args = base;
  args.push_back("--allow-unordered-alpha");
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = test::read_file(dir / "cal" / "alpha_calibration.csv");
  EXPECT_EQ(csv, r.out);
  EXPECT_EQ(count_lines(csv), 1u + 6u);
  // With a perfect mock, weights (t,1,1) at theta 2.25 still need all three agents or t > 1.25.
  EXPECT_NE(csv.find("Temporal,0.5000,100.0000,100.0000"), std::string::npos) << csv;
}

TEST(Cli, ConfigFileLayering) {
  test::TempDir dir;
  test::write_file(dir / "cfg.json",
                   R"({"mock-accuracy": 0.0, "errors": "2", "backend-model": "from-config"})");
  const auto cfg = (dir / "cfg.json").string();

  ::unsetenv("CARES_BACKEND_MODEL");
  ASSERT_EQ(cli(run_args(dir, "c", {"--config", cfg})).code, 0);
  auto conf = nlohmann::json::parse(test::read_file(dir / "c" / "config.json"));
  EXPECT_EQ(conf["mock_accuracy"], 0.0);
  EXPECT_EQ(conf["errors"], "2");
  EXPECT_EQ(conf["backend_model"], "from-config");
  EXPECT_NE(test::read_file(dir / "c" / "report.csv").find("error 2,full,1,0.0000"), std::string::npos);

  ::setenv("CARES_BACKEND_MODEL", "from-env", 1);
  ASSERT_EQ(cli(run_args(dir, "e", {"--config", cfg})).code, 0);
  conf = nlohmann::json::parse(test::read_file(dir / "e" / "config.json"));
  EXPECT_EQ(conf["backend_model"], "from-env");

  ASSERT_EQ(cli(run_args(dir, "f", {"--config", cfg, "--mock-accuracy", "1", "--backend-model", "from-flag"})).code, 0);
  conf = nlohmann::json::parse(test::read_file(dir / "f" / "config.json"));
  EXPECT_EQ(conf["mock_accuracy"], 1.0);
  EXPECT_EQ(conf["backend_model"], "from-flag");
  EXPECT_EQ(conf["errors"], "2");
  ::unsetenv("CARES_BACKEND_MODEL");

  test::write_file(dir / "bad.json", R"({"no-such-flag": 1})");
  const auto bad = cli(run_args(dir, "g", {"--config", (dir / "bad.json").string()}));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("no-such-flag"), std::string::npos);
}

TEST(Cli, StopFlagLeavesMarkedPartialStream) {
  test::TempDir dir;
  cli_stop_flag() = true;
  const auto r = cli(run_args(dir, "o"));
  cli_stop_flag() = false;
  EXPECT_EQ(r.code, 130);
  EXPECT_TRUE(std::filesystem::exists(dir / "o" / "INCOMPLETE"));
  const auto stream = test::read_file(dir / "o" / "run_0" / "detections.jsonl");
  EXPECT_NE(stream.find("\"incomplete\":true"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "o" / "report.csv"));

  // A later complete run into the same directory clears the marker.
  ASSERT_EQ(cli(run_args(dir, "o", {"--errors", "1"})).code, 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "o" / "INCOMPLETE"));
}

}  // namespace
}  // namespace cares
