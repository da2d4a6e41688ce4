#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aggrl/agent.hpp"
#include "test_support.hpp"

namespace {

struct Outcome {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

Outcome run(const std::string& args) {
  const std::string command = std::string(AGGRL_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help").exit_code, 0);
  for (const char* sub : {"train", "evaluate", "study", "worker", "serve", "replay", "validate-config", "best"}) {
    const Outcome o = run(std::string(sub) + " --help");
    EXPECT_EQ(o.exit_code, 0) << sub;
    EXPECT_NE(o.output.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, UnknownFlagIsUsageError) {
  const Outcome o = run("evaluate --checkpoint x --bogus 3");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_NE(o.output.find("bogus"), std::string::npos);
  EXPECT_EQ(run("").exit_code, 1);
  EXPECT_EQ(run("frobnicate").exit_code, 1);
}

TEST(Cli, ValidateConfigNamesBadField) {
  aggrl::testing::TempDir dir("cli");
  write_file(dir.path() / "bad.ini", "[hyper]\ngamma = 1.5\n");
  const Outcome bad = run("validate-config " + (dir.path() / "bad.ini").string());
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.output.find("hyper.gamma"), std::string::npos);

  write_file(dir.path() / "good.ini", "[run]\nalgorithm = dqn\n");
  EXPECT_EQ(run("validate-config --config " + (dir.path() / "good.ini").string()).exit_code, 0);
  EXPECT_EQ(run("validate-config " + std::string(AGGRL_SOURCE_DIR) + "/configs/default.ini").exit_code, 0);
}

TEST(Cli, EvaluateZeroTrialsIsEmptyReport) {
  const Outcome o = run("evaluate --checkpoint does-not-matter.ckpt --trials 0");
  ASSERT_EQ(o.exit_code, 0) << o.output;
  const auto j = nlohmann::json::parse(o.output);
  EXPECT_EQ(j.at("trials"), 0);
  EXPECT_TRUE(j.at("success_rate").is_null());
}

TEST(Cli, EvaluateMissingCheckpointIsRuntimeError) {
  EXPECT_EQ(run("evaluate --checkpoint /nonexistent.ckpt --trials 1").exit_code, 2);
}

TEST(Cli, EvaluateCheckpoint) {
  aggrl::testing::TempDir dir("cli");
  const auto path = dir.path() / "m.ckpt";
  aggrl::save_checkpoint(path, aggrl::Checkpoint{aggrl::Agent(aggrl::Algorithm::ddpg, {}, 3), 0, {}});
  write_file(dir.path() / "short.ini", "[scenario]\ntime_limit = 20\n");
  const Outcome o = run("evaluate --checkpoint " + path.string() + " --config " + (dir.path() / "short.ini").string() +
                        " --robots 6 --trials 2 2>/dev/null");
  ASSERT_EQ(o.exit_code, 0) << o.output;
  const auto j = nlohmann::json::parse(o.output);
  EXPECT_EQ(j.at("robots"), 6);
  EXPECT_EQ(j.at("trials"), 2);
  EXPECT_EQ(j.at("mean_episode_length"), 20.0);
}

TEST(Cli, ReplayRendersPayloadPolyline) {
  aggrl::testing::TempDir dir("cli");
  const auto log = dir.path() / "three.jsonl";
  write_file(log,
             R"({"type":"scenario","arena_half_extent":10,"goal":[6,1],"goal_threshold":0.5,"payload_radius":0.5,)"
             R"("robot_radius":0.17,"obstacles":[{"kind":"cylinder","center":[0,2],"radius":0.5},)"
             R"({"kind":"wall","a":[3,-10],"b":[3,-2],"thickness":0.2}]})"
             "\n"
             R"({"type":"tick","tick":0,"payload":[-6,0,0],"robots":[[-5.33,0,0,false]],"reward":0,"terminal":"running"})"
             "\n"
             R"({"type":"tick","tick":1,"payload":[-5.9,0,0],"robots":[[-5.23,0,0,false]],"reward":-1,"terminal":"running"})"
             "\n"
             R"({"type":"tick","tick":2,"payload":[-5.8,0.1,0],"robots":[[-5.13,0.1,0,false]],"reward":-1,"terminal":"timeout"})"
             "\n");
  const auto svg = dir.path() / "out.svg";
  const Outcome o = run("replay --log " + log.string() + " --out " + svg.string());
  ASSERT_EQ(o.exit_code, 0) << o.output;
  const std::string text = read_file(svg);
  EXPECT_EQ(count(text, "<polyline"), 1);
  std::smatch m;
  ASSERT_TRUE(std::regex_search(text, m, std::regex(R"re(points="([^"]*)")re")));
  std::istringstream points(m[1].str());
  std::string vertex;
  int vertices = 0;
  while (points >> vertex) ++vertices;
  EXPECT_EQ(vertices, 3);
  EXPECT_EQ(count(text, "class=\"obstacle\""), 2);
  EXPECT_EQ(count(text, "class=\"goal\""), 1);
}

TEST(Cli, ReplayMalformedLogIsUsageError) {
  aggrl::testing::TempDir dir("cli");
  write_file(dir.path() / "bad.jsonl", "{not json\n");
  EXPECT_EQ(run("replay --log " + (dir.path() / "bad.jsonl").string() + " --out " +
                (dir.path() / "x.svg").string())
                .exit_code,
            1);
}

TEST(Cli, TrainWritesSelfDescribingRun) {
  aggrl::testing::TempDir dir("cli");
  write_file(dir.path() / "tiny.ini",
             "[run]\nalgorithm = dqn\nepisodes = 2\ncheckpoint_interval = 1\n"
             "[scenario]\ntime_limit = 10\n[hyper]\nbatch_size = 8\nreplay_capacity = 1000\n");
  const auto out = dir.path() / "run";
  const Outcome o = run("train --config " + (dir.path() / "tiny.ini").string() + " --seed 4 --algo ddqn --out " +
                        out.string() + " --quiet");
  ASSERT_EQ(o.exit_code, 0) << o.output;
  const std::string snapshot = read_file(out / "config.snapshot");
  EXPECT_NE(snapshot.find("algorithm = ddqn"), std::string::npos);
  EXPECT_NE(snapshot.find("seed = 4"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "checkpoints" / "ep2.ckpt"));
  EXPECT_EQ(count(read_file(out / "metrics.log"), "\n"), 2);

  const Outcome best = run("best --run " + out.string() + " --validation-episodes 1 2>/dev/null");
  ASSERT_EQ(best.exit_code, 0) << best.output;
  EXPECT_NE(best.output.find("ep"), std::string::npos);
}

TEST(Cli, StudyWithoutModelsIsUsageError) {
  aggrl::testing::TempDir dir("cli");
  const Outcome o = run("study --kind gate --out " + dir.path().string() + " --trials 1");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_NE(o.output.find("--train"), std::string::npos);
  EXPECT_EQ(run("study --kind sideways").exit_code, 1);
}
