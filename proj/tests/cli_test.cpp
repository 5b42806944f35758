#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stopgame/cli/commands.hpp"

namespace stopgame::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stopgame");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config(const std::string& name) { return std::string(STOPGAME_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stopgame_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  fs::path dir_;
};

TEST_F(CliTest, SolveGameWritesOneRowPerPlayerStepAndState) {
  const auto r = run_cli({"solve-game", "--config", config("majority3.toml"), "--horizon", "5", "--out", path("v.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("v.csv"));
  EXPECT_EQ(count_lines(csv), 1u + 3 * 6 * 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "player,steps_to_go,state,value,stops");
}

TEST_F(CliTest, NonMonotoneFamilyIsAValidationError) {
  const auto r = run_cli({"solve-game", "--config", config("nonmonotone.toml")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("{1}"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("{1,2}"), std::string::npos) << r.err;
}

TEST_F(CliTest, CyclingInstanceDumpsResidualHistory) {
  const auto r = run_cli({"solve-game", "--config", config("cycling.toml"), "--horizon", "inf", "--tol", "1e-10"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("residual history: 1 1 1"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, InfiniteHorizonConverges) {
  const std::string cfg = write("dict.toml", R"([chain]
transition = [[0.5, 0.5], [0.5, 0.5]]
[game]
dictator = 1
utilities = [[0.0, 1.0]]
)");
  const auto r = run_cli({"solve-game", "-c", cfg, "--horizon", "inf", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["horizon"], "inf");
  EXPECT_TRUE(doc["converged"].get<bool>());
  EXPECT_NEAR(doc["values"][0]["value"].get<double>(), 1.0, 1e-9);
}

TEST_F(CliTest, MissingKeyNamesSectionAndKey) {
  const std::string cfg = write("bad.toml", R"([chain]
transition = [[1.0]]
[game]
majority = 1
horizon = 2
)");
  const auto r = run_cli({"solve-game", "-c", cfg});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("[game] utilities"), std::string::npos) << r.err;

  const std::string rows = write("rows.toml", R"([chain]
transition = [[0.5, 0.6], [0.5, 0.5]]
[game]
majority = 1
utilities = [[0.0, 1.0]]
horizon = 2
)");
  const auto r2 = run_cli({"solve-game", "-c", rows});
  EXPECT_EQ(r2.code, 1);
  EXPECT_NE(r2.err.find("[chain] transition"), std::string::npos) << r2.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"solve-game"}).code, 1);
  EXPECT_EQ(run_cli({"solve-game", "-c", path("missing.toml")}).code, 1);
  EXPECT_EQ(run_cli({"solve-game", "-c", config("majority3.toml"), "--format", "xml"}).code, 1);
  EXPECT_EQ(run_cli({"solve-dynkin", "-c", config("dynkin_matching_pennies.toml"), "--horizon", "inf"}).code, 1);
}

TEST_F(CliTest, HelpForEverySubcommand) {
  const auto top = run_cli({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"solve-game", "verify", "solve-dynkin", "detect", "simulate-net"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos);
    const auto r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--config"), std::string::npos) << sub;
  }
}

TEST_F(CliTest, VerifyCertifiesTheSolverProfile) {
  const auto r = run_cli({"verify", "-c", config("majority3.toml"), "--method", "exhaustive", "--horizon", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 1u + 4 * 3);
}

TEST_F(CliTest, VerifyRejectsANonEquilibriumProfile) {
  const std::string cfg = write("never.toml", R"([chain]
states = ["s1", "s2"]
transition = [[0.5, 0.5], [0.5, 0.5]]
[game]
dictator = 1
utilities = [[0.0, 1.0]]
horizon = 2
[verify]
x0 = "s2"
profile = [[[]], [[]]]
)");
  const auto r = run_cli({"verify", "-c", cfg});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.out, "x0,player,profile_payoff,best_payoff,gap\ns2,1,0.5,0.75,0.25\n");
}

TEST_F(CliTest, DynkinMatchingPennies) {
  const auto r = run_cli({"solve-dynkin", "-c", config("dynkin_matching_pennies.toml")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("not ordered"), std::string::npos);
  EXPECT_NE(r.out.find("1,a,0,0.5,0.5\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, OutputsAreByteIdenticalAcrossRuns) {
  const std::vector<std::vector<std::string>> commands{
      {"solve-game", "-c", config("majority3.toml")},
      {"verify", "-c", config("majority3.toml")},
      {"solve-dynkin", "-c", config("dynkin_matching_pennies.toml")},
      {"detect", "-c", config("detect.toml"), "--seed", "5"},
      {"simulate-net", "-c", config("net2.toml"), "--seed", "5", "--horizon", "8"},
  };
  int k = 0;
  for (auto cmd : commands) {
    for (const char* fmt : {"csv", "json"}) {
      std::vector<std::string> contents;
      for (int rep = 0; rep < 2; ++rep) {
        const std::string out = path("out" + std::to_string(k++) + ".txt");
        auto args = cmd;
        args.insert(args.end(), {"--format", fmt, "--out", out});
        const auto r = run_cli(args);
        ASSERT_EQ(r.code, 0) << cmd[0] << ' ' << r.err;
        contents.push_back(slurp(out));
      }
      EXPECT_EQ(contents[0], contents[1]) << cmd[0] << ' ' << fmt;
      EXPECT_FALSE(contents[0].empty());
    }
  }
}

TEST_F(CliTest, JsonReportsReparse) {
  auto parse = [](std::vector<std::string> args) {
    args.insert(args.end(), {"--format", "json"});
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return nlohmann::json::parse(r.out);
  };
  const auto game = parse({"solve-game", "-c", config("majority3.toml")});
  EXPECT_EQ(game["command"], "solve-game");
  EXPECT_EQ(game["values"].size(), 3u * 6 * 4);
  EXPECT_EQ(game["profile"].size(), 5u);
  for (const auto& row : game["values"]) {
    EXPECT_TRUE(row["value"].is_number());
    EXPECT_TRUE(row["state"].is_string());
  }

  const auto verify = parse({"verify", "-c", config("majority3.toml")});
  EXPECT_EQ(verify["command"], "verify");
  EXPECT_TRUE(verify["equilibrium"].get<bool>());
  EXPECT_LE(verify["max_gap"].get<double>(), 1e-9);

  const auto dynkin = parse({"solve-dynkin", "-c", config("dynkin_matching_pennies.toml")});
  EXPECT_EQ(dynkin["command"], "solve-dynkin");
  EXPECT_FALSE(dynkin["neveu_ordered"].get<bool>());
  EXPECT_EQ(dynkin["neveu_witness"], "a");
  EXPECT_EQ(dynkin["values"].size(), 4u);

  const auto detect = parse({"detect", "-c", config("detect.toml"), "--seed", "3"});
  EXPECT_EQ(detect["command"], "detect");
  EXPECT_EQ(detect["seed"], 3);
  EXPECT_EQ(detect["policies"].size(), 3u);
  for (const auto& p : detect["policies"]) {
    EXPECT_GE(p["estimate"].get<double>(), 0.0);
    EXPECT_LE(p["estimate"].get<double>(), 1.0);
  }

  const auto net = parse({"simulate-net", "-c", config("net2.toml"), "--horizon", "6"});
  EXPECT_EQ(net["command"], "simulate-net");
  EXPECT_EQ(net["sensors"].size(), 2u);
  std::size_t total = 0;
  for (const auto& h : net["mc"]["stop_time_histogram"]) total += h["count"].get<std::size_t>();
  EXPECT_EQ(total, net["mc"]["reps"].get<std::size_t>());
}

TEST_F(CliTest, DetectReportsEachPolicy) {
  const auto r = run_cli({"detect", "-c", config("detect.toml")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 5u);
  EXPECT_EQ(r.out.rfind("policy,reps,estimate,stderr\ndp-value,0,", 0), 0u) << r.out;
}

TEST_F(CliTest, SimulateNetWritesStopTimeTable) {
  const auto r = run_cli({"simulate-net", "-c", config("net2.toml"), "--horizon", "5", "-o", path("net.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(path("net.csv"))), 3u);
  const std::string hist = slurp(path("net_stop_times.csv"));
  EXPECT_EQ(count_lines(hist), 6u);
  EXPECT_EQ(hist.rfind("moment,count\n", 0), 0u);
}

}  // namespace
}  // namespace stopgame::cli
