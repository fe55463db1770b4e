#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("trapk_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome run_cli(const std::string& args) {
  const auto err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(TRAPK_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  std::ifstream is(err);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json report(const std::string& prefix) { return json::parse(slurp(work_dir() / (prefix + ".json"))); }

std::string out(const std::string& prefix) { return "--output " + (work_dir() / prefix).string(); }

}  // namespace

TEST(Cli, EntranceLawReport) {
  auto r = run_cli("run --experiment entrance-law --d 8 --J 5 --replicas 4000 --seed 7 " + out("entrance"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = slurp(work_dir() / "entrance.csv");
  EXPECT_EQ(csv.rfind("target_rank,count,frequency,expected\n1,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  auto j = report("entrance");
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["config"]["experiment"], "entrance-law");
  EXPECT_EQ(j["config"]["seed"], 7);
  EXPECT_TRUE(j["results"]["chi_square"]["pvalue"].is_number());
  EXPECT_EQ(j["provenance"]["master_seed"], 7);
  EXPECT_TRUE(j["runtime"]["wall_clock_seconds"].is_number());
}

TEST(Cli, WorkerCountDoesNotChangeReports) {
  const std::string base = "run --experiment converge --d 8 --replicas 3000 --seed 3 ";
  ASSERT_EQ(run_cli(base + "--workers 1 " + out("w1")).status, 0);
  ASSERT_EQ(run_cli(base + "--workers 4 " + out("w4")).status, 0);
  EXPECT_EQ(slurp(work_dir() / "w1.csv"), slurp(work_dir() / "w4.csv"));
  auto a = report("w1"), b = report("w4");
  a.erase("runtime");
  b.erase("runtime");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Cli, EchoedConfigReruns) {
  ASSERT_EQ(run_cli("run --experiment aging --model rem-like --alpha 0.5 --d 8 --theta 0.5,1,2 --replicas 800 " +
                    out("aging1"))
                .status,
            0);
  const auto csv = slurp(work_dir() / "aging1.csv");
  EXPECT_EQ(csv.rfind("theta,estimate,ci_half_width,n,theory_R\n0.5,", 0), 0u);
  auto first = report("aging1");
  const auto cfg = work_dir() / "echo.json";
  std::ofstream(cfg) << first["config"].dump(2);
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " " + out("aging2")).status, 0);
  EXPECT_EQ(slurp(work_dir() / "aging2.csv"), csv);
  EXPECT_EQ(report("aging2")["results"], first["results"]);
}

TEST(Cli, FlagsOverrideFile) {
  const auto cfg = work_dir() / "eq.json";
  std::ofstream(cfg) << R"({"schema_version": 1, "experiment": "equilibrium", "model": "explicit",
                            "gamma": [5, 4, 3, 2, 1], "replicas": 500, "seed": 1})";
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --seed 9 " + out("eq")).status, 0);
  auto j = report("eq");
  EXPECT_EQ(j["config"]["seed"], 9);
  EXPECT_EQ(j["config"]["replicas"], 500);
  EXPECT_EQ(slurp(work_dir() / "eq.csv").rfind("state,count,frequency,gamma_bar\n", 0), 0u);
}

TEST(Cli, UnknownFieldRejected) {
  const auto cfg = work_dir() / "bad.json";
  std::ofstream(cfg) << R"({"schema_version": 1, "experiment": "aging", "replicaz": 10})";
  auto r = run_cli("run --config " + cfg.string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("replicaz"), std::string::npos);
}

TEST(Cli, MissingSchemaVersionRejected) {
  const auto cfg = work_dir() / "noversion.json";
  std::ofstream(cfg) << R"({"experiment": "aging"})";
  auto r = run_cli("run --config " + cfg.string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("schema_version"), std::string::npos);
}

TEST(Cli, FieldLevelErrors) {
  auto r = run_cli("run --experiment aging --alpha 1.5 --replicas 10");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("'alpha'"), std::string::npos);
  r = run_cli("run --experiment aging --model rem --beta 1.0 --d 6 --replicas 10");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("sqrt(2 log 2)"), std::string::npos);
  r = run_cli("run --experiment entrance-law --d 30");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("'d'"), std::string::npos);
  r = run_cli("run --experiment teleport");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("'experiment'"), std::string::npos);
  r = run_cli("run --experiment converge --d 8 --replicas abc");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("'replicas'"), std::string::npos);
}

TEST(Cli, SkorohodBoundAndEnvironmentExport) {
  const auto env_json = work_dir() / "env.json";
  const auto env_bin = work_dir() / "env.bin";
  auto r = run_cli("run --experiment skorohod-bound --model rem-like --d 6 --epsilon 0.05 --replicas 50 --K 1,2 "
                   "--env-json " + env_json.string() + " --env-binary " + env_bin.string() + " " + out("sk"));
  ASSERT_EQ(r.status, 0) << r.err;
  auto j = report("sk");
  const double bound = j["results"]["bound"]["mean"];
  const double identity = j["results"]["identity_bound"]["mean"];
  EXPECT_LE(bound, identity);
  EXPECT_GE(bound, 0.0);
  EXPECT_EQ(fs::file_size(env_bin), 8u * 64u);
  EXPECT_EQ(json::parse(slurp(env_json))["kind"], "rem-like");
}
