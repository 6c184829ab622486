#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidplan/planner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = VIDPLAN_CLI;
const fs::path kSource = VIDPLAN_SOURCE_DIR;

struct Run {
  int status = 0;
  std::string output;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, "popen failed"};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vidplan_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string reference() { return "--config \"" + (kSource / "data/reference.json").string() + "\""; }
std::string profiles() { return "--profiles \"" + (kSource / "data/reference_profiles.csv").string() + "\""; }
std::string out(const fs::path& d) { return "--out-dir \"" + d.string() + "\""; }

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, DeriveReproducesReferenceShape) {
  const auto dir = scratch("derive");
  const auto r = run("derive " + reference() + " " + profiles() + " " + out(dir));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = json::parse(slurp(dir / "configuration.json"));
  EXPECT_EQ(j["consumer_count"], 24);
  EXPECT_GE(j["duplicate_cfs"].get<int>(), 2);
  const auto& sfs = j["sfs"];
  EXPECT_GE(sfs.size(), 3u);
  EXPECT_LE(sfs.size(), 6u);
  int golden = 0;
  int raw = 0;
  for (const auto& sf : sfs) {
    golden += sf["golden"].get<bool>();
    raw += sf["coding"]["raw"].get<bool>();
  }
  EXPECT_EQ(golden, 1);
  EXPECT_GE(raw, 1);
  EXPECT_TRUE(j["checks"]["passed"].get<bool>());
  EXPECT_LE(5 * j["profiling_runs"]["operator"].get<int>(), j["profiling_runs"]["operator_exhaustive"].get<int>());
  EXPECT_TRUE(fs::exists(dir / "cfs.csv"));
  EXPECT_EQ(csv_rows(dir / "cfs.csv").size(), 24u);
  EXPECT_EQ(csv_rows(dir / "sfs.csv").size(), sfs.size());
}

TEST(Cli, DistanceStrategyStoresAtLeastHeuristic) {
  const auto a = scratch("heuristic");
  const auto b = scratch("distance");
  ASSERT_EQ(run("derive " + reference() + " " + profiles() + " --strategy heuristic " + out(a)).status, 0);
  ASSERT_EQ(run("derive " + reference() + " " + profiles() + " --strategy distance " + out(b)).status, 0);
  const auto h = json::parse(slurp(a / "configuration.json"));
  const auto d = json::parse(slurp(b / "configuration.json"));
  EXPECT_EQ(d["strategy"], "distance");
  EXPECT_GE(d["costs"]["storage_mb_per_s"].get<double>(), h["costs"]["storage_mb_per_s"].get<double>());
  EXPECT_LT(d["profiling_runs"]["coding"].get<int>(), h["profiling_runs"]["coding"].get<int>());
}

TEST(Cli, ErrorsExitNonzeroWithCode) {
  const auto dir = scratch("errors");
  auto r = run("derive " + reference() + " --profiles /nonexistent/profiles.csv " + out(dir));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("ParseError"), std::string::npos) << r.output;

  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"consumers\": [";
  r = run("derive --config \"" + (dir / "bad.json").string() + "\" " + out(dir));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("ParseError"), std::string::npos) << r.output;

  std::ofstream(dir / "noops.json") << "{\"consumers\": [{\"operator\": \"nope\", \"accuracies\": [0.9]}]}";
  r = run("derive --config \"" + (dir / "noops.json").string() + "\" " + profiles() + " " + out(dir));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("ConfigError"), std::string::npos) << r.output;

  r = run("erode " + reference() + " " + out(dir / "empty"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("run derive first"), std::string::npos) << r.output;

  EXPECT_NE(run("derive " + reference() + " --strategy greedy " + out(dir)).status, 0);
}

TEST(Cli, ErodeWithGenerousBudgetDeletesNothing) {
  const auto dir = scratch("erode");
  ASSERT_EQ(run("derive " + reference() + " " + profiles() + " " + out(dir)).status, 0);
  const auto r = run("erode " + reference() + " " + profiles() + " --budget-storage 1e9 " + out(dir));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = json::parse(slurp(dir / "erosion_report.json"));
  EXPECT_EQ(j["k"].get<double>(), 0.0);
  for (const auto& row : csv_rows(dir / "erosion.csv")) {
    for (std::size_t c = 3; c < row.size(); ++c) EXPECT_EQ(std::stod(row[c]), 0.0);
  }

  ASSERT_EQ(run("erode " + reference() + " " + profiles() + " " + out(dir)).status, 0);
  const auto tight = json::parse(slurp(dir / "erosion_report.json"));
  EXPECT_GT(tight["k"].get<double>(), 0.0);
  EXPECT_LE(tight["accumulated_gb"].get<double>(), tight["budget_gb"].get<double>() * (1 + 1e-9));
  EXPECT_GE(tight["budget_gb"].get<double>(), tight["floor_gb"].get<double>());
}

TEST(Cli, PlanHwFrontierMatchesDominanceOracle) {
  const auto dir = scratch("planhw");
  const auto r = run("plan-hw " + reference() + " " + out(dir));
  ASSERT_EQ(r.status, 0) << r.output;
  std::vector<vidplan::ParetoPoint> pts;
  for (const auto& row : csv_rows(dir / "setups.csv")) {
    if (row[3] == "1") pts.push_back({std::stoul(row[0]), std::stod(row[2]), std::stod(row[4])});
  }
  ASSERT_FALSE(pts.empty());
  std::vector<std::size_t> oracle;
  for (const auto& p : pts) {
    bool beaten = false;
    for (const auto& q : pts) {
      const bool weakly = q.cost <= p.cost && q.utility >= p.utility;
      const bool strict = q.cost < p.cost || q.utility > p.utility;
      beaten = beaten || (weakly && (strict || q.index < p.index));
    }
    if (!beaten) oracle.push_back(p.index);
  }
  std::vector<std::size_t> got;
  for (const auto& row : csv_rows(dir / "frontier.csv")) got.push_back(std::stoul(row[0]));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, oracle);
  EXPECT_TRUE(fs::exists(dir / "pareto.svg"));
  EXPECT_TRUE(json::parse(slurp(dir / "plan_hw_report.json"))["whatif"]["weakly_dominates"].get<bool>());
}

TEST(Cli, PlanMigrateReplayAgreesWithPlan) {
  const auto dir = scratch("migrate");
  const auto r = run("plan-migrate " + reference() + " " + out(dir));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = json::parse(slurp(dir / "migration_report.json"));
  EXPECT_GT(j["new_utility"].get<double>(), j["old_utility"].get<double>());
  EXPECT_TRUE(j["replay"]["order_matches"].get<bool>());
  EXPECT_LT(j["replay"]["max_completion_error"].get<double>(), 0.05);
  EXPECT_EQ(csv_rows(dir / "migration_schedule.csv").size(), j["tasks"].get<std::size_t>());
}

TEST(Cli, SimulateMatchesGolden) {
  const auto dir = scratch("simulate");
  const auto r = run("simulate " + reference() + " " + out(dir));
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(slurp(dir / "sim_metrics.csv"), slurp(kSource / "tests/golden/reference_sim_metrics.csv"));
  const auto j = json::parse(slurp(dir / "sim_report.json"));
  EXPECT_EQ(j["device_overlaps"], 0);
  EXPECT_LE(j["watermark_spread"][0].get<double>(), j["spread_bound"].get<double>());

  const auto other = scratch("simulate_seed");
  ASSERT_EQ(run("simulate " + reference() + " --seed 7 " + out(other)).status, 0);
  EXPECT_NE(slurp(other / "sim_metrics.csv"), slurp(dir / "sim_metrics.csv"));
}

TEST(Cli, OutputsAreByteDeterministic) {
  const std::vector<std::string> commands{"derive", "erode", "plan-hw", "plan-migrate", "simulate"};
  std::array<fs::path, 2> dirs{scratch("det_a"), scratch("det_b")};
  for (const auto& d : dirs) {
    for (const auto& c : commands) ASSERT_EQ(run(c + " " + reference() + " " + profiles() + " " + out(d)).status, 0) << c;
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dirs[0])) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(dirs[1] / e.path().filename())) << e.path().filename();
  }
  EXPECT_GE(files, 18u);
}

TEST(Cli, GenProfilesRoundTripsShippedProfiles) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run("gen-profiles " + reference() + " " + out(dir)).status, 0);
  EXPECT_EQ(slurp(dir / "profiles.csv"), slurp(kSource / "data/reference_profiles.csv"));
}
