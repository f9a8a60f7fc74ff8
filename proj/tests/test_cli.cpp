#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "selfadapt/cli/experiment.hpp"

using namespace selfadapt;
using namespace selfadapt::cli;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("selfadapt-test-" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("golden headers") {
  CHECK(std::string(kSummaryHeader) ==
        "epsilon,alpha,rsem,cycles,packetLossMin,packetLossQ1,packetLossMedian,packetLossQ3,packetLossMax,"
        "packetLossMean,energyMin,energyQ1,energyMedian,energyQ3,energyMax,energyMean,meanPacketLossSamples,"
        "meanEnergySamples,failsafeCycles,partialCycles");
  CHECK(std::string(kTimingHeader) == "epsilon,alpha,rsem,analyzedCycles,loopMsTotal,loopMsPerAnalyzedCycle");
  CHECK(std::string(kSimHeader) == "cycle,packetLoss,energy,latencyPct,settingsHash");
  CHECK(std::string(mape::kDecisionLogHeader) ==
        "cycle,optionsTotal,optionsVerified,chosenOptionIndex,packetLossEst,energyEst,latencyEst,planSteps,failsafe,"
        "analyzed,partial,realizedPacketLoss,realizedEnergy,realizedLatency,event");
  CHECK(kSchemaVersion == 1);
}

TEST_CASE("quartiles interpolate between order statistics") {
  const Quartiles q = quartiles({4, 1, 3, 2});
  CHECK(q.min == 1);
  CHECK(q.q1 == doctest::Approx(1.75));
  CHECK(q.median == doctest::Approx(2.5));
  CHECK(q.q3 == doctest::Approx(3.25));
  CHECK(q.max == 4);
  CHECK(q.mean == doctest::Approx(2.5));
  const Quartiles one = quartiles({7});
  CHECK(one.q1 == 7);
  CHECK(one.q3 == 7);
  CHECK_THROWS(quartiles({}));
}

TEST_CASE("config validation and hashing") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  ExperimentConfig bad = cfg;
  bad.cycles = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.grid.clear();
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = cfg;
  bad.grid[0].alpha = 1.5;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  ExperimentConfig other = cfg;
  other.jobs = 8;
  CHECK(config_hash(other) == config_hash(cfg));
  other.seed = 2;
  CHECK(config_hash(other) != config_hash(cfg));

  const auto grid = parse_grid(R"({"grid": [{"epsilon": 0.02}, {"alpha": 0.1, "rsem": 0.2}]})");
  REQUIRE(grid.size() == 2);
  CHECK(grid[0] == GridPoint{0.02, 0.05, 0.05});
  CHECK(grid[1] == GridPoint{0.05, 0.1, 0.2});
  CHECK_THROWS_AS(parse_grid("{"), ConfigError);
}

TEST_CASE("csv to json keeps numbers, text and empty fields") {
  const json j = json::parse(csv_to_json("a,b,c\n1,x,\n2.5,y,3\n"));
  REQUIRE(j.size() == 2);
  CHECK(j[0]["a"] == 1.0);
  CHECK(j[0]["b"] == "x");
  CHECK(j[0]["c"].is_null());
  CHECK(j[1]["c"] == 3.0);
  CHECK(json::parse(csv_to_json("a,b\n")).empty());
}

TEST_CASE("one cycle, one grid point, one decision row") {
  ExperimentConfig cfg;
  cfg.cycles = 1;
  cfg.grid = {GridPoint{}};
  const auto runs = run_experiment(cfg);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].rows.size() == 1);
  const auto dir = scratch("one");
  write_experiment(cfg, runs, dir.string(), "csv");
  CHECK(count_lines(slurp(dir / "decisions-0.csv")) == 2);
  CHECK(count_lines(slurp(dir / "summary.csv")) == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("same config and seed give byte-identical artifacts") {
  ExperimentConfig cfg;
  cfg.cycles = 3;
  cfg.seed = 11;
  cfg.scenario = std::string(SELFADAPT_SOURCE_DIR) + "/data/scenarios/drift.json";
  cfg.grid = {GridPoint{0.05, 0.05, 0.05}, GridPoint{0.05, 0.05, 0.02}};
  cfg.jobs = 2;
  const auto a = scratch("det-a");
  const auto b = scratch("det-b");
  write_experiment(cfg, run_experiment(cfg), a.string(), "csv");
  cfg.jobs = 1;  // serial run must match the parallel one
  write_experiment(cfg, run_experiment(cfg), b.string(), "csv");
  for (const char* f : {"decisions-0.csv", "decisions-1.csv", "summary.csv", "manifest.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const json m = json::parse(slurp(a / "manifest.json"));
  CHECK(m["seed"] == 11);
  CHECK(m["schemaVersion"] == kSchemaVersion);
  CHECK(m["configHash"].get<std::string>().size() == 16);
  CHECK(m["config"]["cycles"] == 3);
  // timings never land in the deterministic tables
  CHECK(slurp(a / "summary.csv").find("Ms") == std::string::npos);

  write_experiment(cfg, run_experiment(cfg), b.string(), "json");
  const json summary = json::parse(slurp(b / "summary.json"));
  REQUIRE(summary.size() == 2);
  CHECK(summary[1]["rsem"] == 0.02);
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("fivefold accuracy costs twenty-five times the samples") {
  ExperimentConfig cfg;
  cfg.cycles = 2;
  cfg.seed = 5;
  cfg.grid = {GridPoint{0.05, 0.05, 0.05}, GridPoint{0.01, 0.05, 0.05}};
  cfg.jobs = 2;
  const auto runs = run_experiment(cfg);
  REQUIRE(runs[0].summary.partial_cycles == 0);
  REQUIRE(runs[1].summary.partial_cycles == 0);
  const double ratio = runs[1].summary.mean_packet_loss_samples / runs[0].summary.mean_packet_loss_samples;
  CHECK(ratio == doctest::Approx(25.0).epsilon(1.0 / 25.0));
  // mean estimates do not depend on epsilon
  CHECK(runs[1].summary.mean_energy_samples == runs[0].summary.mean_energy_samples);
}

TEST_CASE("unwritable output directory is a config error") {
  ExperimentConfig cfg;
  cfg.cycles = 1;
  cfg.grid = {GridPoint{}};
  const auto runs = run_experiment(cfg);
  CHECK_THROWS_AS(write_experiment(cfg, runs, "/proc/no-such-dir/x", "csv"), ConfigError);
  CHECK_THROWS_AS(write_experiment(cfg, runs, scratch("fmt").string(), "xml"), ConfigError);
}
