#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/mape/loop.hpp"

namespace selfadapt::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Version of every CSV layout below; bumped whenever a header changes.
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct GridPoint {
  double epsilon = 0.05;
  double alpha = 0.05;
  double rsem = 0.05;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Accuracy/confidence/RSEM settings compared in the trade-off study.
std::vector<GridPoint> default_grid();
/// [{"epsilon", "alpha", "rsem"}] or {"grid": [...]}; missing keys take
/// the defaults.
std::vector<GridPoint> parse_grid(const std::string& json_text);

struct ExperimentConfig {
  std::string topology;  // empty: built-in fixture
  std::string scenario;  // empty: no events
  std::string goals;     // empty: default goals
  std::uint64_t seed = 1;
  int cycles = 90;
  std::vector<GridPoint> grid = default_grid();
  std::uint64_t max_mean_runs = 1000;
  int jobs = 1;
};

void validate(const ExperimentConfig& cfg);
/// Canonical JSON of the configuration; its hash goes into the manifest.
std::string config_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};
/// Linear interpolation between order statistics. Throws on empty input.
Quartiles quartiles(std::vector<double> v);

struct SettingSummary {
  GridPoint point;
  int cycles = 0;
  Quartiles packet_loss;  // realized, per cycle
  Quartiles energy;       // realized, per cycle
  double mean_packet_loss_samples = 0;  // per verified option, analyzed cycles
  double mean_energy_samples = 0;
  int failsafe_cycles = 0;
  int partial_cycles = 0;
};

struct SettingRun {
  SettingSummary summary;
  std::vector<mape::DecisionRow> rows;
  double analysis_ms = 0;  // wall clock, never part of the deterministic outputs
  int analyzed_cycles = 0;
};

SettingRun run_setting(const ExperimentConfig& cfg, const GridPoint& point);
/// One run per grid point, in grid order (possibly computed in parallel).
std::vector<SettingRun> run_experiment(const ExperimentConfig& cfg);

extern const char* const kSummaryHeader;
std::string summary_row(const SettingSummary& s);
extern const char* const kTimingHeader;
std::string timing_row(const SettingRun& r);
extern const char* const kSimHeader;

/// A CSV document turned into a JSON array of objects. Fields that parse
/// as numbers become numbers; empty fields become null.
std::string csv_to_json(const std::string& csv);

/// Writes decisions-<i>.csv, summary.csv, timing.csv and manifest.json (or
/// .json variants of the tables) into `dir`. Returns the file names.
std::vector<std::string> write_experiment(const ExperimentConfig& cfg, const std::vector<SettingRun>& runs,
                                          const std::string& dir, const std::string& format);

/// Manifest for any subcommand.
std::string manifest_json(const std::string& command, std::uint64_t seed, const std::string& config,
                          const std::vector<std::string>& outputs);

}  // namespace selfadapt::cli
