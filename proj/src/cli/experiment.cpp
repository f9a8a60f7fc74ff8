#include "selfadapt/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace selfadapt::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + p.string());
}

std::string quartile_fields(const Quartiles& q) {
  return fmt(q.min) + "," + fmt(q.q1) + "," + fmt(q.median) + "," + fmt(q.q3) + "," + fmt(q.max) + "," + fmt(q.mean);
}

}  // namespace

std::vector<GridPoint> default_grid() {
  return {{0.05, 0.05, 0.05}, {0.01, 0.05, 0.05}, {0.05, 0.01, 0.05}, {0.05, 0.05, 0.01}};
}

std::vector<GridPoint> parse_grid(const std::string& json_text) {
  try {
    json doc = json::parse(json_text);
    if (doc.is_object()) doc = doc.at("grid");
    std::vector<GridPoint> out;
    for (const json& j : doc) {
      GridPoint g;
      g.epsilon = j.value("epsilon", g.epsilon);
      g.alpha = j.value("alpha", g.alpha);
      g.rsem = j.value("rsem", g.rsem);
      out.push_back(g);
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed grid: ") + e.what());
  }
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.cycles < 1) throw ConfigError("cycles must be at least 1");
  if (cfg.grid.empty()) throw ConfigError("empty grid");
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  for (const GridPoint& g : cfg.grid) {
    if (!(g.epsilon > 0 && g.epsilon < 1) || !(g.alpha > 0 && g.alpha < 1) || !(g.rsem > 0)) {
      throw ConfigError("grid values out of range");
    }
  }
}

std::string config_json(const ExperimentConfig& cfg) {
  json grid = json::array();
  for (const GridPoint& g : cfg.grid) grid.push_back({{"epsilon", g.epsilon}, {"alpha", g.alpha}, {"rsem", g.rsem}});
  // jobs is left out: it does not change any output
  return json{{"topology", cfg.topology}, {"scenario", cfg.scenario}, {"goals", cfg.goals},
              {"seed", cfg.seed},         {"cycles", cfg.cycles},     {"grid", grid},
              {"maxMeanRuns", cfg.max_mean_runs}}
      .dump();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : config_json(cfg)) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("no values");
  std::sort(v.begin(), v.end());
  auto at = [&v](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  Quartiles q;
  q.min = v.front();
  q.max = v.back();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  double sum = 0;
  for (double x : v) sum += x;
  q.mean = sum / static_cast<double>(v.size());
  return q;
}

SettingRun run_setting(const ExperimentConfig& cfg, const GridPoint& point) {
  const deltaiot::Topology topology =
      cfg.topology.empty() ? deltaiot::deltaiot15() : deltaiot::load_topology(cfg.topology);
  const deltaiot::Scenario scenario = cfg.scenario.empty() ? deltaiot::Scenario{} : deltaiot::load_scenario(cfg.scenario);
  const std::vector<mape::Goal> goals = cfg.goals.empty() ? mape::default_iot_goals() : mape::load_goals(cfg.goals);

  deltaiot::Simulator sim(topology, scenario, cfg.seed);
  mape::Knowledge k = mape::make_knowledge(topology, goals);
  k.verification.prob = {point.epsilon, point.alpha};
  k.verification.mean.rsem = point.rsem;
  k.verification.mean.max_runs = cfg.max_mean_runs;
  mape::FeedbackLoop loop(std::move(k), cfg.seed);

  SettingRun run;
  run.summary.point = point;
  run.summary.cycles = cfg.cycles;
  std::vector<double> loss, energy;
  double loss_samples = 0, energy_samples = 0;
  for (int c = 0; c < cfg.cycles; ++c) {
    const auto t0 = std::chrono::steady_clock::now();
    const mape::DecisionRow row = loop.step(sim);
    run.analysis_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    loss.push_back(row.realized_packet_loss);
    energy.push_back(row.realized_energy);
    run.summary.failsafe_cycles += row.failsafe ? 1 : 0;
    run.summary.partial_cycles += row.partial ? 1 : 0;
    if (row.analyzed) {
      ++run.analyzed_cycles;
      double ls = 0, es = 0;
      std::size_t n = 0;
      for (const mape::AdaptationOption& o : loop.knowledge().options) {
        const auto l = o.verification.find("packetLoss");
        const auto e = o.verification.find("energy");
        if (l == o.verification.end() || e == o.verification.end()) continue;
        ls += static_cast<double>(l->second.runs);
        es += static_cast<double>(e->second.runs);
        ++n;
      }
      if (n > 0) {
        loss_samples += ls / static_cast<double>(n);
        energy_samples += es / static_cast<double>(n);
      }
    }
    run.rows.push_back(row);
  }
  run.summary.packet_loss = quartiles(loss);
  run.summary.energy = quartiles(energy);
  if (run.analyzed_cycles > 0) {
    run.summary.mean_packet_loss_samples = loss_samples / run.analyzed_cycles;
    run.summary.mean_energy_samples = energy_samples / run.analyzed_cycles;
  }
  return run;
}

std::vector<SettingRun> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<SettingRun> runs(cfg.grid.size());
  std::vector<std::exception_ptr> errors(cfg.grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.grid.size(); i = next++) {
      try {
        runs[i] = run_setting(cfg, cfg.grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::min<int>(cfg.jobs, static_cast<int>(cfg.grid.size())));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

const char* const kSummaryHeader =
    "epsilon,alpha,rsem,cycles,packetLossMin,packetLossQ1,packetLossMedian,packetLossQ3,packetLossMax,"
    "packetLossMean,energyMin,energyQ1,energyMedian,energyQ3,energyMax,energyMean,meanPacketLossSamples,"
    "meanEnergySamples,failsafeCycles,partialCycles";

std::string summary_row(const SettingSummary& s) {
  return fmt_g(s.point.epsilon) + "," + fmt_g(s.point.alpha) + "," + fmt_g(s.point.rsem) + "," +
         std::to_string(s.cycles) + "," + quartile_fields(s.packet_loss) + "," + quartile_fields(s.energy) + "," +
         fmt(s.mean_packet_loss_samples) + "," + fmt(s.mean_energy_samples) + "," + std::to_string(s.failsafe_cycles) +
         "," + std::to_string(s.partial_cycles);
}

const char* const kTimingHeader = "epsilon,alpha,rsem,analyzedCycles,loopMsTotal,loopMsPerAnalyzedCycle";

std::string timing_row(const SettingRun& r) {
  const double per = r.analyzed_cycles > 0 ? r.analysis_ms / r.analyzed_cycles : 0.0;
  return fmt_g(r.summary.point.epsilon) + "," + fmt_g(r.summary.point.alpha) + "," + fmt_g(r.summary.point.rsem) +
         "," + std::to_string(r.analyzed_cycles) + "," + fmt(r.analysis_ms) + "," + fmt(per);
}

const char* const kSimHeader = "cycle,packetLoss,energy,latencyPct,settingsHash";

std::string csv_to_json(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return "[]";
  const std::vector<std::string> header = split(line);
  json out = json::array();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line);
    json row = json::object();
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string f = i < fields.size() ? fields[i] : "";
      if (f.empty()) {
        row[header[i]] = nullptr;
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end != nullptr && *end == '\0') {
        row[header[i]] = v;
      } else {
        row[header[i]] = f;
      }
    }
    out.push_back(row);
  }
  return out.dump(2) + "\n";
}

std::vector<std::string> write_experiment(const ExperimentConfig& cfg, const std::vector<SettingRun>& runs,
                                          const std::string& dir, const std::string& format) {
  if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
  const std::filesystem::path out(dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> files;
  auto emit = [&](const std::string& stem, const std::string& csv) {
    const std::string name = stem + "." + format;
    write_file(out / name, format == "csv" ? csv : csv_to_json(csv));
    files.push_back(name);
  };
  std::string summary = std::string(kSummaryHeader) + "\n";
  std::string timing = std::string(kTimingHeader) + "\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    emit("decisions-" + std::to_string(i), mape::decision_log_csv(runs[i].rows));
    summary += summary_row(runs[i].summary) + "\n";
    timing += timing_row(runs[i]) + "\n";
  }
  emit("summary", summary);
  emit("timing", timing);
  write_file(out / "manifest.json", manifest_json("tradeoff", cfg.seed, config_json(cfg), files));
  files.push_back("manifest.json");
  return files;
}

std::string manifest_json(const std::string& command, std::uint64_t seed, const std::string& config,
                          const std::vector<std::string>& outputs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : config) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(h));
  json cfg = json::parse(config, nullptr, false);
  if (cfg.is_discarded()) cfg = config;
  const json m = {{"tool", "selfadapt"},
                  {"version", kToolVersion},
                  {"schemaVersion", kSchemaVersion},
                  {"command", command},
                  {"seed", seed},
                  {"config", cfg},
                  {"configHash", hash},
                  {"outputs", outputs},
                  {"timingsSeparate", true}};
  return m.dump(2) + "\n";
}

}  // namespace selfadapt::cli
