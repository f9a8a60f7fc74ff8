#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "selfadapt/cli/experiment.hpp"
#include "selfadapt/engine/parser.hpp"
#include "selfadapt/evolve/evolve.hpp"
#include "selfadapt/healthsvc/health.hpp"
#include "selfadapt/models.hpp"
#include "selfadapt/verify/verify.hpp"

using namespace selfadapt;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Bad input files and arguments that only show up after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  std::string out;  // "" or "-": stdout
  std::string format = "csv";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output file (directory for tradeoff)");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const Common& c, const std::string& csv) {
  const std::string text = c.format == "json" ? cli::csv_to_json(csv) : csv;
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(c.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + c.out);
  out << text;
}

std::string data_path(const std::string& rel) { return std::string(SELFADAPT_DATA_DIR) + "/" + rel; }

std::string b(bool v) { return v ? "1" : "0"; }

// ---- check-model

int check_model(const std::string& file, const Common& c) {
  const std::string text = read_text(file);
  engine::AutomatonNetwork net;
  try {
    net = engine::parse_model(text);
  } catch (const engine::ParseError& e) {
    std::cerr << file << ":" << e.what() << "\n";
    return kFailed;
  }
  std::string csv = "automaton,locations,edges\n";
  for (const engine::Automaton& a : net.automata) {
    csv += a.name + "," + std::to_string(a.locations.size()) + "," + std::to_string(a.edges.size()) + "\n";
  }
  emit(c, csv);
  return kOk;
}

// ---- sim

struct SimArgs {
  std::string topology, scenario, goals;
  int cycles = 10;
  bool adapt = false;
  std::string log;
};

int sim(const SimArgs& a, const Common& c) {
  if (a.cycles < 1) throw UsageError("cycles must be at least 1");
  const deltaiot::Topology topology =
      a.topology.empty() ? deltaiot::deltaiot15() : deltaiot::parse_topology(read_text(a.topology));
  const deltaiot::Scenario scenario =
      a.scenario.empty() ? deltaiot::Scenario{} : deltaiot::parse_scenario(read_text(a.scenario));
  deltaiot::Simulator simulator(topology, scenario, c.seed);
  std::optional<mape::FeedbackLoop> loop;
  if (a.adapt) {
    const auto goals = a.goals.empty() ? mape::default_iot_goals() : mape::parse_goals(read_text(a.goals));
    loop.emplace(mape::make_knowledge(topology, goals), c.seed);
  }
  std::vector<mape::DecisionRow> rows;
  for (int i = 0; i < a.cycles; ++i) {
    if (loop) {
      rows.push_back(loop->step(simulator));
    } else {
      simulator.run_cycle();
    }
  }
  std::string csv = std::string(cli::kSimHeader) + "\n";
  char buf[160];
  for (const deltaiot::CycleStats& s : simulator.history()) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%016llx\n", s.cycle, s.packet_loss, s.energy, s.latency_pct,
                  static_cast<unsigned long long>(s.settings_hash));
    csv += buf;
  }
  emit(c, csv);
  if (!a.log.empty()) {
    Common log = c;
    log.out = a.log;
    emit(log, mape::decision_log_csv(rows));
  }
  return kOk;
}

// ---- verify

struct VerifyArgs {
  std::string model, props, fault, trace_dir;
  std::vector<std::string> scenarios;
  std::size_t max_states = 1'000'000;
};

int verify_cmd(const VerifyArgs& a, const Common& c) {
  std::string source = a.model.empty() ? embedded_model("mape_loop") : read_text(a.model);
  if (!a.fault.empty()) source = verify::inject_fault(source, a.fault);
  engine::AutomatonNetwork net;
  try {
    net = engine::parse_model(source);
  } catch (const engine::ParseError& e) {
    std::cerr << "model:" << e.what() << "\n";
    return kFailed;
  }
  const auto props = verify::parse_properties(read_text(a.props.empty() ? data_path("stubs/mape.props") : a.props));
  std::vector<std::string> files = a.scenarios;
  if (files.empty()) {
    for (const char* s : {"adaptation-needed", "no-adaptation", "failsafe", "partial"}) {
      files.push_back(data_path(std::string("stubs/") + s + ".json"));
    }
  }
  verify::ExploreOptions opts;
  opts.max_states = a.max_states;
  std::string csv = "scenario,property,holds,decided,states,transitions\n";
  json table = json::array();
  std::vector<verify::Exploration> runs;
  bool all = true;
  int trace_no = 0;
  for (const std::string& f : files) {
    const verify::StubScenario s = verify::parse_stub_scenario(read_text(f));
    const auto goals = s.goals ? *s.goals : verify::default_stub_goals();
    verify::Exploration e = verify::explore(net, verify::instantiate(net, s, goals), props, opts);
    for (const verify::Verdict& v : e.verdicts) {
      all = all && v.holds && v.decided;
      csv += s.name + ",\"" + v.property.text + "\"," + b(v.holds) + "," + b(v.decided) + "," +
             std::to_string(e.states) + "," + std::to_string(e.transitions) + "\n";
      table.push_back({{"scenario", s.name},
                       {"property", v.property.text},
                       {"holds", v.holds},
                       {"decided", v.decided},
                       {"states", e.states},
                       {"transitions", e.transitions}});
      if (v.counterexample.empty()) continue;
      std::ostringstream trace;
      trace << "scenario: " << s.name << "\nproperty: " << v.property.text << "\n";
      for (const std::string& line : v.counterexample) trace << line << "\n";
      if (a.trace_dir.empty()) {
        std::cerr << trace.str();
      } else {
        std::filesystem::create_directories(a.trace_dir);
        std::ofstream(std::filesystem::path(a.trace_dir) / ("trace-" + std::to_string(trace_no++) + ".txt"))
            << trace.str();
      }
    }
    for (const std::string& d : verify::planner_differential(net, s, goals)) {
      std::cerr << s.name << ": " << d << "\n";
      all = false;
    }
    e.visited.clear();
    runs.push_back(std::move(e));
  }
  // property texts are quoted in the csv, so json is built directly
  if (c.format == "json") {
    Common raw = c;
    raw.format = "csv";
    emit(raw, table.dump(2) + "\n");
  } else {
    emit(c, csv);
  }
  verify::Exploration merged;
  merged.coverage = verify::merge_coverage(net, runs);
  std::cerr << verify::coverage_report(merged);
  return all ? kOk : kFailed;
}

// ---- health

struct HealthArgs {
  std::string catalog;
  int cycles = 10;
  double threshold = 0.12;
  int double_from = -1;
  bool response_time = false;
};

int health_cmd(const HealthArgs& a, const Common& c) {
  if (a.cycles < 1) throw UsageError("cycles must be at least 1");
  const healthsvc::CatalogFile file = a.catalog.empty() ? healthsvc::CatalogFile{healthsvc::default_catalog(), {}}
                                                        : healthsvc::parse_catalog(read_text(a.catalog));
  std::vector<mape::Goal> goals = healthsvc::default_health_goals(a.threshold);
  healthsvc::HealthRegistry registry = healthsvc::default_registry();
  if (a.response_time) registry.add(healthsvc::response_time_model());
  healthsvc::HealthSystem system(file.catalog, file.params, c.seed);
  healthsvc::HealthLoop loop(std::move(goals), std::move(registry), c.seed);
  std::string csv = std::string(healthsvc::kHealthLogHeader) + "\n";
  for (int i = 0; i < a.cycles; ++i) {
    if (i == a.double_from) {
      healthsvc::ServiceCatalog doubled = file.catalog;
      for (auto& providers : doubled.services) {
        for (auto& p : providers) p.failure_rate = std::min(1.0, 2 * p.failure_rate);
      }
      system.set_catalog(doubled);
    }
    csv += healthsvc::health_log_row(loop.step(system)) + "\n";
  }
  emit(c, csv);
  return kOk;
}

// ---- evolve

struct EvolveArgs {
  std::string package, scenario;
  bool validate_only = false;
  int activate_at = 6;
  int cycles = 12;
};

int evolve_cmd(const EvolveArgs& a, const Common& c) {
  if (a.package.empty()) throw UsageError("--package is required");
  if (a.cycles < 1 || a.activate_at < 0) throw UsageError("bad cycle numbers");
  if (!std::filesystem::exists(a.package)) throw UsageError("cannot open " + a.package);
  evolve::UpdatePackage pkg;
  try {
    pkg = evolve::load_package(a.package);
  } catch (const evolve::EvolveError& e) {
    std::cerr << "package: " << e.what() << "\n";
    return kFailed;
  }
  const deltaiot::Topology& topology = deltaiot::deltaiot15();
  evolve::GoalManager gm(topology, mape::default_iot_goals(), qmodels::default_registry(),
                         evolve::load_suite(data_path("stubs")));
  evolve::StagedHandle h;
  try {
    h = gm.stage(pkg);
  } catch (const evolve::EvolveError& e) {
    std::cerr << "stage: " << e.what() << "\n";
    return kFailed;
  }
  const evolve::ValidationReport report = gm.validate(h, c.seed);
  std::cerr << report.text();
  if (!report.passed) return kFailed;
  if (a.validate_only) return kOk;

  const deltaiot::Scenario scenario = deltaiot::parse_scenario(
      read_text(a.scenario.empty() ? data_path("scenarios/drift.json") : a.scenario));
  deltaiot::Simulator sim(topology, scenario, c.seed);
  mape::FeedbackLoop loop(mape::make_knowledge(topology), c.seed);
  loop.set_quiescent_hook(gm.hook());
  std::vector<mape::DecisionRow> rows;
  for (int i = 0; i < a.cycles; ++i) {
    if (i == a.activate_at) gm.activate(h);
    rows.push_back(loop.step(sim));
  }
  emit(c, mape::decision_log_csv(rows));
  return kOk;
}

// ---- tradeoff

struct TradeoffArgs {
  std::string grid = "default";
  std::string topology, scenario, goals;
  int cycles = 90;
  int jobs = 1;
  std::uint64_t max_runs = 1000;
};

int tradeoff_cmd(const TradeoffArgs& a, const Common& c) {
  cli::ExperimentConfig cfg;
  cfg.topology = a.topology;
  cfg.scenario = a.scenario;
  cfg.goals = a.goals;
  cfg.seed = c.seed;
  cfg.cycles = a.cycles;
  cfg.jobs = a.jobs;
  cfg.max_mean_runs = a.max_runs;
  for (const std::string* p : {&a.topology, &a.scenario, &a.goals}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw UsageError("cannot open " + *p);
  }
  if (a.grid != "default") cfg.grid = cli::parse_grid(read_text(a.grid));
  try {
    cli::validate(cfg);
  } catch (const cli::ConfigError& e) {
    throw UsageError(e.what());
  }
  const std::vector<cli::SettingRun> runs = cli::run_experiment(cfg);
  const std::string dir = c.out.empty() || c.out == "-" ? "tradeoff-out" : c.out;
  for (const std::string& f : cli::write_experiment(cfg, runs, dir, c.format)) std::cerr << dir << "/" << f << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-adaptive systems toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string model_file;
  auto* check = app.add_subcommand("check-model", "parse and validate a model file");
  check->add_option("file", model_file)->required();
  add_common(check, common);

  SimArgs sa;
  auto* simc = app.add_subcommand("sim", "run the network simulator");
  simc->add_option("--topology", sa.topology);
  simc->add_option("--scenario", sa.scenario);
  simc->add_option("--goals", sa.goals);
  simc->add_option("--cycles", sa.cycles);
  simc->add_flag("--adapt", sa.adapt, "run the feedback loop");
  simc->add_option("--log", sa.log, "decision log file (with --adapt)");
  add_common(simc, common);

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "check the loop model against stub scenarios");
  ver->add_option("--model", va.model);
  ver->add_option("--scenario", va.scenarios);
  ver->add_option("--props", va.props);
  ver->add_option("--fault", va.fault)->check(CLI::IsMember(verify::fault_names()));
  ver->add_option("--max-states", va.max_states);
  ver->add_option("--traces", va.trace_dir, "directory for counterexample traces");
  add_common(ver, common);

  HealthArgs ha;
  auto* hc = app.add_subcommand("health", "run the service-based health system");
  hc->add_option("--catalog", ha.catalog);
  hc->add_option("--cycles", ha.cycles);
  hc->add_option("--threshold", ha.threshold);
  hc->add_option("--double-from", ha.double_from, "cycle from which failure rates double");
  hc->add_flag("--response-time", ha.response_time, "also estimate response time");
  add_common(hc, common);

  EvolveArgs ea;
  auto* ev = app.add_subcommand("evolve", "validate and activate an update package");
  ev->add_option("--package", ea.package)->required();
  ev->add_flag("--validate-only", ea.validate_only);
  ev->add_option("--activate-at", ea.activate_at);
  ev->add_option("--cycles", ea.cycles);
  ev->add_option("--scenario", ea.scenario);
  add_common(ev, common);

  TradeoffArgs ta;
  auto* tr = app.add_subcommand("tradeoff", "accuracy/confidence/RSEM sweep");
  tr->add_option("--grid", ta.grid, "'default' or a grid file");
  tr->add_option("--topology", ta.topology);
  tr->add_option("--scenario", ta.scenario);
  tr->add_option("--goals", ta.goals);
  tr->add_option("--cycles", ta.cycles);
  tr->add_option("--jobs", ta.jobs);
  tr->add_option("--max-runs", ta.max_runs, "run cap of mean estimates");
  add_common(tr, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*check) return check_model(model_file, common);
    if (*simc) return sim(sa, common);
    if (*ver) return verify_cmd(va, common);
    if (*hc) return health_cmd(ha, common);
    if (*ev) return evolve_cmd(ea, common);
    if (*tr) return tradeoff_cmd(ta, common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
