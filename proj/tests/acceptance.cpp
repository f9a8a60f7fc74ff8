// Acceptance run: one line per criterion. Exit status is the number of
// failed criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "selfadapt/engine/parser.hpp"
#include "selfadapt/evolve/evolve.hpp"
#include "selfadapt/healthsvc/health.hpp"
#include "selfadapt/models.hpp"
#include "selfadapt/verify/verify.hpp"
#include "support/oracles.hpp"

using namespace selfadapt;
using deltaiot::deltaiot15;

namespace {

const std::string kData = std::string(SELFADAPT_SOURCE_DIR) + "/data/";

// Tolerances and fixtures, pinned.
constexpr double kBoundRatioTol = 1e-12;
constexpr double kIntegerRatioTol = 0.1;
constexpr double kConfidenceLo = 1.40, kConfidenceHi = 1.50;
constexpr std::uint64_t kRsemRunsLo = 15, kRsemRunsHi = 45;
constexpr int kRsemSeeds = 50;
constexpr double kEnergyTol = 1e-9;
constexpr int kComplianceCycles = 90;
constexpr std::uint64_t kComplianceSeed = 7;
constexpr double kLossGoal = 0.10;
constexpr int kOutageFrom = 30, kOutageTo = 40, kOutageCycles = 45;
constexpr std::uint64_t kOutageSeed = 3;
constexpr int kEvolveCycles = 14, kEvolveActivate = 6;
constexpr std::uint64_t kEvolveSeed = 4;
constexpr double kLatencyGoal = 5.0;
constexpr smc::ProbQuery kOracleQuery{0.02, 0.05};
constexpr std::uint64_t kHealthSeed = 2024;
constexpr std::size_t kKsRuns = 1000;
constexpr int kKsSeeds = 5;
constexpr double kKsCoefficient = 1.95;  // two-sample critical value at level 0.001
constexpr int kCoverageReps = 500;
constexpr smc::ProbQuery kCoverageQuery{0.05, 0.05};
constexpr double kCoverageSlack = 0.02;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

qmodels::IotOption min_power_option(const deltaiot::Topology& t, int first_df) {
  deltaiot::NetworkSettings s{std::vector<int>(t.links().size(), 0), std::vector<int>(t.links().size(), 100)};
  for (std::size_t l = 0; l < t.links().size(); ++l) {
    s.power[l] = deltaiot::min_power_for_link(t.links()[l].alpha, t.links()[l].beta);
  }
  for (const int m : t.two_parent_motes()) {
    const auto& p = t.parent_links(m);
    s.distribution[static_cast<std::size_t>(p[0])] = first_df;
    s.distribution[static_cast<std::size_t>(p[1])] = 100 - first_df;
  }
  return {&t, s, deltaiot::nominal_uncertainty(t)};
}

smc::Trial bernoulli(double p) {
  return [p](Rng& r) { return smc::Sample{r.bernoulli(p) ? 1.0 : 0.0, 1}; };
}

bool all_options_fail_loss(const mape::Knowledge& k) {
  for (const auto& o : k.options) {
    const auto it = o.verification.find("packetLoss");
    if (it != o.verification.end() && it->second.hi < kLossGoal) return false;
  }
  return true;
}

Outcome sample_scaling() {
  const double bound = smc::chernoff_bound(0.01, 0.05) / smc::chernoff_bound(0.05, 0.05);
  const double n = static_cast<double>(smc::required_samples(0.01, 0.05)) /
                   static_cast<double>(smc::required_samples(0.05, 0.05));
  return {std::fabs(bound - 25.0) <= kBoundRatioTol && std::fabs(n - 25.0) <= kIntegerRatioTol,
          fmt("bound ratio %.12f, sample ratio %.4f", bound, n)};
}

Outcome confidence_scaling() {
  const double r = static_cast<double>(smc::required_samples(0.05, 0.01)) /
                   static_cast<double>(smc::required_samples(0.05, 0.05));
  return {r >= kConfidenceLo && r <= kConfidenceHi, fmt("ratio %.4f", r)};
}

Outcome rsem_runs() {
  const deltaiot::Topology& t = deltaiot15();
  const smc::Trial trial = qmodels::energy_trial(min_power_option(t, 40));
  std::uint64_t lo = ~0ULL, hi = 0, sum = 0;
  for (int seed = 0; seed < kRsemSeeds; ++seed) {
    const smc::Estimate e = smc::estimate_mean({}, trial, static_cast<std::uint64_t>(seed));
    lo = std::min(lo, e.runs);
    hi = std::max(hi, e.runs);
    sum += e.runs;
  }
  return {lo >= kRsemRunsLo && hi <= kRsemRunsHi,
          fmt("runs %.0f..%.0f, mean %.1f", static_cast<double>(lo), static_cast<double>(hi),
              static_cast<double>(sum) / kRsemSeeds)};
}

Outcome energy_constants() {
  const double send = deltaiot::send_energy(10, 15);
  const double recv = deltaiot::receive_energy_per_cycle();
  return {std::fabs(send - 0.100362) <= kEnergyTol && std::fabs(recv - 15.904) <= kEnergyTol,
          fmt("send %.9f C, receive %.9f C", send, recv)};
}

Outcome failure_formula() {
  const double snr[] = {5, 0, -10, -20, -50};
  const double want[] = {0, 0, 0.5, 1.0, 1.0};
  bool ok = true;
  std::string got;
  for (int i = 0; i < 5; ++i) {
    const double p = deltaiot::link_failure_probability(snr[i]);
    ok = ok && p == want[i];
    got += fmt("%g ", p);
  }
  return {ok, "probabilities " + got};
}

Outcome adaptation_space() {
  const auto& t = deltaiot15();
  const std::size_t iot = mape::enumerate_options(t, deltaiot::nominal_uncertainty(t)).size();
  const std::size_t health = healthsvc::enumerate_combinations(healthsvc::default_catalog()).size();
  return {iot == 216 && health == 100, fmt("iot %.0f, health %.0f", static_cast<double>(iot), static_cast<double>(health))};
}

Outcome goal_compliance() {
  const auto& t = deltaiot15();
  const deltaiot::Scenario drift = deltaiot::load_scenario(kData + "scenarios/drift.json");
  deltaiot::Simulator adaptive(t, drift, kComplianceSeed);
  mape::FeedbackLoop loop(mape::make_knowledge(t), kComplianceSeed);
  deltaiot::Simulator reference(t, drift, kComplianceSeed, deltaiot::failsafe_settings(t));
  double loss = 0, energy = 0, failsafe_energy = 0;
  bool always_compliant = true;
  for (int c = 0; c < kComplianceCycles; ++c) {
    const mape::DecisionRow row = loop.step(adaptive);
    always_compliant = always_compliant && !all_options_fail_loss(loop.knowledge());
    loss += row.realized_packet_loss;
    energy += row.realized_energy;
    failsafe_energy += reference.run_cycle().energy;
  }
  loss /= kComplianceCycles;
  return {always_compliant && loss < kLossGoal && energy <= failsafe_energy,
          fmt("mean loss %.4f, energy %.1f C vs failsafe %.1f C", loss, energy, failsafe_energy) +
              (always_compliant ? "" : ", precondition violated")};
}

Outcome failsafe_cycles() {
  const auto& t = deltaiot15();
  deltaiot::Simulator sim(t, deltaiot::load_scenario(kData + "scenarios/outage.json"), kOutageSeed);
  mape::FeedbackLoop loop(mape::make_knowledge(t), kOutageSeed);
  bool exact = true;
  std::vector<int> flagged;
  for (int c = 0; c < kOutageCycles; ++c) {
    const mape::DecisionRow row = loop.step(sim);
    const bool none = row.analyzed && all_options_fail_loss(loop.knowledge());
    exact = exact && row.failsafe == none;
    if (row.failsafe) flagged.push_back(c);
  }
  bool window = static_cast<int>(flagged.size()) == kOutageTo - kOutageFrom + 1;
  for (std::size_t i = 0; window && i < flagged.size(); ++i) window = flagged[i] == kOutageFrom + static_cast<int>(i);
  const std::string span =
      flagged.empty() ? "none" : std::to_string(flagged.front()) + ".." + std::to_string(flagged.back());
  return {exact && window, "failsafe cycles " + span + " (" + std::to_string(flagged.size()) + ")"};
}

Outcome stage_one_properties() {
  const auto net = engine::parse_model(embedded_model("mape_loop"));
  const auto faulted = engine::parse_model(verify::inject_fault(embedded_model("mape_loop"), "planner-max-energy"));
  const auto props = verify::load_properties(kData + "stubs/mape.props");
  bool proven = true, caught = false;
  std::size_t checked = 0;
  for (const char* name : {"adaptation-needed", "no-adaptation", "failsafe", "partial"}) {
    const auto s = verify::load_stub_scenario(kData + "stubs/" + name + ".json");
    const auto goals = s.goals ? *s.goals : verify::default_stub_goals();
    for (const auto& v : verify::explore(net, verify::instantiate(net, s, goals), props).verdicts) {
      proven = proven && v.holds && v.decided;
      ++checked;
    }
    for (const auto& v : verify::explore(faulted, verify::instantiate(faulted, s, goals), props).verdicts) {
      caught = caught || (!v.holds && !v.counterexample.empty());
    }
  }
  const bool has_leadsto = props.size() >= 3 && props[1].conclusion == "Analyzer.AdaptationNeeded" &&
                           props[2].conclusion == "Analyzer.NoAdaptationNeeded";
  return {proven && caught && has_leadsto,
          std::to_string(checked) + " verdicts " + (proven ? "hold" : "do not all hold") + ", fault " +
              (caught ? "caught" : "missed")};
}

Outcome evolution() {
  const auto& t = deltaiot15();
  const deltaiot::Scenario drift = deltaiot::load_scenario(kData + "scenarios/drift.json");
  std::vector<std::string> base;
  {
    deltaiot::Simulator sim(t, drift, kEvolveSeed);
    mape::FeedbackLoop loop(mape::make_knowledge(t), kEvolveSeed);
    for (int c = 0; c < kEvolveActivate; ++c) base.push_back(mape::decision_log_row(loop.step(sim)));
  }
  evolve::GoalManager gm(t, mape::default_iot_goals(), qmodels::default_registry(),
                         evolve::load_suite(kData + "stubs"));
  deltaiot::Simulator sim(t, drift, kEvolveSeed);
  mape::FeedbackLoop loop(mape::make_knowledge(t), kEvolveSeed);
  loop.set_quiescent_hook(gm.hook());
  const evolve::StagedHandle h = gm.stage(evolve::latency_package());
  if (!gm.validate(h, kEvolveSeed).passed) return {false, "latency package failed validation"};
  bool identical = true, estimates = true, enforced = true;
  int enforced_cycles = 0;
  for (int c = 0; c < kEvolveCycles; ++c) {
    if (c == kEvolveActivate) gm.activate(h);
    const mape::DecisionRow row = loop.step(sim);
    if (c < kEvolveActivate) {
      identical = identical && mape::decision_log_row(row) == base[static_cast<std::size_t>(c)];
      continue;
    }
    if (c == kEvolveActivate) continue;
    estimates = estimates && row.latency_est.has_value();
    bool compliant_exists = false;
    for (const auto& o : loop.knowledge().options) {
      const auto l = o.verification.find("latency");
      const auto p = o.verification.find("packetLoss");
      if (l != o.verification.end() && p != o.verification.end() && l->second.hi < kLatencyGoal &&
          p->second.hi < kLossGoal) {
        compliant_exists = true;
      }
    }
    if (!compliant_exists) continue;
    ++enforced_cycles;
    const auto& r = row.chosen >= 0 ? loop.knowledge().options[static_cast<std::size_t>(row.chosen)].verification
                                    : mape::Results{};
    enforced = enforced && r.count("latency") != 0 && r.at("latency").hi < kLatencyGoal;
  }
  return {identical && estimates && enforced && enforced_cycles > 0,
          std::string("pre-activation ") + (identical ? "identical" : "differs") + ", latency estimates " +
              (estimates ? "present" : "missing") + ", goal enforced in " + std::to_string(enforced_cycles) +
              " cycles" + (enforced ? "" : " (violated)")};
}

Outcome oracle_equivalence() {
  const auto c = healthsvc::default_catalog();
  const healthsvc::WorkflowParams p;
  std::uint64_t i = 0;
  double worst_health = 0;
  for (const auto& k : healthsvc::enumerate_combinations(c)) {
    const smc::Estimate e = healthsvc::predict_failure_rate(k, p, c, kOracleQuery, kHealthSeed + i++);
    worst_health = std::max(worst_health, std::fabs(e.point - oracle::failure(c, p, k)));
  }
  // three motes: a diamond with one two-parent mote
  const deltaiot::Topology t({{2, deltaiot::Traffic::Periodic, 1.0},
                              {3, deltaiot::Traffic::EventDriven, 0.5},
                              {4, deltaiot::Traffic::Periodic, 0.7}},
                             {{2, 1, -8.0, 0.5}, {3, 1, -4.0, 0.2}, {4, 2, -12.0, 0.6}, {4, 3, -14.0, 0.5}});
  double worst_iot = 0;
  for (int power : {0, 5, 10, 15}) {
    for (int df : {0, 20, 40, 60, 80, 100}) {
      deltaiot::NetworkSettings s{std::vector<int>(t.links().size(), power), std::vector<int>(t.links().size(), 100)};
      const auto& parents = t.parent_links(4);
      s.distribution[static_cast<std::size_t>(parents[0])] = df;
      s.distribution[static_cast<std::size_t>(parents[1])] = 100 - df;
      const qmodels::IotOption o{&t, s, deltaiot::nominal_uncertainty(t)};
      const smc::Estimate e =
          smc::estimate_probability(kOracleQuery, qmodels::packet_loss_trial(o), static_cast<std::uint64_t>(power * 100 + df));
      worst_iot = std::max(worst_iot, std::fabs(e.point - oracle::exact_loss(o)));
    }
  }
  return {worst_health <= kOracleQuery.epsilon && worst_iot <= kOracleQuery.epsilon,
          fmt("max error health %.4f, network %.4f (eps %.2f)", worst_health, worst_iot, kOracleQuery.epsilon)};
}

Outcome engine_native_differential() {
  const auto& t = deltaiot15();
  const double critical = kKsCoefficient * std::sqrt(2.0 / static_cast<double>(kKsRuns));
  double worst = 0;
  for (int seed = 0; seed < kKsSeeds; ++seed) {
    const qmodels::IotOption o = min_power_option(t, 20 * seed);
    const auto s = static_cast<std::uint64_t>(seed);
    using TrialFn = smc::Trial (*)(const qmodels::IotOption&, qmodels::Form);
    for (TrialFn f : {TrialFn{qmodels::packet_loss_trial}, TrialFn{qmodels::energy_trial},
                      TrialFn{qmodels::latency_trial}}) {
      const auto native = smc::simulate_series(kKsRuns, f(o, qmodels::Form::Native), s);
      const auto dsl = smc::simulate_series(kKsRuns, f(o, qmodels::Form::Dsl), s + 1000);
      worst = std::max(worst, oracle::ks_distance(native, dsl));
    }
  }
  return {worst <= critical, fmt("max KS %.4f, threshold %.4f", worst, critical)};
}

Outcome smc_coverage() {
  double worst = 1;
  for (const double p : {0.1, 0.5, 0.9}) {
    int covered = 0;
    for (int rep = 0; rep < kCoverageReps; ++rep) {
      const smc::Estimate e =
          smc::estimate_probability(kCoverageQuery, bernoulli(p), 1000003ULL * static_cast<std::uint64_t>(rep) + 17);
      covered += (e.lo <= p && p <= e.hi) ? 1 : 0;
    }
    worst = std::min(worst, covered / static_cast<double>(kCoverageReps));
  }
  const double need = 1.0 - kCoverageQuery.alpha - kCoverageSlack;
  return {worst >= need, fmt("min coverage %.3f, required %.3f", worst, need)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sample-count scaling in epsilon", sample_scaling},
      {"sample-count scaling in alpha", confidence_scaling},
      {"RSEM run count on the energy fixture", rsem_runs},
      {"energy constants", energy_constants},
      {"link failure formula", failure_formula},
      {"adaptation-space sizes", adaptation_space},
      {"goal compliance under adaptation", goal_compliance},
      {"failsafe exactly when nothing complies", failsafe_cycles},
      {"loop model properties and faulted planner", stage_one_properties},
      {"latency goal activated mid-run", evolution},
      {"Monte-Carlo estimates match closed forms", oracle_equivalence},
      {"DSL and native models agree", engine_native_differential},
      {"Bernoulli interval coverage", smc_coverage},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
