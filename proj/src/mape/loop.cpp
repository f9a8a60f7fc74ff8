#include "selfadapt/mape/loop.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace selfadapt::mape {

using deltaiot::Configuration;
using deltaiot::NetworkSettings;
using deltaiot::Topology;
using deltaiot::UncertaintyState;

std::vector<NetworkSettings> enumerate_options(const Topology& t, const UncertaintyState& env) {
  NetworkSettings base{std::vector<int>(t.links().size(), 0), std::vector<int>(t.links().size(), 100)};
  for (std::size_t l = 0; l < t.links().size(); ++l) {
    base.power[l] = deltaiot::min_power_for_link(env.alpha[l], env.beta[l]);
  }
  const std::vector<int> split = t.two_parent_motes();
  std::vector<NetworkSettings> out;
  std::vector<int> digit(split.size(), 0);
  while (true) {
    NetworkSettings s = base;
    for (std::size_t k = 0; k < split.size(); ++k) {
      const auto& p = t.parent_links(split[k]);
      s.distribution[static_cast<std::size_t>(p[0])] = 20 * digit[k];
      s.distribution[static_cast<std::size_t>(p[1])] = 100 - 20 * digit[k];
    }
    out.push_back(std::move(s));
    std::size_t k = split.size();
    while (k > 0 && digit[k - 1] == 5) digit[--k] = 0;
    if (k == 0) break;
    ++digit[k - 1];
  }
  return out;
}

UncertaintyState uncertainty_from_probe(const Topology& t, const Configuration& probe) {
  UncertaintyState u;
  u.load = probe.environment.mote_load;
  for (std::size_t l = 0; l < t.links().size(); ++l) {
    const double beta = t.links()[l].beta;
    u.beta.push_back(beta);
    u.alpha.push_back(probe.environment.link_snr[l] - beta * probe.settings.power[l]);
  }
  return u;
}

Plan diff_plan(const NetworkSettings& from, const NetworkSettings& to) {
  Plan p;
  for (std::size_t l = 0; l < to.power.size(); ++l) {
    if (l >= from.power.size() || from.power[l] != to.power[l]) {
      p.push_back({StepType::SetPower, static_cast<int>(l), to.power[l]});
    }
    if (l >= from.distribution.size() || from.distribution[l] != to.distribution[l]) {
      p.push_back({StepType::SetDistribution, static_cast<int>(l), to.distribution[l]});
    }
  }
  return p;
}

Plan failsafe_plan() { return {PlanStep{StepType::Failsafe, -1, 0}}; }

NetworkSettings apply_plan(const Topology& t, const NetworkSettings& current, const Plan& plan) {
  NetworkSettings s = current;
  for (const PlanStep& step : plan) {
    if (step.type == StepType::Failsafe) {
      s = deltaiot::failsafe_settings(t);
      continue;
    }
    if (step.element < 0 || step.element >= static_cast<int>(t.links().size())) {
      throw deltaiot::SettingsError("plan step refers to unknown link " + std::to_string(step.element));
    }
    auto& field = step.type == StepType::SetPower ? s.power : s.distribution;
    field[static_cast<std::size_t>(step.element)] = step.value;
  }
  deltaiot::validate_settings(t, s);
  return s;
}

qmodels::VerificationParams default_verification() {
  qmodels::VerificationParams p;
  p.prob = {0.05, 0.05};
  p.mean = {0.05, 10, 100};
  return p;
}

Knowledge make_knowledge(const Topology& t, std::vector<Goal> goals, qmodels::IotRegistry registry) {
  Knowledge k;
  k.topology = &t;
  k.goals = normalize_goals(std::move(goals));
  k.registry = std::move(registry);
  return k;
}

namespace {

void check_probe(const Topology& t, const Configuration& c) {
  const std::size_t links = t.links().size();
  const std::size_t motes = t.motes().size();
  if (c.settings.power.size() != links || c.settings.distribution.size() != links ||
      c.environment.link_snr.size() != links || c.environment.mote_load.size() != motes) {
    throw std::invalid_argument("malformed probe data: sizes do not match the topology");
  }
  const auto& q = c.qualities;
  if (!std::isfinite(q.packet_loss) || !std::isfinite(q.energy) || !std::isfinite(q.latency)) {
    throw std::invalid_argument("malformed probe data: non-finite quality");
  }
  for (double v : c.environment.link_snr) {
    if (!std::isfinite(v)) throw std::invalid_argument("malformed probe data: non-finite SNR");
  }
  for (double v : c.environment.mote_load) {
    if (!std::isfinite(v)) throw std::invalid_argument("malformed probe data: non-finite load");
  }
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string format(double v) { return format_optional(v); }

std::string csv_text(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  }
  return s;
}

}  // namespace

bool monitor(Knowledge& k, const Configuration& probe) {
  check_probe(*k.topology, probe);
  k.previous = std::move(k.current);
  k.current = probe;
  if (!k.previous) return true;
  return k.previous->settings != probe.settings || k.previous->qualities != probe.qualities ||
         k.previous->environment != probe.environment;
}

const char* const kDecisionLogHeader =
    "cycle,optionsTotal,optionsVerified,chosenOptionIndex,packetLossEst,energyEst,latencyEst,planSteps,failsafe,"
    "analyzed,partial,realizedPacketLoss,realizedEnergy,realizedLatency,event";

std::string decision_log_row(const DecisionRow& r) {
  std::ostringstream out;
  out << r.cycle << ',' << r.options_total << ',' << r.options_verified << ',' << r.chosen << ','
      << format_optional(r.packet_loss_est) << ',' << format_optional(r.energy_est) << ','
      << format_optional(r.latency_est) << ',' << r.plan_steps << ',' << (r.failsafe ? 1 : 0) << ','
      << (r.analyzed ? 1 : 0) << ',' << (r.partial ? 1 : 0) << ',' << format(r.realized_packet_loss) << ','
      << format(r.realized_energy) << ',' << format(r.realized_latency) << ',' << csv_text(r.event);
  return out.str();
}

std::string decision_log_csv(const std::vector<DecisionRow>& rows) {
  std::string out = std::string(kDecisionLogHeader) + "\n";
  for (const DecisionRow& r : rows) out += decision_log_row(r) + "\n";
  return out;
}

FeedbackLoop::FeedbackLoop(Knowledge k, std::uint64_t seed) : k_(std::move(k)), seed_(seed) {
  if (k_.topology == nullptr) throw std::invalid_argument("knowledge has no topology");
  if (k_.budget_ticks == 0) throw std::invalid_argument("verification budget must be positive");
  k_.goals = normalize_goals(k_.goals);
}

AnalysisResult FeedbackLoop::analyze() {
  if (!k_.current) throw std::logic_error("analyze before monitor");
  const Topology& t = *k_.topology;
  const UncertaintyState env = uncertainty_from_probe(t, *k_.current);
  std::vector<qmodels::IotOption> options;
  for (NetworkSettings& s : enumerate_options(t, env)) options.push_back({&t, std::move(s), env});
  smc::Budget budget(k_.budget_ticks);
  AnalysisResult r = mape::analyze(k_.registry, options, k_.verification, seed_, budget);
  k_.options.clear();
  for (std::size_t i = 0; i < options.size(); ++i) {
    k_.options.push_back({std::move(options[i].settings), std::move(r.results[i])});
    r.results[i] = k_.options.back().verification;
  }
  return r;
}

Plan FeedbackLoop::plan(Selection& selection) {
  std::vector<Results> results;
  for (const AdaptationOption& o : k_.options) results.push_back(o.verification);
  selection = select_option(k_.goals, results);
  if (!selection.chosen) {
    k_.plan = failsafe_plan();
  } else {
    k_.plan = diff_plan(k_.current->settings, k_.options[*selection.chosen].settings);
  }
  return k_.plan;
}

DecisionRow FeedbackLoop::step(deltaiot::Simulator& sim) {
  const deltaiot::CycleStats stats = sim.run_cycle();
  DecisionRow row;
  row.cycle = stats.cycle;
  row.realized_packet_loss = stats.packet_loss;
  row.realized_energy = stats.energy;
  row.realized_latency = stats.latency_pct;

  if (monitor(k_, sim.probe())) {
    row.analyzed = true;
    AnalysisResult analysis;
    try {
      analysis = analyze();
    } catch (const std::exception& e) {
      k_.options.clear();
      row.event = std::string("analysis failed: ") + e.what();
    }
    row.options_total = k_.options.size();
    row.options_verified = analysis.verified;
    row.partial = analysis.partial;
    const Plan p = plan(selection_);
    row.failsafe = !selection_.chosen.has_value();
    if (selection_.chosen) {
      row.chosen = static_cast<int>(*selection_.chosen);
      const Results& est = k_.options[*selection_.chosen].verification;
      if (auto it = est.find("packetLoss"); it != est.end()) row.packet_loss_est = it->second.point;
      if (auto it = est.find("energy"); it != est.end()) row.energy_est = it->second.point;
      if (auto it = est.find("latency"); it != est.end()) row.latency_est = it->second.point;
    }
    row.plan_steps = p.size();
    if (!p.empty()) {
      try {
        sim.apply_settings(apply_plan(*k_.topology, sim.settings(), p));
      } catch (const deltaiot::SettingsError& e) {
        row.event += (row.event.empty() ? "" : "; ") + std::string("effector rejected plan: ") + e.what();
        row.failsafe = true;
        k_.plan = failsafe_plan();
        sim.apply_settings(deltaiot::failsafe_settings(*k_.topology));
      }
    }
  }

  if (hook_) {
    const std::string event = hook_(k_);
    if (!event.empty()) row.event += (row.event.empty() ? "" : "; ") + event;
  }
  return row;
}

std::vector<DecisionRow> FeedbackLoop::run(deltaiot::Simulator& sim, int cycles) {
  std::vector<DecisionRow> rows;
  for (int c = 0; c < cycles; ++c) rows.push_back(step(sim));
  return rows;
}

}  // namespace selfadapt::mape
