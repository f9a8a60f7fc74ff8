#include "selfadapt/healthsvc/health.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace selfadapt::healthsvc {

using nlohmann::json;

namespace {

constexpr const char* kNames[kServiceTypes] = {"MedicalAnalysis", "Drug", "Alarm"};

const Provider& provider(const ServiceCatalog& c, const ServiceCombination& combo, ServiceType t) {
  return c.services[t][static_cast<std::size_t>(combo.provider[t])];
}

void invoke(const Provider& p, Rng& rng, Outcome& out) {
  if (rng.bernoulli(p.failure_rate)) out.failed = true;
  out.cost += p.cost;
  out.response_time += p.response_time;
}

smc::Trial workflow_trial(const HealthOption& o, double Outcome::*field) {
  validate(o.combo, *o.catalog);
  return [o, field](Rng& rng) {
    const Outcome out = run_workflow(o.combo, o.params, *o.catalog, rng);
    return smc::Sample{out.*field, 1};
  };
}

}  // namespace

const char* service_name(ServiceType t) { return kNames[t]; }

void validate(const ServiceCatalog& c) {
  for (int t = 0; t < kServiceTypes; ++t) {
    if (c.services[static_cast<std::size_t>(t)].empty()) throw HealthError(std::string("no provider for ") + kNames[t]);
    for (const Provider& p : c.services[static_cast<std::size_t>(t)]) {
      if (!(p.failure_rate >= 0.0 && p.failure_rate <= 1.0)) {
        throw HealthError(std::string(kNames[t]) + ": failure rate outside [0, 1]");
      }
      if (!(p.cost >= 0.0) || !(p.response_time >= 0.0) || !std::isfinite(p.cost) || !std::isfinite(p.response_time)) {
        throw HealthError(std::string(kNames[t]) + ": negative cost or response time");
      }
    }
  }
}

void validate(const WorkflowParams& p) {
  auto pct = [](int v) { return v >= 0 && v <= 100; };
  if (!pct(p.p_emergency) || !pct(p.p_analysis) || !pct(p.p_change_medication) || !pct(p.p_indirect_emergency)) {
    throw HealthError("workflow probabilities must be percentages");
  }
  if (p.p_emergency + p.p_analysis != 100) throw HealthError("pEmergency + pAnalysis must be 100");
  if (p.p_change_medication + p.p_indirect_emergency != 100) {
    throw HealthError("pChangeMedication + pIndirectEmergency must be 100");
  }
}

void validate(const ServiceCombination& combo, const ServiceCatalog& c) {
  for (int t = 0; t < kServiceTypes; ++t) {
    const int i = combo.provider[static_cast<std::size_t>(t)];
    if (i < 0 || i >= static_cast<int>(c.services[static_cast<std::size_t>(t)].size())) {
      throw HealthError(std::string("no provider ") + std::to_string(i) + " for " + kNames[t]);
    }
  }
}

ServiceCatalog default_catalog() {
  ServiceCatalog c;
  c.services[MedicalAnalysis] = {{0.11, 4.0, 1.2}, {0.04, 9.0, 2.0}, {0.18, 2.5, 0.8}, {0.08, 6.0, 1.5}};
  c.services[Drug] = {{0.12, 3.0, 0.9}, {0.07, 6.5, 1.4}, {0.18, 1.5, 0.5}, {0.10, 5.0, 1.1}, {0.15, 2.0, 0.7}};
  c.services[Alarm] = {{0.01, 8.0, 0.4}, {0.03, 5.5, 0.3}, {0.05, 3.0, 0.2}, {0.07, 2.0, 0.2}, {0.02, 6.5, 0.5}};
  return c;
}

ServiceCatalog doubled_failure_catalog() {
  ServiceCatalog c = default_catalog();
  for (auto& providers : c.services) {
    for (Provider& p : providers) p.failure_rate *= 2.0;
  }
  return c;
}

CatalogFile parse_catalog(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw HealthError(std::string("malformed catalog: ") + e.what());
  }
  CatalogFile f;
  try {
    const json& services = doc.at("services");
    for (int t = 0; t < kServiceTypes; ++t) {
      for (const json& p : services.at(kNames[t])) {
        f.catalog.services[static_cast<std::size_t>(t)].push_back(
            {p.at("failureRate").get<double>(), p.value("cost", 0.0), p.value("responseTime", 0.0)});
      }
    }
    if (doc.contains("params")) {
      const json& p = doc.at("params");
      f.params.p_emergency = p.value("pEmergency", f.params.p_emergency);
      f.params.p_analysis = p.value("pAnalysis", 100 - f.params.p_emergency);
      f.params.p_change_medication = p.value("pChangeMedication", f.params.p_change_medication);
      f.params.p_indirect_emergency = p.value("pIndirectEmergency", 100 - f.params.p_change_medication);
    }
  } catch (const json::exception& e) {
    throw HealthError(std::string("malformed catalog: ") + e.what());
  }
  validate(f.catalog);
  validate(f.params);
  return f;
}

CatalogFile load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HealthError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str());
}

std::string catalog_to_json(const CatalogFile& f) {
  json services = json::object();
  for (int t = 0; t < kServiceTypes; ++t) {
    json list = json::array();
    for (const Provider& p : f.catalog.services[static_cast<std::size_t>(t)]) {
      list.push_back({{"failureRate", p.failure_rate}, {"cost", p.cost}, {"responseTime", p.response_time}});
    }
    services[kNames[t]] = list;
  }
  const json params = {{"pEmergency", f.params.p_emergency},
                       {"pAnalysis", f.params.p_analysis},
                       {"pChangeMedication", f.params.p_change_medication},
                       {"pIndirectEmergency", f.params.p_indirect_emergency}};
  return json{{"services", services}, {"params", params}}.dump(2);
}

Outcome run_workflow(const ServiceCombination& combo, const WorkflowParams& params, const ServiceCatalog& c, Rng& rng) {
  Outcome out;
  if (static_cast<int>(rng.uniform_int(100)) < params.p_emergency) {
    invoke(provider(c, combo, Alarm), rng, out);
    return out;
  }
  invoke(provider(c, combo, MedicalAnalysis), rng, out);
  if (static_cast<int>(rng.uniform_int(100)) < params.p_change_medication) {
    invoke(provider(c, combo, Drug), rng, out);
  } else {
    invoke(provider(c, combo, Alarm), rng, out);
  }
  return out;
}

std::vector<ServiceCombination> enumerate_combinations(const ServiceCatalog& c) {
  validate(c);
  std::vector<ServiceCombination> out;
  for (std::size_t m = 0; m < c.services[MedicalAnalysis].size(); ++m) {
    for (std::size_t d = 0; d < c.services[Drug].size(); ++d) {
      for (std::size_t a = 0; a < c.services[Alarm].size(); ++a) {
        out.push_back({{static_cast<int>(m), static_cast<int>(d), static_cast<int>(a)}});
      }
    }
  }
  return out;
}

HealthModel failure_rate_model() {
  return {"failureRate", qmodels::EstimatorKind::Probability,
          [](const HealthOption& o) {
            validate(o.combo, *o.catalog);
            return smc::Trial([o](Rng& rng) {
              return smc::Sample{run_workflow(o.combo, o.params, *o.catalog, rng).failed ? 1.0 : 0.0, 1};
            });
          },
          {}};
}

HealthModel cost_model() {
  return {"cost", qmodels::EstimatorKind::Mean, [](const HealthOption& o) { return workflow_trial(o, &Outcome::cost); },
          {}};
}

HealthModel response_time_model() {
  return {"responseTime", qmodels::EstimatorKind::Mean,
          [](const HealthOption& o) { return workflow_trial(o, &Outcome::response_time); }, {}};
}

HealthRegistry default_registry() {
  HealthRegistry r;
  r.add(failure_rate_model());
  r.add(cost_model());
  return r;
}

smc::Estimate predict_failure_rate(const ServiceCombination& combo, const WorkflowParams& params,
                                   const ServiceCatalog& c, const smc::ProbQuery& q, std::uint64_t seed) {
  const HealthOption o{&c, params, combo};
  return qmodels::verify_quality(failure_rate_model(), o, {q, {}}, seed);
}

smc::Estimate predict_response_time(const ServiceCombination& combo, const WorkflowParams& params,
                                    const ServiceCatalog& c, const smc::MeanQuery& q, std::uint64_t seed) {
  const HealthOption o{&c, params, combo};
  return qmodels::verify_quality(response_time_model(), o, {{}, q}, seed);
}

std::vector<mape::Goal> default_health_goals(double threshold) {
  return mape::normalize_goals({{mape::GoalKind::Satisfaction, "failureRate", mape::Comparator::Less, threshold,
                                 mape::Direction::Minimize, 10},
                                {mape::GoalKind::Optimization, "cost", mape::Comparator::Less, 0.0,
                                 mape::Direction::Minimize, 20}});
}

HealthSystem::HealthSystem(ServiceCatalog catalog, WorkflowParams params, std::uint64_t seed,
                           int invocations_per_cycle)
    : catalog_(std::move(catalog)), params_(params), seed_(seed), invocations_(invocations_per_cycle) {
  validate(catalog_);
  validate(params_);
  if (invocations_ <= 0) throw HealthError("invocations per cycle must be positive");
  combo_ = failsafe_combination(catalog_);
}

HealthCycle HealthSystem::run_cycle() {
  HealthCycle out;
  out.cycle = cycle_;
  out.combo = combo_;
  out.invocations = invocations_;
  Rng rng = Rng(seed_).split(static_cast<std::uint64_t>(cycle_));
  int failed = 0;
  for (int i = 0; i < invocations_; ++i) {
    const Outcome o = run_workflow(combo_, params_, catalog_, rng);
    failed += o.failed ? 1 : 0;
    out.mean_cost += o.cost;
    out.mean_response_time += o.response_time;
  }
  out.failure_rate = static_cast<double>(failed) / invocations_;
  out.mean_cost /= invocations_;
  out.mean_response_time /= invocations_;
  ++cycle_;
  return out;
}

void HealthSystem::apply(const ServiceCombination& combo) {
  validate(combo, catalog_);
  combo_ = combo;
}

void HealthSystem::set_catalog(ServiceCatalog c) {
  validate(c);
  validate(combo_, c);
  catalog_ = std::move(c);
}

ServiceCombination failsafe_combination(const ServiceCatalog& c) {
  validate(c);
  ServiceCombination out;
  for (int t = 0; t < kServiceTypes; ++t) {
    const auto& ps = c.services[static_cast<std::size_t>(t)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < ps.size(); ++i) {
      if (ps[i].failure_rate < ps[best].failure_rate) best = i;
    }
    out.provider[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

const char* const kHealthLogHeader =
    "cycle,analyzed,chosenOptionIndex,failureRateEst,costEst,responseTimeEst,failsafe,partial,realizedFailureRate,"
    "realizedCost";

std::string health_log_row(const HealthRow& r) {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  char tail[96];
  std::snprintf(tail, sizeof tail, "%.6f,%.6f", r.realized_failure, r.realized_cost);
  return std::to_string(r.cycle) + "," + (r.analyzed ? "1" : "0") + "," + std::to_string(r.chosen) + "," +
         opt(r.failure_est) + "," + opt(r.cost_est) + "," + opt(r.response_time_est) + "," +
         (r.failsafe ? "1" : "0") + "," + (r.partial ? "1" : "0") + "," + tail;
}

HealthLoop::HealthLoop(std::vector<mape::Goal> goals, HealthRegistry registry, std::uint64_t seed,
                       qmodels::VerificationParams verification)
    : goals_(mape::normalize_goals(std::move(goals))),
      registry_(std::move(registry)),
      seed_(seed),
      verification_(verification) {
  for (const mape::Goal& g : goals_) {
    if (!registry_.contains(g.quality)) throw HealthError("goal on '" + g.quality + "' has no quality model");
  }
}

HealthRow HealthLoop::step(HealthSystem& system) {
  const HealthCycle cycle = system.run_cycle();
  HealthRow row;
  row.cycle = cycle.cycle;
  row.realized_failure = cycle.failure_rate;
  row.realized_cost = cycle.mean_cost;

  // analyze on the first cycle and whenever provider qualities change
  if (known_ && *known_ == system.catalog()) return row;
  known_ = system.catalog();
  row.analyzed = true;
  options_ = enumerate_combinations(system.catalog());
  std::vector<HealthOption> opts;
  for (const ServiceCombination& c : options_) opts.push_back({&*known_, system.params(), c});
  smc::Budget budget;
  const mape::AnalysisResult a =
      mape::analyze(registry_, opts, verification_, Rng(seed_).split(static_cast<std::uint64_t>(cycle.cycle)).next(),
                    budget);
  results_ = a.results;
  row.partial = a.partial;
  const mape::Selection sel = mape::select_option(goals_, results_);
  const ServiceCombination next = sel.chosen ? options_[*sel.chosen] : failsafe_combination(*known_);
  row.failsafe = !sel.chosen;
  if (sel.chosen) {
    row.chosen = static_cast<int>(*sel.chosen);
    const mape::Results& r = results_[*sel.chosen];
    if (auto it = r.find("failureRate"); it != r.end()) row.failure_est = it->second.point;
    if (auto it = r.find("cost"); it != r.end()) row.cost_est = it->second.point;
    if (auto it = r.find("responseTime"); it != r.end()) row.response_time_est = it->second.point;
  }
  system.apply(next);
  return row;
}

}  // namespace selfadapt::healthsvc
