#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/mape/analysis.hpp"
#include "selfadapt/qmodels/registry.hpp"

namespace selfadapt::healthsvc {

class HealthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ServiceType { MedicalAnalysis = 0, Drug = 1, Alarm = 2 };
inline constexpr int kServiceTypes = 3;
const char* service_name(ServiceType t);

struct Provider {
  double failure_rate = 0.0;
  double cost = 0.0;
  double response_time = 0.0;
  friend bool operator==(const Provider&, const Provider&) = default;
};

struct ServiceCatalog {
  std::array<std::vector<Provider>, kServiceTypes> services;
  friend bool operator==(const ServiceCatalog&, const ServiceCatalog&) = default;
};

/// Percentages: an emergency call goes straight to Alarm, otherwise the
/// analysis result picks Drug or Alarm.
struct WorkflowParams {
  int p_emergency = 22;
  int p_analysis = 78;
  int p_change_medication = 66;
  int p_indirect_emergency = 34;
  friend bool operator==(const WorkflowParams&, const WorkflowParams&) = default;
};

struct ServiceCombination {
  std::array<int, kServiceTypes> provider{};
  friend bool operator==(const ServiceCombination&, const ServiceCombination&) = default;
};

void validate(const ServiceCatalog& c);
void validate(const WorkflowParams& p);
void validate(const ServiceCombination& combo, const ServiceCatalog& c);

/// Failure rates from the reference setup. Costs and response times are
/// made-up fixture values.
ServiceCatalog default_catalog();
/// Same catalog with every failure rate doubled.
ServiceCatalog doubled_failure_catalog();

/// {"services": {"MedicalAnalysis": [{"failureRate", "cost", "responseTime"}],
///  "Drug": [...], "Alarm": [...]}, "params": {"pEmergency", "pAnalysis",
///  "pChangeMedication", "pIndirectEmergency"}}; params are optional.
struct CatalogFile {
  ServiceCatalog catalog;
  WorkflowParams params;
};
CatalogFile parse_catalog(const std::string& json_text);
CatalogFile load_catalog(const std::string& path);
std::string catalog_to_json(const CatalogFile& f);

struct Outcome {
  bool failed = false;
  double cost = 0.0;
  double response_time = 0.0;
};

/// One workflow invocation. Every service on the taken path is invoked;
/// the run fails if any of them fails.
Outcome run_workflow(const ServiceCombination& combo, const WorkflowParams& params, const ServiceCatalog& c, Rng& rng);

/// Cartesian product, last service type varying fastest.
std::vector<ServiceCombination> enumerate_combinations(const ServiceCatalog& c);

struct HealthOption {
  const ServiceCatalog* catalog = nullptr;
  WorkflowParams params;
  ServiceCombination combo;
};

using HealthModel = qmodels::QualityModel<HealthOption>;
using HealthRegistry = qmodels::ModelRegistry<HealthOption>;

HealthModel failure_rate_model();    // "failureRate", probability
HealthModel cost_model();            // "cost", mean
HealthModel response_time_model();   // "responseTime", mean

/// failureRate and cost.
HealthRegistry default_registry();

smc::Estimate predict_failure_rate(const ServiceCombination& combo, const WorkflowParams& params,
                                   const ServiceCatalog& c, const smc::ProbQuery& q, std::uint64_t seed);
smc::Estimate predict_response_time(const ServiceCombination& combo, const WorkflowParams& params,
                                    const ServiceCatalog& c, const smc::MeanQuery& q, std::uint64_t seed);

/// Mean query for cost and response time. Workflow totals take only a few
/// distinct values, so a small first batch can stop the estimator on a
/// misleadingly uniform prefix.
inline constexpr smc::MeanQuery kHealthMeanQuery{0.05, 100, 5000};

/// failureRate below `threshold`, then minimal cost.
std::vector<mape::Goal> default_health_goals(double threshold = 0.12);

/// Managed system: a batch of workflow invocations per cycle.
struct HealthCycle {
  int cycle = 0;
  ServiceCombination combo;
  int invocations = 0;
  double failure_rate = 0.0;
  double mean_cost = 0.0;
  double mean_response_time = 0.0;
};

class HealthSystem {
 public:
  HealthSystem(ServiceCatalog catalog, WorkflowParams params, std::uint64_t seed, int invocations_per_cycle = 100);

  HealthCycle run_cycle();
  void apply(const ServiceCombination& combo);
  /// Provider qualities change from the next cycle on.
  void set_catalog(ServiceCatalog c);

  [[nodiscard]] const ServiceCatalog& catalog() const { return catalog_; }
  [[nodiscard]] const WorkflowParams& params() const { return params_; }
  [[nodiscard]] const ServiceCombination& combination() const { return combo_; }

 private:
  ServiceCatalog catalog_;
  WorkflowParams params_;
  ServiceCombination combo_;
  std::uint64_t seed_;
  int invocations_;
  int cycle_ = 0;
};

/// The combination of the most reliable provider of each type.
ServiceCombination failsafe_combination(const ServiceCatalog& c);

struct HealthRow {
  int cycle = 0;
  bool analyzed = false;
  int chosen = -1;
  std::optional<double> failure_est;
  std::optional<double> cost_est;
  std::optional<double> response_time_est;
  bool failsafe = false;
  bool partial = false;
  double realized_failure = 0.0;
  double realized_cost = 0.0;
};

extern const char* const kHealthLogHeader;
std::string health_log_row(const HealthRow& r);

/// Same goal pipeline as the network loop, over service combinations.
class HealthLoop {
 public:
  HealthLoop(std::vector<mape::Goal> goals, HealthRegistry registry, std::uint64_t seed,
             qmodels::VerificationParams verification = {{0.02, 0.05}, kHealthMeanQuery});

  HealthRow step(HealthSystem& system);
  [[nodiscard]] const std::vector<mape::Results>& results() const { return results_; }
  [[nodiscard]] const std::vector<ServiceCombination>& options() const { return options_; }

 private:
  std::vector<mape::Goal> goals_;
  HealthRegistry registry_;
  std::uint64_t seed_;
  qmodels::VerificationParams verification_;
  std::optional<ServiceCatalog> known_;
  std::vector<ServiceCombination> options_;
  std::vector<mape::Results> results_;
};

}  // namespace selfadapt::healthsvc
