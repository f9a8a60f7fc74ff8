#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "selfadapt/deltaiot/simulator.hpp"
#include "selfadapt/mape/analysis.hpp"
#include "selfadapt/qmodels/deltaiot_models.hpp"

namespace selfadapt::mape {

enum class StepType { SetPower, SetDistribution, Failsafe };

/// One effector action. `element` is a link index (unused for Failsafe).
struct PlanStep {
  StepType type = StepType::Failsafe;
  int element = -1;
  int value = 0;
  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

using Plan = std::vector<PlanStep>;

/// Minimum power per link under `env`; distribution factors 0..100 in steps
/// of 20 for each two-parent mote (first link's factor varies slowest for
/// the lowest mote id); single-parent motes send everything.
std::vector<deltaiot::NetworkSettings> enumerate_options(const deltaiot::Topology& t,
                                                         const deltaiot::UncertaintyState& env);

/// Uncertainties implied by a probe: loads as reported, and each link's
/// alpha recovered as SNR - beta * power (beta is a static link property).
deltaiot::UncertaintyState uncertainty_from_probe(const deltaiot::Topology& t, const deltaiot::Configuration& probe);

/// Steps that turn `from` into `to`, in link order, power before factor.
Plan diff_plan(const deltaiot::NetworkSettings& from, const deltaiot::NetworkSettings& to);
Plan failsafe_plan();
/// Applies steps to a copy of `current`; throws SettingsError on a bad step.
deltaiot::NetworkSettings apply_plan(const deltaiot::Topology& t, const deltaiot::NetworkSettings& current,
                                     const Plan& plan);

struct AdaptationOption {
  deltaiot::NetworkSettings settings;
  Results verification;
};

/// Notional simulated ticks in one cycle; the default analysis budget is
/// 80 % of it.
constexpr std::uint64_t kCycleTicks = 50'000'000;
constexpr std::uint64_t kDefaultBudgetTicks = kCycleTicks / 10 * 8;

qmodels::VerificationParams default_verification();

struct Knowledge {
  const deltaiot::Topology* topology = nullptr;
  std::optional<deltaiot::Configuration> current;
  std::optional<deltaiot::Configuration> previous;
  std::vector<Goal> goals;
  qmodels::IotRegistry registry;
  std::vector<AdaptationOption> options;
  Plan plan;
  qmodels::VerificationParams verification = default_verification();
  std::uint64_t budget_ticks = kDefaultBudgetTicks;
};

Knowledge make_knowledge(const deltaiot::Topology& t, std::vector<Goal> goals = default_iot_goals(),
                         qmodels::IotRegistry registry = qmodels::default_registry());

/// Stores the probe and reports whether anything monitored changed. The
/// first probe always requires analysis. Throws std::invalid_argument on
/// probe data that does not fit the topology.
bool monitor(Knowledge& k, const deltaiot::Configuration& probe);

/// One row of the decision log.
struct DecisionRow {
  int cycle = 0;
  bool analyzed = false;
  std::size_t options_total = 0;
  std::size_t options_verified = 0;
  int chosen = -1;  // option index, -1 when none was chosen
  std::optional<double> packet_loss_est;
  std::optional<double> energy_est;
  std::optional<double> latency_est;
  std::size_t plan_steps = 0;
  bool failsafe = false;
  bool partial = false;
  double realized_packet_loss = 0.0;
  double realized_energy = 0.0;
  double realized_latency = 0.0;
  std::string event;
};

extern const char* const kDecisionLogHeader;
std::string decision_log_row(const DecisionRow& r);
std::string decision_log_csv(const std::vector<DecisionRow>& rows);

/// MAPE-K loop over a DeltaIoT simulator. Each step runs one network cycle
/// and then Monitor, Analyze, Plan and Execute; the quiescent hook runs
/// after Execute, before the next Monitor.
class FeedbackLoop {
 public:
  using QuiescentHook = std::function<std::string(Knowledge&)>;

  FeedbackLoop(Knowledge k, std::uint64_t seed);

  DecisionRow step(deltaiot::Simulator& sim);
  std::vector<DecisionRow> run(deltaiot::Simulator& sim, int cycles);

  /// Fills the knowledge's options with verification results.
  AnalysisResult analyze();
  /// Goal-ordered selection over the knowledge's options.
  Plan plan(Selection& selection);

  void set_quiescent_hook(QuiescentHook hook) { hook_ = std::move(hook); }
  [[nodiscard]] Knowledge& knowledge() { return k_; }
  [[nodiscard]] const Knowledge& knowledge() const { return k_; }
  /// Selection made in the most recent analyzed cycle.
  [[nodiscard]] const Selection& last_selection() const { return selection_; }

 private:
  Knowledge k_;
  std::uint64_t seed_;
  QuiescentHook hook_;
  Selection selection_;
};

}  // namespace selfadapt::mape
