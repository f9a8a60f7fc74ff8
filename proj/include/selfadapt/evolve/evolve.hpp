#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/mape/loop.hpp"
#include "selfadapt/verify/verify.hpp"

namespace selfadapt::evolve {

class EvolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quality model picked from the built-in catalog (see model_catalog()).
struct QualitySpec {
  std::string name;   // quality name used by goals
  std::string model;  // catalog id, e.g. "deltaiot-latency"
  qmodels::EstimatorKind kind = qmodels::EstimatorKind::Mean;
};

/// Catalog ids that can be named in a package.
std::vector<std::string> model_catalog();

struct UpdatePackage {
  std::string name;
  /// A goal replaces the live goal on the same quality and of the same
  /// kind; otherwise it is added.
  std::vector<mape::Goal> goals;
  std::vector<QualitySpec> qualities;
  std::optional<std::uint64_t> budget_ticks;
  /// Validation suite; the manager's default suite when empty.
  std::vector<verify::StubScenario> scenarios;
  std::optional<std::vector<verify::Property>> properties;

  [[nodiscard]] bool empty() const { return goals.empty() && qualities.empty() && !budget_ticks; }
};

/// {"name", "goals": [goal entries as in goal files], "qualities": [{"name",
///  "model", "estimator": "probability"|"mean"}], "budgetTicks",
///  "scenarios": [paths], "properties": path}. Paths are relative to
/// `base_dir`. Thresholds are not checked here; validation does that.
UpdatePackage parse_package(const std::string& json_text, const std::string& base_dir = ".");
UpdatePackage load_package(const std::string& path);

struct ValidationSuite {
  std::vector<verify::StubScenario> scenarios;
  std::vector<verify::Property> properties;
};

/// The stub scenarios and properties shipped under data/stubs.
ValidationSuite load_suite(const std::string& stub_dir);

struct PropertyResult {
  std::string scenario;
  std::string property;
  bool holds = false;
  std::vector<std::string> counterexample;
};

struct ValidationReport {
  bool passed = false;
  std::vector<std::string> diagnostics;
  std::vector<PropertyResult> results;
  std::string text() const;
};

struct StagedHandle {
  std::uint64_t id = 0;
};

/// Staging, validation and activation of online goal/model updates. The
/// manager may be driven from another thread; the loop picks up an
/// activated update only through hook(), at its quiescent point.
class GoalManager {
 public:
  GoalManager(const deltaiot::Topology& topology, std::vector<mape::Goal> goals, qmodels::IotRegistry registry,
              ValidationSuite suite);

  /// Throws EvolveError on an empty or malformed package, or when another
  /// update is staged or awaiting activation.
  StagedHandle stage(UpdatePackage pkg);
  /// Verifies the loop model against the suite under the updated goals and
  /// smoke-tests the new quality models. Never touches the live loop.
  ValidationReport validate(StagedHandle h, std::uint64_t seed);
  /// Queues a validated update for the next quiescent point.
  void activate(StagedHandle h);
  void discard(StagedHandle h);

  [[nodiscard]] bool has_staged() const;
  [[nodiscard]] bool has_pending() const;
  /// Goals the loop runs with (after the last applied update).
  [[nodiscard]] std::vector<mape::Goal> live_goals() const;

  /// Applies a queued update to the knowledge and returns the log event,
  /// or "" when nothing is queued.
  std::string apply_pending(mape::Knowledge& k);
  mape::FeedbackLoop::QuiescentHook hook();

 private:
  struct Update {
    std::string name;
    std::vector<mape::Goal> goals;
    qmodels::IotRegistry registry;
    std::optional<std::uint64_t> budget_ticks;
  };
  struct Staged {
    std::uint64_t id = 0;
    UpdatePackage pkg;
    std::optional<bool> validated;
  };

  Staged& staged_for(StagedHandle h);
  Update build(const UpdatePackage& pkg) const;

  const deltaiot::Topology* topology_;
  mutable std::mutex mu_;
  std::vector<mape::Goal> goals_;
  qmodels::IotRegistry registry_;
  ValidationSuite suite_;
  std::optional<Staged> staged_;
  std::optional<Update> mailbox_;
  std::uint64_t next_id_ = 1;
};

/// The example package: latency below 5 % at rank 15.
UpdatePackage latency_package();

}  // namespace selfadapt::evolve
