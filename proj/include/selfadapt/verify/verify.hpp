#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/engine/interpreter.hpp"
#include "selfadapt/mape/goals.hpp"

namespace selfadapt::verify {

class VerifyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scripted verifier output for one option.
struct OptionScript {
  bool verified = true;
  std::map<std::string, double> hi;
  std::map<std::string, double> point;
};

/// One probe sample: measured qualities plus what the verifier reports.
struct StubSample {
  std::map<std::string, double> measured;
  std::vector<OptionScript> options;
};

/// Samples are written as a base plus per-sample mutations; after parsing
/// every sample is complete.
struct StubScenario {
  std::string name;
  int rounds = 1;
  std::vector<std::string> qualities;  // quality slots of the loop model
  std::vector<StubSample> samples;
  std::optional<std::vector<mape::Goal>> goals;
};

StubScenario parse_stub_scenario(const std::string& json_text);
StubScenario load_stub_scenario(const std::string& path);

enum class PropertyKind { NeverReach, LeadsTo };

struct Property {
  PropertyKind kind = PropertyKind::NeverReach;
  std::string premise;     // the bad states for NeverReach
  std::string conclusion;  // LeadsTo only
  std::optional<std::uint64_t> bound;
  std::string text;
};

/// One property per line: "never: <expr>" or
/// "leadsto: <expr> --> <expr> [within N]". '#' starts a comment.
std::vector<Property> parse_properties(const std::string& text);
std::vector<Property> load_properties(const std::string& path);

/// Start state of the loop model with the scenario and goals filled in.
engine::NetState instantiate(const engine::AutomatonNetwork& net, const StubScenario& s,
                             const std::vector<mape::Goal>& goals);

struct Verdict {
  Property property;
  bool holds = false;
  bool decided = true;  // false when the state budget ran out
  std::vector<std::string> counterexample;
};

struct AutomatonCoverage {
  std::string name;
  std::size_t locations_visited = 0;
  std::size_t locations_total = 0;
  std::size_t edges_visited = 0;
  std::size_t edges_total = 0;
  std::vector<std::string> missed_locations;
  std::vector<std::size_t> missed_edges;  // edge indices
};

struct Exploration {
  std::size_t states = 0;
  std::size_t transitions = 0;
  bool budget_exceeded = false;
  std::vector<Verdict> verdicts;
  std::vector<AutomatonCoverage> coverage;
  std::vector<engine::NetState> visited;  // in discovery order
};

struct ExploreOptions {
  std::size_t max_states = 1'000'000;
  std::optional<std::uint64_t> depth;  // unlimited when empty
  bool keep_states = false;            // fill Exploration::visited
};

/// Breadth-first exploration of every interleaving and every positive
/// weight branch.
Exploration explore(const engine::AutomatonNetwork& net, const engine::NetState& start,
                    const std::vector<Property>& properties, const ExploreOptions& opts = {});

std::string coverage_report(const Exploration& e);

/// Merges coverage of several explorations of the same model.
std::vector<AutomatonCoverage> merge_coverage(const engine::AutomatonNetwork& net,
                                              const std::vector<Exploration>& runs);

/// Known planner faults for mutation testing, by name.
std::vector<std::string> fault_names();
/// Source of the loop model with the named fault applied.
std::string inject_fault(const std::string& model_source, const std::string& fault);

/// Compares the model's planner with the native selection for every
/// sample. Returns one line per disagreement.
std::vector<std::string> planner_differential(const engine::AutomatonNetwork& net, const StubScenario& s,
                                              const std::vector<mape::Goal>& goals);

/// Goals used when neither the scenario nor the caller gives any.
std::vector<mape::Goal> default_stub_goals();

}  // namespace selfadapt::verify
