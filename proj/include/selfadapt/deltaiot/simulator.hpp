#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "selfadapt/deltaiot/network.hpp"
#include "selfadapt/rng.hpp"

namespace selfadapt::deltaiot {

/// Scripted change active for cycles [from, to] (inclusive). A link event
/// shifts that link's alpha; a mote event overrides that mote's load.
struct ScenarioEvent {
  int from = 0;
  int to = 0;
  int source = 0;
  int dest = 0;           // 0 for mote events
  double alpha_delta = 0.0;
  double load = -1.0;     // < 0: unchanged
  friend bool operator==(const ScenarioEvent&, const ScenarioEvent&) = default;
};

/// Sinusoidal alpha drift on one link.
struct Drift {
  int source = 0;
  int dest = 0;
  double amplitude = 0.0;
  double period = 1.0;   // cycles
  double phase = 0.0;    // cycles
  friend bool operator==(const Drift&, const Drift&) = default;
};

/// How uncertainties evolve over cycles. With no events, drift or noise the
/// environment is frozen at the topology's nominal values.
struct Scenario {
  std::string name = "static";
  double snr_noise = 0.0;  // standard deviation (dB) of per-cycle alpha noise
  std::vector<Drift> drifts;
  std::vector<ScenarioEvent> events;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

/// Uncertainties in effect during `cycle` (0-based). Noise is drawn from
/// Rng(seed).split(cycle), so this is a pure function.
UncertaintyState uncertainty_at(const Topology& t, const Scenario& s, int cycle, std::uint64_t seed);

struct CycleStats {
  int cycle = 0;
  int generated = 0;
  int delivered = 0;
  int dropped_link = 0;      // last copy lost on a link
  int dropped_overflow = 0;  // last copy lost to a full queue
  int carried_in = 0;        // undelivered packets queued at cycle start
  int carried_out = 0;       // undelivered packets queued at cycle end
  double packet_loss = 0.0;  // dropped / (delivered + dropped)
  double energy = 0.0;       // Coulomb
  double latency_pct = 0.0;  // 100 * carried_out / max(1, generated)
  std::uint64_t settings_hash = 0;
  friend bool operator==(const CycleStats&, const CycleStats&) = default;
};

struct Qualities {
  double packet_loss = 0.0;  // fraction
  double energy = 0.0;       // Coulomb
  double latency = 0.0;      // percent
  friend bool operator==(const Qualities&, const Qualities&) = default;
};

struct Environment {
  std::vector<double> mote_load;  // probability, Topology::motes order
  std::vector<double> link_snr;   // dB at the power in use
  friend bool operator==(const Environment&, const Environment&) = default;
};

/// What the probe reports after a cycle.
struct Configuration {
  int cycle = -1;
  NetworkSettings settings;
  Qualities qualities;
  Environment environment;
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

/// Ground-truth network. Single owner; settings applied through
/// apply_settings take effect at the next cycle boundary.
class Simulator {
 public:
  Simulator(Topology topology, Scenario scenario, std::uint64_t seed,
            std::optional<NetworkSettings> initial = std::nullopt);

  /// Runs the next cycle under the environment of uncertainty_at(cycle).
  CycleStats run_cycle();

  /// Same as run_cycle, but under a caller-supplied environment.
  CycleStats run_cycle(const UncertaintyState& env);

  /// Validates and stages settings for the next cycle.
  void apply_settings(const NetworkSettings& s);

  /// Snapshot of the last completed cycle. Throws std::logic_error before
  /// the first cycle.
  [[nodiscard]] Configuration probe() const;

  [[nodiscard]] const Topology& topology() const { return topology_; }
  [[nodiscard]] const NetworkSettings& settings() const { return active_; }
  [[nodiscard]] int cycles_run() const { return cycle_; }
  [[nodiscard]] const std::vector<CycleStats>& history() const { return history_; }
  /// Packets queued per mote (Topology::motes order), copies included.
  [[nodiscard]] std::vector<int> queue_lengths() const;

 private:
  struct PacketInfo {
    int copies = 0;
    bool resolved = false;  // delivered or finally dropped
  };

  void forward(int mote_pos, Rng& cycle_rng, const UncertaintyState& env, CycleStats& stats);
  void release(std::uint64_t id, bool overflow, CycleStats& stats);

  Topology topology_;
  Scenario scenario_;
  std::uint64_t seed_;
  NetworkSettings active_;
  std::optional<NetworkSettings> pending_;
  std::vector<std::deque<std::uint64_t>> queues_;
  std::unordered_map<std::uint64_t, PacketInfo> packets_;
  std::uint64_t next_packet_ = 0;
  int cycle_ = 0;
  std::vector<CycleStats> history_;
  std::optional<Configuration> last_;
};

}  // namespace selfadapt::deltaiot
