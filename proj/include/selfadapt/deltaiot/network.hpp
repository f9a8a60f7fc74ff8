#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfadapt::deltaiot {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SettingsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr int kGatewayId = 1;
constexpr int kMoteLoad = 10;   // packets generated per active cycle
constexpr int kMaxQueue = 60;
constexpr int kMaxSlots = 40;   // send window per mote and cycle
constexpr int kMaxPower = 15;
constexpr double kSfTime = 0.258;
constexpr double kCoulombUnit = 1000.0;
constexpr int kReceptionTime = 2;
constexpr double kReceptionCost = 14.2;
constexpr std::array<double, 16> kPcr = {20.2, 21.2, 22.3, 23.7, 24.7, 26.1, 27.5, 28.8,
                                         30.0, 31.2, 32.4, 33.7, 35.1, 36.5, 38.0, 38.9};

enum class Traffic { Periodic, EventDriven };

struct Mote {
  int id = 0;
  Traffic traffic = Traffic::Periodic;
  double load = 1.0;  // probability of generating kMoteLoad packets in a cycle
  friend bool operator==(const Mote&, const Mote&) = default;
};

/// Directed link child -> parent with SNR(power) = alpha + beta * power.
struct Link {
  int source = 0;
  int dest = 0;
  double alpha = 0.0;
  double beta = 0.0;
  friend bool operator==(const Link&, const Link&) = default;
};

/// Validated routing tree (a DAG rooted at the gateway; motes have one or
/// two parents). Motes exclude the gateway.
class Topology {
 public:
  Topology(std::vector<Mote> motes, std::vector<Link> links, std::vector<int> turn_order = {});

  [[nodiscard]] const std::vector<Mote>& motes() const { return motes_; }
  [[nodiscard]] const std::vector<Link>& links() const { return links_; }
  /// Sending order within a cycle; every mote sends before its parents.
  [[nodiscard]] const std::vector<int>& turn_order() const { return turn_order_; }
  /// Parent link indices of a mote, in declaration order.
  [[nodiscard]] const std::vector<int>& parent_links(int mote_id) const;
  [[nodiscard]] int mote_index(int mote_id) const;  // -1 if absent
  [[nodiscard]] int link_index(int source, int dest) const;  // -1 if absent
  /// Motes with two parents, ascending id.
  [[nodiscard]] std::vector<int> two_parent_motes() const;
  /// Number of network nodes including the gateway.
  [[nodiscard]] int node_count() const { return static_cast<int>(motes_.size()) + 1; }

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::vector<Mote> motes_;
  std::vector<Link> links_;
  std::vector<int> turn_order_;
  std::vector<std::vector<int>> parents_;  // by mote index
};

/// The 15-node DeltaIoT fixture (gateway 1, motes 2..15, 17 links).
/// Link coefficients and traffic profiles are fixture data.
const Topology& deltaiot15();

/// Reads a topology JSON document (schema in docs/file-formats.md).
Topology parse_topology(const std::string& json_text);
Topology load_topology(const std::string& path);
std::string topology_to_json(const Topology& t);

/// Per-link power and distribution factor (percent). Indexed like
/// Topology::links().
struct NetworkSettings {
  std::vector<int> power;
  std::vector<int> distribution;
  friend bool operator==(const NetworkSettings&, const NetworkSettings&) = default;
};

/// Every power at maximum and every factor at 100 (packets duplicated to
/// all parents).
NetworkSettings failsafe_settings(const Topology& t);
bool is_failsafe(const Topology& t, const NetworkSettings& s);

/// Throws SettingsError unless powers lie in [0,15], factors are multiples
/// of 20 in [0,100] and each mote's factors sum to 100. The failsafe
/// setting is the one exception to the sum rule.
void validate_settings(const Topology& t, const NetworkSettings& s);

std::uint64_t settings_hash(const NetworkSettings& s);

/// Current environment: load probability per mote (Topology::motes order)
/// and SNR coefficients per link.
struct UncertaintyState {
  std::vector<double> load;
  std::vector<double> alpha;
  std::vector<double> beta;

  /// SNR of link `l` at `power`, clamped to [-50, 50] dB.
  [[nodiscard]] double snr(int link, int power) const;
  friend bool operator==(const UncertaintyState&, const UncertaintyState&) = default;
};

UncertaintyState nominal_uncertainty(const Topology& t);

double clamp_snr(double snr);
/// 0 for snr >= 0, otherwise min(1, -snr/20).
double link_failure_probability(double snr);
/// Smallest power in 0..15 with alpha + beta * power >= 0, else 15.
int min_power_for_link(double alpha, double beta);
/// Coulomb spent sending `packets` at `power`.
double send_energy(int packets, int power);
/// Coulomb spent listening per cycle: (motes) * slots * 2 * 14.2 / 1000.
double receive_energy(int motes_excluding_gateway, int slots = kMaxSlots);
double receive_energy_per_cycle(const Topology& t = deltaiot15());

}  // namespace selfadapt::deltaiot
