#include "selfadapt/deltaiot/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace selfadapt::deltaiot {

namespace {

using nlohmann::json;

/// Kahn's algorithm releasing a mote once all its children have been
/// placed; ready motes go in ascending id order.
std::vector<int> child_first_order(const std::vector<Mote>& motes, const std::vector<Link>& links) {
  std::vector<int> pending_children(motes.size(), 0);
  auto pos = [&](int id) {
    for (std::size_t i = 0; i < motes.size(); ++i) {
      if (motes[i].id == id) return static_cast<int>(i);
    }
    return -1;
  };
  for (const Link& l : links) {
    if (l.dest != kGatewayId) ++pending_children[static_cast<std::size_t>(pos(l.dest))];
  }
  std::set<int> ready;
  for (std::size_t i = 0; i < motes.size(); ++i) {
    if (pending_children[i] == 0) ready.insert(motes[i].id);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const Link& l : links) {
      if (l.source != id || l.dest == kGatewayId) continue;
      const auto p = static_cast<std::size_t>(pos(l.dest));
      if (--pending_children[p] == 0) ready.insert(l.dest);
    }
  }
  if (order.size() != motes.size()) throw TopologyError("cycle detected");
  return order;
}

}  // namespace

Topology::Topology(std::vector<Mote> motes, std::vector<Link> links, std::vector<int> turn_order)
    : motes_(std::move(motes)), links_(std::move(links)) {
  std::set<int> ids;
  for (const Mote& m : motes_) {
    if (m.id == kGatewayId) throw TopologyError("mote id 1 is reserved for the gateway");
    if (m.id < 0) throw TopologyError("negative mote id");
    if (!ids.insert(m.id).second) throw TopologyError("duplicate mote " + std::to_string(m.id));
    if (!(m.load >= 0.0 && m.load <= 1.0)) throw TopologyError("load of mote " + std::to_string(m.id) + " outside [0,1]");
  }
  if (motes_.empty()) throw TopologyError("topology has no motes");
  std::set<std::pair<int, int>> seen;
  for (const Link& l : links_) {
    const std::string name = std::to_string(l.source) + "->" + std::to_string(l.dest);
    if (!ids.contains(l.source)) throw TopologyError("link " + name + " starts at an unknown mote");
    if (l.dest != kGatewayId && !ids.contains(l.dest)) throw TopologyError("link " + name + " ends at an unknown mote");
    if (l.source == l.dest) throw TopologyError("cycle detected");
    if (!seen.insert({l.source, l.dest}).second) throw TopologyError("duplicate link " + name);
    if (!std::isfinite(l.alpha) || !std::isfinite(l.beta)) throw TopologyError("link " + name + " has non-finite coefficients");
  }
  parents_.resize(motes_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    parents_[static_cast<std::size_t>(mote_index(links_[i].source))].push_back(static_cast<int>(i));
  }
  const std::vector<int> natural = child_first_order(motes_, links_);
  for (std::size_t i = 0; i < motes_.size(); ++i) {
    if (parents_[i].empty()) throw TopologyError("unreachable mote " + std::to_string(motes_[i].id));
    if (parents_[i].size() > 2) throw TopologyError("mote " + std::to_string(motes_[i].id) + " has more than two parents");
  }
  if (turn_order.empty()) {
    turn_order_ = natural;
    return;
  }
  std::vector<int> sorted = turn_order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::vector<int>(ids.begin(), ids.end())) throw TopologyError("turn order must list every mote once");
  for (const Link& l : links_) {
    if (l.dest == kGatewayId) continue;
    const auto child = std::find(turn_order.begin(), turn_order.end(), l.source);
    const auto parent = std::find(turn_order.begin(), turn_order.end(), l.dest);
    if (parent < child) {
      throw TopologyError("turn order sends mote " + std::to_string(l.dest) + " before its child " +
                          std::to_string(l.source));
    }
  }
  turn_order_ = std::move(turn_order);
}

const std::vector<int>& Topology::parent_links(int mote_id) const {
  const int i = mote_index(mote_id);
  if (i < 0) throw TopologyError("unknown mote " + std::to_string(mote_id));
  return parents_[static_cast<std::size_t>(i)];
}

int Topology::mote_index(int mote_id) const {
  for (std::size_t i = 0; i < motes_.size(); ++i) {
    if (motes_[i].id == mote_id) return static_cast<int>(i);
  }
  return -1;
}

int Topology::link_index(int source, int dest) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].source == source && links_[i].dest == dest) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Topology::two_parent_motes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < motes_.size(); ++i) {
    if (parents_[i].size() == 2) out.push_back(motes_[i].id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const Topology& deltaiot15() {
  // Periodic motes follow the field description; event-driven loads and
  // link coefficients are fixture values.
  static const Topology t(
      {
          {2, Traffic::EventDriven, 0.3},  {3, Traffic::Periodic, 1.0},    {4, Traffic::EventDriven, 0.4},
          {5, Traffic::EventDriven, 0.3},  {6, Traffic::EventDriven, 0.5},  {7, Traffic::EventDriven, 0.3},
          {8, Traffic::Periodic, 1.0},     {9, Traffic::Periodic, 1.0},     {10, Traffic::EventDriven, 0.4},
          {11, Traffic::EventDriven, 0.3}, {12, Traffic::EventDriven, 0.4}, {13, Traffic::EventDriven, 0.4},
          {14, Traffic::EventDriven, 0.3}, {15, Traffic::Periodic, 1.0},
      },
      {
          {2, 4, -3.0, 0.6},   {3, 1, 1.5, 0.5},    {4, 1, -6.0, 0.8},   {5, 9, -2.0, 0.7},
          {6, 4, -4.5, 0.6},   {7, 2, -1.0, 0.5},   {7, 3, -7.0, 0.9},   {8, 1, 2.0, 0.4},
          {9, 1, -3.5, 0.7},   {10, 6, -5.0, 0.5},  {10, 5, -2.5, 0.8},  {11, 7, -1.5, 0.6},
          {12, 7, -6.5, 0.7},  {12, 3, -3.0, 0.9},  {13, 11, 0.5, 0.5},  {14, 12, -4.0, 1.0},
          {15, 12, -2.0, 0.4},
      },
      {8, 10, 13, 14, 15, 5, 6, 11, 12, 9, 7, 2, 3, 4});
  return t;
}

Topology parse_topology(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw TopologyError(std::string("malformed topology: ") + e.what());
  }
  try {
    std::vector<Mote> motes;
    for (const json& m : doc.at("motes")) {
      Mote mote;
      mote.id = m.at("id").get<int>();
      const std::string traffic = m.value("traffic", "periodic");
      if (traffic == "periodic") {
        mote.traffic = Traffic::Periodic;
      } else if (traffic == "event") {
        mote.traffic = Traffic::EventDriven;
      } else {
        throw TopologyError("malformed field 'traffic' of mote " + std::to_string(mote.id));
      }
      mote.load = m.value("load", 1.0);
      motes.push_back(mote);
    }
    std::vector<Link> links;
    for (const json& l : doc.at("links")) {
      links.push_back(Link{l.at("from").get<int>(), l.at("to").get<int>(), l.at("alpha").get<double>(),
                           l.at("beta").get<double>()});
    }
    std::vector<int> order;
    if (doc.contains("turnOrder")) order = doc.at("turnOrder").get<std::vector<int>>();
    return Topology(std::move(motes), std::move(links), std::move(order));
  } catch (const json::exception& e) {
    throw TopologyError(std::string("malformed field: ") + e.what());
  }
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TopologyError("cannot open topology file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_topology(buf.str());
}

std::string topology_to_json(const Topology& t) {
  json doc;
  doc["motes"] = json::array();
  for (const Mote& m : t.motes()) {
    doc["motes"].push_back({{"id", m.id}, {"traffic", m.traffic == Traffic::Periodic ? "periodic" : "event"}, {"load", m.load}});
  }
  doc["links"] = json::array();
  for (const Link& l : t.links()) {
    doc["links"].push_back({{"from", l.source}, {"to", l.dest}, {"alpha", l.alpha}, {"beta", l.beta}});
  }
  doc["turnOrder"] = t.turn_order();
  return doc.dump(2);
}

NetworkSettings failsafe_settings(const Topology& t) {
  return NetworkSettings{std::vector<int>(t.links().size(), kMaxPower), std::vector<int>(t.links().size(), 100)};
}

bool is_failsafe(const Topology& t, const NetworkSettings& s) { return s == failsafe_settings(t); }

void validate_settings(const Topology& t, const NetworkSettings& s) {
  const std::size_t n = t.links().size();
  if (s.power.size() != n || s.distribution.size() != n) {
    throw SettingsError("settings cover " + std::to_string(s.power.size()) + " links, topology has " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Link& l = t.links()[i];
    const std::string name = std::to_string(l.source) + "->" + std::to_string(l.dest);
    if (s.power[i] < 0 || s.power[i] > kMaxPower) throw SettingsError("power of link " + name + " outside [0,15]");
    if (s.distribution[i] < 0 || s.distribution[i] > 100 || s.distribution[i] % 20 != 0) {
      throw SettingsError("distribution factor of link " + name + " must be a multiple of 20 in [0,100]");
    }
  }
  if (is_failsafe(t, s)) return;
  for (const Mote& m : t.motes()) {
    int sum = 0;
    for (const int l : t.parent_links(m.id)) sum += s.distribution[static_cast<std::size_t>(l)];
    if (sum != 100) throw SettingsError("factors must sum to 100 (mote " + std::to_string(m.id) + ")");
  }
}

std::uint64_t settings_hash(const NetworkSettings& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](int v) {
    for (int k = 0; k < 4; ++k) {
      h ^= static_cast<std::uint8_t>(static_cast<std::uint32_t>(v) >> (8 * k));
      h *= 0x100000001b3ULL;
    }
  };
  for (const int p : s.power) mix(p);
  for (const int d : s.distribution) mix(d);
  return h;
}

double UncertaintyState::snr(int link, int power) const {
  const auto l = static_cast<std::size_t>(link);
  return clamp_snr(alpha[l] + beta[l] * power);
}

UncertaintyState nominal_uncertainty(const Topology& t) {
  UncertaintyState u;
  for (const Mote& m : t.motes()) u.load.push_back(m.load);
  for (const Link& l : t.links()) {
    u.alpha.push_back(l.alpha);
    u.beta.push_back(l.beta);
  }
  return u;
}

double clamp_snr(double snr) { return std::clamp(snr, -50.0, 50.0); }

double link_failure_probability(double snr) {
  if (snr >= 0.0) return 0.0;
  return std::min(1.0, -snr / 20.0);
}

int min_power_for_link(double alpha, double beta) {
  for (int p = 0; p <= kMaxPower; ++p) {
    if (alpha + beta * p >= 0.0) return p;
  }
  return kMaxPower;
}

double send_energy(int packets, int power) {
  return packets * kSfTime * kPcr[static_cast<std::size_t>(std::clamp(power, 0, kMaxPower))] / kCoulombUnit;
}

double receive_energy(int motes_excluding_gateway, int slots) {
  return motes_excluding_gateway * slots * kReceptionTime * kReceptionCost / kCoulombUnit;
}

double receive_energy_per_cycle(const Topology& t) { return receive_energy(t.node_count() - 1); }

}  // namespace selfadapt::deltaiot
