#include "selfadapt/deltaiot/simulator.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace selfadapt::deltaiot {

namespace {

using nlohmann::json;

int require_link(const Topology& t, int source, int dest) {
  const int l = t.link_index(source, dest);
  if (l < 0) throw TopologyError("scenario refers to unknown link " + std::to_string(source) + "->" + std::to_string(dest));
  return l;
}

void validate_scenario(const Topology& t, const Scenario& s) {
  for (const Drift& d : s.drifts) {
    require_link(t, d.source, d.dest);
    if (!(d.period > 0.0)) throw TopologyError("drift period must be positive");
  }
  for (const ScenarioEvent& e : s.events) {
    if (e.dest != 0) {
      require_link(t, e.source, e.dest);
    } else if (t.mote_index(e.source) < 0) {
      throw TopologyError("scenario refers to unknown mote " + std::to_string(e.source));
    }
    if (e.load > 1.0) throw TopologyError("scenario load above 1");
  }
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw TopologyError(std::string("malformed scenario: ") + e.what());
  }
  try {
    Scenario s;
    s.name = doc.value("name", "scenario");
    s.snr_noise = doc.value("snrNoise", 0.0);
    if (!(s.snr_noise >= 0.0)) throw TopologyError("snrNoise must be nonnegative");
    for (const json& d : doc.value("drifts", json::array())) {
      const auto link = d.at("link").get<std::vector<int>>();
      if (link.size() != 2) throw TopologyError("malformed field 'link'");
      s.drifts.push_back(Drift{link[0], link[1], d.at("amplitude").get<double>(), d.at("period").get<double>(),
                               d.value("phase", 0.0)});
    }
    for (const json& e : doc.value("events", json::array())) {
      ScenarioEvent ev;
      ev.from = e.at("from").get<int>();
      ev.to = e.at("to").get<int>();
      if (e.contains("link")) {
        const auto link = e.at("link").get<std::vector<int>>();
        if (link.size() != 2) throw TopologyError("malformed field 'link'");
        ev.source = link[0];
        ev.dest = link[1];
        ev.alpha_delta = e.value("alphaDelta", 0.0);
      } else {
        ev.source = e.at("mote").get<int>();
        ev.load = e.at("load").get<double>();
      }
      s.events.push_back(ev);
    }
    return s;
  } catch (const json::exception& e) {
    throw TopologyError(std::string("malformed field: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TopologyError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

UncertaintyState uncertainty_at(const Topology& t, const Scenario& s, int cycle, std::uint64_t seed) {
  UncertaintyState u = nominal_uncertainty(t);
  for (const Drift& d : s.drifts) {
    const auto l = static_cast<std::size_t>(require_link(t, d.source, d.dest));
    u.alpha[l] += d.amplitude * std::sin(2.0 * std::numbers::pi * (cycle + d.phase) / d.period);
  }
  for (const ScenarioEvent& e : s.events) {
    if (cycle < e.from || cycle > e.to) continue;
    if (e.dest != 0) {
      u.alpha[static_cast<std::size_t>(require_link(t, e.source, e.dest))] += e.alpha_delta;
    } else if (e.load >= 0.0) {
      u.load[static_cast<std::size_t>(t.mote_index(e.source))] = e.load;
    }
  }
  if (s.snr_noise > 0.0) {
    Rng rng = Rng(seed).split(static_cast<std::uint64_t>(cycle)).split(0);
    for (double& a : u.alpha) a += s.snr_noise * rng.normal();
  }
  return u;
}

Simulator::Simulator(Topology topology, Scenario scenario, std::uint64_t seed, std::optional<NetworkSettings> initial)
    : topology_(std::move(topology)), scenario_(std::move(scenario)), seed_(seed) {
  validate_scenario(topology_, scenario_);
  if (initial) {
    validate_settings(topology_, *initial);
    active_ = *initial;
  } else {
    active_ = failsafe_settings(topology_);
  }
  queues_.resize(topology_.motes().size());
}

void Simulator::apply_settings(const NetworkSettings& s) {
  validate_settings(topology_, s);
  pending_ = s;
}

CycleStats Simulator::run_cycle() { return run_cycle(uncertainty_at(topology_, scenario_, cycle_, seed_)); }

void Simulator::release(std::uint64_t id, bool overflow, CycleStats& stats) {
  auto it = packets_.find(id);
  if (--it->second.copies > 0) return;
  if (!it->second.resolved) ++(overflow ? stats.dropped_overflow : stats.dropped_link);
  packets_.erase(it);
}

CycleStats Simulator::run_cycle(const UncertaintyState& env) {
  if (env.load.size() != topology_.motes().size() || env.alpha.size() != topology_.links().size() ||
      env.beta.size() != topology_.links().size()) {
    throw std::invalid_argument("environment does not match topology");
  }
  if (pending_) {
    active_ = *pending_;
    pending_.reset();
  }
  CycleStats stats;
  stats.cycle = cycle_;
  stats.settings_hash = settings_hash(active_);
  for (const auto& [id, info] : packets_) stats.carried_in += info.resolved ? 0 : 1;

  Rng cycle_rng = Rng(seed_).split(static_cast<std::uint64_t>(cycle_)).split(1);
  for (const int mote : topology_.turn_order()) forward(topology_.mote_index(mote), cycle_rng, env, stats);

  stats.energy += receive_energy_per_cycle(topology_);
  for (const auto& [id, info] : packets_) stats.carried_out += info.resolved ? 0 : 1;
  const int dropped = stats.dropped_link + stats.dropped_overflow;
  stats.packet_loss = dropped + stats.delivered > 0 ? static_cast<double>(dropped) / (dropped + stats.delivered) : 0.0;
  stats.latency_pct = 100.0 * stats.carried_out / std::max(1, stats.generated);

  Configuration c;
  c.cycle = cycle_;
  c.settings = active_;
  c.qualities = Qualities{stats.packet_loss, stats.energy, stats.latency_pct};
  c.environment.mote_load = env.load;
  for (std::size_t l = 0; l < topology_.links().size(); ++l) {
    c.environment.link_snr.push_back(env.snr(static_cast<int>(l), active_.power[l]));
  }
  last_ = std::move(c);
  history_.push_back(stats);
  ++cycle_;
  return stats;
}

void Simulator::forward(int mote_pos, Rng& cycle_rng, const UncertaintyState& env, CycleStats& stats) {
  const auto m = static_cast<std::size_t>(mote_pos);
  const Mote& mote = topology_.motes()[m];
  // One load draw and one stream per mote, whatever happens, so that runs
  // under different settings stay paired.
  Rng mote_rng = cycle_rng.split(static_cast<std::uint64_t>(mote.id));
  const bool generating = mote_rng.bernoulli(env.load[m]);

  std::deque<std::uint64_t>& queue = queues_[m];
  const std::size_t from_queue = std::min<std::size_t>(queue.size(), generating ? kMaxSlots - kMoteLoad : kMaxSlots);
  std::vector<std::uint64_t> window(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(from_queue));
  queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(from_queue));
  if (generating) {
    for (int k = 0; k < kMoteLoad; ++k) {
      packets_[next_packet_] = PacketInfo{1, false};
      window.push_back(next_packet_++);
    }
    stats.generated += kMoteLoad;
  }
  const int total = static_cast<int>(window.size());
  const std::vector<int>& parents = topology_.parent_links(mote.id);

  // First parent gets floor(total * df / 100) packets from the front of the
  // window, the second ceil(total * df / 100) continuing from there.
  std::vector<std::vector<std::uint64_t>> batches(parents.size());
  std::vector<int> uses(window.size(), 0);
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < parents.size(); ++p) {
    const int df = active_.distribution[static_cast<std::size_t>(parents[p])];
    const int n = p == 0 ? (total * df) / 100 : (total * df + 99) / 100;
    for (int k = 0; k < n && total > 0; ++k) {
      const std::size_t w = cursor % window.size();
      batches[p].push_back(window[w]);
      ++uses[w];
      ++cursor;
    }
  }
  for (std::size_t w = 0; w < window.size(); ++w) {
    packets_[window[w]].copies += uses[w];
    release(window[w], false, stats);  // the copy that left this mote's buffer
  }

  for (std::size_t p = 0; p < parents.size(); ++p) {
    const auto l = static_cast<std::size_t>(parents[p]);
    const Link& link = topology_.links()[l];
    const int power = active_.power[l];
    stats.energy += send_energy(static_cast<int>(batches[p].size()), power);
    const double fail = link_failure_probability(env.snr(static_cast<int>(l), power));
    Rng link_rng = mote_rng.split(1 + l);
    for (const std::uint64_t id : batches[p]) {
      if (link_rng.bernoulli(fail)) {
        release(id, false, stats);
      } else if (link.dest == kGatewayId) {
        PacketInfo& info = packets_[id];
        if (!info.resolved) {
          info.resolved = true;
          ++stats.delivered;
        }
        release(id, false, stats);
      } else {
        std::deque<std::uint64_t>& parent = queues_[static_cast<std::size_t>(topology_.mote_index(link.dest))];
        if (static_cast<int>(parent.size()) < kMaxQueue) {
          parent.push_back(id);
        } else {
          release(id, true, stats);
        }
      }
    }
  }
}

Configuration Simulator::probe() const {
  if (!last_) throw std::logic_error("probe before the first completed cycle");
  return *last_;
}

std::vector<int> Simulator::queue_lengths() const {
  std::vector<int> out;
  for (const auto& q : queues_) out.push_back(static_cast<int>(q.size()));
  return out;
}

}  // namespace selfadapt::deltaiot
