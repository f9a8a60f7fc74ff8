#include "selfadapt/qmodels/deltaiot_models.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "selfadapt/engine/interpreter.hpp"
#include "selfadapt/engine/parser.hpp"
#include "selfadapt/models.hpp"

namespace selfadapt::qmodels {

namespace {

using deltaiot::kGatewayId;

struct Hop {
  int dest = -1;  // mote index, -1 for the gateway
  int dest_id = 0;
  int df = 0;
  int power = 0;
  double fail = 0.0;
  double snr = 0.0;
};

/// Flattened view of an option shared by the native kernels.
struct Plan {
  std::vector<int> ids;
  std::vector<double> load;
  std::vector<std::vector<Hop>> hops;  // by mote index
  std::vector<int> order;              // mote indices in sending order
};

Plan make_plan(const IotOption& o) {
  if (o.topology == nullptr) throw std::invalid_argument("option has no topology");
  const deltaiot::Topology& t = *o.topology;
  deltaiot::validate_settings(t, o.settings);
  Plan p;
  for (const auto& m : t.motes()) p.ids.push_back(m.id);
  p.load = o.env.load;
  if (p.load.size() != p.ids.size()) throw std::invalid_argument("load vector does not match topology");
  p.hops.resize(p.ids.size());
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    for (int l : t.parent_links(p.ids[i])) {
      const auto& link = t.links()[static_cast<std::size_t>(l)];
      Hop h;
      h.dest_id = link.dest;
      h.dest = link.dest == kGatewayId ? -1 : t.mote_index(link.dest);
      h.df = o.settings.distribution[static_cast<std::size_t>(l)];
      h.power = o.settings.power[static_cast<std::size_t>(l)];
      h.snr = o.env.snr(l, h.power);
      h.fail = deltaiot::link_failure_probability(h.snr);
      p.hops[i].push_back(h);
    }
  }
  for (int id : t.turn_order()) p.order.push_back(t.mote_index(id));
  return p;
}

double total_load(const Plan& p) {
  double s = 0.0;
  for (double l : p.load) s += std::max(0.0, l);
  return s;
}

bool deliver(const Plan& p, int mote, Rng& rng, std::uint64_t& ticks) {
  if (mote < 0) return true;
  const auto& hops = p.hops[static_cast<std::size_t>(mote)];
  int sum = 0;
  for (const Hop& h : hops) sum += h.df;
  if (sum > 100) {
    // duplicated to every parent with a full share; lost only if all copies are
    bool any = false;
    for (const Hop& h : hops) {
      if (h.df == 0) continue;
      ++ticks;
      const bool arrived = !rng.bernoulli(h.fail) && deliver(p, h.dest, rng, ticks);
      any = any || arrived;
    }
    return any;
  }
  const Hop* h = &hops.front();
  if (hops.size() > 1 && static_cast<int>(rng.uniform_int(100)) >= hops.front().df) h = &hops[1];
  ++ticks;
  if (rng.bernoulli(h->fail)) return false;
  return deliver(p, h->dest, rng, ticks);
}

double transmit_energy(int packets, int power) {
  return packets * deltaiot::kSfTime * deltaiot::kPcr[static_cast<std::size_t>(power)] / deltaiot::kCoulombUnit;
}

struct CycleOutcome {
  double energy = 0.0;   // first cycle only
  double latency = 0.0;  // mean over cycles
  std::uint64_t ticks = 0;
};

CycleOutcome run_cycles(const Plan& p, int cycles, Rng& rng, int warmup = 0) {
  CycleOutcome out;
  std::vector<int> queue(p.ids.size(), 0);
  for (int c = 0; c < cycles; ++c) {
    int generated = 0;
    double energy = 0.0;
    for (int m : p.order) {
      auto& q = queue[static_cast<std::size_t>(m)];
      const bool gen = rng.bernoulli(std::clamp(p.load[static_cast<std::size_t>(m)], 0.0, 1.0));
      const int take = std::min(q, gen ? deltaiot::kMaxSlots - deltaiot::kMoteLoad : deltaiot::kMaxSlots);
      q -= take;
      const int total = take + (gen ? deltaiot::kMoteLoad : 0);
      generated += gen ? deltaiot::kMoteLoad : 0;
      const auto& hops = p.hops[static_cast<std::size_t>(m)];
      for (std::size_t k = 0; k < hops.size(); ++k) {
        const Hop& h = hops[k];
        const int share = k == 0 ? total * h.df / 100 : (total * h.df + 99) / 100;
        energy += transmit_energy(share, h.power);
        int ok = 0;
        for (int i = 0; i < share; ++i) ok += rng.bernoulli(h.fail) ? 0 : 1;
        out.ticks += static_cast<std::uint64_t>(share);
        if (h.dest >= 0) {
          auto& dq = queue[static_cast<std::size_t>(h.dest)];
          dq = std::min(deltaiot::kMaxQueue, dq + ok);
        }
      }
      ++out.ticks;
    }
    if (c == 0) out.energy = energy;
    int backlog = 0;
    for (int q : queue) backlog += q;
    if (c >= warmup) out.latency += 100.0 * backlog / std::max(1, generated);
  }
  out.latency /= cycles - warmup;
  return out;
}

const engine::AutomatonNetwork& dsl_net(const std::string& name) {
  if (name == "packet_loss") {
    static const engine::AutomatonNetwork net = engine::parse_model(embedded_model("packet_loss"));
    return net;
  }
  static const engine::AutomatonNetwork net = engine::parse_model(embedded_model("network_cycle"));
  return net;
}

constexpr int kDslMaxId = 15;
constexpr double kWeightScale = 10000.0;

void check_dsl_ids(const Plan& p) {
  for (int id : p.ids) {
    if (id > kDslMaxId) throw std::invalid_argument("model form supports mote ids up to 15");
  }
}

/// Per-id arrays shared by both DSL models.
void fill_common(const engine::AutomatonNetwork& net, engine::NetState& s, const Plan& p, bool with_df2) {
  constexpr std::size_t n = kDslMaxId + 1;
  std::vector<double> load(n, 0.0), parent1(n, 0.0), parent2(n, 0.0), df1(n, 0.0), df2(n, 0.0), snr1(n, 0.0),
      snr2(n, 0.0), power1(n, 0.0), power2(n, 0.0);
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    const auto id = static_cast<std::size_t>(p.ids[i]);
    load[id] = std::round(std::clamp(p.load[i], 0.0, 1.0) * kWeightScale);
    const auto& hops = p.hops[i];
    parent1[id] = hops[0].dest_id;
    df1[id] = hops[0].df;
    snr1[id] = hops[0].snr;
    power1[id] = hops[0].power;
    if (hops.size() > 1) {
      parent2[id] = hops[1].dest_id;
      df2[id] = hops[1].df;
      snr2[id] = hops[1].snr;
      power2[id] = hops[1].power;
    }
  }
  engine::assign(net, s, "load", load);
  engine::assign(net, s, "parent1", parent1);
  engine::assign(net, s, "parent2", parent2);
  engine::assign(net, s, "df1", df1);
  engine::assign(net, s, "snr1", snr1);
  engine::assign(net, s, "snr2", snr2);
  if (with_df2) {
    engine::assign(net, s, "df2", df2);
    engine::assign(net, s, "power1", power1);
    engine::assign(net, s, "power2", power2);
  }
}

smc::Trial constant_trial(double v) {
  return [v](Rng&) { return smc::Sample{v, 0}; };
}

smc::Trial dsl_packet_loss(const Plan& p, const IotOption& o) {
  check_dsl_ids(p);
  if (deltaiot::is_failsafe(*o.topology, o.settings)) {
    throw std::invalid_argument("model form does not cover packet duplication");
  }
  const engine::AutomatonNetwork& net = dsl_net("packet_loss");
  engine::NetState s = engine::initial_state(net);
  fill_common(net, s, p, false);
  const int network = net.automaton_index("Network");
  const int lost = net.automata[static_cast<std::size_t>(network)].location_index("PacketLoss");
  const int topology = net.automaton_index("Topology");
  const int gateway = net.automata[static_cast<std::size_t>(topology)].location_index("Gateway");
  auto stop = [=](const engine::NetState& st) {
    return st.locations[static_cast<std::size_t>(network)] == lost ||
           st.locations[static_cast<std::size_t>(topology)] == gateway;
  };
  auto score = [=](const engine::NetState& st) {
    return st.locations[static_cast<std::size_t>(network)] == lost ? 1.0 : 0.0;
  };
  return smc::model_trial(net, std::move(s), 100000, stop, score);
}

smc::Trial dsl_cycles(const Plan& p, int cycles, bool latency, int warmup = 0) {
  check_dsl_ids(p);
  const engine::AutomatonNetwork& net = dsl_net("network_cycle");
  engine::NetState s = engine::initial_state(net);
  fill_common(net, s, p, true);
  std::vector<double> order;
  for (int m : p.order) order.push_back(p.ids[static_cast<std::size_t>(m)]);
  engine::assign(net, s, "order", order);
  engine::assign(net, s, "motes", engine::Value::of_int(static_cast<std::int64_t>(order.size())));
  engine::assign(net, s, "cycles", engine::Value::of_int(cycles));
  engine::assign(net, s, "warmup", engine::Value::of_int(warmup));
  const int cycle = net.automaton_index("Cycle");
  const int done = net.automata[static_cast<std::size_t>(cycle)].location_index("Done");
  auto stop = [=](const engine::NetState& st) { return st.locations[static_cast<std::size_t>(cycle)] == done; };
  const std::string var = latency ? "latencySum" : "energy";
  const double div = latency ? cycles - warmup : 1.0;
  auto score = [&net, var, div](const engine::NetState& st) { return engine::read(net, st, var).as_real() / div; };
  return smc::model_trial(net, std::move(s), 10000000, stop, score);
}

}  // namespace

smc::Trial packet_loss_trial(const IotOption& o, Form form) {
  auto plan = std::make_shared<const Plan>(make_plan(o));
  const double total = total_load(*plan);
  if (total <= 0.0) return constant_trial(0.0);
  if (form == Form::Dsl) return dsl_packet_loss(*plan, o);
  return [plan, total](Rng& rng) {
    double u = rng.uniform01() * total;
    int source = static_cast<int>(plan->load.size()) - 1;
    for (std::size_t i = 0; i < plan->load.size(); ++i) {
      u -= std::max(0.0, plan->load[i]);
      if (u < 0.0) {
        source = static_cast<int>(i);
        break;
      }
    }
    std::uint64_t ticks = 0;
    const bool ok = deliver(*plan, source, rng, ticks);
    return smc::Sample{ok ? 0.0 : 1.0, ticks};
  };
}

smc::Trial energy_trial(const IotOption& o, Form form) {
  auto plan = std::make_shared<const Plan>(make_plan(o));
  if (form == Form::Dsl) return dsl_cycles(*plan, 1, false);
  return [plan](Rng& rng) {
    const CycleOutcome c = run_cycles(*plan, 1, rng);
    return smc::Sample{c.energy, c.ticks};
  };
}

smc::Trial latency_trial(const IotOption& o, Form form) {
  auto plan = std::make_shared<const Plan>(make_plan(o));
  if (form == Form::Dsl) return dsl_cycles(*plan, kLatencyWarmup + kLatencyCycles, true, kLatencyWarmup);
  return [plan](Rng& rng) {
    const CycleOutcome c = run_cycles(*plan, kLatencyWarmup + kLatencyCycles, rng, kLatencyWarmup);
    return smc::Sample{c.latency, c.ticks};
  };
}

double reception_energy(const IotOption& o) {
  if (o.topology == nullptr) throw std::invalid_argument("option has no topology");
  const auto motes = static_cast<double>(o.topology->motes().size());
  return motes * deltaiot::kMaxSlots * deltaiot::kReceptionTime * deltaiot::kReceptionCost / deltaiot::kCoulombUnit;
}

IotModel packet_loss_model(Form form) {
  return {"packetLoss", EstimatorKind::Probability, [form](const IotOption& o) { return packet_loss_trial(o, form); },
          {}};
}

IotModel energy_model(Form form) {
  return {"energy", EstimatorKind::Mean, [form](const IotOption& o) { return energy_trial(o, form); },
          reception_energy};
}

IotModel latency_model(Form form) {
  return {"latency", EstimatorKind::Mean, [form](const IotOption& o) { return latency_trial(o, form); }, {}};
}

IotRegistry default_registry(Form form) {
  IotRegistry r;
  r.add(packet_loss_model(form));
  r.add(energy_model(form));
  return r;
}

}  // namespace selfadapt::qmodels
