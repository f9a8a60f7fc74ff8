#include <cmath>
#include <map>

#include "doctest.h"
#include "selfadapt/engine/parser.hpp"
#include "selfadapt/models.hpp"
#include "selfadapt/deltaiot/simulator.hpp"
#include "selfadapt/qmodels/deltaiot_models.hpp"
#include "support/oracles.hpp"

using namespace selfadapt;
using namespace selfadapt::deltaiot;
using namespace selfadapt::qmodels;

namespace {

IotOption option(const Topology& t, const NetworkSettings& s) { return {&t, s, nominal_uncertainty(t)}; }

NetworkSettings split_settings(const Topology& t, int power, int first_df) {
  NetworkSettings s{std::vector<int>(t.links().size(), power), std::vector<int>(t.links().size(), 100)};
  for (const int m : t.two_parent_motes()) {
    const auto& p = t.parent_links(m);
    s.distribution[static_cast<std::size_t>(p[0])] = first_df;
    s.distribution[static_cast<std::size_t>(p[1])] = 100 - first_df;
  }
  return s;
}

NetworkSettings min_power_settings(const Topology& t, int first_df) {
  NetworkSettings s = split_settings(t, 0, first_df);
  for (std::size_t l = 0; l < t.links().size(); ++l) {
    s.power[l] = min_power_for_link(t.links()[l].alpha, t.links()[l].beta);
  }
  return s;
}

// Small fixtures: a diamond with one two-parent mote.
Topology diamond() {
  return Topology({{2, Traffic::Periodic, 1.0}, {3, Traffic::EventDriven, 0.5}, {4, Traffic::Periodic, 0.7}},
                  {{2, 1, -8.0, 0.5}, {3, 1, -4.0, 0.2}, {4, 2, -12.0, 0.6}, {4, 3, -14.0, 0.5}});
}

}  // namespace

TEST_CASE("embedded models parse") {
  for (const char* name : {"packet_loss", "network_cycle"}) {
    CAPTURE(name);
    const auto net = engine::parse_model(embedded_model(name));
    CHECK(engine::parse_model(engine::to_source(net)) == net);
  }
}

TEST_CASE("single link at -10 dB loses half the packets") {
  const Topology t({{2, Traffic::Periodic, 1.0}}, {{2, 1, -10.0, 0.0}});
  const IotOption o = option(t, split_settings(t, 0, 100));
  for (Form form : {Form::Native, Form::Dsl}) {
    const smc::Estimate e = smc::estimate_probability({0.02, 0.01}, packet_loss_trial(o, form), 5);
    CHECK(std::fabs(e.point - 0.5) <= 0.02);
  }
}

TEST_CASE("two lossy hops compound") {
  const Topology t({{2, Traffic::Periodic, 0.0}, {3, Traffic::Periodic, 1.0}}, {{2, 1, -10.0, 0.0}, {3, 2, -10.0, 0.0}});
  const IotOption o = option(t, split_settings(t, 0, 100));
  CHECK(oracle::exact_loss(o) == doctest::Approx(0.75));
  for (Form form : {Form::Native, Form::Dsl}) {
    const smc::Estimate e = smc::estimate_probability({0.02, 0.01}, packet_loss_trial(o, form), 9);
    CHECK(std::fabs(e.point - 0.75) <= 0.02);
  }
}

TEST_CASE("packet loss agrees with exact enumeration on small networks") {
  const Topology t = diamond();
  for (int power : {0, 5, 10}) {
    for (int df : {0, 40, 100}) {
      const IotOption o = option(t, split_settings(t, power, df));
      const double exact = oracle::exact_loss(o);
      const smc::Estimate e = smc::estimate_probability({0.02, 0.01}, packet_loss_trial(o), 100 + power + df);
      CAPTURE(power);
      CAPTURE(df);
      CHECK(std::fabs(e.point - exact) <= 0.02);
    }
  }
  const IotOption fs = option(t, failsafe_settings(t));
  const smc::Estimate e = smc::estimate_probability({0.02, 0.01}, packet_loss_trial(fs), 77);
  CHECK(std::fabs(e.point - oracle::exact_loss(fs)) <= 0.02);
  CHECK(oracle::exact_loss(fs) < oracle::exact_loss(option(t, split_settings(t, 15, 40))));
}

TEST_CASE("deterministic cycle energy matches hand count") {
  const Topology t({{2, Traffic::Periodic, 1.0}, {3, Traffic::Periodic, 1.0}}, {{2, 1, 5.0, 0.0}, {3, 2, 5.0, 0.0}});
  const IotOption o = option(t, split_settings(t, 7, 100));
  const double expected = send_energy(10, 7) + send_energy(20, 7);
  for (Form form : {Form::Native, Form::Dsl}) {
    Rng rng(1);
    CHECK(energy_trial(o, form)(rng).value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(latency_trial(o, form)(rng).value == 0.0);
  }
  CHECK(reception_energy(o) == doctest::Approx(receive_energy(2)));
  CHECK(reception_energy(option(deltaiot15(), failsafe_settings(deltaiot15()))) == doctest::Approx(15.904));
}

TEST_CASE("backlog shows up as latency") {
  // five children send 50 packets to a mote that forwards at most 30 of them
  std::vector<Mote> motes{{2, Traffic::Periodic, 1.0}};
  std::vector<Link> links{{2, 1, 5.0, 0.0}};
  for (int id = 3; id <= 7; ++id) {
    motes.push_back({id, Traffic::Periodic, 1.0});
    links.push_back({id, 2, 5.0, 0.0});
  }
  const Topology t(motes, links);
  const IotOption o = option(t, split_settings(t, 0, 100));
  for (Form form : {Form::Native, Form::Dsl}) {
    Rng rng(3);
    // backlog 20, 30, 30, ... (queue capped at 60) against 60 generated per
    // cycle; the warm-up cycles absorb the first 20
    static_assert(kLatencyWarmup >= 1);
    CHECK(latency_trial(o, form)(rng).value == doctest::Approx(100.0 * 30 / 60));
  }
  Rng a(3), b(3);
  CHECK(latency_trial(o, Form::Native)(a).value == latency_trial(o, Form::Dsl)(b).value);
}

TEST_CASE("native and model forms have the same distribution") {
  const Topology& t = deltaiot15();
  const std::size_t n = 1000;
  const double critical = 1.95 * std::sqrt(2.0 / n);
  for (int df : {0, 40, 100}) {
    const IotOption o = option(t, min_power_settings(t, df));
    for (std::uint64_t seed : {11u, 12u}) {
      CAPTURE(df);
      CAPTURE(seed);
      const auto pl_n = smc::simulate_series(n, packet_loss_trial(o, Form::Native), seed);
      const auto pl_d = smc::simulate_series(n, packet_loss_trial(o, Form::Dsl), seed + 100);
      CHECK(oracle::ks_distance(pl_n, pl_d) <= critical);
      const auto en_n = smc::simulate_series(n, energy_trial(o, Form::Native), seed);
      const auto en_d = smc::simulate_series(n, energy_trial(o, Form::Dsl), seed + 100);
      CHECK(oracle::ks_distance(en_n, en_d) <= critical);
      const auto la_n = smc::simulate_series(n / 4, latency_trial(o, Form::Native), seed);
      const auto la_d = smc::simulate_series(n / 4, latency_trial(o, Form::Dsl), seed + 100);
      CHECK(oracle::ks_distance(la_n, la_d) <= 1.95 * std::sqrt(2.0 / (n / 4)));
    }
  }
}

TEST_CASE("zero traffic never loses packets") {
  const Topology t({{2, Traffic::EventDriven, 0.0}}, {{2, 1, -15.0, 0.0}});
  const IotOption o = option(t, split_settings(t, 0, 100));
  Rng rng(1);
  CHECK(packet_loss_trial(o)(rng).value == 0.0);
  CHECK(packet_loss_trial(o, Form::Dsl)(rng).value == 0.0);
}

TEST_CASE("model form rejects what it cannot express") {
  const Topology t = diamond();
  CHECK_THROWS_AS(packet_loss_trial(option(t, failsafe_settings(t)), Form::Dsl), std::invalid_argument);
  const Topology big({{16, Traffic::Periodic, 1.0}}, {{16, 1, 0.0, 0.0}});
  CHECK_THROWS_AS(energy_trial(option(big, split_settings(big, 0, 100)), Form::Dsl), std::invalid_argument);
  CHECK_NOTHROW(energy_trial(option(big, split_settings(big, 0, 100)), Form::Native));
}

TEST_CASE("registry") {
  IotRegistry r = default_registry();
  CHECK(r.names() == std::vector<std::string>{"packetLoss", "energy"});
  CHECK_THROWS_AS(r.add(energy_model()), RegistryError);
  CHECK_THROWS_AS(static_cast<void>(r.at("latency")), RegistryError);
  r.add(latency_model());
  CHECK(r.contains("latency"));
  CHECK_THROWS_AS(r.add(IotModel{"broken", EstimatorKind::Mean, {}, {}}), RegistryError);

  const Topology& t = deltaiot15();
  const IotOption o = option(t, min_power_settings(t, 40));
  const smc::Estimate e = verify_quality(r.at("energy"), o, {}, 4);
  CHECK(e.lo <= e.point);
  CHECK(e.point <= e.hi);
  CHECK(e.point > 15.904);
  CHECK(e.point < 15.904 + 3.0);
}

TEST_CASE("energy grows with transmission power") {
  const Topology& t = deltaiot15();
  double previous = 0.0;
  for (int p : {0, 5, 10, 15}) {
    const auto v = smc::simulate_series(200, energy_trial(option(t, split_settings(t, p, 40))), 21);
    double mean = 0.0;
    for (double x : v) mean += x / v.size();
    CHECK(mean > previous);
    previous = mean;
  }
}

TEST_CASE("predictions agree with the ground-truth simulator") {
  const Topology& t = deltaiot15();
  const NetworkSettings s = split_settings(t, 5, 40);
  const IotOption o = option(t, s);
  Simulator sim(t, Scenario{}, 8, s);
  long delivered = 0, dropped = 0;
  double energy = 0.0;
  const int cycles = 300;
  for (int c = 0; c < cycles; ++c) {
    const CycleStats st = sim.run_cycle();
    delivered += st.delivered;
    dropped += st.dropped_link + st.dropped_overflow;
    energy += st.energy / cycles;
  }
  const double truth = static_cast<double>(dropped) / static_cast<double>(delivered + dropped);
  CHECK(truth > 0.05);  // the fixture must actually be lossy

  const smc::ProbQuery pq;
  const smc::Estimate pl = verify_quality(packet_loss_model(), o, {pq, {}}, 31);
  CHECK(std::fabs(pl.point - truth) <= 2 * pq.epsilon);

  const smc::MeanQuery mq;
  const smc::Estimate en = verify_quality(energy_model(), o, {{}, mq}, 31);
  CHECK(std::fabs(en.point - energy) <= 2 * mq.rsem * en.point);
}

TEST_CASE("default energy fixture needs about thirty runs") {
  const Topology& t = deltaiot15();
  const smc::Trial trial = energy_trial(option(t, min_power_settings(t, 40)));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const smc::Estimate e = smc::estimate_mean({}, trial, seed);
    CHECK(e.runs >= 15);
    CHECK(e.runs <= 45);
    CHECK(e.hi - e.point <= 0.05 * e.point);
  }
}

TEST_CASE("energy estimates react to a single power step") {
  const Topology& t = deltaiot15();
  NetworkSettings s = min_power_settings(t, 40);
  const int link = t.link_index(3, 1);  // periodic mote, SNR >= 0 at any power
  const IotOption lo = option(t, s);
  s.power[static_cast<std::size_t>(link)] += 1;
  const IotOption hi = option(t, s);
  CHECK(verify_quality(energy_model(), hi, {}, 5).point > verify_quality(energy_model(), lo, {}, 5).point);
}

TEST_CASE("zero traffic leaves only reception energy") {
  const Topology& t = deltaiot15();
  IotOption o = option(t, min_power_settings(t, 40));
  std::fill(o.env.load.begin(), o.env.load.end(), 0.0);
  const smc::Estimate e = verify_quality(energy_model(), o, {{}, {0.05, 10, 50}}, 2);
  CHECK(e.point == receive_energy_per_cycle());
  CHECK_FALSE(e.rsem_met);
}
