#pragma once

// Closed-form expectations used as test oracles. Written from the model
// description, not from the library code.

#include <algorithm>
#include <cmath>
#include <vector>

#include "selfadapt/healthsvc/health.hpp"
#include "selfadapt/qmodels/deltaiot_models.hpp"

namespace oracle {

using selfadapt::healthsvc::ServiceCatalog;
using selfadapt::healthsvc::ServiceCombination;
using selfadapt::healthsvc::WorkflowParams;
using selfadapt::qmodels::IotOption;
namespace net = selfadapt::deltaiot;

struct Rates {
  double m, d, a;
};

inline Rates pick(const ServiceCatalog& c, const ServiceCombination& k, double selfadapt::healthsvc::Provider::*f) {
  return {c.services[0][k.provider[0]].*f, c.services[1][k.provider[1]].*f, c.services[2][k.provider[2]].*f};
}

// Independent failures: the run succeeds only if every invoked service does.
inline double failure(const ServiceCatalog& c, const WorkflowParams& p, const ServiceCombination& k) {
  const Rates f = pick(c, k, &selfadapt::healthsvc::Provider::failure_rate);
  const double e = p.p_emergency / 100.0, an = p.p_analysis / 100.0;
  const double ch = p.p_change_medication / 100.0, in = p.p_indirect_emergency / 100.0;
  return e * f.a + an * (1.0 - (1.0 - f.m) * (ch * (1.0 - f.d) + in * (1.0 - f.a)));
}

inline double expected_sum(const ServiceCatalog& c, const WorkflowParams& p, const ServiceCombination& k,
                           double selfadapt::healthsvc::Provider::*field) {
  const Rates v = pick(c, k, field);
  const double e = p.p_emergency / 100.0, an = p.p_analysis / 100.0;
  const double ch = p.p_change_medication / 100.0, in = p.p_indirect_emergency / 100.0;
  return e * v.a + an * (v.m + ch * v.d + in * v.a);
}

inline double cost(const ServiceCatalog& c, const WorkflowParams& p, const ServiceCombination& k) {
  return expected_sum(c, p, k, &selfadapt::healthsvc::Provider::cost);
}

inline double response_time(const ServiceCatalog& c, const WorkflowParams& p, const ServiceCombination& k) {
  return expected_sum(c, p, k, &selfadapt::healthsvc::Provider::response_time);
}

// Exact loss probability by recursion over the routing DAG.
inline double exact_loss_from(const IotOption& o, int id) {
  if (id == net::kGatewayId) return 0.0;
  const net::Topology& t = *o.topology;
  const auto& parents = t.parent_links(id);
  int sum = 0;
  for (int l : parents) sum += o.settings.distribution[static_cast<std::size_t>(l)];
  double loss = sum > 100 ? 1.0 : 0.0;
  for (int l : parents) {
    const double f = net::link_failure_probability(o.env.snr(l, o.settings.power[static_cast<std::size_t>(l)]));
    const double here = f + (1.0 - f) * exact_loss_from(o, t.links()[static_cast<std::size_t>(l)].dest);
    const double df = o.settings.distribution[static_cast<std::size_t>(l)] / 100.0;
    if (sum > 100) {
      if (df > 0) loss *= here;
    } else {
      loss += df * here;
    }
  }
  return loss;
}

inline double exact_loss(const IotOption& o) {
  double total = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < o.topology->motes().size(); ++i) {
    total += o.env.load[i];
    acc += o.env.load[i] * exact_loss_from(o, o.topology->motes()[i].id);
  }
  return total > 0 ? acc / total : 0.0;
}

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> points = a;
  points.insert(points.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : points) {
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

}  // namespace oracle
