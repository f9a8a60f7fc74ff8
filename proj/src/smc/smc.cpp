#include "selfadapt/smc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace selfadapt::smc {

namespace {

constexpr std::uint64_t kBatch = 5;

void check_prob_query(const ProbQuery& q) {
  if (!(q.epsilon > 0.0 && q.epsilon < 1.0)) throw QueryError("epsilon must lie in (0,1)");
  if (!(q.alpha > 0.0 && q.alpha < 1.0)) throw QueryError("alpha must lie in (0,1)");
}

void check_mean_query(const MeanQuery& q) {
  if (!(q.rsem > 0.0 && q.rsem < 1.0)) throw QueryError("rsem must lie in (0,1)");
  if (q.min_runs < 2) throw QueryError("min_runs must be at least 2");
  if (q.max_runs < q.min_runs) throw QueryError("max_runs must be at least min_runs");
}

Sample run_one(const Trial& trial, std::uint64_t seed, std::uint64_t index) {
  Rng rng = Rng(seed).split(index);
  const Sample s = trial(rng);
  if (!std::isfinite(s.value)) throw std::domain_error("non-finite reward in run " + std::to_string(index));
  return s;
}

struct MeanStats {
  double mean = 0.0;
  double sd = 0.0;
};

MeanStats stats(const std::vector<double>& v) {
  MeanStats m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (const double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

}  // namespace

double chernoff_bound(double epsilon, double alpha) {
  check_prob_query(ProbQuery{epsilon, alpha});
  return std::log(2.0 / alpha) / (2.0 * epsilon * epsilon);
}

std::uint64_t required_samples(double epsilon, double alpha) {
  // Guard against ceil() lifting an exact integer by one ulp of rounding.
  const double b = chernoff_bound(epsilon, alpha);
  const double r = std::round(b);
  const double n = std::fabs(b - r) <= 1e-9 * b ? r : std::ceil(b);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

double hoeffding_half_width(std::uint64_t n, double alpha) {
  if (n == 0) return 1.0;
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

void Tally::add(std::uint64_t index, const Sample& s) { runs_.emplace_back(index, s); }

void Tally::merge(const Tally& other) { runs_.insert(runs_.end(), other.runs_.begin(), other.runs_.end()); }

std::uint64_t Tally::ticks() const {
  std::uint64_t t = 0;
  for (const auto& r : runs_) t += r.second.ticks;
  return t;
}

std::vector<double> Tally::values() const {
  auto sorted = runs_;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> v;
  v.reserve(sorted.size());
  for (const auto& r : sorted) v.push_back(r.second.value);
  return v;
}

Estimate Tally::probability(const ProbQuery& q, bool complete) const {
  Estimate e;
  e.runs = count();
  e.ticks = ticks();
  e.partial = !complete;
  std::uint64_t hits = 0;
  for (const auto& r : runs_) hits += r.second.value != 0.0 ? 1 : 0;
  if (e.runs == 0) {
    e.lo = 0.0;
    e.hi = 1.0;
    return e;
  }
  e.point = static_cast<double>(hits) / static_cast<double>(e.runs);
  const double w = complete ? q.epsilon : std::max(q.epsilon, hoeffding_half_width(e.runs, q.alpha));
  e.lo = std::max(0.0, e.point - w);
  e.hi = std::min(1.0, e.point + w);
  return e;
}

Estimate Tally::mean(const MeanQuery& q) const {
  Estimate e;
  e.runs = count();
  e.ticks = ticks();
  const std::vector<double> v = values();
  const MeanStats m = stats(v);
  e.point = m.mean;
  if (v.size() < 2) {
    e.lo = -std::numeric_limits<double>::infinity();
    e.hi = std::numeric_limits<double>::infinity();
    e.rsem_met = false;
    return e;
  }
  const double se = m.sd / std::sqrt(static_cast<double>(v.size()));
  e.lo = m.mean - se;
  e.hi = m.mean + se;
  e.rsem_met = rsem(v) <= q.rsem;
  return e;
}

double rsem(const std::vector<double>& values) {
  const MeanStats m = stats(values);
  if (values.size() < 2 || m.mean == 0.0) return std::numeric_limits<double>::infinity();
  return m.sd / std::sqrt(static_cast<double>(values.size())) / std::fabs(m.mean);
}

Estimate estimate_probability(const ProbQuery& q, const Trial& trial, std::uint64_t seed, Budget* budget) {
  check_prob_query(q);
  const std::uint64_t n = required_samples(q.epsilon, q.alpha);
  Tally tally;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (budget != nullptr && budget->exhausted()) return tally.probability(q, false);
    const Sample s = run_one(trial, seed, i);
    if (budget != nullptr) budget->charge(s.ticks);
    tally.add(i, s);
  }
  return tally.probability(q, true);
}

Estimate estimate_mean(const MeanQuery& q, const Trial& trial, std::uint64_t seed, Budget* budget) {
  check_mean_query(q);
  Tally tally;
  std::uint64_t next_check = q.min_runs;
  for (std::uint64_t i = 0; i < q.max_runs; ++i) {
    if (budget != nullptr && budget->exhausted()) {
      Estimate e = tally.mean(q);
      e.partial = true;
      e.rsem_met = false;
      return e;
    }
    const Sample s = run_one(trial, seed, i);
    if (budget != nullptr) budget->charge(s.ticks);
    tally.add(i, s);
    if (i + 1 == next_check) {
      if (rsem(tally.values()) <= q.rsem) return tally.mean(q);
      next_check += kBatch;
    }
  }
  return tally.mean(q);
}

std::vector<double> simulate_series(std::uint64_t n, const Trial& trial, std::uint64_t seed) {
  if (n < 1) throw QueryError("series needs at least one run");
  std::vector<double> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(run_one(trial, seed, i).value);
  return out;
}

Trial model_trial(const engine::AutomatonNetwork& net, engine::NetState start, std::uint64_t horizon,
                  engine::StopPredicate stop, std::function<double(const engine::NetState&)> score) {
  return [&net, start = std::move(start), horizon, stop = std::move(stop), score = std::move(score)](Rng& rng) {
    const engine::NetState end = engine::run(net, start, horizon, stop, rng);
    return Sample{score(end), end.steps - start.steps};
  };
}

}  // namespace selfadapt::smc
