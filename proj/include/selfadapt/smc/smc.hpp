#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "selfadapt/engine/interpreter.hpp"
#include "selfadapt/rng.hpp"

namespace selfadapt::smc {

class QueryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Result of one simulation run. For probability queries `value` is 0 or 1.
struct Sample {
  double value = 0.0;
  std::uint64_t ticks = 0;
};

/// One independent simulation. Must draw randomness only from `rng`.
using Trial = std::function<Sample(Rng& rng)>;

struct ProbQuery {
  double epsilon = 0.05;
  double alpha = 0.05;
};

struct MeanQuery {
  double rsem = 0.05;
  std::uint64_t min_runs = 10;
  std::uint64_t max_runs = 1000;
};

struct Estimate {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t runs = 0;
  std::uint64_t ticks = 0;
  bool partial = false;  // stopped early by a budget or stop signal
  bool rsem_met = true;  // mean queries: stopping rule satisfied
};

/// Shared simulated-time allowance. Runs already started always finish; a
/// query checks the budget before each run. Thread-safe.
class Budget {
 public:
  explicit Budget(std::uint64_t ticks = std::numeric_limits<std::uint64_t>::max()) : limit_(ticks) {}

  [[nodiscard]] bool exhausted() const {
    return stop_.load(std::memory_order_relaxed) || used_.load(std::memory_order_relaxed) >= limit_;
  }
  void charge(std::uint64_t ticks) { used_.fetch_add(ticks, std::memory_order_relaxed); }
  void request_stop() { stop_.store(true, std::memory_order_relaxed); }
  [[nodiscard]] std::uint64_t used() const { return used_.load(std::memory_order_relaxed); }
  [[nodiscard]] std::uint64_t limit() const { return limit_; }

 private:
  std::uint64_t limit_;
  std::atomic<std::uint64_t> used_{0};
  std::atomic<bool> stop_{false};
};

/// Unrounded Chernoff-Hoeffding bound ln(2/alpha) / (2 epsilon^2).
double chernoff_bound(double epsilon, double alpha);

/// N = ceil(chernoff_bound(epsilon, alpha)).
std::uint64_t required_samples(double epsilon, double alpha);

/// Half-width guaranteed by the same bound after n runs.
double hoeffding_half_width(std::uint64_t n, double alpha);

/// Runs required_samples(eps, alpha) trials (fewer if `budget` runs out).
/// Run i uses Rng(seed).split(i).
Estimate estimate_probability(const ProbQuery& q, const Trial& trial, std::uint64_t seed,
                              Budget* budget = nullptr);

/// Batches of five after the first `min_runs`, stopping once the relative
/// standard error of the mean is at most q.rsem or at max_runs.
Estimate estimate_mean(const MeanQuery& q, const Trial& trial, std::uint64_t seed, Budget* budget = nullptr);

/// n run values in run-index order.
std::vector<double> simulate_series(std::uint64_t n, const Trial& trial, std::uint64_t seed);

/// Per-run results tagged with their run index. Merging is order-independent:
/// results are folded in index order whatever order they arrive in.
class Tally {
 public:
  void add(std::uint64_t index, const Sample& s);
  void merge(const Tally& other);

  [[nodiscard]] std::uint64_t count() const { return runs_.size(); }
  [[nodiscard]] std::uint64_t ticks() const;
  [[nodiscard]] std::vector<double> values() const;

  /// Probability estimate for the given epsilon/alpha; `complete` marks
  /// whether all required runs happened.
  [[nodiscard]] Estimate probability(const ProbQuery& q, bool complete) const;
  [[nodiscard]] Estimate mean(const MeanQuery& q) const;

 private:
  std::vector<std::pair<std::uint64_t, Sample>> runs_;
};

double rsem(const std::vector<double>& values);

/// Trial over a DSL model: run from `start` until `stop` or `horizon`, then
/// score the final state.
Trial model_trial(const engine::AutomatonNetwork& net, engine::NetState start, std::uint64_t horizon,
                  engine::StopPredicate stop, std::function<double(const engine::NetState&)> score);

}  // namespace selfadapt::smc
