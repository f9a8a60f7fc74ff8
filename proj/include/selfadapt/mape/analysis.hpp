#pragma once

#include <string_view>
#include <vector>

#include "selfadapt/mape/goals.hpp"
#include "selfadapt/qmodels/registry.hpp"

namespace selfadapt::mape {

struct AnalysisResult {
  std::vector<Results> results;  // one entry per option, possibly incomplete
  std::size_t verified = 0;      // options with every quality estimated
  bool partial = false;          // the budget ran out
  std::uint64_t ticks = 0;
};

/// Seed for one quality. Every option shares it, so options are compared
/// under common random numbers.
inline std::uint64_t quality_seed(std::uint64_t seed, std::string_view quality) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : quality) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return Rng(seed).split(h).next();
}

/// Verifies every registered quality for every option, in option order.
/// Stops when the budget is exhausted; estimates cut short are kept and
/// flagged partial.
template <typename Option>
AnalysisResult analyze(const qmodels::ModelRegistry<Option>& registry, const std::vector<Option>& options,
                       const qmodels::VerificationParams& params, std::uint64_t seed, smc::Budget& budget) {
  AnalysisResult out;
  out.results.resize(options.size());
  const auto& models = registry.models();
  std::vector<std::uint64_t> seeds;
  for (const auto& m : models) seeds.push_back(quality_seed(seed, m.name));
  const std::uint64_t start = budget.used();
  for (std::size_t i = 0; i < options.size() && !out.partial; ++i) {
    std::size_t done = 0;
    for (std::size_t q = 0; q < models.size(); ++q) {
      if (budget.exhausted()) {
        out.partial = true;
        break;
      }
      const smc::Estimate e = qmodels::verify_quality(models[q], options[i], params, seeds[q], &budget);
      if (e.runs == 0) {
        out.partial = true;
        break;
      }
      out.results[i][models[q].name] = e;
      if (e.partial) {
        out.partial = true;
      } else {
        ++done;
      }
    }
    if (done == models.size()) ++out.verified;
  }
  out.ticks = budget.used() - start;
  return out;
}

}  // namespace selfadapt::mape
