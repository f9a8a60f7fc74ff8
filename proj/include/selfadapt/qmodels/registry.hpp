#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/smc/smc.hpp"

namespace selfadapt::qmodels {

enum class EstimatorKind { Probability, Mean };

/// A quality model builds one simulation trial per adaptation option.
template <typename Option>
struct QualityModel {
  std::string name;
  EstimatorKind kind = EstimatorKind::Probability;
  std::function<smc::Trial(const Option&)> build;
  /// Added to every mean estimate (deterministic part of the quality).
  std::function<double(const Option&)> offset;
};

class RegistryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Quality models keyed by name, in registration order.
template <typename Option>
class ModelRegistry {
 public:
  void add(QualityModel<Option> model) {
    if (contains(model.name)) throw RegistryError("quality '" + model.name + "' is already registered");
    if (!model.build) throw RegistryError("quality '" + model.name + "' has no builder");
    models_.push_back(std::move(model));
  }

  [[nodiscard]] bool contains(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name == name) return true;
    }
    return false;
  }

  [[nodiscard]] const QualityModel<Option>& at(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name == name) return m;
    }
    throw RegistryError("unknown quality '" + name + "'");
  }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& m : models_) out.push_back(m.name);
    return out;
  }

  [[nodiscard]] const std::vector<QualityModel<Option>>& models() const { return models_; }

 private:
  std::vector<QualityModel<Option>> models_;
};

/// Settings used to verify one quality.
struct VerificationParams {
  smc::ProbQuery prob;
  smc::MeanQuery mean;
};

/// Runs the estimator that belongs to the model's kind.
template <typename Option>
smc::Estimate verify_quality(const QualityModel<Option>& model, const Option& option, const VerificationParams& params,
                             std::uint64_t seed, smc::Budget* budget = nullptr) {
  const smc::Trial trial = model.build(option);
  if (model.kind == EstimatorKind::Probability) return smc::estimate_probability(params.prob, trial, seed, budget);
  smc::Estimate e = smc::estimate_mean(params.mean, trial, seed, budget);
  if (model.offset) {
    const double c = model.offset(option);
    e.point += c;
    e.lo += c;
    e.hi += c;
  }
  return e;
}

}  // namespace selfadapt::qmodels
