/**
 * @file eval.hpp
 * @brief Empirical and expected regret of a predictor over a dataset.
 *
 * Normalised regret (in %) = 100 · Σ regret_i / (Σ |c_i^T x*(c_i)| + 1e-12).
 */
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/oracles.hpp"

namespace dfl {

inline constexpr double kNormalizationGuard = 1e-12;

struct RegretReport {
  std::vector<double> regrets;  // per sample, c_i^T(x*(ĉ_i) − x*(c_i))
  double sum_regret = 0.0;
  double sum_abs_optimal = 0.0;
  double normalized_regret_pct = 0.0;
  bool denominator_zero = false;
  std::optional<double> expected_normalized_regret_pct;
  std::string split;
  std::string model_id;
};

inline double normalized_pct(double sum_regret, double sum_abs_optimal) {
  return 100.0 * sum_regret / (sum_abs_optimal + kNormalizationGuard);
}

/**
 * Regret evaluator with the per-sample optimal objectives cached, so repeated
 * evaluations (one per epoch) cost one solve per sample.
 */
class RegretEvaluator {
 public:
  RegretEvaluator(const Dataset& ds, const Oracle& oracle) : ds_(&ds), oracle_(&oracle) {
    require_same_size(ds.meta.n, oracle.n(), "dataset vs instance");
    optimal_.reserve(ds.size());
    for (const auto& s : ds.samples) optimal_.push_back(dot(s.c, oracle.solve(s.c)));
  }

  /// predict(i, sample) -> CostVector
  template <class PredictFn>
  RegretReport evaluate(PredictFn&& predict) const {
    RegretReport rep;
    rep.regrets.reserve(ds_->size());
    for (std::size_t i = 0; i < ds_->size(); ++i) {
      const Sample& s = ds_->samples[i];
      const CostVector chat = predict(i, s);
      const double r = dot(s.c, oracle_->solve(chat)) - optimal_[i];
      rep.regrets.push_back(r);
      rep.sum_regret += r;
      rep.sum_abs_optimal += std::abs(optimal_[i]);
    }
    rep.denominator_zero = rep.sum_abs_optimal == 0.0;
    rep.normalized_regret_pct = normalized_pct(rep.sum_regret, rep.sum_abs_optimal);
    rep.split = ds_->meta.split;
    return rep;
  }

 private:
  const Dataset* ds_;
  const Oracle* oracle_;
  std::vector<double> optimal_;
};

template <class PredictFn>
RegretReport eval_regret(PredictFn&& predict, const Dataset& ds, const Oracle& oracle) {
  return RegretEvaluator(ds, oracle).evaluate(std::forward<PredictFn>(predict));
}

/// Expected regret against the stored clean costs E[c|z], normalised with
/// the clean optima. Throws if the dataset has no clean costs.
template <class PredictFn>
double eval_expected_regret(PredictFn&& predict, const Dataset& ds, const Oracle& oracle) {
  if (!ds.has_clean()) throw std::invalid_argument("dataset has no clean costs");
  require_same_size(ds.meta.n, oracle.n(), "dataset vs instance");
  double sum_regret = 0.0, sum_abs = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.samples[i];
    const CostVector& mean = *s.c_clean;
    const double opt = dot(mean, oracle.solve(mean));
    sum_regret += dot(mean, oracle.solve(predict(i, s))) - opt;
    sum_abs += std::abs(opt);
  }
  return normalized_pct(sum_regret, sum_abs);
}

}  // namespace dfl
