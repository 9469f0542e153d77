#include "ipower/estimator.hpp"

#include <algorithm>
#include <cmath>

namespace ipower {

void validate(const EstimatorConfig& config) {
  if (config.weight_cap && !(*config.weight_cap > 0.0))
    throw Error("EstimatorConfig: weight_cap must be positive");
  if (!(config.cv_fraction >= 0.0 && config.cv_fraction <= 1.0))
    throw Error("EstimatorConfig: cv_fraction must lie in [0, 1]");
  if (!std::isfinite(config.reward_shift) || !std::isfinite(config.control_variate))
    throw Error("EstimatorConfig: shift and control variate must be finite");
}

double j_hat(const PolicyFamily& policy, const LoggedBatch& batch, const PolicyParams& eval_params,
             const EstimatorConfig& config) {
  validate(config);
  const double n = static_cast<double>(batch.size());
  const double offset = config.reward_shift - config.control_variate;
  std::vector<double> terms(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double w = importance_weight(policy, batch, i, eval_params, config.weight_cap);
    terms[i] = w * (batch.rollout(i).reward + offset) / n;
  }
  return pairwise_reduce(std::move(terms)) + config.control_variate - config.reward_shift;
}

ControlVariateEstimate optimal_control_variate(const PolicyFamily& policy, const LoggedBatch& batch,
                                               const PolicyParams& eval_params,
                                               std::optional<double> weight_cap,
                                               double reward_shift) {
  const std::size_t n = batch.size();
  if (n < 2) return {0.0, true};
  std::vector<double> w = importance_weights(policy, batch, eval_params, weight_cap);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[i] * (batch.rollout(i).reward + reward_shift);

  const double mean_w = pairwise_sum(w) / static_cast<double>(n);
  const double mean_x = pairwise_sum(x) / static_cast<double>(n);
  std::vector<double> cov_terms(n);
  std::vector<double> var_terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    cov_terms[i] = (x[i] - mean_x) * (w[i] - mean_w);
    var_terms[i] = (w[i] - mean_w) * (w[i] - mean_w);
  }
  // n-1 normalization; it cancels in the ratio but is fixed for determinism
  const double denom = static_cast<double>(n - 1);
  const double cov = pairwise_reduce(std::move(cov_terms)) / denom;
  const double var = pairwise_reduce(std::move(var_terms)) / denom;
  if (var <= 0.0) return {0.0, true};
  const double value = cov / var;
  if (!std::isfinite(value)) return {0.0, true};
  return {value, false};
}

double shift_for_positivity(const LoggedBatch& batch, double current_b) {
  double min_effective = batch.rollout(0).reward - current_b;
  for (std::size_t i = 1; i < batch.size(); ++i)
    min_effective = std::min(min_effective, batch.rollout(i).reward - current_b);
  return std::max(0.0, -min_effective);
}

}  // namespace ipower
