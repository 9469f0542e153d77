#pragma once

#include <optional>

#include "ipower/trajectory.hpp"

namespace ipower {

/// Knobs of the importance-weighted estimator. `reward_shift` (beta) makes
/// effective rewards nonnegative for the pure lower-bound path;
/// `control_variate` (b) is subtracted through b * (w - 1), unbiased because
/// importance weights have unit expectation. `cv_fraction` scales the
/// variance-optimal control variate when the optimizer recomputes it.
struct EstimatorConfig {
  std::optional<double> weight_cap;
  double reward_shift = 0.0;
  double control_variate = 0.0;
  double cv_fraction = 0.0;
};

void validate(const EstimatorConfig& config);

/// Importance-weighted estimate of the expected return:
///   (1/N) sum_i w_i * (R_i + beta - b) + b - beta
/// with w_i the (capped) importance weight at eval_params. With beta = b = 0
/// this is the plain importance-sampling estimator.
double j_hat(const PolicyFamily& policy, const LoggedBatch& batch, const PolicyParams& eval_params,
             const EstimatorConfig& config);

struct ControlVariateEstimate {
  double value = 0.0;
  bool degenerate = false;  // weight variance was zero; value forced to 0
};

/// Variance-minimizing constant for the estimator above:
///   b* = SampleCov(w_i * (R_i + beta), w_i) / SampleVar(w_i)
/// with n-1 normalization. Weights are the capped ones, since those enter
/// the estimator.
ControlVariateEstimate optimal_control_variate(const PolicyFamily& policy, const LoggedBatch& batch,
                                               const PolicyParams& eval_params,
                                               std::optional<double> weight_cap,
                                               double reward_shift = 0.0);

/// Smallest nonnegative shift making every effective reward R_i - b
/// nonnegative: beta = max(0, -min_i(R_i - b)).
double shift_for_positivity(const LoggedBatch& batch, double current_b);

}  // namespace ipower
