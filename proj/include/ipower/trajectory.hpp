#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ipower/policy.hpp"

namespace ipower {

/// One trajectory gathered under the logging policy. `log_prob_logging` is
/// the policy-dependent part of log p(tau | theta_0); `aux_signal` is an
/// optional per-rollout quantity used by constrained optimization.
struct Rollout {
  std::vector<StepObservation> steps;
  double reward = 0.0;
  double log_prob_logging = 0.0;
  std::optional<double> aux_signal;
};

/// A set of rollouts gathered under a single logging parameter vector. The
/// unit of optimization. Immutable after construction; construction verifies
/// the stored logging log-probabilities against the steps.
class LoggedBatch {
 public:
  LoggedBatch(const PolicyFamily& policy, std::vector<Rollout> rollouts,
              PolicyParams logging_params, double verify_tolerance = 1e-9);

  std::size_t size() const { return rollouts_.size(); }
  const Rollout& rollout(std::size_t index) const { return rollouts_.at(index); }
  std::span<const Rollout> rollouts() const { return rollouts_; }
  const PolicyParams& logging_params() const { return logging_params_; }

  bool all_have_aux_signal() const;

 private:
  std::vector<Rollout> rollouts_;
  PolicyParams logging_params_;
};

/// Importance weight p(tau_i | eval) / p(tau_i | theta_0), capped from above
/// when a cap is given. Throws NonFiniteWeightError if the uncapped ratio
/// would overflow.
double importance_weight(const PolicyFamily& policy, const LoggedBatch& batch, std::size_t index,
                         const PolicyParams& eval_params, std::optional<double> cap);

std::vector<double> importance_weights(const PolicyFamily& policy, const LoggedBatch& batch,
                                       const PolicyParams& eval_params, std::optional<double> cap);

/// (sum w)^2 / sum w^2, in [1, N]. A diagnostic for weight degeneracy.
double effective_sample_size(std::span<const double> weights);

}  // namespace ipower
