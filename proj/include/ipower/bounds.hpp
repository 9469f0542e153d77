#pragma once

#include <vector>

#include "ipower/estimator.hpp"

namespace ipower {

/// Branch rule of a surrogate. The lower-only rule applies the logarithmic
/// lower bound to every rollout and requires nonnegative effective rewards;
/// the mixed rule switches to the exponential upper-bound factor on rollouts
/// whose effective reward is negative, which keeps the whole surrogate a
/// concave lower bound without any sign constraint.
enum class BranchRule { kLowerOnly, kMixed };

struct SurrogateSpec {
  PolicyParams anchor;  // nu, the tangency point
  EstimatorConfig estimator;
  BranchRule branch_rule = BranchRule::kMixed;
};

struct SurrogateEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// A concave surrogate of the importance-weighted estimator, anchored at nu.
/// Construction precomputes per-rollout anchor quantities (anchor weight,
/// anchor log-probability, anchor score); eval() then yields value, gradient
/// and Hessian at any theta. Evaluation is a pure map over rollouts reduced
/// in fixed pairwise order.
class Surrogate {
 public:
  Surrogate(const PolicyFamily& policy, const LoggedBatch& batch, SurrogateSpec spec);

  /// Low-level constructor used by the constrained optimizer: per-rollout
  /// payload rewards (already shifted / control-variated / scaled) with an
  /// explicit branch choice per rollout.
  Surrogate(const PolicyFamily& policy, const LoggedBatch& batch, PolicyParams anchor,
            std::optional<double> weight_cap, std::vector<double> payload_rewards,
            double constant_term, std::vector<bool> use_exp_branch);

  SurrogateEval eval(const PolicyParams& theta) const;

  const PolicyParams& anchor() const { return anchor_; }
  std::span<const double> anchor_weights() const { return anchor_weight_; }
  std::span<const double> payload_rewards() const { return payload_; }

 private:
  void precompute_anchor();

  const PolicyFamily* policy_;
  const LoggedBatch* batch_;
  PolicyParams anchor_;
  std::optional<double> weight_cap_;
  std::vector<double> payload_;          // per-rollout effective reward
  double constant_term_ = 0.0;           // b - beta, added back outside the sum
  std::vector<bool> use_exp_;            // per-rollout branch
  std::vector<double> anchor_log_prob_;  // log p(tau | nu)
  std::vector<double> anchor_weight_;    // capped p(tau | nu) / p(tau | theta_0)
  std::vector<Vector> anchor_grad_;      // d log p(tau | theta) / d theta at nu
};

/// Logarithmic lower bound (per-rollout form of the PoWER-style bound with a
/// free anchor). Requires nonnegative effective rewards.
SurrogateEval lower_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const SurrogateSpec& spec, const PolicyParams& theta);

/// Mixed bound: logarithmic branch on nonnegative effective rewards,
/// exponential upper-bound branch on negative ones.
SurrogateEval mixed_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const SurrogateSpec& spec, const PolicyParams& theta);

/// The classic bound anchored at the logging parameters, where every anchor
/// weight is 1. Identical to lower_bound_eval with anchor = theta_0.
SurrogateEval power_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const EstimatorConfig& config, const PolicyParams& theta);

/// u_nu(tau | theta) / p(tau | nu) = exp[(theta - nu)^T g_i] with g_i the
/// score at the anchor. Dominates the probability ratio pointwise.
double upper_bound_factor(const PolicyFamily& policy, const LoggedBatch& batch,
                          const PolicyParams& anchor, std::size_t index,
                          const PolicyParams& theta);

/// Monte-Carlo gap between the beta-shifted and unshifted lower bounds:
///   beta * [(1/N) sum_i w_i^nu (1 + log p(tau_i|theta) - log p(tau_i|nu)) - 1].
/// Estimates -beta * KL(p(.|nu) || p(.|theta)).
double shift_gap(const PolicyFamily& policy, const LoggedBatch& batch, const PolicyParams& anchor,
                 double beta, const PolicyParams& theta, std::optional<double> weight_cap);

// Overflow guard for the exponential branch; exceeding it raises
// ExponentOverflowError rather than silently truncating the bound.
inline constexpr double kExpBranchOverflowLimit = 700.0;

}  // namespace ipower
