#include "ipower/bounds.hpp"

#include <cmath>
#include <utility>

namespace ipower {

Surrogate::Surrogate(const PolicyFamily& policy, const LoggedBatch& batch, SurrogateSpec spec)
    : policy_(&policy),
      batch_(&batch),
      anchor_(std::move(spec.anchor)),
      weight_cap_(spec.estimator.weight_cap) {
  validate(spec.estimator);
  if (anchor_.dim() != policy.dim())
    throw DimensionMismatchError("Surrogate: anchor dimension mismatch");

  const double beta = spec.estimator.reward_shift;
  const double b = spec.estimator.control_variate;
  constant_term_ = b - beta;
  payload_.resize(batch.size());
  use_exp_.assign(batch.size(), false);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    payload_[i] = batch.rollout(i).reward + beta - b;
    if (payload_[i] < 0.0) {
      if (spec.branch_rule == BranchRule::kLowerOnly)
        throw NegativeEffectiveRewardError(
            i, "lower-only surrogate requires nonnegative effective rewards; rollout " +
                   std::to_string(i) + " has " + std::to_string(payload_[i]));
      use_exp_[i] = true;
    }
  }
  precompute_anchor();
}

Surrogate::Surrogate(const PolicyFamily& policy, const LoggedBatch& batch, PolicyParams anchor,
                     std::optional<double> weight_cap, std::vector<double> payload_rewards,
                     double constant_term, std::vector<bool> use_exp_branch)
    : policy_(&policy),
      batch_(&batch),
      anchor_(std::move(anchor)),
      weight_cap_(weight_cap),
      payload_(std::move(payload_rewards)),
      constant_term_(constant_term),
      use_exp_(std::move(use_exp_branch)) {
  if (payload_.size() != batch.size() || use_exp_.size() != batch.size())
    throw Error("Surrogate: payload/branch size must match batch size");
  if (anchor_.dim() != policy.dim())
    throw DimensionMismatchError("Surrogate: anchor dimension mismatch");
  precompute_anchor();
}

void Surrogate::precompute_anchor() {
  const std::size_t n = batch_->size();
  anchor_log_prob_.resize(n);
  anchor_weight_.resize(n);
  anchor_grad_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rollout& r = batch_->rollout(i);
    anchor_log_prob_[i] = policy_->log_prob_rollout(anchor_, r.steps);
    anchor_weight_[i] = importance_weight(*policy_, *batch_, i, anchor_, weight_cap_);
    anchor_grad_[i] = policy_->grad_log_prob_rollout(anchor_, r.steps);
  }
}

SurrogateEval Surrogate::eval(const PolicyParams& theta) const {
  if (theta.dim() != policy_->dim())
    throw DimensionMismatchError("Surrogate::eval: theta dimension mismatch");
  const std::size_t n = batch_->size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> values(n);
  std::vector<Vector> grads(n);
  std::vector<Matrix> hessians(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = payload_[i] * anchor_weight_[i] * inv_n;
    if (!use_exp_[i]) {
      const LogProbDerivatives d = policy_->log_prob_derivatives(theta, batch_->rollout(i).steps);
      values[i] = scale * (1.0 + d.value - anchor_log_prob_[i]);
      grads[i] = scale * d.gradient;
      hessians[i] = scale * d.hessian;
    } else {
      const double exponent = (theta.theta - anchor_.theta).dot(anchor_grad_[i]);
      if (exponent > kExpBranchOverflowLimit)
        throw ExponentOverflowError(i, exponent,
                                    "exp-branch exponent overflow at rollout " +
                                        std::to_string(i) + ": " + std::to_string(exponent));
      const double z = std::exp(exponent);
      values[i] = scale * z;
      grads[i] = (scale * z) * anchor_grad_[i];
      // rank-one term: convex in theta, concave once scaled by the negative payload
      hessians[i] = (scale * z) * (anchor_grad_[i] * anchor_grad_[i].transpose());
    }
  }

  SurrogateEval out;
  out.value = pairwise_reduce(std::move(values)) + constant_term_;
  out.gradient = pairwise_reduce(std::move(grads));
  out.hessian = pairwise_reduce(std::move(hessians));
  return out;
}

SurrogateEval lower_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const SurrogateSpec& spec, const PolicyParams& theta) {
  SurrogateSpec lower = spec;
  lower.branch_rule = BranchRule::kLowerOnly;
  return Surrogate(policy, batch, std::move(lower)).eval(theta);
}

SurrogateEval mixed_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const SurrogateSpec& spec, const PolicyParams& theta) {
  SurrogateSpec mixed = spec;
  mixed.branch_rule = BranchRule::kMixed;
  return Surrogate(policy, batch, std::move(mixed)).eval(theta);
}

SurrogateEval power_bound_eval(const PolicyFamily& policy, const LoggedBatch& batch,
                               const EstimatorConfig& config, const PolicyParams& theta) {
  SurrogateSpec spec{batch.logging_params(), config, BranchRule::kLowerOnly};
  return Surrogate(policy, batch, std::move(spec)).eval(theta);
}

double upper_bound_factor(const PolicyFamily& policy, const LoggedBatch& batch,
                          const PolicyParams& anchor, std::size_t index,
                          const PolicyParams& theta) {
  const Rollout& r = batch.rollout(index);
  const Vector score = policy.grad_log_prob_rollout(anchor, r.steps);
  const double exponent = (theta.theta - anchor.theta).dot(score);
  if (exponent > kExpBranchOverflowLimit)
    throw ExponentOverflowError(index, exponent,
                                "upper_bound_factor exponent overflow at rollout " +
                                    std::to_string(index) + ": " + std::to_string(exponent));
  return std::exp(exponent);
}

double shift_gap(const PolicyFamily& policy, const LoggedBatch& batch, const PolicyParams& anchor,
                 double beta, const PolicyParams& theta, std::optional<double> weight_cap) {
  if (beta < 0.0) throw Error("shift_gap: beta must be nonnegative");
  const std::size_t n = batch.size();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rollout& r = batch.rollout(i);
    const double w = importance_weight(policy, batch, i, anchor, weight_cap);
    const double log_ratio =
        policy.log_prob_rollout(theta, r.steps) - policy.log_prob_rollout(anchor, r.steps);
    terms[i] = w * (1.0 + log_ratio) / static_cast<double>(n);
  }
  return beta * (pairwise_reduce(std::move(terms)) - 1.0);
}

}  // namespace ipower
