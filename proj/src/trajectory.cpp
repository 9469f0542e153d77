#include "ipower/trajectory.hpp"

#include <cmath>
#include <utility>

namespace ipower {

LoggedBatch::LoggedBatch(const PolicyFamily& policy, std::vector<Rollout> rollouts,
                         PolicyParams logging_params, double verify_tolerance)
    : rollouts_(std::move(rollouts)), logging_params_(std::move(logging_params)) {
  if (rollouts_.empty()) throw EmptyBatchError("LoggedBatch: batch must contain >= 1 rollout");
  if (logging_params_.dim() != policy.dim())
    throw DimensionMismatchError("LoggedBatch: logging parameter dimension mismatch");
  if (!logging_params_.theta.allFinite())
    throw Error("LoggedBatch: logging parameters must be finite");
  for (std::size_t i = 0; i < rollouts_.size(); ++i) {
    const Rollout& r = rollouts_[i];
    if (!std::isfinite(r.reward))
      throw Error("LoggedBatch: non-finite reward in rollout " + std::to_string(i));
    if (r.aux_signal && !std::isfinite(*r.aux_signal))
      throw Error("LoggedBatch: non-finite aux signal in rollout " + std::to_string(i));
    const double recomputed = policy.log_prob_rollout(logging_params_, r.steps);
    if (std::abs(recomputed - r.log_prob_logging) > verify_tolerance)
      throw LogProbMismatchError(
          i, "LoggedBatch: stored logging log-probability " + std::to_string(r.log_prob_logging) +
                 " disagrees with recomputed value " + std::to_string(recomputed) +
                 " for rollout " + std::to_string(i));
  }
}

bool LoggedBatch::all_have_aux_signal() const {
  for (const Rollout& r : rollouts_)
    if (!r.aux_signal) return false;
  return true;
}

double importance_weight(const PolicyFamily& policy, const LoggedBatch& batch, std::size_t index,
                         const PolicyParams& eval_params, std::optional<double> cap) {
  const Rollout& r = batch.rollout(index);
  const double log_ratio = policy.log_prob_rollout(eval_params, r.steps) - r.log_prob_logging;
  // exp(709.8) is the largest finite double; flag the overflow instead of
  // letting the cap hide it.
  if (log_ratio > 709.0)
    throw NonFiniteWeightError(index, "importance weight overflow at rollout " +
                                          std::to_string(index) + ": log ratio " +
                                          std::to_string(log_ratio));
  const double weight = std::exp(log_ratio);
  if (cap) return std::min(*cap, weight);
  return weight;
}

std::vector<double> importance_weights(const PolicyFamily& policy, const LoggedBatch& batch,
                                       const PolicyParams& eval_params,
                                       std::optional<double> cap) {
  std::vector<double> weights(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    weights[i] = importance_weight(policy, batch, i, eval_params, cap);
  return weights;
}

double effective_sample_size(std::span<const double> weights) {
  if (weights.empty()) throw Error("effective_sample_size: empty weight sequence");
  std::vector<double> w(weights.begin(), weights.end());
  std::vector<double> w2(weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0))
      throw Error("effective_sample_size: weights must be nonnegative");
    w2[i] = w[i] * w[i];
  }
  const double sum = pairwise_reduce(std::move(w));
  const double sum_sq = pairwise_reduce(std::move(w2));
  if (sum_sq == 0.0) throw Error("effective_sample_size: all weights are zero");
  return (sum * sum) / sum_sq;
}

}  // namespace ipower
