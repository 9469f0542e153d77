#include "ipower/policy.hpp"

#include <cmath>

namespace ipower {
namespace {

double softplus(double x) {
  // log(1 + exp(x)) without overflow for large |x|
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_dims(const PolicyParams& params, const StepObservation& obs, Eigen::Index dim) {
  if (params.dim() != dim)
    throw DimensionMismatchError("policy: parameter dimension " + std::to_string(params.dim()) +
                                 " does not match family dimension " + std::to_string(dim));
  if (obs.state.size() != dim)
    throw DimensionMismatchError("policy: state dimension " + std::to_string(obs.state.size()) +
                                 " does not match family dimension " + std::to_string(dim));
  if (obs.action != 0 && obs.action != 1)
    throw Error("policy: action must be 0 or 1, got " + std::to_string(obs.action));
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) { return -softplus(-z); }

LogProbDerivatives PolicyFamily::log_prob_derivatives(
    const PolicyParams& params, std::span<const StepObservation> steps) const {
  LogProbDerivatives out;
  out.value = log_prob_rollout(params, steps);
  out.gradient = grad_log_prob_rollout(params, steps);
  out.hessian = hessian_log_prob_rollout(params, steps);
  return out;
}

LogisticPolicy::LogisticPolicy(Eigen::Index dim) : dim_(dim) {
  if (dim < 1) throw Error("LogisticPolicy: dimension must be >= 1");
}

double LogisticPolicy::log_prob_step(const PolicyParams& params,
                                     const StepObservation& obs) const {
  check_dims(params, obs, dim_);
  const double logit = obs.state.dot(params.theta);
  return obs.action == 1 ? log_sigmoid(logit) : log_sigmoid(-logit);
}

double LogisticPolicy::log_prob_rollout(const PolicyParams& params,
                                        std::span<const StepObservation> steps) const {
  if (steps.empty()) throw Error("log_prob_rollout: empty step sequence");
  double sum = 0.0;
  for (const auto& obs : steps) sum += log_prob_step(params, obs);
  return sum;
}

Vector LogisticPolicy::grad_log_prob_rollout(const PolicyParams& params,
                                             std::span<const StepObservation> steps) const {
  if (steps.empty()) throw Error("grad_log_prob_rollout: empty step sequence");
  Vector grad = Vector::Zero(dim_);
  for (const auto& obs : steps) {
    check_dims(params, obs, dim_);
    const double p = sigmoid(obs.state.dot(params.theta));
    grad.noalias() += (static_cast<double>(obs.action) - p) * obs.state;
  }
  return grad;
}

Matrix LogisticPolicy::hessian_log_prob_rollout(const PolicyParams& params,
                                                std::span<const StepObservation> steps) const {
  if (steps.empty()) throw Error("hessian_log_prob_rollout: empty step sequence");
  Matrix hess = Matrix::Zero(dim_, dim_);
  for (const auto& obs : steps) {
    check_dims(params, obs, dim_);
    const double p = sigmoid(obs.state.dot(params.theta));
    hess.noalias() -= (p * (1.0 - p)) * (obs.state * obs.state.transpose());
  }
  return hess;
}

LogProbDerivatives LogisticPolicy::log_prob_derivatives(
    const PolicyParams& params, std::span<const StepObservation> steps) const {
  if (steps.empty()) throw Error("log_prob_derivatives: empty step sequence");
  LogProbDerivatives out;
  out.gradient = Vector::Zero(dim_);
  out.hessian = Matrix::Zero(dim_, dim_);
  for (const auto& obs : steps) {
    check_dims(params, obs, dim_);
    const double logit = obs.state.dot(params.theta);
    const double p = sigmoid(logit);
    out.value += obs.action == 1 ? log_sigmoid(logit) : log_sigmoid(-logit);
    out.gradient.noalias() += (static_cast<double>(obs.action) - p) * obs.state;
    out.hessian.noalias() -= (p * (1.0 - p)) * (obs.state * obs.state.transpose());
  }
  return out;
}

SampledAction LogisticPolicy::sample_action(const PolicyParams& params, const Vector& state,
                                            RandomStream& rng) const {
  const double p_right = sigmoid(state.dot(params.theta));
  const int action = rng.uniform01() < p_right ? 1 : 0;
  StepObservation obs{state, action};
  return SampledAction{action, log_prob_step(params, obs)};
}

std::unique_ptr<PolicyFamily> LogisticPolicy::clone() const {
  return std::make_unique<LogisticPolicy>(dim_);
}

}  // namespace ipower
