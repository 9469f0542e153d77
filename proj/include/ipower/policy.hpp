#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipower/common.hpp"

namespace ipower {

/// Parameter vector of a policy family. The same type carries the three
/// distinguished roles used throughout: the value being optimized, the
/// logging parameters and the surrogate anchor.
struct PolicyParams {
  Vector theta;

  PolicyParams() = default;
  explicit PolicyParams(Vector t) : theta(std::move(t)) {}

  Eigen::Index dim() const { return theta.size(); }
};

/// One observed step: feature vector and the discrete action taken.
struct StepObservation {
  Vector state;
  int action = 0;
};

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};

/// Bundle of value, gradient and Hessian of the rollout log-probability,
/// computed in one pass over the steps.
struct LogProbDerivatives {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// A log-concave stochastic policy family. Only the policy-dependent part of
/// the rollout probability is exposed: the environment dynamics terms cancel
/// in every ratio the estimators use, so they are never stored.
class PolicyFamily {
 public:
  virtual ~PolicyFamily() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual int num_actions() const = 0;

  virtual double log_prob_step(const PolicyParams& params, const StepObservation& obs) const = 0;
  virtual double log_prob_rollout(const PolicyParams& params,
                                  std::span<const StepObservation> steps) const = 0;
  virtual Vector grad_log_prob_rollout(const PolicyParams& params,
                                       std::span<const StepObservation> steps) const = 0;
  virtual Matrix hessian_log_prob_rollout(const PolicyParams& params,
                                          std::span<const StepObservation> steps) const = 0;
  virtual LogProbDerivatives log_prob_derivatives(const PolicyParams& params,
                                                  std::span<const StepObservation> steps) const;

  virtual SampledAction sample_action(const PolicyParams& params, const Vector& state,
                                      RandomStream& rng) const = 0;

  virtual std::unique_ptr<PolicyFamily> clone() const = 0;
};

/// Binary-action linear-logistic policy: action 1 is taken with probability
/// sigma(state . theta). Log-probabilities are evaluated in softplus form so
/// large logits do not overflow.
class LogisticPolicy final : public PolicyFamily {
 public:
  explicit LogisticPolicy(Eigen::Index dim);

  std::string name() const override { return kFamilyName; }
  Eigen::Index dim() const override { return dim_; }
  int num_actions() const override { return 2; }

  double log_prob_step(const PolicyParams& params, const StepObservation& obs) const override;
  double log_prob_rollout(const PolicyParams& params,
                          std::span<const StepObservation> steps) const override;
  Vector grad_log_prob_rollout(const PolicyParams& params,
                               std::span<const StepObservation> steps) const override;
  Matrix hessian_log_prob_rollout(const PolicyParams& params,
                                  std::span<const StepObservation> steps) const override;
  LogProbDerivatives log_prob_derivatives(const PolicyParams& params,
                                          std::span<const StepObservation> steps) const override;

  SampledAction sample_action(const PolicyParams& params, const Vector& state,
                              RandomStream& rng) const override;

  std::unique_ptr<PolicyFamily> clone() const override;

  static constexpr const char* kFamilyName = "bernoulli_logistic_linear";

 private:
  Eigen::Index dim_;
};

double sigmoid(double z);
double log_sigmoid(double z);

}  // namespace ipower
