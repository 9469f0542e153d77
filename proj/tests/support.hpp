#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here recomputes expected values from first principles (finite differences,
// direct transcriptions, brute-force scans) so the assertions do not depend
// on the code paths under test.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "ipower/bounds.hpp"
#include "ipower/cartpole.hpp"
#include "ipower/estimator.hpp"
#include "ipower/policy.hpp"
#include "ipower/trajectory.hpp"

namespace ipower::testing {

inline Vector random_vector(RandomStream& rng, Eigen::Index dim, double scale) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

struct RandomInstance {
  std::unique_ptr<LogisticPolicy> policy;
  std::unique_ptr<LoggedBatch> batch;
  PolicyParams theta0;
  PolicyParams theta;
  PolicyParams nu;
};

struct RandomInstanceOptions {
  Eigen::Index max_dim = 4;
  std::size_t max_rollouts = 10;
  int max_steps = 5;
  bool mixed_sign_rewards = true;
  double param_scale = 2.0;
  bool with_aux = false;
};

inline RandomInstance make_random_instance(RandomStream& rng,
                                           const RandomInstanceOptions& opts = {}) {
  RandomInstance inst;
  const Eigen::Index dim =
      1 + static_cast<Eigen::Index>(rng.uniform01() * static_cast<double>(opts.max_dim - 1) + 0.5);
  inst.policy = std::make_unique<LogisticPolicy>(dim);
  inst.theta0 = PolicyParams{random_vector(rng, dim, 1.0)};

  const std::size_t n =
      2 + static_cast<std::size_t>(rng.uniform01() * static_cast<double>(opts.max_rollouts - 2));
  std::vector<Rollout> rollouts;
  for (std::size_t i = 0; i < n; ++i) {
    Rollout r;
    const int steps = 1 + static_cast<int>(rng.uniform01() * static_cast<double>(opts.max_steps - 1) + 0.5);
    for (int s = 0; s < steps; ++s) {
      StepObservation obs;
      obs.state = random_vector(rng, dim, 1.0);
      obs.action = rng.uniform01() < 0.5 ? 1 : 0;
      r.steps.push_back(std::move(obs));
    }
    r.reward = opts.mixed_sign_rewards ? rng.uniform(-2.0, 2.0) : rng.uniform(0.0, 2.0);
    if (opts.with_aux) r.aux_signal = rng.uniform(0.0, 1.0);
    r.log_prob_logging = inst.policy->log_prob_rollout(inst.theta0, r.steps);
    rollouts.push_back(std::move(r));
  }
  inst.batch = std::make_unique<LoggedBatch>(*inst.policy, std::move(rollouts), inst.theta0);
  inst.theta = PolicyParams{random_vector(rng, dim, opts.param_scale)};
  inst.nu = PolicyParams{random_vector(rng, dim, opts.param_scale)};
  return inst;
}

// Central finite differences of a scalar function of the parameters.
inline Vector fd_gradient(const std::function<double(const PolicyParams&)>& f,
                          const PolicyParams& at, double h = 1e-5) {
  Vector grad(at.dim());
  for (Eigen::Index k = 0; k < at.dim(); ++k) {
    PolicyParams plus = at, minus = at;
    plus.theta[k] += h;
    minus.theta[k] -= h;
    grad[k] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return grad;
}

// Central finite differences of a vector function (used for Hessian checks).
inline Matrix fd_jacobian(const std::function<Vector(const PolicyParams&)>& f,
                          const PolicyParams& at, double h = 1e-5) {
  const Vector f0 = f(at);
  Matrix jac(f0.size(), at.dim());
  for (Eigen::Index k = 0; k < at.dim(); ++k) {
    PolicyParams plus = at, minus = at;
    plus.theta[k] += h;
    minus.theta[k] -= h;
    jac.col(k) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return jac;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

// Direct transcription of the anchored lower bound, written independently of
// the bounds module: naive left-to-right accumulation over rollouts.
inline double naive_lower_bound_value(const PolicyFamily& policy, const LoggedBatch& batch,
                                      const PolicyParams& nu, const PolicyParams& theta,
                                      double beta, double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Rollout& r = batch.rollout(i);
    const double lp_nu = policy.log_prob_rollout(nu, r.steps);
    const double lp_theta = policy.log_prob_rollout(theta, r.steps);
    const double weight = std::exp(lp_nu - r.log_prob_logging);
    sum += (r.reward + beta - b) * weight * (1.0 + lp_theta - lp_nu);
  }
  return sum / static_cast<double>(batch.size()) + b - beta;
}

// Same for the mixed bound: branch per sign of the effective reward.
inline double naive_mixed_bound_value(const PolicyFamily& policy, const LoggedBatch& batch,
                                      const PolicyParams& nu, const PolicyParams& theta,
                                      double beta, double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Rollout& r = batch.rollout(i);
    const double effective = r.reward + beta - b;
    const double lp_nu = policy.log_prob_rollout(nu, r.steps);
    const double weight = std::exp(lp_nu - r.log_prob_logging);
    double z;
    if (effective >= 0.0) {
      z = 1.0 + policy.log_prob_rollout(theta, r.steps) - lp_nu;
    } else {
      const Vector score = policy.grad_log_prob_rollout(nu, r.steps);
      z = std::exp((theta.theta - nu.theta).dot(score));
    }
    sum += effective * weight * z;
  }
  return sum / static_cast<double>(batch.size()) + b - beta;
}

// Plain importance-sampling estimate, naive accumulation.
inline double naive_j_hat(const PolicyFamily& policy, const LoggedBatch& batch,
                          const PolicyParams& theta, double beta = 0.0, double b = 0.0) {
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Rollout& r = batch.rollout(i);
    const double weight = std::exp(policy.log_prob_rollout(theta, r.steps) - r.log_prob_logging);
    sum += weight * (r.reward + beta - b);
  }
  return sum / static_cast<double>(batch.size()) + b - beta;
}

// One-step scalar-bandit rollout with the logging log-probability computed
// from first principles (logit 0 at theta_0 = 0 gives log 1/2 per step).
inline Rollout bandit_rollout(double state_value, int action, double reward,
                              const PolicyFamily& policy, const PolicyParams& theta0,
                              std::optional<double> aux = std::nullopt) {
  Rollout r;
  Vector s(1);
  s << state_value;
  r.steps.push_back(StepObservation{s, action});
  r.reward = reward;
  r.aux_signal = aux;
  r.log_prob_logging = policy.log_prob_rollout(theta0, r.steps);
  return r;
}

}  // namespace ipower::testing
