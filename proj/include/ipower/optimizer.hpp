#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ipower/bounds.hpp"

namespace ipower {

struct NewtonConfig {
  int steps_per_iteration = 5;
  double ridge = 1e-6;         // Hessian regularization
  double max_step_norm = 10.0;
  bool backtracking = true;
  double backtracking_shrink = 0.5;
  int max_halvings = 20;
};

void validate(const NewtonConfig& config);

struct NewtonTrace {
  PolicyParams params;
  double value = 0.0;
  std::vector<double> step_values;  // surrogate value after each accepted step
  bool backtracking_exhausted = false;
};

using Objective = std::function<SurrogateEval(const PolicyParams&)>;

/// Damped Newton ascent of a concave objective: steps_per_iteration steps of
/// theta <- theta - (H - ridge I)^-1 g, each clamped to max_step_norm and
/// halved until the objective does not decrease. The final value never drops
/// below the initial one.
NewtonTrace newton_maximize(const Objective& objective, PolicyParams init,
                            const NewtonConfig& config);

/// Convenience overload maximizing a surrogate built from the spec.
PolicyParams newton_maximize(const PolicyFamily& policy, const LoggedBatch& batch,
                             const SurrogateSpec& spec, PolicyParams init,
                             const NewtonConfig& config);

struct IterPowerConfig {
  int iterations = 1;  // T
  NewtonConfig newton;
  EstimatorConfig estimator;
  bool recompute_cv_each_iteration = true;
  BranchRule branch_rule = BranchRule::kMixed;
};

void validate(const IterPowerConfig& config);

struct IterationRecord {
  PolicyParams theta;
  double surrogate_value = 0.0;  // at theta, after maximization
  double j_hat_value = 0.0;      // plain capped IS estimate at theta
  double ess = 0.0;              // of the capped weights at theta
  double weight_max = 0.0;
  double control_variate = 0.0;  // b used this iteration
  double reward_shift = 0.0;     // beta used this iteration
  std::vector<double> newton_values;
  bool newton_exhausted = false;
  std::optional<double> constraint_gap;  // IS estimate of S minus target
  std::optional<double> multiplier;      // alpha after this iteration
};

struct OptimizationReport {
  std::vector<IterationRecord> iterations;
  PolicyParams final_params;
};

/// The iterative scheme: starting from the logging parameters, re-anchor the
/// surrogate at the current iterate, recompute the control variate, and
/// maximize with damped Newton. T = 1 with the logging anchor is the classic
/// single-bound update.
OptimizationReport iterative_power(const PolicyFamily& policy, const LoggedBatch& batch,
                                   const IterPowerConfig& config);

struct MultiplierConfig {
  double step_scale = 0.1;        // eta_alpha = step_scale / max(|S0|, 1e-6)
  int max_dual_steps = 50;        // per outer iteration
  double gap_tolerance_rel = 1e-4;
  double multiplier_abort = 1e6;
};

void validate(const MultiplierConfig& config);

/// Equality-constrained variant: maximizes the reward surrogate plus
/// alpha * (constraint surrogate - S0), with alpha driven by dual gradient
/// steps alpha <- alpha - eta * (S_nu(theta) - S0). The constraint surrogate
/// branches per rollout on the sign of alpha * S_i so the combined objective
/// stays concave for either sign of the multiplier. Requires every rollout
/// to carry an aux signal.
OptimizationReport constrained_iterative_power(const PolicyFamily& policy,
                                               const LoggedBatch& batch,
                                               const IterPowerConfig& config,
                                               double constraint_target,
                                               const MultiplierConfig& multiplier);

}  // namespace ipower
