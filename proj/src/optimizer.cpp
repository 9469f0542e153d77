#include "ipower/optimizer.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <utility>

namespace ipower {
namespace {

// Solves (H - ridge I) d = g for the ascent step -d, escalating the ridge
// tenfold on a failed factorization. H is expected negative semidefinite, so
// ridge I - H is positive definite for any positive ridge.
Vector solve_newton_step(const Matrix& hessian, const Vector& gradient, double initial_ridge) {
  double ridge = initial_ridge;
  for (;;) {
    Matrix m = -hessian;
    if (ridge > 0.0) m.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
      Vector step = llt.solve(gradient);
      if (step.allFinite()) return step;
    }
    ridge = ridge == 0.0 ? 1e-10 : ridge * 10.0;
    if (ridge > 1e2)
      throw SingularHessianError("newton_maximize: regularized Hessian still singular at ridge " +
                                 std::to_string(ridge));
  }
}

double plain_j_hat(const PolicyFamily& policy, const LoggedBatch& batch,
                   const PolicyParams& theta, std::optional<double> cap) {
  EstimatorConfig plain;
  plain.weight_cap = cap;
  return j_hat(policy, batch, theta, plain);
}

}  // namespace

void validate(const NewtonConfig& config) {
  if (config.steps_per_iteration < 1) throw Error("NewtonConfig: steps_per_iteration must be >= 1");
  if (config.ridge < 0.0) throw Error("NewtonConfig: ridge must be nonnegative");
  if (!(config.max_step_norm > 0.0)) throw Error("NewtonConfig: max_step_norm must be positive");
  if (!(config.backtracking_shrink > 0.0 && config.backtracking_shrink < 1.0))
    throw Error("NewtonConfig: backtracking_shrink must lie in (0, 1)");
  if (config.max_halvings < 0) throw Error("NewtonConfig: max_halvings must be nonnegative");
}

NewtonTrace newton_maximize(const Objective& objective, PolicyParams init,
                            const NewtonConfig& config) {
  validate(config);
  NewtonTrace trace;
  trace.params = std::move(init);
  SurrogateEval current = objective(trace.params);
  if (!std::isfinite(current.value))
    throw Error("newton_maximize: non-finite objective at the initial point");
  trace.value = current.value;

  for (int step = 0; step < config.steps_per_iteration; ++step) {
    Vector direction = solve_newton_step(current.hessian, current.gradient, config.ridge);
    const double norm = direction.norm();
    if (norm > config.max_step_norm) direction *= config.max_step_norm / norm;

    if (!config.backtracking) {
      trace.params.theta += direction;
      current = objective(trace.params);
      trace.value = current.value;
      trace.step_values.push_back(current.value);
      continue;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= config.max_halvings; ++halving) {
      PolicyParams candidate{trace.params.theta + scale * direction};
      SurrogateEval cand_eval;
      bool finite = true;
      try {
        cand_eval = objective(candidate);
      } catch (const ExponentOverflowError&) {
        finite = false;  // treat as a rejected trial point and shrink
      }
      if (finite && std::isfinite(cand_eval.value) && cand_eval.value >= current.value) {
        trace.params = std::move(candidate);
        current = std::move(cand_eval);
        accepted = true;
        break;
      }
      scale *= config.backtracking_shrink;
    }
    if (!accepted) {
      trace.backtracking_exhausted = true;
      break;  // keep the best point found so far
    }
    trace.value = current.value;
    trace.step_values.push_back(current.value);
  }
  return trace;
}

PolicyParams newton_maximize(const PolicyFamily& policy, const LoggedBatch& batch,
                             const SurrogateSpec& spec, PolicyParams init,
                             const NewtonConfig& config) {
  Surrogate surrogate(policy, batch, spec);
  return newton_maximize([&](const PolicyParams& theta) { return surrogate.eval(theta); },
                         std::move(init), config)
      .params;
}

void validate(const IterPowerConfig& config) {
  if (config.iterations < 1) throw Error("IterPowerConfig: iterations must be >= 1");
  validate(config.newton);
  validate(config.estimator);
}

namespace {

// Shared per-iteration bookkeeping for both optimization loops.
IterationRecord make_record(const PolicyFamily& policy, const LoggedBatch& batch,
                            const PolicyParams& theta, const NewtonTrace& trace,
                            std::optional<double> cap, double b, double beta) {
  IterationRecord rec;
  rec.theta = theta;
  rec.surrogate_value = trace.value;
  rec.newton_values = trace.step_values;
  rec.newton_exhausted = trace.backtracking_exhausted;
  rec.control_variate = b;
  rec.reward_shift = beta;
  rec.j_hat_value = plain_j_hat(policy, batch, theta, cap);
  const std::vector<double> weights = importance_weights(policy, batch, theta, cap);
  rec.ess = effective_sample_size(weights);
  rec.weight_max = *std::max_element(weights.begin(), weights.end());
  return rec;
}

double iteration_control_variate(const PolicyFamily& policy, const LoggedBatch& batch,
                                 const PolicyParams& anchor, const IterPowerConfig& config) {
  if (!config.recompute_cv_each_iteration) return config.estimator.control_variate;
  const ControlVariateEstimate cv =
      optimal_control_variate(policy, batch, anchor, config.estimator.weight_cap);
  return config.estimator.cv_fraction * cv.value;
}

}  // namespace

OptimizationReport iterative_power(const PolicyFamily& policy, const LoggedBatch& batch,
                                   const IterPowerConfig& config) {
  validate(config);
  OptimizationReport report;
  PolicyParams theta = batch.logging_params();

  for (int t = 1; t <= config.iterations; ++t) {
    const PolicyParams anchor = theta;
    const double b = iteration_control_variate(policy, batch, anchor, config);
    const double beta = config.branch_rule == BranchRule::kLowerOnly
                            ? shift_for_positivity(batch, b)
                            : config.estimator.reward_shift;

    SurrogateSpec spec;
    spec.anchor = anchor;
    spec.estimator = config.estimator;
    spec.estimator.reward_shift = beta;
    spec.estimator.control_variate = b;
    spec.branch_rule = config.branch_rule;
    Surrogate surrogate(policy, batch, std::move(spec));

    const SurrogateEval at_anchor = surrogate.eval(anchor);
    if (!std::isfinite(at_anchor.value))
      throw Error("iterative_power: non-finite surrogate at anchor, iteration " +
                  std::to_string(t));

    NewtonTrace trace =
        newton_maximize([&](const PolicyParams& p) { return surrogate.eval(p); }, anchor,
                        config.newton);
    theta = trace.params;
    report.iterations.push_back(
        make_record(policy, batch, theta, trace, config.estimator.weight_cap, b, beta));
  }
  report.final_params = theta;
  return report;
}

void validate(const MultiplierConfig& config) {
  if (!(config.step_scale >= 0.0)) throw Error("MultiplierConfig: step_scale must be >= 0");
  if (config.max_dual_steps < 1) throw Error("MultiplierConfig: max_dual_steps must be >= 1");
  if (!(config.gap_tolerance_rel > 0.0))
    throw Error("MultiplierConfig: gap_tolerance_rel must be positive");
  if (!(config.multiplier_abort > 0.0))
    throw Error("MultiplierConfig: multiplier_abort must be positive");
}

OptimizationReport constrained_iterative_power(const PolicyFamily& policy,
                                               const LoggedBatch& batch,
                                               const IterPowerConfig& config,
                                               double constraint_target,
                                               const MultiplierConfig& multiplier) {
  validate(config);
  validate(multiplier);
  if (!batch.all_have_aux_signal())
    throw MissingAuxSignalError(
        "constrained_iterative_power: every rollout must carry an aux signal");
  if (!std::isfinite(constraint_target))
    throw Error("constrained_iterative_power: constraint target must be finite");

  const std::size_t n = batch.size();
  const double eta = multiplier.step_scale / std::max(std::abs(constraint_target), 1e-6);
  const double gap_tolerance =
      multiplier.gap_tolerance_rel * std::max(std::abs(constraint_target), 1.0);

  OptimizationReport report;
  PolicyParams theta = batch.logging_params();
  double alpha = 0.0;

  std::vector<double> aux(n);
  for (std::size_t i = 0; i < n; ++i) aux[i] = *batch.rollout(i).aux_signal;

  for (int t = 1; t <= config.iterations; ++t) {
    const PolicyParams anchor = theta;
    const double b = iteration_control_variate(policy, batch, anchor, config);

    SurrogateSpec reward_spec;
    reward_spec.anchor = anchor;
    reward_spec.estimator = config.estimator;
    reward_spec.estimator.reward_shift = 0.0;
    reward_spec.estimator.control_variate = b;
    reward_spec.branch_rule = BranchRule::kMixed;
    Surrogate reward_surrogate(policy, batch, std::move(reward_spec));

    // Two prebuilt constraint surrogates; the branch choice depends only on
    // the sign of alpha * S_i, so one of the pair is exact for any alpha.
    std::vector<bool> exp_when_pos(n), exp_when_neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      exp_when_pos[i] = aux[i] < 0.0;
      exp_when_neg[i] = aux[i] > 0.0;
    }
    Surrogate s_pos(policy, batch, anchor, config.estimator.weight_cap, aux, 0.0, exp_when_pos);
    Surrogate s_neg(policy, batch, anchor, config.estimator.weight_cap, aux, 0.0, exp_when_neg);

    NewtonTrace trace;
    double dual_gap = 0.0;
    for (int k = 0; k < multiplier.max_dual_steps; ++k) {
      const Surrogate& s_active = alpha >= 0.0 ? s_pos : s_neg;
      Objective objective;
      if (alpha == 0.0) {
        objective = [&](const PolicyParams& p) { return reward_surrogate.eval(p); };
      } else {
        objective = [&](const PolicyParams& p) {
          SurrogateEval r = reward_surrogate.eval(p);
          const SurrogateEval s = s_active.eval(p);
          r.value += alpha * (s.value - constraint_target);
          r.gradient += alpha * s.gradient;
          r.hessian += alpha * s.hessian;
          return r;
        };
      }
      trace = newton_maximize(objective, theta, config.newton);
      theta = trace.params;

      dual_gap = (alpha >= 0.0 ? s_pos : s_neg).eval(theta).value - constraint_target;
      alpha -= eta * dual_gap;
      if (std::abs(alpha) > multiplier.multiplier_abort)
        throw DualDivergenceError("constrained_iterative_power: multiplier diverged to " +
                                  std::to_string(alpha) + " at iteration " + std::to_string(t));
      if (std::abs(dual_gap) <= gap_tolerance) break;
    }

    IterationRecord rec =
        make_record(policy, batch, theta, trace, config.estimator.weight_cap, b, 0.0);
    // reported gap: importance-sampling estimate of S at theta minus target
    std::vector<double> s_terms(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = importance_weight(policy, batch, i, theta, config.estimator.weight_cap);
      s_terms[i] = w * aux[i] / static_cast<double>(n);
    }
    rec.constraint_gap = pairwise_reduce(std::move(s_terms)) - constraint_target;
    rec.multiplier = alpha;
    report.iterations.push_back(std::move(rec));
  }
  report.final_params = theta;
  return report;
}

}  // namespace ipower
