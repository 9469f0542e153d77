#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "support.hpp"

using namespace ipower;
using ipower::testing::bandit_rollout;
using ipower::testing::fd_gradient;
using ipower::testing::fd_jacobian;
using ipower::testing::make_random_instance;
using ipower::testing::naive_j_hat;
using ipower::testing::naive_lower_bound_value;
using ipower::testing::naive_mixed_bound_value;
using ipower::testing::random_vector;
using ipower::testing::relative_error;

namespace {

SurrogateSpec plain_spec(const PolicyParams& anchor, BranchRule rule) {
  SurrogateSpec spec;
  spec.anchor = anchor;
  spec.branch_rule = rule;
  return spec;
}

}  // namespace

TEST_CASE("lower bound at the anchor recovers mean reward and the score-weighted gradient") {
  RandomStream rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = make_random_instance(rng, {.mixed_sign_rewards = false});
    const PolicyParams& theta0 = inst.batch->logging_params();
    const SurrogateEval eval = lower_bound_eval(*inst.policy, *inst.batch,
                                                plain_spec(theta0, BranchRule::kLowerOnly), theta0);

    double mean = 0.0;
    Vector reinforce = Vector::Zero(inst.policy->dim());
    for (const Rollout& r : inst.batch->rollouts()) {
      mean += r.reward;
      reinforce += r.reward * inst.policy->grad_log_prob_rollout(theta0, r.steps);
    }
    const double n = static_cast<double>(inst.batch->size());
    mean /= n;
    reinforce /= n;

    CHECK(eval.value == doctest::Approx(mean).epsilon(1e-12));
    CHECK((eval.gradient - reinforce).norm() <= 1e-12 * std::max(1.0, reinforce.norm()));
  }
}

TEST_CASE("lower bound matches an independent transcription of the anchored form") {
  RandomStream rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = make_random_instance(rng, {.max_rollouts = 5, .mixed_sign_rewards = false});
    const double b = rng.uniform(-1.0, 0.0);  // keeps effective rewards nonnegative
    SurrogateSpec spec = plain_spec(inst.nu, BranchRule::kLowerOnly);
    spec.estimator.control_variate = b;
    const SurrogateEval eval = lower_bound_eval(*inst.policy, *inst.batch, spec, inst.theta);
    const double expected =
        naive_lower_bound_value(*inst.policy, *inst.batch, inst.nu, inst.theta, 0.0, b);
    CHECK(eval.value == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("lower bound never exceeds the uncapped estimator on nonnegative rewards") {
  RandomStream rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = make_random_instance(rng, {.mixed_sign_rewards = false});
    Surrogate surrogate(*inst.policy, *inst.batch, plain_spec(inst.nu, BranchRule::kLowerOnly));
    for (int probe = 0; probe < 10; ++probe) {
      const PolicyParams theta{random_vector(rng, inst.nu.dim(), 3.0)};
      EstimatorConfig plain;
      CHECK(surrogate.eval(theta).value <=
            j_hat(*inst.policy, *inst.batch, theta, plain) + 1e-10);
    }
  }
}

TEST_CASE("lower-only branch rejects negative effective rewards with the offending index") {
  LogisticPolicy policy(1);
  PolicyParams theta0{Vector::Zero(1)};
  std::vector<Rollout> rollouts{bandit_rollout(1.0, 1, 2.0, policy, theta0),
                                bandit_rollout(1.0, 0, -0.5, policy, theta0)};
  LoggedBatch batch(policy, rollouts, theta0);
  CHECK_THROWS_AS(lower_bound_eval(policy, batch, plain_spec(theta0, BranchRule::kLowerOnly),
                                   theta0),
                  NegativeEffectiveRewardError);
  try {
    lower_bound_eval(policy, batch, plain_spec(theta0, BranchRule::kLowerOnly), theta0);
  } catch (const NegativeEffectiveRewardError& e) {
    CHECK(e.index() == 1);
  }

  // the shift from shift_for_positivity makes it valid again
  SurrogateSpec shifted = plain_spec(theta0, BranchRule::kLowerOnly);
  shifted.estimator.reward_shift = shift_for_positivity(batch, 0.0);
  CHECK_NOTHROW(lower_bound_eval(policy, batch, shifted, theta0));
}

TEST_CASE("upper bound factor is one at the anchor and for zero scores") {
  RandomStream rng(54);
  auto inst = make_random_instance(rng);
  for (std::size_t i = 0; i < inst.batch->size(); ++i)
    CHECK(upper_bound_factor(*inst.policy, *inst.batch, inst.nu, i, inst.nu) == 1.0);

  // two steps on the same state with opposite actions have zero score at 0
  LogisticPolicy policy(1);
  PolicyParams zero{Vector::Zero(1)};
  Rollout r;
  Vector s(1);
  s << 1.0;
  r.steps.push_back(StepObservation{s, 1});
  r.steps.push_back(StepObservation{s, 0});
  r.reward = 1.0;
  r.log_prob_logging = policy.log_prob_rollout(zero, r.steps);
  LoggedBatch batch(policy, {r}, zero);
  CHECK(policy.grad_log_prob_rollout(zero, r.steps).norm() == 0.0);
  RandomStream rng2(55);
  for (int probe = 0; probe < 10; ++probe) {
    const PolicyParams theta{random_vector(rng2, 1, 5.0)};
    CHECK(upper_bound_factor(policy, batch, zero, 0, theta) == 1.0);
  }
}

TEST_CASE("upper bound dominates the probability ratio pointwise") {
  RandomStream rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = make_random_instance(rng);
    for (std::size_t i = 0; i < inst.batch->size(); ++i) {
      const double factor =
          upper_bound_factor(*inst.policy, *inst.batch, inst.nu, i, inst.theta);
      const Rollout& r = inst.batch->rollout(i);
      const double ratio = std::exp(inst.policy->log_prob_rollout(inst.theta, r.steps) -
                                    inst.policy->log_prob_rollout(inst.nu, r.steps));
      CHECK(factor >= ratio - 1e-12 * std::max(1.0, ratio));
    }
  }
}

TEST_CASE("upper bound factor flags exponent overflow") {
  LogisticPolicy policy(1);
  PolicyParams theta0{Vector::Zero(1)};
  std::vector<Rollout> rollouts{bandit_rollout(100.0, 1, 1.0, policy, theta0)};
  LoggedBatch batch(policy, rollouts, theta0);
  // score at anchor 0 is (1 - 0.5) * 100 = 50; theta - nu = 20 gives exponent 1000
  const PolicyParams far{(Vector(1) << 20.0).finished()};
  CHECK_THROWS_AS(upper_bound_factor(policy, batch, theta0, 0, far), ExponentOverflowError);
}

TEST_CASE("mixed bound equals j_hat at the anchor with matching capping") {
  RandomStream rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = make_random_instance(rng);
    for (std::optional<double> cap : {std::optional<double>{}, std::optional<double>{1.2}}) {
      SurrogateSpec spec = plain_spec(inst.nu, BranchRule::kMixed);
      spec.estimator.weight_cap = cap;
      EstimatorConfig est;
      est.weight_cap = cap;
      const double bound = mixed_bound_eval(*inst.policy, *inst.batch, spec, inst.nu).value;
      const double estimate = j_hat(*inst.policy, *inst.batch, inst.nu, est);
      CHECK(bound == doctest::Approx(estimate).epsilon(1e-13));
    }
  }
}

TEST_CASE("mixed bound collapses to the lower bound bit-for-bit on nonnegative rewards") {
  RandomStream rng(58);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = make_random_instance(rng, {.mixed_sign_rewards = false});
    const SurrogateEval mixed = mixed_bound_eval(*inst.policy, *inst.batch,
                                                 plain_spec(inst.nu, BranchRule::kMixed),
                                                 inst.theta);
    const SurrogateEval lower = lower_bound_eval(*inst.policy, *inst.batch,
                                                 plain_spec(inst.nu, BranchRule::kLowerOnly),
                                                 inst.theta);
    CHECK(mixed.value == lower.value);
    CHECK(mixed.gradient == lower.gradient);
    CHECK(mixed.hessian == lower.hessian);
  }
}

TEST_CASE("mixed bound matches an independent transcription and dominance holds on mixed signs") {
  RandomStream rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = make_random_instance(rng, {.max_rollouts = 6});
    const double b = rng.uniform(-0.5, 0.5);
    SurrogateSpec spec = plain_spec(inst.nu, BranchRule::kMixed);
    spec.estimator.control_variate = b;
    Surrogate surrogate(*inst.policy, *inst.batch, spec);

    const double expected =
        naive_mixed_bound_value(*inst.policy, *inst.batch, inst.nu, inst.theta, 0.0, b);
    CHECK(surrogate.eval(inst.theta).value == doctest::Approx(expected).epsilon(1e-12));

    for (int probe = 0; probe < 5; ++probe) {
      const PolicyParams theta{random_vector(rng, inst.nu.dim(), 3.0)};
      CHECK(surrogate.eval(theta).value <= naive_j_hat(*inst.policy, *inst.batch, theta, 0.0, b) + 1e-10);
    }
  }
}

TEST_CASE("surrogate gradient and Hessian match finite differences of its own value") {
  RandomStream rng(60);
  for (int trial = 0; trial < 15; ++trial) {
    auto inst = make_random_instance(rng);
    Surrogate surrogate(*inst.policy, *inst.batch, plain_spec(inst.nu, BranchRule::kMixed));
    const SurrogateEval at = surrogate.eval(inst.theta);
    const Vector g_fd = fd_gradient(
        [&](const PolicyParams& p) { return surrogate.eval(p).value; }, inst.theta);
    CHECK(relative_error(at.gradient, g_fd) < 1e-5);
    const Matrix h_fd = fd_jacobian(
        [&](const PolicyParams& p) { return surrogate.eval(p).gradient; }, inst.theta);
    CHECK(relative_error(at.hessian, h_fd) < 1e-5);
  }
}

TEST_CASE("mixed bound is concave: NSD Hessian and midpoint concavity") {
  RandomStream rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = make_random_instance(rng);
    Surrogate surrogate(*inst.policy, *inst.batch, plain_spec(inst.nu, BranchRule::kMixed));

    const Matrix h = surrogate.eval(inst.theta).hessian;
    const Eigen::SelfAdjointEigenSolver<Matrix> eigen(h);
    const double scale = std::max(std::abs(eigen.eigenvalues().minCoeff()),
                                  std::abs(eigen.eigenvalues().maxCoeff()));
    CHECK(eigen.eigenvalues().maxCoeff() <= 1e-8 * std::max(scale, 1e-30));

    const PolicyParams x{random_vector(rng, inst.nu.dim(), 3.0)};
    const PolicyParams y{random_vector(rng, inst.nu.dim(), 3.0)};
    const PolicyParams mid{0.5 * (x.theta + y.theta)};
    CHECK(surrogate.eval(mid).value >=
          0.5 * (surrogate.eval(x).value + surrogate.eval(y).value) - 1e-10);
  }
}

TEST_CASE("power bound is the logging-anchored special case, bit for bit") {
  RandomStream rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = make_random_instance(rng, {.mixed_sign_rewards = false});
    EstimatorConfig config;
    const SurrogateEval power = power_bound_eval(*inst.policy, *inst.batch, config, inst.theta);
    const SurrogateEval lower = lower_bound_eval(
        *inst.policy, *inst.batch,
        SurrogateSpec{inst.batch->logging_params(), config, BranchRule::kLowerOnly}, inst.theta);
    CHECK(power.value == lower.value);
    CHECK(power.gradient == lower.gradient);
    CHECK(power.hessian == lower.hessian);

    const double mean = naive_j_hat(*inst.policy, *inst.batch, inst.batch->logging_params());
    CHECK(power_bound_eval(*inst.policy, *inst.batch, config, inst.batch->logging_params()).value ==
          doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("power bound traces the expected concave curve on a single rollout") {
  // one rollout, R = 1, one step: the bound is 1 + log sigma(theta) - log sigma(0)
  LogisticPolicy policy(1);
  PolicyParams theta0{Vector::Zero(1)};
  std::vector<Rollout> rollouts{bandit_rollout(1.0, 1, 1.0, policy, theta0)};
  LoggedBatch batch(policy, rollouts, theta0);
  EstimatorConfig config;
  double previous_slope = std::numeric_limits<double>::infinity();
  for (double theta = -3.0; theta <= 3.0; theta += 0.25) {
    const PolicyParams p{(Vector(1) << theta).finished()};
    const double value = power_bound_eval(policy, batch, config, p).value;
    const double expected = 1.0 + std::log(1.0 / (1.0 + std::exp(-theta))) - std::log(0.5);
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
    // concavity in 1-d: slopes of consecutive chords decrease
    if (theta > -3.0) {
      const PolicyParams prev{(Vector(1) << theta - 0.25).finished()};
      const double slope =
          (value - power_bound_eval(policy, batch, config, prev).value) / 0.25;
      CHECK(slope <= previous_slope + 1e-12);
      previous_slope = slope;
    }
  }
}

TEST_CASE("tangency: surrogate value and gradient match the estimator at the anchor") {
  RandomStream rng(63);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = make_random_instance(rng);
    EstimatorConfig plain;
    Surrogate surrogate(*inst.policy, *inst.batch, plain_spec(inst.nu, BranchRule::kMixed));
    const SurrogateEval at = surrogate.eval(inst.nu);
    CHECK(std::abs(at.value - j_hat(*inst.policy, *inst.batch, inst.nu, plain)) <= 1e-10);
    const Vector fd = fd_gradient(
        [&](const PolicyParams& p) { return j_hat(*inst.policy, *inst.batch, p, plain); },
        inst.nu);
    CHECK(relative_error(at.gradient, fd) < 1e-4);
  }
}

TEST_CASE("shift gap equals the direct difference of shifted and unshifted bounds") {
  RandomStream rng(64);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = make_random_instance(rng, {.mixed_sign_rewards = false});
    const double beta = rng.uniform(0.0, 3.0);
    EstimatorConfig unshifted;
    EstimatorConfig shifted;
    shifted.reward_shift = beta;
    const double direct =
        lower_bound_eval(*inst.policy, *inst.batch,
                         SurrogateSpec{inst.nu, shifted, BranchRule::kLowerOnly}, inst.theta)
            .value -
        lower_bound_eval(*inst.policy, *inst.batch,
                         SurrogateSpec{inst.nu, unshifted, BranchRule::kLowerOnly}, inst.theta)
            .value;
    const double gap =
        shift_gap(*inst.policy, *inst.batch, inst.nu, beta, inst.theta, std::nullopt);
    CHECK(std::abs(direct - gap) <= 1e-10);
  }
}

TEST_CASE("shift gap vanishes exactly at beta = 0 and at the logging anchor") {
  RandomStream rng(65);
  auto inst = make_random_instance(rng);
  CHECK(shift_gap(*inst.policy, *inst.batch, inst.nu, 0.0, inst.theta, std::nullopt) == 0.0);
  // anchored at the logging parameters every weight is exactly 1, so the
  // Monte-Carlo gap at theta = nu is exactly beta * (mean(w) - 1) = 0
  const PolicyParams& theta0 = inst.batch->logging_params();
  CHECK(shift_gap(*inst.policy, *inst.batch, theta0, 2.5, theta0, std::nullopt) == 0.0);
}

TEST_CASE("shift gap recovers -beta KL exactly on a balanced one-step batch") {
  // two rollouts taking each action once on the same state, logged at 0: the
  // empirical action distribution equals the logging policy, so the
  // Monte-Carlo gap IS -beta * KL(Bern(1/2) || Bern(sigma(theta)))
  LogisticPolicy policy(1);
  PolicyParams theta0{Vector::Zero(1)};
  std::vector<Rollout> rollouts{bandit_rollout(1.0, 1, 1.0, policy, theta0),
                                bandit_rollout(1.0, 0, 1.0, policy, theta0)};
  LoggedBatch batch(policy, rollouts, theta0);
  RandomStream rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    const double beta = rng.uniform(0.0, 3.0);
    const double theta = rng.uniform(-4.0, 4.0);
    const double sig = 1.0 / (1.0 + std::exp(-theta));
    const double kl = 0.5 * std::log(0.5 / sig) + 0.5 * std::log(0.5 / (1.0 - sig));
    const PolicyParams p{(Vector(1) << theta).finished()};
    const double gap = shift_gap(policy, batch, theta0, beta, p, std::nullopt);
    CHECK(gap == doctest::Approx(-beta * kl).epsilon(1e-12));
    CHECK(gap <= 1e-15);
  }
}
