#include <cmath>
#include <ostream>
#include <sstream>

#include "ipower/harness.hpp"

namespace ipower {
namespace {

struct Instance {
  LogisticPolicy policy;
  std::unique_ptr<LoggedBatch> batch;
  PolicyParams theta;
  PolicyParams nu;
};

Vector random_vector(RandomStream& rng, Eigen::Index dim, double scale) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

Instance random_instance(RandomStream& rng, bool mixed_rewards) {
  const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.uniform01() * 3.0);
  Instance inst{LogisticPolicy(dim), nullptr, {}, {}};
  const PolicyParams theta0{random_vector(rng, dim, 1.0)};
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform01() * 6.0);
  std::vector<Rollout> rollouts;
  for (std::size_t i = 0; i < n; ++i) {
    Rollout r;
    const int steps = 1 + static_cast<int>(rng.uniform01() * 4.0);
    for (int s = 0; s < steps; ++s) {
      StepObservation obs;
      obs.state = random_vector(rng, dim, 1.0);
      obs.action = rng.uniform01() < 0.5 ? 1 : 0;
      r.steps.push_back(std::move(obs));
    }
    r.reward = mixed_rewards ? rng.uniform(-2.0, 2.0) : rng.uniform(0.0, 2.0);
    r.aux_signal = rng.uniform(0.0, 1.0);
    r.log_prob_logging = inst.policy.log_prob_rollout(theta0, r.steps);
    rollouts.push_back(std::move(r));
  }
  inst.batch = std::make_unique<LoggedBatch>(inst.policy, std::move(rollouts), theta0);
  inst.theta = PolicyParams{random_vector(rng, dim, 2.0)};
  inst.nu = PolicyParams{random_vector(rng, dim, 2.0)};
  return inst;
}

Vector fd_gradient_j_hat(const PolicyFamily& policy, const LoggedBatch& batch,
                         const PolicyParams& at, const EstimatorConfig& config) {
  const double h = 1e-5;
  Vector grad(at.dim());
  for (Eigen::Index k = 0; k < at.dim(); ++k) {
    PolicyParams plus = at, minus = at;
    plus.theta[k] += h;
    minus.theta[k] -= h;
    grad[k] = (j_hat(policy, batch, plus, config) - j_hat(policy, batch, minus, config)) /
              (2.0 * h);
  }
  return grad;
}

bool suite_bound_properties(std::ostream& out) {
  RandomStream rng(7001);
  double worst_tangency = 0.0;
  double worst_dominance = 0.0;
  double worst_grad = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = random_instance(rng, true);
    EstimatorConfig plain;  // uncapped
    SurrogateSpec spec{inst.nu, plain, BranchRule::kMixed};
    Surrogate surrogate(inst.policy, *inst.batch, spec);

    const double at_anchor = surrogate.eval(inst.nu).value;
    const double jh_anchor = j_hat(inst.policy, *inst.batch, inst.nu, plain);
    worst_tangency = std::max(worst_tangency, std::abs(at_anchor - jh_anchor));

    for (int probe = 0; probe < 20; ++probe) {
      const PolicyParams theta{inst.nu.theta +
                               random_vector(rng, inst.nu.dim(), 2.0)};
      const double bound = surrogate.eval(theta).value;
      const double estimate = j_hat(inst.policy, *inst.batch, theta, plain);
      worst_dominance = std::max(worst_dominance, bound - estimate);
    }

    const Vector analytic = surrogate.eval(inst.nu).gradient;
    const Vector fd = fd_gradient_j_hat(inst.policy, *inst.batch, inst.nu, plain);
    const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-8);
    worst_grad = std::max(worst_grad, rel);
  }
  const bool ok = worst_tangency <= 1e-10 && worst_dominance <= 1e-10 && worst_grad < 1e-4;
  out << (ok ? "[ok]   " : "[FAIL] ") << "bound properties: tangency " << worst_tangency
      << ", dominance slack " << worst_dominance << ", anchor gradient rel err " << worst_grad
      << "\n";
  return ok;
}

bool suite_mm_ascent(std::ostream& out) {
  RandomStream rng(7002);
  double worst_drop = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng, true);
    IterPowerConfig config;
    config.iterations = 5;
    config.estimator.weight_cap = std::nullopt;
    const OptimizationReport report = iterative_power(inst.policy, *inst.batch, config);
    EstimatorConfig plain;
    double previous = j_hat(inst.policy, *inst.batch, inst.batch->logging_params(), plain);
    for (const IterationRecord& rec : report.iterations) {
      const double current = j_hat(inst.policy, *inst.batch, rec.theta, plain);
      worst_drop = std::max(worst_drop, previous - current);
      previous = current;
    }
  }
  const bool ok = worst_drop <= 1e-9;
  out << (ok ? "[ok]   " : "[FAIL] ") << "majorize-minimize ascent: worst estimator drop "
      << worst_drop << "\n";
  return ok;
}

bool suite_shift_identity(std::ostream& out) {
  RandomStream rng(7003);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = random_instance(rng, false);
    const double beta = rng.uniform(0.0, 3.0);
    EstimatorConfig unshifted;
    EstimatorConfig shifted;
    shifted.reward_shift = beta;
    const double direct =
        lower_bound_eval(inst.policy, *inst.batch, {inst.nu, shifted, BranchRule::kLowerOnly},
                         inst.theta)
            .value -
        lower_bound_eval(inst.policy, *inst.batch, {inst.nu, unshifted, BranchRule::kLowerOnly},
                         inst.theta)
            .value;
    const double gap =
        shift_gap(inst.policy, *inst.batch, inst.nu, beta, inst.theta, std::nullopt);
    worst = std::max(worst, std::abs(direct - gap));
  }
  const bool ok = worst <= 1e-10;
  out << (ok ? "[ok]   " : "[FAIL] ") << "shift gap identity: worst deviation " << worst << "\n";
  return ok;
}

bool suite_serialization(std::ostream& out) {
  LogisticPolicy policy(4);
  RandomStream rng(7004);
  std::vector<Rollout> rollouts;
  const PolicyParams theta0{random_vector(rng, 4, 0.5)};
  CartpolePhysics physics;
  for (int i = 0; i < 20; ++i) {
    RandomStream roll_rng(derive_seed(7004, {static_cast<std::uint64_t>(i)}));
    rollouts.push_back(run_cartpole_rollout(policy, theta0, 50, roll_rng, physics));
  }
  LoggedBatch batch(policy, std::move(rollouts), theta0);
  std::stringstream stream;
  write_batch(batch, policy, stream);
  const ReadBatchResult round = read_batch(stream);
  bool ok = round.batch->size() == batch.size();
  for (std::size_t i = 0; ok && i < batch.size(); ++i) {
    ok = round.batch->rollout(i).reward == batch.rollout(i).reward &&
         round.batch->rollout(i).log_prob_logging == batch.rollout(i).log_prob_logging;
  }
  out << (ok ? "[ok]   " : "[FAIL] ") << "batch serialization round-trip (bit-exact fields)\n";
  return ok;
}

bool suite_determinism(std::ostream& out) {
  LogisticPolicy policy(4);
  const PolicyParams theta{Vector::Zero(4)};
  CartpolePhysics physics;
  RandomStream a(99), b(99);
  const Rollout ra = run_cartpole_rollout(policy, theta, 400, a, physics);
  const Rollout rb = run_cartpole_rollout(policy, theta, 400, b, physics);
  bool ok = ra.reward == rb.reward && ra.log_prob_logging == rb.log_prob_logging &&
            ra.steps.size() == rb.steps.size();
  const BanditOracleReport oracle1 = run_bandit_oracle(1e-2);
  const BanditOracleReport oracle2 = run_bandit_oracle(1e-2);
  ok = ok && oracle1.theta_final == oracle2.theta_final;
  out << (ok ? "[ok]   " : "[FAIL] ") << "determinism: repeated runs identical\n";
  return ok;
}

}  // namespace

bool run_selftest(std::ostream& out) {
  bool ok = true;
  ok &= suite_bound_properties(out);
  ok &= suite_mm_ascent(out);
  ok &= suite_shift_identity(out);
  ok &= suite_serialization(out);
  ok &= suite_determinism(out);
  out << (ok ? "selftest: all suites passed\n" : "selftest: FAILURES detected\n");
  return ok;
}

}  // namespace ipower
