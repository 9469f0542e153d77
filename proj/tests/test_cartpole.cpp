#include <doctest.h>

#include <cmath>

#include "ipower/cartpole.hpp"
#include "support.hpp"

using namespace ipower;

namespace {

// Independent transcription of one explicit Euler update of the standard
// cart-pole equations, used as the oracle for cartpole_step.
CartpoleState euler_oracle(const CartpoleState& s, double force, const CartpolePhysics& ph) {
  const double total_mass = ph.cart_mass + ph.pole_mass;
  const double pml = ph.pole_mass * ph.pole_half_length;
  const double cost = std::cos(s.theta_pole);
  const double sint = std::sin(s.theta_pole);
  const double temp = (force + pml * s.theta_dot * s.theta_dot * sint) / total_mass;
  const double theta_acc = (ph.gravity * sint - cost * temp) /
                           (ph.pole_half_length * (4.0 / 3.0 - ph.pole_mass * cost * cost / total_mass));
  const double x_acc = temp - pml * theta_acc * cost / total_mass;
  CartpoleState next;
  next.x = s.x + ph.time_step * s.x_dot;
  next.x_dot = s.x_dot + ph.time_step * x_acc;
  next.theta_pole = s.theta_pole + ph.time_step * s.theta_dot;
  next.theta_dot = s.theta_dot + ph.time_step * theta_acc;
  return next;
}

}  // namespace

TEST_CASE("step from rest under a right push matches the hand-evaluated Euler update") {
  CartpolePhysics physics;
  CartpoleState rest;
  const CartpoleStepResult result = cartpole_step(rest, 1, physics);

  // from the equations directly: temp = 10 / 1.1, theta_acc = -temp / (0.5 * (4/3 - 0.1/1.1))
  const double temp = 10.0 / 1.1;
  const double theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
  CHECK(theta_acc == doctest::Approx(-14.634146341463415).epsilon(1e-12));
  CHECK(result.state.theta_dot == doctest::Approx(0.02 * theta_acc).epsilon(1e-12));
  CHECK(result.state.theta_dot == doctest::Approx(-0.292683).epsilon(1e-6));

  const double x_acc = temp - 0.05 * theta_acc / 1.1;
  CHECK(result.state.x == 0.0);
  CHECK(result.state.x_dot == doctest::Approx(0.02 * x_acc).epsilon(1e-12));
  CHECK(result.state.x_dot == doctest::Approx(0.19512195121951223).epsilon(1e-12));
  CHECK(result.state.theta_pole == 0.0);
  CHECK(!result.terminated);

  const CartpoleState oracle = euler_oracle(rest, physics.force_mag, physics);
  CHECK(result.state.x_dot == oracle.x_dot);
  CHECK(result.state.theta_dot == oracle.theta_dot);
}

TEST_CASE("step matches the Euler oracle from random alive states") {
  CartpolePhysics physics;
  RandomStream rng(81);
  for (int trial = 0; trial < 100; ++trial) {
    CartpoleState s;
    s.x = rng.uniform(-2.0, 2.0);
    s.x_dot = rng.uniform(-3.0, 3.0);
    s.theta_pole = rng.uniform(-0.2, 0.2);
    s.theta_dot = rng.uniform(-2.0, 2.0);
    const int action = rng.uniform01() < 0.5 ? 1 : 0;
    const CartpoleStepResult result = cartpole_step(s, action, physics);
    const CartpoleState oracle =
        euler_oracle(s, action == 1 ? physics.force_mag : -physics.force_mag, physics);
    CHECK(result.state.x == oracle.x);
    CHECK(result.state.x_dot == oracle.x_dot);
    CHECK(result.state.theta_pole == oracle.theta_pole);
    CHECK(result.state.theta_dot == oracle.theta_dot);
  }
}

TEST_CASE("left and right pushes from rest produce mirrored states") {
  CartpolePhysics physics;
  CartpoleState rest;
  const CartpoleState right = cartpole_step(rest, 1, physics).state;
  const CartpoleState left = cartpole_step(rest, 0, physics).state;
  CHECK(right.x == -left.x);
  CHECK(right.x_dot == -left.x_dot);
  CHECK(right.theta_pole == -left.theta_pole);
  CHECK(right.theta_dot == -left.theta_dot);
}

TEST_CASE("full trajectory mirror symmetry under mirrored draws") {
  // negating the state and complementing the uniform draw flips the action;
  // the dynamics are odd under (state, force) negation, so the two
  // trajectories stay exact mirrors of each other
  CartpolePhysics physics;
  LogisticPolicy policy(4);
  RandomStream rng(82);
  PolicyParams theta{testing::random_vector(rng, 4, 1.0)};

  CartpoleState s;
  s.x = 0.03;
  s.x_dot = -0.01;
  s.theta_pole = 0.02;
  s.theta_dot = 0.04;
  CartpoleState m;
  m.x = -s.x;
  m.x_dot = -s.x_dot;
  m.theta_pole = -s.theta_pole;
  m.theta_dot = -s.theta_dot;

  for (int t = 0; t < 100; ++t) {
    const double u = rng.uniform01();
    const double p_right = sigmoid(s.as_vector().dot(theta.theta));
    const int a = u < p_right ? 1 : 0;
    const double p_right_mirror = sigmoid(m.as_vector().dot(theta.theta));
    const int a_mirror = (1.0 - u) < p_right_mirror ? 1 : 0;
    CHECK(a_mirror == 1 - a);

    const CartpoleStepResult next = cartpole_step(s, a, physics);
    const CartpoleStepResult next_mirror = cartpole_step(m, a_mirror, physics);
    CHECK(next_mirror.state.x == doctest::Approx(-next.state.x).epsilon(1e-12));
    CHECK(next_mirror.state.theta_pole == doctest::Approx(-next.state.theta_pole).epsilon(1e-12));
    CHECK(next.terminated == next_mirror.terminated);
    if (next.terminated) break;
    s = next.state;
    m = next_mirror.state;
  }
}

TEST_CASE("termination at the position bound") {
  CartpolePhysics physics;
  CartpoleState s;
  s.x = 2.39;
  s.x_dot = 3.0;
  CHECK(cartpole_step(s, 1, physics).terminated);
  CHECK(cartpole_step(s, 0, physics).terminated);

  CartpoleState tilted;
  tilted.theta_pole = physics.theta_limit - 1e-4;
  tilted.theta_dot = 2.0;
  CHECK(cartpole_step(tilted, 1, physics).terminated);
}

TEST_CASE("rollouts are reproducible and internally consistent") {
  CartpolePhysics physics;
  LogisticPolicy policy(4);
  PolicyParams theta{(Vector(4) << 0.1, 0.3, 2.0, 1.5).finished()};

  RandomStream a(83), b(83);
  const Rollout ra = run_cartpole_rollout(policy, theta, 400, a, physics);
  const Rollout rb = run_cartpole_rollout(policy, theta, 400, b, physics);
  REQUIRE(ra.steps.size() == rb.steps.size());
  CHECK(ra.reward == rb.reward);
  CHECK(ra.log_prob_logging == rb.log_prob_logging);
  for (std::size_t i = 0; i < ra.steps.size(); ++i) {
    CHECK(ra.steps[i].action == rb.steps[i].action);
    CHECK(ra.steps[i].state == rb.steps[i].state);
  }

  // stored log-probability equals recomputation on the stored steps exactly
  CHECK(ra.log_prob_logging == policy.log_prob_rollout(theta, ra.steps));
  // return equals step count, within [1, 400]
  CHECK(ra.reward == static_cast<double>(ra.steps.size()));
  CHECK(ra.reward >= 1.0);
  CHECK(ra.reward <= 400.0);
}

TEST_CASE("a destabilizing policy produces short episodes") {
  CartpolePhysics physics;
  LogisticPolicy policy(4);
  // pushes away from the pole: left when leaning right and vice versa
  PolicyParams bad{(Vector(4) << 0.0, 0.0, -100.0, 0.0).finished()};
  double total = 0.0;
  for (int i = 0; i < 100; ++i) {
    RandomStream rng(derive_seed(84, {static_cast<std::uint64_t>(i)}));
    total += run_cartpole_rollout(policy, bad, 400, rng, physics).reward;
  }
  CHECK(total / 100.0 < 50.0);
}

TEST_CASE("uniform random policy baseline return stays in the frozen band") {
  CartpolePhysics physics;
  LogisticPolicy policy(4);
  PolicyParams zero{Vector::Zero(4)};
  double total = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(derive_seed(85, {static_cast<std::uint64_t>(i)}));
    total += run_cartpole_rollout(policy, zero, 400, rng, physics).reward;
  }
  const double mean = total / n;
  CHECK(mean >= 18.0);
  CHECK(mean <= 28.0);
}

TEST_CASE("physics validation rejects nonpositive constants") {
  CartpolePhysics physics;
  physics.gravity = 0.0;
  CHECK_THROWS_AS(validate(physics), Error);
}
