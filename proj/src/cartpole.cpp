#include "ipower/cartpole.hpp"

#include <cmath>

namespace ipower {

Vector CartpoleState::as_vector() const {
  Vector v(4);
  v << x, x_dot, theta_pole, theta_dot;
  return v;
}

void validate(const CartpolePhysics& physics) {
  const double fields[] = {physics.gravity,   physics.cart_mass, physics.pole_mass,
                           physics.pole_half_length, physics.force_mag, physics.time_step,
                           physics.x_limit,   physics.theta_limit};
  for (double f : fields)
    if (!(f > 0.0)) throw Error("CartpolePhysics: all constants must be positive");
}

CartpoleStepResult cartpole_step(const CartpoleState& state, int action,
                                 const CartpolePhysics& physics) {
  if (action != 0 && action != 1) throw Error("cartpole_step: action must be 0 or 1");
  const double force = action == 1 ? physics.force_mag : -physics.force_mag;
  const double total_mass = physics.cart_mass + physics.pole_mass;
  const double polemass_length = physics.pole_mass * physics.pole_half_length;

  const double cos_theta = std::cos(state.theta_pole);
  const double sin_theta = std::sin(state.theta_pole);
  const double temp =
      (force + polemass_length * state.theta_dot * state.theta_dot * sin_theta) / total_mass;
  const double theta_acc =
      (physics.gravity * sin_theta - cos_theta * temp) /
      (physics.pole_half_length *
       (4.0 / 3.0 - physics.pole_mass * cos_theta * cos_theta / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_theta / total_mass;

  CartpoleStepResult result;
  result.state.x = state.x + physics.time_step * state.x_dot;
  result.state.x_dot = state.x_dot + physics.time_step * x_acc;
  result.state.theta_pole = state.theta_pole + physics.time_step * state.theta_dot;
  result.state.theta_dot = state.theta_dot + physics.time_step * theta_acc;
  result.terminated = std::abs(result.state.x) > physics.x_limit ||
                      std::abs(result.state.theta_pole) > physics.theta_limit;
  return result;
}

CartpoleState sample_initial_cartpole_state(RandomStream& rng) {
  CartpoleState state;
  state.x = rng.uniform(-0.05, 0.05);
  state.x_dot = rng.uniform(-0.05, 0.05);
  state.theta_pole = rng.uniform(-0.05, 0.05);
  state.theta_dot = rng.uniform(-0.05, 0.05);
  return state;
}

Rollout run_cartpole_rollout(const PolicyFamily& policy, const PolicyParams& params, int max_steps,
                             RandomStream& rng, const CartpolePhysics& physics) {
  if (max_steps < 1) throw Error("run_cartpole_rollout: max_steps must be >= 1");
  if (params.dim() != 4 || policy.dim() != 4)
    throw DimensionMismatchError("run_cartpole_rollout: cartpole policies are 4-dimensional");
  validate(physics);

  Rollout rollout;
  rollout.steps.reserve(static_cast<std::size_t>(max_steps));
  CartpoleState state = sample_initial_cartpole_state(rng);
  double log_prob = 0.0;
  for (int t = 0; t < max_steps; ++t) {
    const Vector features = state.as_vector();
    const SampledAction sampled = policy.sample_action(params, features, rng);
    rollout.steps.push_back(StepObservation{features, sampled.action});
    log_prob += sampled.log_prob;
    rollout.reward += 1.0;  // +1 per step taken
    const CartpoleStepResult next = cartpole_step(state, sampled.action, physics);
    if (next.terminated) break;
    state = next.state;
  }
  rollout.log_prob_logging = log_prob;
  return rollout;
}

}  // namespace ipower
