#pragma once

#include "ipower/trajectory.hpp"

namespace ipower {

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta_pole = 0.0;
  double theta_dot = 0.0;

  Vector as_vector() const;
};

/// Constants of the classic cart-pole control benchmark, explicit Euler at
/// 0.02 s. All configurable; these defaults are the standard ones.
struct CartpolePhysics {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_mag = 10.0;
  double time_step = 0.02;
  double x_limit = 2.4;
  double theta_limit = 12.0 * 3.14159265358979323846 / 180.0;
};

void validate(const CartpolePhysics& physics);

struct CartpoleStepResult {
  CartpoleState state;
  bool terminated = false;
};

/// One explicit Euler update with force +/- force_mag (action 1 pushes
/// right). Terminates when the position or angle leaves its bound.
CartpoleStepResult cartpole_step(const CartpoleState& state, int action,
                                 const CartpolePhysics& physics);

/// Initial state with every coordinate uniform in [-0.05, 0.05].
CartpoleState sample_initial_cartpole_state(RandomStream& rng);

/// Runs one episode under the given policy, up to max_steps. Return is the
/// number of steps taken; per-step states/actions and the cumulative policy
/// log-probability are recorded.
Rollout run_cartpole_rollout(const PolicyFamily& policy, const PolicyParams& params, int max_steps,
                             RandomStream& rng, const CartpolePhysics& physics);

}  // namespace ipower
