#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ipower/harness.hpp"

namespace py = pybind11;
using namespace ipower;

namespace {

LoggedBatch make_batch(const PolicyFamily& policy, const std::vector<Rollout>& rollouts,
                       const Vector& logging_theta, double verify_tolerance) {
  return LoggedBatch(policy, rollouts, PolicyParams{logging_theta}, verify_tolerance);
}

std::optional<double> cap_from(py::object cap) {
  if (cap.is_none()) return std::nullopt;
  return cap.cast<double>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Off-policy policy optimization via iterated concave surrogate bounds";
  m.attr("__version__") = version_string();

  py::register_exception<Error>(m, "IPowerError");

  py::class_<RandomStream>(m, "RandomStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform01", &RandomStream::uniform01);

  py::class_<StepObservation>(m, "StepObservation")
      .def(py::init([](const Vector& state, int action) {
             return StepObservation{state, action};
           }),
           py::arg("state"), py::arg("action"))
      .def_readwrite("state", &StepObservation::state)
      .def_readwrite("action", &StepObservation::action);

  py::class_<Rollout>(m, "Rollout")
      .def(py::init<>())
      .def_readwrite("steps", &Rollout::steps)
      .def_readwrite("reward", &Rollout::reward)
      .def_readwrite("log_prob_logging", &Rollout::log_prob_logging)
      .def_readwrite("aux_signal", &Rollout::aux_signal);

  py::class_<PolicyFamily>(m, "PolicyFamily")
      .def_property_readonly("name", &PolicyFamily::name)
      .def_property_readonly("dim", &PolicyFamily::dim)
      .def("log_prob_step",
           [](const PolicyFamily& p, const Vector& theta, const StepObservation& obs) {
             return p.log_prob_step(PolicyParams{theta}, obs);
           })
      .def("log_prob_rollout",
           [](const PolicyFamily& p, const Vector& theta,
              const std::vector<StepObservation>& steps) {
             return p.log_prob_rollout(PolicyParams{theta}, steps);
           })
      .def("grad_log_prob_rollout",
           [](const PolicyFamily& p, const Vector& theta,
              const std::vector<StepObservation>& steps) {
             return p.grad_log_prob_rollout(PolicyParams{theta}, steps);
           })
      .def("hessian_log_prob_rollout",
           [](const PolicyFamily& p, const Vector& theta,
              const std::vector<StepObservation>& steps) {
             return p.hessian_log_prob_rollout(PolicyParams{theta}, steps);
           })
      .def("sample_action",
           [](const PolicyFamily& p, const Vector& theta, const Vector& state, RandomStream& rng) {
             const SampledAction a = p.sample_action(PolicyParams{theta}, state, rng);
             return py::make_tuple(a.action, a.log_prob);
           });

  py::class_<LogisticPolicy, PolicyFamily>(m, "LogisticPolicy")
      .def(py::init<Eigen::Index>(), py::arg("dim"));

  py::class_<LoggedBatch>(m, "LoggedBatch")
      .def(py::init(&make_batch), py::arg("policy"), py::arg("rollouts"),
           py::arg("logging_theta"), py::arg("verify_tolerance") = 1e-9)
      .def("__len__", &LoggedBatch::size)
      .def("rollout", &LoggedBatch::rollout, py::return_value_policy::reference_internal)
      .def_property_readonly("logging_theta",
                             [](const LoggedBatch& b) { return b.logging_params().theta; });

  m.def(
      "importance_weight",
      [](const PolicyFamily& policy, const LoggedBatch& batch, std::size_t index,
         const Vector& eval_theta, py::object cap) {
        return importance_weight(policy, batch, index, PolicyParams{eval_theta}, cap_from(cap));
      },
      py::arg("policy"), py::arg("batch"), py::arg("index"), py::arg("eval_theta"),
      py::arg("cap") = py::none());
  m.def("effective_sample_size",
        [](const std::vector<double>& weights) { return effective_sample_size(weights); });

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init([](py::object cap, double shift, double cv, double fraction) {
             EstimatorConfig c;
             c.weight_cap = cap_from(cap);
             c.reward_shift = shift;
             c.control_variate = cv;
             c.cv_fraction = fraction;
             return c;
           }),
           py::arg("weight_cap") = py::none(), py::arg("reward_shift") = 0.0,
           py::arg("control_variate") = 0.0, py::arg("cv_fraction") = 0.0)
      .def_readwrite("reward_shift", &EstimatorConfig::reward_shift)
      .def_readwrite("control_variate", &EstimatorConfig::control_variate)
      .def_readwrite("cv_fraction", &EstimatorConfig::cv_fraction);

  m.def(
      "j_hat",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& theta,
         const EstimatorConfig& config) { return j_hat(policy, batch, PolicyParams{theta}, config); },
      py::arg("policy"), py::arg("batch"), py::arg("theta"),
      py::arg("config") = EstimatorConfig{});
  m.def(
      "optimal_control_variate",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& theta, py::object cap,
         double shift) {
        const ControlVariateEstimate cv =
            optimal_control_variate(policy, batch, PolicyParams{theta}, cap_from(cap), shift);
        return py::make_tuple(cv.value, cv.degenerate);
      },
      py::arg("policy"), py::arg("batch"), py::arg("theta"), py::arg("cap") = py::none(),
      py::arg("reward_shift") = 0.0);
  m.def("shift_for_positivity", &shift_for_positivity, py::arg("batch"), py::arg("current_b"));

  py::enum_<BranchRule>(m, "BranchRule")
      .value("LOWER_ONLY", BranchRule::kLowerOnly)
      .value("MIXED", BranchRule::kMixed);

  py::class_<SurrogateEval>(m, "SurrogateEval")
      .def_readonly("value", &SurrogateEval::value)
      .def_readonly("gradient", &SurrogateEval::gradient)
      .def_readonly("hessian", &SurrogateEval::hessian);

  auto make_spec = [](const Vector& anchor, const EstimatorConfig& est, BranchRule rule) {
    return SurrogateSpec{PolicyParams{anchor}, est, rule};
  };
  m.def(
      "lower_bound_eval",
      [make_spec](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& anchor,
                  const EstimatorConfig& est, const Vector& theta) {
        return lower_bound_eval(policy, batch, make_spec(anchor, est, BranchRule::kLowerOnly),
                                PolicyParams{theta});
      },
      py::arg("policy"), py::arg("batch"), py::arg("anchor"), py::arg("config"), py::arg("theta"));
  m.def(
      "mixed_bound_eval",
      [make_spec](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& anchor,
                  const EstimatorConfig& est, const Vector& theta) {
        return mixed_bound_eval(policy, batch, make_spec(anchor, est, BranchRule::kMixed),
                                PolicyParams{theta});
      },
      py::arg("policy"), py::arg("batch"), py::arg("anchor"), py::arg("config"), py::arg("theta"));
  m.def(
      "power_bound_eval",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const EstimatorConfig& est,
         const Vector& theta) { return power_bound_eval(policy, batch, est, PolicyParams{theta}); },
      py::arg("policy"), py::arg("batch"), py::arg("config"), py::arg("theta"));
  m.def(
      "upper_bound_factor",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& anchor,
         std::size_t index, const Vector& theta) {
        return upper_bound_factor(policy, batch, PolicyParams{anchor}, index, PolicyParams{theta});
      },
      py::arg("policy"), py::arg("batch"), py::arg("anchor"), py::arg("index"), py::arg("theta"));
  m.def(
      "shift_gap",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const Vector& anchor, double beta,
         const Vector& theta, py::object cap) {
        return shift_gap(policy, batch, PolicyParams{anchor}, beta, PolicyParams{theta},
                         cap_from(cap));
      },
      py::arg("policy"), py::arg("batch"), py::arg("anchor"), py::arg("beta"), py::arg("theta"),
      py::arg("cap") = py::none());

  py::class_<NewtonConfig>(m, "NewtonConfig")
      .def(py::init<>())
      .def_readwrite("steps_per_iteration", &NewtonConfig::steps_per_iteration)
      .def_readwrite("ridge", &NewtonConfig::ridge)
      .def_readwrite("max_step_norm", &NewtonConfig::max_step_norm)
      .def_readwrite("backtracking", &NewtonConfig::backtracking);

  py::class_<IterPowerConfig>(m, "IterPowerConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &IterPowerConfig::iterations)
      .def_readwrite("newton", &IterPowerConfig::newton)
      .def_readwrite("estimator", &IterPowerConfig::estimator)
      .def_readwrite("recompute_cv_each_iteration", &IterPowerConfig::recompute_cv_each_iteration)
      .def_readwrite("branch_rule", &IterPowerConfig::branch_rule);

  py::class_<IterationRecord>(m, "IterationRecord")
      .def_property_readonly("theta", [](const IterationRecord& r) { return r.theta.theta; })
      .def_readonly("surrogate_value", &IterationRecord::surrogate_value)
      .def_readonly("j_hat", &IterationRecord::j_hat_value)
      .def_readonly("ess", &IterationRecord::ess)
      .def_readonly("weight_max", &IterationRecord::weight_max)
      .def_readonly("control_variate", &IterationRecord::control_variate)
      .def_readonly("reward_shift", &IterationRecord::reward_shift)
      .def_readonly("constraint_gap", &IterationRecord::constraint_gap)
      .def_readonly("multiplier", &IterationRecord::multiplier);

  py::class_<OptimizationReport>(m, "OptimizationReport")
      .def_readonly("iterations", &OptimizationReport::iterations)
      .def_property_readonly("final_theta",
                             [](const OptimizationReport& r) { return r.final_params.theta; });

  m.def(
      "iterative_power",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const IterPowerConfig& config) {
        return iterative_power(policy, batch, config);
      },
      py::arg("policy"), py::arg("batch"), py::arg("config") = IterPowerConfig{});

  py::class_<MultiplierConfig>(m, "MultiplierConfig")
      .def(py::init<>())
      .def_readwrite("step_scale", &MultiplierConfig::step_scale)
      .def_readwrite("max_dual_steps", &MultiplierConfig::max_dual_steps)
      .def_readwrite("gap_tolerance_rel", &MultiplierConfig::gap_tolerance_rel);

  m.def(
      "constrained_iterative_power",
      [](const PolicyFamily& policy, const LoggedBatch& batch, const IterPowerConfig& config,
         double target, const MultiplierConfig& multiplier) {
        return constrained_iterative_power(policy, batch, config, target, multiplier);
      },
      py::arg("policy"), py::arg("batch"), py::arg("config"), py::arg("constraint_target"),
      py::arg("multiplier") = MultiplierConfig{});

  py::class_<CartpolePhysics>(m, "CartpolePhysics")
      .def(py::init<>())
      .def_readwrite("gravity", &CartpolePhysics::gravity)
      .def_readwrite("cart_mass", &CartpolePhysics::cart_mass)
      .def_readwrite("pole_mass", &CartpolePhysics::pole_mass)
      .def_readwrite("pole_half_length", &CartpolePhysics::pole_half_length)
      .def_readwrite("force_mag", &CartpolePhysics::force_mag)
      .def_readwrite("time_step", &CartpolePhysics::time_step);

  py::class_<CartpoleState>(m, "CartpoleState")
      .def(py::init<>())
      .def_readwrite("x", &CartpoleState::x)
      .def_readwrite("x_dot", &CartpoleState::x_dot)
      .def_readwrite("theta_pole", &CartpoleState::theta_pole)
      .def_readwrite("theta_dot", &CartpoleState::theta_dot)
      .def("as_vector", &CartpoleState::as_vector);

  m.def(
      "cartpole_step",
      [](const CartpoleState& state, int action, const CartpolePhysics& physics) {
        const CartpoleStepResult r = cartpole_step(state, action, physics);
        return py::make_tuple(r.state, r.terminated);
      },
      py::arg("state"), py::arg("action"), py::arg("physics") = CartpolePhysics{});
  m.def(
      "run_cartpole_rollout",
      [](const PolicyFamily& policy, const Vector& theta, int max_steps, std::uint64_t seed,
         const CartpolePhysics& physics) {
        RandomStream rng(seed);
        return run_cartpole_rollout(policy, PolicyParams{theta}, max_steps, rng, physics);
      },
      py::arg("policy"), py::arg("theta"), py::arg("max_steps"), py::arg("seed"),
      py::arg("physics") = CartpolePhysics{});

  m.def("write_batch",
        [](const LoggedBatch& batch, const PolicyFamily& policy, const std::string& path) {
          write_batch(batch, policy, path);
        });
  m.def("read_batch", [](const std::string& path) {
    ReadBatchResult result = read_batch(path);
    py::object policy = py::cast(std::move(result.policy));
    py::object batch = py::cast(std::move(*result.batch));
    return py::make_tuple(std::move(policy), std::move(batch));
  });

  m.def("run_bandit_oracle", [](double resolution) {
    const BanditOracleReport r = run_bandit_oracle(resolution);
    py::dict d;
    d["theta_star"] = r.theta_star;
    d["jhat_star"] = r.jhat_star;
    d["theta_final"] = r.theta_final;
    d["jhat_final"] = r.jhat_final;
    d["param_gap"] = r.param_gap;
    d["value_gap"] = r.value_gap;
    d["flat_objective"] = r.flat_objective;
    return d;
  });
}
