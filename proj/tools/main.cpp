#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ipower/harness.hpp"

namespace {

int run_curve(const std::string& config_path, ipower::ExperimentConfig config,
              const std::string& out_path) {
  if (!config_path.empty()) config = ipower::load_experiment_config(config_path);
  const ipower::CurveResult result = ipower::run_learning_curve(config);

  const std::string csv = ipower::curve_to_csv(result);
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw ipower::IoError("cannot open " + out_path + " for writing");
    out << csv;
    const std::string aggregate_path = out_path + ".aggregate.csv";
    std::ofstream aggregate(aggregate_path);
    if (!aggregate) throw ipower::IoError("cannot open " + aggregate_path + " for writing");
    aggregate << ipower::curve_aggregate_csv(result);
    const std::string manifest_path = out_path + ".manifest.json";
    std::ofstream manifest(manifest_path);
    if (!manifest) throw ipower::IoError("cannot open " + manifest_path + " for writing");
    manifest << ipower::run_manifest_json(config);
    std::cerr << "wrote " << out_path << ", " << aggregate_path << " and " << manifest_path
              << "\n";
  }
  return 0;
}

int run_oracle(double resolution, int iterations) {
  ipower::BanditFixture fixture = ipower::make_mixed_sign_bandit();
  ipower::IterPowerConfig config;
  config.iterations = iterations;
  config.estimator.weight_cap = std::nullopt;
  const ipower::BanditOracleReport report =
      ipower::bandit_oracle_on_batch(*fixture.policy, *fixture.batch, resolution, config);
  std::cout << "grid argmax theta*: " << ipower::format_double(report.theta_star)
            << "  j_hat(theta*): " << ipower::format_double(report.jhat_star) << "\n";
  std::cout << "optimizer theta_T:  " << ipower::format_double(report.theta_final)
            << "  j_hat(theta_T): " << ipower::format_double(report.jhat_final) << "\n";
  std::cout << "|theta_T - theta*|: " << ipower::format_double(report.param_gap)
            << "  |j_hat gap|: " << ipower::format_double(report.value_gap) << "\n";
  if (report.flat_objective) std::cout << "note: objective is flat over the grid\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy policy optimization via iterated concave surrogate bounds"};
  app.require_subcommand(1);

  // curve
  auto* curve = app.add_subcommand("curve", "Cartpole batched learning-curve experiment");
  ipower::ExperimentConfig experiment;
  std::string curve_config_path;
  std::string curve_out;
  double curve_cap = 20.0;
  bool curve_no_cap = false;
  curve->add_option("--config", curve_config_path, "JSON config file (config_version 1)");
  curve->add_option("--num-batches", experiment.num_batches, "Batches per repetition");
  curve->add_option("--rollouts-per-batch", experiment.rollouts_per_batch, "Rollouts per batch");
  curve->add_option("--rollout-length", experiment.rollout_length, "Maximum steps per rollout");
  curve->add_option("--repetitions", experiment.repetitions, "Independent repetitions");
  curve->add_option("--t-values", experiment.t_values, "Iteration counts T to sweep");
  curve->add_option("--cv-fractions", experiment.cv_fractions, "Control-variate fractions");
  curve->add_option("--weight-cap", curve_cap, "Importance weight cap");
  curve->add_flag("--no-weight-cap", curve_no_cap, "Disable the importance weight cap");
  curve->add_option("--base-seed", experiment.base_seed, "Base seed for all streams");
  curve->add_option("--out", curve_out, "Output CSV path ('-' for stdout)");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Scalar bandit grid-search check");
  double resolution = 1e-4;
  int oracle_iterations = 50;
  oracle->add_option("--resolution", resolution, "Grid resolution over [-6, 6]");
  oracle->add_option("--iterations", oracle_iterations, "Optimizer iterations T");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Optimize a logged batch file");
  std::string in_path, report_path, params_path;
  ipower::OptimizeFileOptions options;
  double opt_cap = 20.0;
  bool opt_no_cap = false;
  double constraint_target = 0.0;
  optimize->add_option("--input", in_path, "Input batch file")->required();
  optimize->add_option("--report-out", report_path, "Output report path")->required();
  optimize->add_option("--params-out", params_path, "Output parameter file")->required();
  optimize->add_option("--iterations", options.optimizer.iterations, "Iterations T");
  optimize->add_option("--newton-steps", options.optimizer.newton.steps_per_iteration,
                       "Newton steps per iteration");
  optimize->add_option("--ridge", options.optimizer.newton.ridge, "Hessian regularization");
  optimize->add_option("--max-step-norm", options.optimizer.newton.max_step_norm,
                       "Newton step clamp");
  optimize->add_option("--weight-cap", opt_cap, "Importance weight cap");
  optimize->add_flag("--no-weight-cap", opt_no_cap, "Disable the importance weight cap");
  optimize->add_option("--cv-fraction", options.optimizer.estimator.cv_fraction,
                       "Fraction of the variance-optimal control variate");
  auto* constraint_opt = optimize->add_option(
      "--constraint-target", constraint_target, "Equality target for the aux signal (enables constrained mode)");
  optimize->add_option("--dual-step-scale", options.multiplier.step_scale,
                       "Dual step scale (eta = scale / max(|S0|, 1e-6))");
  optimize->add_option("--max-dual-steps", options.multiplier.max_dual_steps,
                       "Dual steps per iteration");
  optimize->add_option("--constraint-tolerance", options.multiplier.gap_tolerance_rel,
                       "Relative constraint gap tolerance");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the built-in property suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (curve->parsed()) {
      experiment.weight_cap = curve_no_cap ? std::nullopt : std::optional<double>(curve_cap);
      return run_curve(curve_config_path, experiment, curve_out);
    }
    if (oracle->parsed()) return run_oracle(resolution, oracle_iterations);
    if (optimize->parsed()) {
      options.optimizer.estimator.weight_cap =
          opt_no_cap ? std::nullopt : std::optional<double>(opt_cap);
      if (*constraint_opt) options.constraint_target = constraint_target;
      const ipower::OptimizeFileOutcome outcome =
          ipower::optimize_batch_file(in_path, options, report_path, params_path);
      const auto& last = outcome.report.iterations.back();
      std::cout << "final j_hat: " << ipower::format_double(last.j_hat_value)
                << "  ess: " << ipower::format_double(last.ess) << "\n";
      if (options.constraint_target) {
        std::cout << "constraint gap: " << ipower::format_double(*last.constraint_gap)
                  << (outcome.constraint_met ? " (within tolerance)" : " (NOT within tolerance)")
                  << "\n";
        if (!outcome.constraint_met) return 1;
      }
      return 0;
    }
    if (selftest->parsed()) return ipower::run_selftest(std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
