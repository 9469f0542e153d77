#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ipower/cartpole.hpp"
#include "ipower/logio.hpp"
#include "ipower/optimizer.hpp"

namespace ipower {

/// Batched learning-curve protocol: repetitions x (T, cv) cells, each cell
/// running num_batches rounds of gather-then-retrain on the cartpole
/// simulator. Rollout seeds depend only on (repetition, batch, rollout), so
/// the first batch is identical across cells and comparisons share random
/// numbers.
struct ExperimentConfig {
  int num_batches = 10;
  int rollouts_per_batch = 25;
  int rollout_length = 400;
  int repetitions = 20;
  std::vector<int> t_values = {1, 2, 5, 10, 20};
  std::vector<double> cv_fractions = {0.0, 0.99};
  std::optional<double> weight_cap = 20.0;
  std::uint64_t base_seed = 12061;
  // heavier damping than the optimizer's generic default: 25-rollout batches
  // produce noisy curvature, and the experiment is stable this way
  NewtonConfig newton{.ridge = 100.0};
  BranchRule branch_rule = BranchRule::kMixed;
  CartpolePhysics physics;
};

void validate(const ExperimentConfig& config);

inline constexpr int kCurveCsvSchemaVersion = 1;

struct CurveCell {
  int t = 0;
  double cv_fraction = 0.0;
  int repetition = 0;
  int batch = 0;
  bool failed = false;
  double mean_return = 0.0;
  double surrogate_value = 0.0;
  double ess = 0.0;
  double weight_max = 0.0;
};

struct CurveResult {
  std::vector<CurveCell> cells;  // one row per (T, cv, repetition, batch)
};

/// Runs the full experiment. Cells are independent and run in parallel when
/// IPOWER_THREADS allows; the output is byte-identical regardless of thread
/// count.
CurveResult run_learning_curve(const ExperimentConfig& config);

std::string curve_to_csv(const CurveResult& result);
/// Per-(T, cv, batch) mean and standard deviation of the return across
/// repetitions, the quantities the learning-curve figures aggregate.
std::string curve_aggregate_csv(const CurveResult& result);
std::string run_manifest_json(const ExperimentConfig& config);

struct CellStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over repetitions
  int count = 0;
};

/// Aggregates mean_return over repetitions for one (T, cv, batch) cell.
CellStats batch_stats(const CurveResult& result, int t, double cv_fraction, int batch);

struct BanditOracleReport {
  double theta_star = 0.0;   // grid-search argmax
  double jhat_star = 0.0;
  double theta_final = 0.0;  // optimizer result
  double jhat_final = 0.0;
  double param_gap = 0.0;
  double value_gap = 0.0;
  bool flat_objective = false;
};

struct BanditFixture {
  std::unique_ptr<PolicyFamily> policy;
  std::unique_ptr<LoggedBatch> batch;
};

/// The fixed mixed-sign scalar bandit used by the oracle check: two
/// one-step rollouts logged under theta_0 = 0 whose estimator has an
/// interior maximum.
BanditFixture make_mixed_sign_bandit();

/// Grid-searches j_hat over theta in [-6, 6] at the given resolution and
/// compares against the optimizer run.
BanditOracleReport bandit_oracle_on_batch(const PolicyFamily& policy, const LoggedBatch& batch,
                                          double resolution, const IterPowerConfig& config);

/// Oracle check on the built-in bandit, uncapped, T = 50.
BanditOracleReport run_bandit_oracle(double resolution);

struct OptimizeFileOptions {
  IterPowerConfig optimizer;
  std::optional<double> constraint_target;
  MultiplierConfig multiplier;
};

struct OptimizeFileOutcome {
  OptimizationReport report;
  bool constraint_met = true;  // always true for unconstrained runs
};

/// Reads a batch file, optimizes it, writes the per-iteration report as
/// line-delimited records and the final parameters as a header-style file.
OptimizeFileOutcome optimize_batch_file(const std::string& input_path,
                                        const OptimizeFileOptions& options,
                                        const std::string& report_path,
                                        const std::string& params_path);

/// Versioned JSON config file for the experiment CLI.
ExperimentConfig load_experiment_config(const std::string& path);

/// Quick property suites runnable from the CLI; prints one line per suite.
bool run_selftest(std::ostream& out);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

}  // namespace ipower
