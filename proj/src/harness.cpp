#include "ipower/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace ipower {

using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void validate(const ExperimentConfig& config) {
  if (config.num_batches < 1 || config.rollouts_per_batch < 1 || config.rollout_length < 1 ||
      config.repetitions < 1)
    throw Error("ExperimentConfig: all counts must be >= 1");
  if (config.t_values.empty()) throw Error("ExperimentConfig: t_values must be nonempty");
  for (int t : config.t_values)
    if (t < 1) throw Error("ExperimentConfig: T values must be >= 1");
  if (config.cv_fractions.empty()) throw Error("ExperimentConfig: cv_fractions must be nonempty");
  for (double cv : config.cv_fractions)
    if (!(cv >= 0.0 && cv <= 1.0)) throw Error("ExperimentConfig: cv fractions must lie in [0, 1]");
  if (config.weight_cap && !(*config.weight_cap > 0.0))
    throw Error("ExperimentConfig: weight_cap must be positive");
  validate(config.newton);
  validate(config.physics);
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int thread_count_from_env(std::size_t work_items) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("IPOWER_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 1) threads = static_cast<int>(parsed);
  }
  threads = std::max(1, threads);
  return static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(work_items, 1)));
}

// One (T, cv, repetition) cell: num_batches rounds of gather + retrain.
std::vector<CurveCell> run_cell(const ExperimentConfig& config, int t_value, double cv_fraction,
                                int repetition) {
  LogisticPolicy policy(4);
  PolicyParams theta{Vector::Zero(4)};
  std::vector<CurveCell> rows;
  rows.reserve(static_cast<std::size_t>(config.num_batches));
  bool failed = false;

  for (int batch_index = 1; batch_index <= config.num_batches; ++batch_index) {
    CurveCell row;
    row.t = t_value;
    row.cv_fraction = cv_fraction;
    row.repetition = repetition;
    row.batch = batch_index;
    if (failed) {
      row.failed = true;
      row.mean_return = kNan;
      row.surrogate_value = kNan;
      row.ess = kNan;
      row.weight_max = kNan;
      rows.push_back(row);
      continue;
    }
    try {
      std::vector<Rollout> rollouts;
      rollouts.reserve(static_cast<std::size_t>(config.rollouts_per_batch));
      std::vector<double> returns(static_cast<std::size_t>(config.rollouts_per_batch));
      for (int r = 0; r < config.rollouts_per_batch; ++r) {
        // seeds are independent of T and cv so the first batch matches
        // across cells and later batches share randomness where theta agrees
        RandomStream rng(derive_seed(config.base_seed,
                                     {static_cast<std::uint64_t>(repetition),
                                      static_cast<std::uint64_t>(batch_index),
                                      static_cast<std::uint64_t>(r)}));
        rollouts.push_back(
            run_cartpole_rollout(policy, theta, config.rollout_length, rng, config.physics));
        returns[static_cast<std::size_t>(r)] = rollouts.back().reward;
      }
      row.mean_return =
          pairwise_sum(returns) / static_cast<double>(config.rollouts_per_batch);

      LoggedBatch batch(policy, std::move(rollouts), theta);
      IterPowerConfig opt;
      opt.iterations = t_value;
      opt.newton = config.newton;
      opt.estimator.weight_cap = config.weight_cap;
      opt.estimator.cv_fraction = cv_fraction;
      opt.recompute_cv_each_iteration = true;
      opt.branch_rule = config.branch_rule;
      const OptimizationReport report = iterative_power(policy, batch, opt);
      const IterationRecord& last = report.iterations.back();
      row.surrogate_value = last.surrogate_value;
      row.ess = last.ess;
      row.weight_max = last.weight_max;
      theta = report.final_params;
    } catch (const Error&) {
      row.failed = true;
      failed = true;
      row.surrogate_value = kNan;
      row.ess = kNan;
      row.weight_max = kNan;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

CurveResult run_learning_curve(const ExperimentConfig& config) {
  validate(config);

  struct CellKey {
    int t;
    double cv;
    int repetition;
  };
  std::vector<CellKey> keys;
  for (int t : config.t_values)
    for (double cv : config.cv_fractions)
      for (int rep = 0; rep < config.repetitions; ++rep) keys.push_back({t, cv, rep});

  std::vector<std::vector<CurveCell>> per_cell(keys.size());
  const int threads = thread_count_from_env(keys.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      per_cell[i] = run_cell(config, keys[i].t, keys[i].cv, keys[i].repetition);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= keys.size()) return;
        per_cell[i] = run_cell(config, keys[i].t, keys[i].cv, keys[i].repetition);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  CurveResult result;
  for (const auto& rows : per_cell)
    result.cells.insert(result.cells.end(), rows.begin(), rows.end());
  return result;
}

std::string curve_to_csv(const CurveResult& result) {
  std::ostringstream out;
  out << "T,cv,repetition,batch,status,mean_return,surrogate_value,ess,weight_max\n";
  for (const CurveCell& cell : result.cells) {
    out << cell.t << ',' << format_double(cell.cv_fraction) << ',' << cell.repetition << ','
        << cell.batch << ',' << (cell.failed ? "failed" : "ok") << ','
        << format_double(cell.mean_return) << ',' << format_double(cell.surrogate_value) << ','
        << format_double(cell.ess) << ',' << format_double(cell.weight_max) << '\n';
  }
  return out.str();
}

std::string curve_aggregate_csv(const CurveResult& result) {
  struct Key {
    int t;
    double cv;
    int batch;
    bool operator<(const Key& other) const {
      if (t != other.t) return t < other.t;
      if (cv != other.cv) return cv < other.cv;
      return batch < other.batch;
    }
  };
  std::map<Key, std::vector<double>> groups;
  for (const CurveCell& cell : result.cells)
    if (!cell.failed) groups[{cell.t, cell.cv_fraction, cell.batch}].push_back(cell.mean_return);

  std::ostringstream out;
  out << "T,cv,batch,repetitions,mean_return_mean,mean_return_std\n";
  for (const auto& [key, values] : groups) {
    const double mean = pairwise_sum(values) / static_cast<double>(values.size());
    double stddev = 0.0;
    if (values.size() > 1) {
      std::vector<double> sq(values.size());
      for (std::size_t i = 0; i < values.size(); ++i)
        sq[i] = (values[i] - mean) * (values[i] - mean);
      stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
    }
    out << key.t << ',' << format_double(key.cv) << ',' << key.batch << ',' << values.size()
        << ',' << format_double(mean) << ',' << format_double(stddev) << '\n';
  }
  return out.str();
}

std::string run_manifest_json(const ExperimentConfig& config) {
  json j;
  j["manifest_version"] = 1;
  j["tool"] = "ipower";
  j["code_version"] = version_string();
  j["csv_schema_version"] = kCurveCsvSchemaVersion;
  j["base_seed"] = config.base_seed;
  json cfg;
  cfg["num_batches"] = config.num_batches;
  cfg["rollouts_per_batch"] = config.rollouts_per_batch;
  cfg["rollout_length"] = config.rollout_length;
  cfg["repetitions"] = config.repetitions;
  cfg["t_values"] = config.t_values;
  cfg["cv_fractions"] = config.cv_fractions;
  if (config.weight_cap)
    cfg["weight_cap"] = *config.weight_cap;
  else
    cfg["weight_cap"] = nullptr;
  cfg["newton_steps"] = config.newton.steps_per_iteration;
  cfg["newton_ridge"] = config.newton.ridge;
  cfg["newton_max_step_norm"] = config.newton.max_step_norm;
  cfg["branch_rule"] = config.branch_rule == BranchRule::kMixed ? "mixed" : "lower_only";
  j["config"] = std::move(cfg);
  return j.dump(2) + "\n";
}

CellStats batch_stats(const CurveResult& result, int t, double cv_fraction, int batch) {
  std::vector<double> values;
  for (const CurveCell& cell : result.cells)
    if (cell.t == t && cell.cv_fraction == cv_fraction && cell.batch == batch && !cell.failed)
      values.push_back(cell.mean_return);
  CellStats stats;
  stats.count = static_cast<int>(values.size());
  if (values.empty()) return stats;
  stats.mean = pairwise_sum(values) / static_cast<double>(values.size());
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      sq[i] = (values[i] - stats.mean) * (values[i] - stats.mean);
    stats.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
  }
  return stats;
}

BanditFixture make_mixed_sign_bandit() {
  BanditFixture fixture;
  fixture.policy = std::make_unique<LogisticPolicy>(1);
  const PolicyParams theta0{Vector::Zero(1)};

  auto one_step = [&](double state_value, int action, double reward) {
    Rollout rollout;
    Vector s(1);
    s << state_value;
    rollout.steps.push_back(StepObservation{s, action});
    rollout.reward = reward;
    rollout.log_prob_logging =
        fixture.policy->log_prob_rollout(theta0, rollout.steps);
    return rollout;
  };

  std::vector<Rollout> rollouts;
  rollouts.push_back(one_step(1.0, 1, -1.0));
  rollouts.push_back(one_step(3.0, 1, 1.0));
  fixture.batch =
      std::make_unique<LoggedBatch>(*fixture.policy, std::move(rollouts), theta0);
  return fixture;
}

BanditOracleReport bandit_oracle_on_batch(const PolicyFamily& policy, const LoggedBatch& batch,
                                          double resolution, const IterPowerConfig& config) {
  if (!(resolution > 0.0)) throw Error("bandit_oracle_on_batch: resolution must be positive");
  if (policy.dim() != 1)
    throw DimensionMismatchError("bandit_oracle_on_batch: scalar policies only");

  EstimatorConfig plain;  // uncapped, unshifted
  BanditOracleReport report;
  const double lo = -6.0;
  const double hi = 6.0;
  const auto points = static_cast<std::size_t>(std::floor((hi - lo) / resolution)) + 1;
  double best_theta = lo;
  double best_value = -std::numeric_limits<double>::infinity();
  double worst_value = std::numeric_limits<double>::infinity();
  Vector probe(1);
  for (std::size_t k = 0; k < points; ++k) {
    const double theta = std::min(hi, lo + static_cast<double>(k) * resolution);
    probe << theta;
    const double value = j_hat(policy, batch, PolicyParams{probe}, plain);
    if (value > best_value) {
      best_value = value;
      best_theta = theta;
    }
    worst_value = std::min(worst_value, value);
  }
  report.theta_star = best_theta;
  report.jhat_star = best_value;
  report.flat_objective =
      best_value - worst_value <= 1e-12 * std::max(1.0, std::abs(best_value));

  const OptimizationReport opt = iterative_power(policy, batch, config);
  report.theta_final = opt.final_params.theta[0];
  probe << report.theta_final;
  report.jhat_final = j_hat(policy, batch, PolicyParams{probe}, plain);
  report.param_gap = std::abs(report.theta_final - report.theta_star);
  report.value_gap = std::abs(report.jhat_final - report.jhat_star);
  return report;
}

BanditOracleReport run_bandit_oracle(double resolution) {
  const BanditFixture fixture = make_mixed_sign_bandit();
  IterPowerConfig config;
  config.iterations = 50;
  config.estimator.weight_cap = std::nullopt;
  config.estimator.cv_fraction = 0.0;
  config.branch_rule = BranchRule::kMixed;
  return bandit_oracle_on_batch(*fixture.policy, *fixture.batch, resolution, config);
}

namespace {

json iteration_to_json(int t, const IterationRecord& rec) {
  json j;
  j["t"] = t;
  j["theta"] = std::vector<double>(rec.theta.theta.begin(), rec.theta.theta.end());
  j["surrogate_value"] = rec.surrogate_value;
  j["j_hat"] = rec.j_hat_value;
  j["ess"] = rec.ess;
  j["weight_max"] = rec.weight_max;
  j["control_variate"] = rec.control_variate;
  j["reward_shift"] = rec.reward_shift;
  j["newton_exhausted"] = rec.newton_exhausted;
  if (rec.constraint_gap) j["constraint_gap"] = *rec.constraint_gap;
  if (rec.multiplier) j["multiplier"] = *rec.multiplier;
  return j;
}

}  // namespace

OptimizeFileOutcome optimize_batch_file(const std::string& input_path,
                                        const OptimizeFileOptions& options,
                                        const std::string& report_path,
                                        const std::string& params_path) {
  const ReadBatchResult input = read_batch(input_path);
  validate(options.optimizer);

  OptimizeFileOutcome outcome;
  if (options.constraint_target) {
    outcome.report = constrained_iterative_power(*input.policy, *input.batch, options.optimizer,
                                                 *options.constraint_target, options.multiplier);
    const double tolerance = options.multiplier.gap_tolerance_rel *
                             std::max(std::abs(*options.constraint_target), 1.0);
    const std::optional<double> gap = outcome.report.iterations.back().constraint_gap;
    outcome.constraint_met = gap && std::abs(*gap) <= tolerance;
  } else {
    outcome.report = iterative_power(*input.policy, *input.batch, options.optimizer);
  }

  std::ofstream report_out(report_path);
  if (!report_out) throw IoError("optimize_batch_file: cannot open " + report_path);
  json header;
  header["schema_version"] = 1;
  header["kind"] = "optimization_report";
  header["iterations"] = outcome.report.iterations.size();
  header["constrained"] = options.constraint_target.has_value();
  header["final_theta"] = std::vector<double>(outcome.report.final_params.theta.begin(),
                                              outcome.report.final_params.theta.end());
  report_out << header.dump() << '\n';
  for (std::size_t t = 0; t < outcome.report.iterations.size(); ++t)
    report_out << iteration_to_json(static_cast<int>(t) + 1, outcome.report.iterations[t]).dump()
               << '\n';
  if (!report_out) throw IoError("optimize_batch_file: failed writing " + report_path);
  report_out.close();

  write_params(outcome.report.final_params, input.policy->name(), params_path);
  return outcome;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_experiment_config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config file parse error: ") + e.what());
  }
  if (!j.contains("config_version") || j["config_version"].get<int>() != 1)
    throw SchemaError("config file must declare config_version 1");

  ExperimentConfig config;
  const json known = {"config_version", "num_batches",  "rollouts_per_batch",
                      "rollout_length", "repetitions",  "t_values",
                      "cv_fractions",   "weight_cap",   "base_seed",
                      "newton_steps",   "newton_ridge", "newton_max_step_norm"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SchemaError("config file: unknown key \"" + key + "\"");
    (void)value;
  }
  if (j.contains("num_batches")) config.num_batches = j["num_batches"].get<int>();
  if (j.contains("rollouts_per_batch"))
    config.rollouts_per_batch = j["rollouts_per_batch"].get<int>();
  if (j.contains("rollout_length")) config.rollout_length = j["rollout_length"].get<int>();
  if (j.contains("repetitions")) config.repetitions = j["repetitions"].get<int>();
  if (j.contains("t_values")) config.t_values = j["t_values"].get<std::vector<int>>();
  if (j.contains("cv_fractions"))
    config.cv_fractions = j["cv_fractions"].get<std::vector<double>>();
  if (j.contains("weight_cap")) {
    if (j["weight_cap"].is_null())
      config.weight_cap = std::nullopt;
    else
      config.weight_cap = j["weight_cap"].get<double>();
  }
  if (j.contains("base_seed")) config.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("newton_steps")) config.newton.steps_per_iteration = j["newton_steps"].get<int>();
  if (j.contains("newton_ridge")) config.newton.ridge = j["newton_ridge"].get<double>();
  if (j.contains("newton_max_step_norm"))
    config.newton.max_step_norm = j["newton_max_step_norm"].get<double>();
  validate(config);
  return config;
}

}  // namespace ipower
