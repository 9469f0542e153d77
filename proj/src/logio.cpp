#include "ipower/logio.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ipower {

using nlohmann::json;

namespace {

json header_to_json(const BatchFileHeader& header) {
  json j;
  j["schema_version"] = header.schema_version;
  j["policy_family"] = header.policy_family;
  j["param_dim"] = header.param_dim;
  j["logging_theta"] = std::vector<double>(header.logging_theta.begin(),
                                           header.logging_theta.end());
  return j;
}

BatchFileHeader header_from_json(const json& j) {
  BatchFileHeader header;
  header.schema_version = j.at("schema_version").get<int>();
  header.policy_family = j.at("policy_family").get<std::string>();
  header.param_dim = j.at("param_dim").get<int>();
  const auto theta = j.at("logging_theta").get<std::vector<double>>();
  header.logging_theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  if (header.schema_version != kBatchSchemaVersion)
    throw SchemaError("unsupported schema_version " + std::to_string(header.schema_version));
  if (header.param_dim != static_cast<int>(theta.size()))
    throw SchemaError("param_dim " + std::to_string(header.param_dim) +
                      " does not match logging_theta length " + std::to_string(theta.size()));
  return header;
}

json rollout_to_json(const Rollout& rollout) {
  json steps = json::array();
  for (const StepObservation& obs : rollout.steps) {
    json step;
    step["state"] = std::vector<double>(obs.state.begin(), obs.state.end());
    step["action"] = obs.action;
    steps.push_back(std::move(step));
  }
  json j;
  j["steps"] = std::move(steps);
  j["reward"] = rollout.reward;
  j["aux_signal"] = rollout.aux_signal ? json(*rollout.aux_signal) : json(nullptr);
  j["log_prob_logging"] = rollout.log_prob_logging;
  return j;
}

Rollout rollout_from_json(const json& j, int param_dim, std::size_t line) {
  Rollout rollout;
  for (const json& step : j.at("steps")) {
    StepObservation obs;
    const auto state = step.at("state").get<std::vector<double>>();
    if (static_cast<int>(state.size()) != param_dim)
      throw DimensionMismatchError("line " + std::to_string(line) + ": state dimension " +
                                   std::to_string(state.size()) + " does not match param_dim " +
                                   std::to_string(param_dim));
    obs.state = Eigen::Map<const Vector>(state.data(), static_cast<Eigen::Index>(state.size()));
    obs.action = step.at("action").get<int>();
    rollout.steps.push_back(std::move(obs));
  }
  rollout.reward = j.at("reward").get<double>();
  if (!j.at("aux_signal").is_null()) rollout.aux_signal = j.at("aux_signal").get<double>();
  rollout.log_prob_logging = j.at("log_prob_logging").get<double>();
  return rollout;
}

}  // namespace

std::unique_ptr<PolicyFamily> make_policy_family(const std::string& name, Eigen::Index dim) {
  if (name == LogisticPolicy::kFamilyName) return std::make_unique<LogisticPolicy>(dim);
  throw SchemaError("unknown policy family \"" + name + "\"");
}

BatchWriter::BatchWriter(std::ostream& out, const BatchFileHeader& header) : out_(&out) {
  if (header.param_dim != static_cast<int>(header.logging_theta.size()))
    throw SchemaError("BatchWriter: param_dim does not match logging_theta length");
  *out_ << header_to_json(header).dump() << '\n';
  if (!*out_) throw IoError("BatchWriter: failed to write header");
}

void BatchWriter::append(const Rollout& rollout) {
  *out_ << rollout_to_json(rollout).dump() << '\n';
  if (!*out_) throw IoError("BatchWriter: failed to write rollout record");
}

void write_batch(const LoggedBatch& batch, const PolicyFamily& policy, std::ostream& out) {
  BatchFileHeader header;
  header.schema_version = kBatchSchemaVersion;
  header.policy_family = policy.name();
  header.param_dim = static_cast<int>(batch.logging_params().dim());
  header.logging_theta = batch.logging_params().theta;
  BatchWriter writer(out, header);
  for (const Rollout& rollout : batch.rollouts()) writer.append(rollout);
}

void write_batch(const LoggedBatch& batch, const PolicyFamily& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_batch: cannot open " + path + " for writing");
  write_batch(batch, policy, out);
  out.flush();
  if (!out) throw IoError("write_batch: failed writing " + path);
}

ReadBatchResult read_batch(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedRecordError(1, "missing header line");
  ReadBatchResult result;
  try {
    result.header = header_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw MalformedRecordError(1, std::string("malformed header: ") + e.what());
  }
  result.policy = make_policy_family(result.header.policy_family, result.header.param_dim);

  std::vector<Rollout> rollouts;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      rollouts.push_back(rollout_from_json(json::parse(line), result.header.param_dim, line_number));
    } catch (const json::exception& e) {
      throw MalformedRecordError(line_number, "line " + std::to_string(line_number) +
                                                  ": malformed record: " + e.what());
    }
  }
  if (rollouts.empty()) throw EmptyBatchError("batch file contains no rollout records");

  PolicyParams logging_params{result.header.logging_theta};
  result.batch = std::make_unique<LoggedBatch>(*result.policy, std::move(rollouts),
                                               std::move(logging_params),
                                               /*verify_tolerance=*/1e-6);
  return result;
}

ReadBatchResult read_batch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_batch: cannot open " + path);
  return read_batch(in);
}

void write_params(const PolicyParams& params, const std::string& family_name,
                  const std::string& path) {
  BatchFileHeader header;
  header.schema_version = kBatchSchemaVersion;
  header.policy_family = family_name;
  header.param_dim = static_cast<int>(params.dim());
  header.logging_theta = params.theta;
  std::ofstream out(path);
  if (!out) throw IoError("write_params: cannot open " + path + " for writing");
  out << header_to_json(header).dump() << '\n';
  if (!out) throw IoError("write_params: failed writing " + path);
}

PolicyParams read_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_params: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw MalformedRecordError(1, "missing parameter header line");
  try {
    const BatchFileHeader header = header_from_json(json::parse(line));
    return PolicyParams{header.logging_theta};
  } catch (const json::exception& e) {
    throw MalformedRecordError(1, std::string("malformed parameter file: ") + e.what());
  }
}

}  // namespace ipower
