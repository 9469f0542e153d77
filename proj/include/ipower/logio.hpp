#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "ipower/trajectory.hpp"

namespace ipower {

/// Header line of a batch file. Line-delimited format: the header object on
/// the first line, then one rollout object per line. Reals round-trip
/// bit-exact.
struct BatchFileHeader {
  int schema_version = 1;
  std::string policy_family;
  int param_dim = 0;
  Vector logging_theta;
};

inline constexpr int kBatchSchemaVersion = 1;

std::unique_ptr<PolicyFamily> make_policy_family(const std::string& name, Eigen::Index dim);

/// Streaming writer: header immediately, rollouts as appended.
class BatchWriter {
 public:
  BatchWriter(std::ostream& out, const BatchFileHeader& header);
  void append(const Rollout& rollout);

 private:
  std::ostream* out_;
};

void write_batch(const LoggedBatch& batch, const PolicyFamily& policy, std::ostream& out);
void write_batch(const LoggedBatch& batch, const PolicyFamily& policy, const std::string& path);

struct ReadBatchResult {
  BatchFileHeader header;
  std::unique_ptr<PolicyFamily> policy;
  std::unique_ptr<LoggedBatch> batch;
};

/// Reads and validates a batch file; re-verifies every stored logging
/// log-probability against the steps (tolerance 1e-6).
ReadBatchResult read_batch(std::istream& in);
ReadBatchResult read_batch(const std::string& path);

/// Header-style parameter file: a single header object whose logging_theta
/// holds the parameters.
void write_params(const PolicyParams& params, const std::string& family_name,
                  const std::string& path);
PolicyParams read_params(const std::string& path);

}  // namespace ipower
