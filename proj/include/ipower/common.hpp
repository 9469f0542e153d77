#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipower {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// Raised when an importance ratio would overflow before capping.
class NonFiniteWeightError : public Error {
 public:
  NonFiniteWeightError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Raised when an exponent in the exp-branch of a surrogate exceeds the
/// overflow guard; silently truncating it would invalidate the bound.
class ExponentOverflowError : public Error {
 public:
  ExponentOverflowError(std::size_t index, double exponent, const std::string& what)
      : Error(what), index_(index), exponent_(exponent) {}
  std::size_t index() const { return index_; }
  double exponent() const { return exponent_; }

 private:
  std::size_t index_;
  double exponent_;
};

class NegativeEffectiveRewardError : public Error {
 public:
  NegativeEffectiveRewardError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

class LogProbMismatchError : public Error {
 public:
  LogProbMismatchError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class MalformedRecordError : public Error {
 public:
  MalformedRecordError(std::size_t line, const std::string& what)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SingularHessianError : public Error {
 public:
  using Error::Error;
};

class MissingAuxSignalError : public Error {
 public:
  using Error::Error;
};

class DualDivergenceError : public Error {
 public:
  using Error::Error;
};

/// Deterministic random stream. The uniform draw is built directly from the
/// mt19937_64 output so results are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 mix of a path of indices into a base seed. Used to derive
/// independent per-rollout / per-cell streams so parallel and serial
/// generation agree.
std::uint64_t derive_seed(std::uint64_t base, std::span<const std::uint64_t> path);
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Fixed-order pairwise reduction; the summation order is part of the
// cross-run determinism contract for all batch reductions.
template <typename T>
T pairwise_reduce(std::vector<T> terms) {
  if (terms.empty()) throw Error("pairwise_reduce: empty input");
  std::size_t n = terms.size();
  while (n > 1) {
    std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) terms[i] = terms[2 * i] + terms[2 * i + 1];
    if (n % 2 != 0) {
      terms[half] = terms[n - 1];
      ++half;
    }
    n = half;
  }
  return terms[0];
}

double pairwise_sum(std::span<const double> values);

std::string version_string();

}  // namespace ipower
