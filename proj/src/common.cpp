#include "ipower/common.hpp"

namespace ipower {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::span<const std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t component : path) s = splitmix64(s ^ splitmix64(component));
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return derive_seed(base, std::span<const std::uint64_t>(path.begin(), path.size()));
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_reduce(std::vector<double>(values.begin(), values.end()));
}

std::string version_string() {
#ifdef IPOWER_VERSION
  return IPOWER_VERSION;
#else
  return "0.0.0";
#endif
}

}  // namespace ipower
