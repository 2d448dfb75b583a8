#pragma once

#include <cstdint>
#include <string_view>

namespace ols {

/// Counter-based generator (splitmix64 finalizer over key+counter). Streams
/// are split by label or index so independent consumers never share a
/// sequence, and results are identical across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::uint64_t index) const;
  Rng split(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform in the open interval (0, 1); never returns 0 or 1 exactly.
  double uniform_open01();
  /// Standard normal via Box-Muller (two uniforms per draw).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  Rng(std::uint64_t key, int /*raw tag*/) : key_(key) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ols
