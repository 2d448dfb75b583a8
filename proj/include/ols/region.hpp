#pragma once

#include <cstdint>
#include <vector>

#include "ols/intervals.hpp"
#include "ols/rng.hpp"
#include "ols/tensor.hpp"

namespace ols {

/// L-inf ball of radius delta around a reference image, clipped to the
/// model's pixel domain.
struct ContinuousBox {
  Tensor reference;
  double radius = 0.0;
  double domain_lo = -1.0;
  double domain_hi = 1.0;

  ContinuousBox() = default;
  ContinuousBox(Tensor reference_in, double radius_in, double domain_lo_in = -1.0,
                double domain_hi_in = 1.0);

  Box box() const;
  /// Per-coordinate clip into [max(x-delta, lo), min(x+delta, hi)].
  Tensor project(const Tensor& candidate) const;
  bool contains(const Tensor& candidate, double tol = 0.0) const;
};

/// Token-substitution budget: sequences of the same length within Hamming
/// distance ceil(delta * n) of the reference. `positions` is the index set
/// (size exactly ceil(delta*n)) a position-based attack may touch.
struct DiscreteBudget {
  std::vector<std::int64_t> reference;
  double fraction = 0.0;
  std::vector<std::int64_t> positions;

  static DiscreteBudget make(std::vector<std::int64_t> reference, double fraction, Rng& rng);
  std::int64_t budget() const;
  bool contains(const std::vector<std::int64_t>& candidate) const;
  std::int64_t hamming(const std::vector<std::int64_t>& candidate) const;
};

/// A sequence in S(x, delta): same length, at most ceil(delta*n) positions
/// resampled uniformly from the vocabulary.
std::vector<std::int64_t> sample_discrete_neighbor(const std::vector<std::int64_t>& reference,
                                                   double delta, std::int64_t vocab_size,
                                                   Rng& rng);

}  // namespace ols
