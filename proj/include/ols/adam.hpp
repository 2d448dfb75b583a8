#pragma once

#include <cstdint>
#include <vector>

#include "ols/tensor.hpp"

namespace ols {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moments plus the shared step counter.
/// Single-owner mutable; one state drives one parameter list.
struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m, v;

  explicit AdamState(AdamConfig config = {}) : cfg(config) {}
  void init(const std::vector<Tensor>& params);
  bool initialized() const { return !m.empty(); }
};

/// Standard bias-corrected Adam update, in place. Returns false and leaves
/// the parameters untouched when any gradient is non-finite.
[[nodiscard]] bool adam_step(AdamState& state, std::vector<Tensor>& params,
                             const std::vector<Tensor>& grads);

}  // namespace ols
