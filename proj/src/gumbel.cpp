#include "ols/gumbel.hpp"

#include <cmath>
#include <stdexcept>

namespace ols {

Tensor gumbel_noise(std::int64_t n, Rng& rng) {
  Tensor g = Tensor::zeros({n});
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = rng.uniform_open01();
    g.at(i) = -std::log(-std::log(u));
  }
  return g;
}

Tensor gumbel_softmax_with_noise(const Tensor& pi, double tau, const Tensor& noise) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be positive");
  if (!pi.same_shape(noise)) throw std::invalid_argument("gumbel_softmax: noise shape mismatch");
  Tensor logits = log_softmax(pi);
  for (std::size_t i = 0; i < logits.data.size(); ++i)
    logits.data[i] = (noise.data[i] + logits.data[i]) / tau;
  return softmax(logits);
}

Tensor gumbel_softmax_sample(const Tensor& pi, double tau, Rng& rng) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be positive");
  const Tensor g = gumbel_noise(pi.numel(), rng);
  return gumbel_softmax_with_noise(pi, tau, g);
}

}  // namespace ols
