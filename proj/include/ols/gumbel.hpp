#pragma once

#include "ols/rng.hpp"
#include "ols/tensor.hpp"

namespace ols {

/// Draws the Gumbel noise vector g_i = -log(-log(u_i)), u_i ~ Uniform(0,1),
/// resampling u_i that land exactly on 0 or 1.
Tensor gumbel_noise(std::int64_t n, Rng& rng);

/// Gumbel-softmax sample on the probability simplex:
///   p = softmax(pi);  x~ = softmax((g + log p) / tau).
Tensor gumbel_softmax_sample(const Tensor& pi, double tau, Rng& rng);

/// Same relaxation with caller-supplied noise (used by the taped attack path
/// where the noise must be fixed while gradients flow through pi).
Tensor gumbel_softmax_with_noise(const Tensor& pi, double tau, const Tensor& noise);

}  // namespace ols
