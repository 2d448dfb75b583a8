#include "ols/region.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ols {

ContinuousBox::ContinuousBox(Tensor reference_in, double radius_in, double domain_lo_in,
                             double domain_hi_in)
    : reference(std::move(reference_in)),
      radius(radius_in),
      domain_lo(domain_lo_in),
      domain_hi(domain_hi_in) {
  if (radius < 0.0) throw std::invalid_argument("region: radius must be >= 0");
  if (domain_lo > domain_hi) throw std::invalid_argument("region: empty domain");
  for (double v : reference.data) {
    if (v < domain_lo - 1e-12 || v > domain_hi + 1e-12)
      throw std::invalid_argument("region: reference outside domain");
  }
}

Box ContinuousBox::box() const {
  Tensor lo = reference, hi = reference;
  for (std::size_t i = 0; i < lo.data.size(); ++i) {
    lo.data[i] = std::max(lo.data[i] - radius, domain_lo);
    hi.data[i] = std::min(hi.data[i] + radius, domain_hi);
  }
  return Box(std::move(lo), std::move(hi));
}

Tensor ContinuousBox::project(const Tensor& candidate) const {
  if (!candidate.same_shape(reference))
    throw std::invalid_argument("project: candidate shape mismatch");
  Tensor out = candidate;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double lo = std::max(reference.data[i] - radius, domain_lo);
    const double hi = std::min(reference.data[i] + radius, domain_hi);
    out.data[i] = std::clamp(out.data[i], lo, hi);
  }
  return out;
}

bool ContinuousBox::contains(const Tensor& candidate, double tol) const {
  return box().contains(candidate, tol);
}

std::int64_t DiscreteBudget::budget() const {
  return static_cast<std::int64_t>(
      std::ceil(fraction * static_cast<double>(reference.size())));
}

DiscreteBudget DiscreteBudget::make(std::vector<std::int64_t> reference, double fraction,
                                    Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("region: fraction must be in [0, 1]");
  if (reference.empty()) throw std::invalid_argument("region: empty reference sequence");
  DiscreteBudget b;
  b.reference = std::move(reference);
  b.fraction = fraction;
  const std::int64_t n = static_cast<std::int64_t>(b.reference.size());
  const std::int64_t k = b.budget();
  // Partial Fisher-Yates gives k distinct positions.
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  b.positions.assign(order.begin(), order.begin() + k);
  std::sort(b.positions.begin(), b.positions.end());
  return b;
}

std::int64_t DiscreteBudget::hamming(const std::vector<std::int64_t>& candidate) const {
  if (candidate.size() != reference.size()) return -1;
  std::int64_t d = 0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (candidate[i] != reference[i]) ++d;
  return d;
}

bool DiscreteBudget::contains(const std::vector<std::int64_t>& candidate) const {
  const std::int64_t d = hamming(candidate);
  return d >= 0 && d <= budget();
}

std::vector<std::int64_t> sample_discrete_neighbor(const std::vector<std::int64_t>& reference,
                                                   double delta, std::int64_t vocab_size,
                                                   Rng& rng) {
  if (delta < 0.0 || delta > 1.0) throw std::invalid_argument("delta must be in [0, 1]");
  const std::int64_t n = static_cast<std::int64_t>(reference.size());
  const std::int64_t k =
      static_cast<std::int64_t>(std::ceil(delta * static_cast<double>(n)));
  std::vector<std::int64_t> out = reference;
  if (k == 0 || n == 0) return out;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  for (std::int64_t i = 0; i < k; ++i) {
    out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(vocab_size)));
  }
  return out;
}

}  // namespace ols
