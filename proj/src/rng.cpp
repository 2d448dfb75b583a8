#include "ols/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ols {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::uint64_t splitmix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(splitmix64(seed ^ 0x6f5902ac237024bdull)) {}

Rng Rng::split(std::uint64_t index) const {
  return Rng(splitmix64(key_ ^ splitmix64(index + 0x5851f42d4c957f2dull)), 0);
}

Rng Rng::split(std::string_view label) const { return split(fnv1a64(label)); }

std::uint64_t Rng::next_u64() { return splitmix64(key_ + kGolden * ++counter_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::uniform_open01() {
  // log(-log(u)) in the Gumbel trick blows up at 0 and 1; resample those.
  for (;;) {
    double u = uniform01();
    if (u > 0.0 && u < 1.0) return u;
  }
}

double Rng::normal() {
  const double u1 = uniform_open01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // Rejection keeps the distribution exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    std::uint64_t v = next_u64();
    if (v < limit) return v % n;
  }
}

}  // namespace ols
