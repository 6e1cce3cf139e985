#include "acquire/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace acquire {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() { return mix64(state_ += kGolden); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
  if (n < 1) throw std::invalid_argument("uniform_int: n must be >= 1");
  // Lemire multiply-shift; bias is negligible for simulation-scale n.
  return static_cast<int>(
      (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
}

double Rng::gaussian() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::sample_weighted(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("sample_weighted: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0)
    throw std::invalid_argument("sample_weighted: total weight must be positive");
  const double u = uniform() * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = static_cast<int>(i);
    acc += weights[i];
    if (u < acc && weights[i] > 0.0) return static_cast<int>(i);
  }
  return last_positive;  // u == total up to rounding
}

std::uint64_t Rng::derive(std::uint64_t base, std::uint64_t stream) {
  return mix64(base ^ mix64((stream + 1) * kGolden));
}

}  // namespace acquire
