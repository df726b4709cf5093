#include "mgnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace mgnet {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  return mix64(z);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::size_t Rng::below(std::size_t n) {
  // Fixed-point multiply; bias is < n / 2^64 which is irrelevant here, and the
  // draw count per call stays constant, which keeps streams aligned.
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stage,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(base + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (stage * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL));
  h = mix64(h ^ (a * 0xc4ceb9fe1a85ec53ULL + 0xd1342543de82ef95ULL));
  h = mix64(h ^ (b * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL));
  return h;
}

}  // namespace mgnet
