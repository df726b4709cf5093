#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace mgnet {

// SplitMix64 stream. Hand-rolled (instead of <random> distributions) so that
// every draw is reproducible bit-for-bit across standard-library versions;
// checkpoints and reports are required to be byte-identical for a given seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // [0, 1)
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal();

  // Uniform integer in [0, n), n >= 1.
  std::size_t below(std::size_t n);

  // Fisher-Yates, pinned here rather than std::shuffle (its draw pattern is
  // implementation-defined).
  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stage tags for deriving per-stage sub-seeds from the single top-level seed.
namespace seed_stage {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kEpochShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kSyntheticNoise = 4;
inline constexpr std::uint64_t kFoldPlan = 5;
inline constexpr std::uint64_t kFold = 6;
}  // namespace seed_stage

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stage,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace mgnet
