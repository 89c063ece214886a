#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hmgrl/tensor.hpp"

namespace hmgrl {

/// Snapshot of a SeededRng, sufficient to resume the exact draw sequence.
struct RngState {
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 4> words{};
  bool has_spare = false;
  double spare = 0.0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

/// xoshiro256** seeded through splitmix64. Normals come from the Box-Muller
/// transform, consuming two uniforms per pair and caching the second value.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256**/splitmix64/box-muller";

  explicit SeededRng(std::uint64_t seed = 0);

  /// Independent stream for a (seed, index) pair; used for per-sample seeds.
  static SeededRng derived(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);
  double standard_normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  RngState state() const;
  static SeededRng from_state(const RngState& state);

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. N(0, 1) draws in row-major order.
Tensor sample_standard_normal(SeededRng& rng, std::vector<std::size_t> shape);

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace hmgrl
