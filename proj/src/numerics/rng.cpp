#include "hmgrl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hmgrl {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

SeededRng SeededRng::derived(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t mix = index;
  SeededRng rng(seed ^ splitmix64(mix));
  rng.seed_ = seed;
  return rng;
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_index: bound must be positive");
  // Rejection sampling on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

double SeededRng::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

RngState SeededRng::state() const { return {seed_, s_, has_spare_, spare_}; }

SeededRng SeededRng::from_state(const RngState& state) {
  SeededRng rng;
  rng.seed_ = state.seed;
  rng.s_ = state.words;
  rng.has_spare_ = state.has_spare;
  rng.spare_ = state.spare;
  return rng;
}

Tensor sample_standard_normal(SeededRng& rng, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape));
  for (double& v : out.data()) v = rng.standard_normal();
  return out;
}

}  // namespace hmgrl
