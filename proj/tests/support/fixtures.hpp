#pragma once

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <system_error>

#include "hmgrl/data/bundle.hpp"
#include "hmgrl/rng.hpp"

namespace hmgrl::testing {

/// Directory removed with everything in it when the object dies.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hmgrl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

/// Field-by-field equality with floats compared by bit pattern.
inline bool same_bits(const data::Bundle& a, const data::Bundle& b) {
  if (a.task != b.task || a.d != b.d || a.samples.size() != b.samples.size()) return false;
  if (a.prototypes.names() != b.prototypes.names() || !same_bits(a.prototypes.matrix(), b.prototypes.matrix())) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const EmbeddedSample& x = a.samples[i];
    const EmbeddedSample& y = b.samples[i];
    if (x.sample_id != y.sample_id || x.label != y.label || x.marker_cls != y.marker_cls || x.marker_e1 != y.marker_e1 ||
        x.marker_e2 != y.marker_e2 || !same_bits(x.tokens, y.tokens) || !same_bits(x.patches, y.patches)) {
      return false;
    }
  }
  return true;
}

/// Arbitrary valid bundle: random shapes, markers, ids (including non-ASCII
/// bytes) and f32-representable values spanning many magnitudes.
inline data::Bundle random_bundle(SeededRng& rng) {
  auto f32 = [&]() {
    const double magnitude = std::ldexp(1.0, static_cast<int>(rng.uniform_index(60)) - 30);
    double v = static_cast<double>(static_cast<float>(magnitude * rng.standard_normal()));
    if (rng.uniform_index(50) == 0) v = rng.uniform_index(2) ? 0.0 : -0.0;
    return v;
  };
  data::Bundle b;
  b.task = rng.uniform_index(2) ? TaskKind::kMre : TaskKind::kMet;
  b.d = 1 + rng.uniform_index(12);
  const std::size_t categories = 1 + rng.uniform_index(6);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < categories; ++c) names.push_back("c" + std::to_string(c) + (c % 2 ? "-\xC3\xA9t\xC3\xA9" : ""));
  Tensor protos = Tensor::matrix(categories, b.d);
  for (double& v : protos.data()) v = f32();
  b.prototypes = PrototypeSet(names, protos);
  const std::size_t samples = rng.uniform_index(9);
  for (std::size_t i = 0; i < samples; ++i) {
    EmbeddedSample s;
    s.sample_id = "s" + std::to_string(i) + std::string(rng.uniform_index(4), '#');
    s.label = static_cast<std::uint32_t>(rng.uniform_index(categories));
    const std::size_t t = 4 + rng.uniform_index(6);
    const std::size_t v = 1 + rng.uniform_index(5);
    s.tokens = Tensor::matrix(t, b.d);
    s.patches = Tensor::matrix(v, b.d);
    for (double& x : s.tokens.data()) x = f32();
    for (double& x : s.patches.data()) x = f32();
    s.marker_cls = static_cast<std::uint32_t>(rng.uniform_index(t));
    s.marker_e1 = static_cast<std::uint32_t>(rng.uniform_index(t));
    if (b.task == TaskKind::kMre) s.marker_e2 = static_cast<std::uint32_t>(rng.uniform_index(t));
    b.samples.push_back(std::move(s));
  }
  return b;
}

}  // namespace hmgrl::testing
