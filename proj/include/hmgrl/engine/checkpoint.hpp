#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hmgrl/data/binary_io.hpp"
#include "hmgrl/engine/config.hpp"
#include "hmgrl/optimizer.hpp"
#include "hmgrl/params.hpp"
#include "hmgrl/rng.hpp"

namespace hmgrl::engine {

/// Complete training state after `epoch` finished epochs.
///
/// File layout (little-endian): "HMGC" | version u32 | header JSON (u32
/// length + bytes) | parameter count u32 | per parameter: name, rank u32,
/// extents u64, values f64, first and second moments f64. The header holds
/// the config, its hash, epoch, RNG state, optimizer scalars and selection
/// bookkeeping.
struct Checkpoint {
  TrainConfig config;
  std::size_t epoch = 0;
  RngState rng;
  ModelParams params;
  OptimizerState optimizer;
  double gamma = 0.0;           // calibration chosen with the best epoch
  double best_harmonic = -1.0;  // validation harmonic accuracy of the best epoch so far
  std::size_t best_epoch = 0;
};

inline constexpr std::string_view kCheckpointMagic = "HMGC";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Rejects a header whose stored hash disagrees with its config (kValidation).
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace hmgrl::engine
