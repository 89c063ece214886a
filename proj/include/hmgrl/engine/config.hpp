#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/optimizer.hpp"
#include "hmgrl/types.hpp"

namespace hmgrl::engine {

/// Invalid configuration value; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument("config field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Which prototypes condition synthesis during training.
/// Prototypes conditioning synthesis: the test-time unseen categories, the
/// validation categories, or both (every category training never sees).
enum class SynthesisSource { kUnseen, kValidation, kHeldOut };

struct TrainConfig {
  TaskKind task = TaskKind::kMet;
  std::size_t h = 768;
  double learning_rate = 1e-5;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t epochs = 20;
  std::size_t batch_size = 14;
  double eta = 1.0;   // weight of the unseen cross-entropy
  double zeta = 1.0;  // weight of the distribution alignment
  /// Explicit calibration grid; empty derives `gamma_points` values from the
  /// validation score ranges.
  std::vector<double> gamma_grid;
  std::size_t gamma_points = 21;
  std::size_t k = 1;  // synthetic samples per unseen category and step
  double ib_beta = 1.0;
  double curvature = -1.0;
  std::uint64_t seed = 0;
  /// Off: no synthetic samples, so the unseen cross-entropy and alignment
  /// terms vanish whatever eta and zeta say.
  bool synthesize = true;
  bool exclude_true_in_rank = false;
  SynthesisSource synthesis_source = SynthesisSource::kUnseen;
  double init_scale = 1.0;  // multiplies the 1/sqrt(fan_in) weight std

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Epoch and batch defaults differ by task.
TrainConfig default_config(TaskKind task);

/// Throws ConfigError on the first invalid field.
void validate_config(const TrainConfig& config);

std::string config_to_json(const TrainConfig& config);
/// Fields present in `text` override `base`; unknown keys are rejected.
TrainConfig config_from_json(std::string_view text, const TrainConfig& base);
TrainConfig read_config(const std::filesystem::path& path, const TrainConfig& base);

/// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const TrainConfig& config);

std::string_view to_string(SynthesisSource source);

}  // namespace hmgrl::engine
