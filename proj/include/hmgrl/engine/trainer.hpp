#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmgrl/data/bundle.hpp"
#include "hmgrl/data/split.hpp"
#include "hmgrl/engine/checkpoint.hpp"
#include "hmgrl/engine/config.hpp"
#include "hmgrl/engine/metrics.hpp"
#include "hmgrl/engine/model.hpp"

namespace hmgrl::engine {

/// Categories a model chooses between, seen ones first.
struct CandidateSet {
  std::vector<std::size_t> categories;  // bundle category indices
  std::vector<std::string> names;
  std::vector<bool> seen;
  Tensor prototypes;

  /// Candidate position of each sample's true category.
  std::vector<std::size_t> truth(const std::vector<const EmbeddedSample*>& samples) const;
};

/// A bundle seen through a split: partitions, prototypes and candidates.
struct GzslView {
  TaskKind task = TaskKind::kMet;
  std::size_t d = 0;
  std::vector<const EmbeddedSample*> train;
  std::vector<const EmbeddedSample*> val;
  std::vector<const EmbeddedSample*> test;
  std::vector<std::size_t> train_targets;  // row of the true category among the seen prototypes
  Tensor seen_prototypes;
  Tensor validation_prototypes;
  Tensor unseen_prototypes;
  Tensor held_out_prototypes;  // validation then unseen categories
  CandidateSet validation_candidates;  // seen + validation categories
  CandidateSet test_candidates;        // seen + unseen categories
};

/// Throws std::invalid_argument when the split does not fit the bundle.
GzslView make_view(const data::Bundle& bundle, const data::GzslSplit& split);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  LossBreakdown train_loss;  // mean over the epoch's batches
  GammaSweep sweep;          // validation
  EvalReport validation;     // at the epoch's best gamma
  bool selected = false;     // became the best checkpoint
};

struct TrainOptions {
  std::optional<Checkpoint> resume;       // continue after resume->epoch
  std::optional<Checkpoint> resume_best;  // best state carried over on resume
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const Checkpoint&)> on_checkpoint;  // state after each epoch
  bool measure_losses = true;  // full training-set loss before and after
  std::size_t stop_after_epoch = 0;  // 0: run every configured epoch
  unsigned threads = 0;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochRecord> history;
  std::optional<LossBreakdown> initial_loss;
  std::optional<LossBreakdown> final_loss;
};

/// Fresh parameters and optimizer for `config` on a bundle of width d.
Checkpoint initial_checkpoint(const TrainConfig& config, std::size_t d);

/// Objective averaged over the training set in fixed order, with its own
/// noise stream so measurement never disturbs training.
LossBreakdown dataset_loss(const ModelParams& params, const GzslView& view, const TrainConfig& config);

/// Epochs of shuffled mini-batches with Adam (or SGD); after each epoch the
/// validation split picks gamma, and the best harmonic accuracy picks the
/// checkpoint. Non-finite values raise NumericalError naming epoch and batch.
TrainResult train(const data::Bundle& bundle, const data::GzslSplit& split, const TrainConfig& config,
                  const TrainOptions& options = {});

struct Evaluation {
  EvalReport report;
  GammaSweep sweep;  // over the test scores, for the calibration invariant
};

/// Test-split metrics at `gamma`, or at the checkpoint's selected gamma.
Evaluation evaluate(const data::Bundle& bundle, const data::GzslSplit& split, const Checkpoint& checkpoint,
                    std::optional<double> gamma = std::nullopt, unsigned threads = 0);

/// Scores of `samples` against the candidates under a deterministic forward pass.
Tensor candidate_scores(const ModelParams& params, const std::vector<const EmbeddedSample*>& samples,
                        const CandidateSet& candidates, const TrainConfig& config, unsigned threads = 0);

/// Predicted candidate index for one sample.
std::size_t calibrated_predict(const ModelParams& params, const EmbeddedSample& sample, const CandidateSet& candidates,
                               const TrainConfig& config, double gamma);

}  // namespace hmgrl::engine
