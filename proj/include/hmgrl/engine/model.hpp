#pragma once

#include <cstddef>
#include <vector>

#include "hmgrl/autodiff.hpp"
#include "hmgrl/engine/config.hpp"
#include "hmgrl/fusion.hpp"
#include "hmgrl/hmcvae.hpp"
#include "hmgrl/hvib.hpp"
#include "hmgrl/params.hpp"
#include "hmgrl/rng.hpp"

namespace hmgrl::engine {

struct ModelShape {
  TaskKind task = TaskKind::kMet;
  std::size_t d = 0;  // encoder embedding width
  std::size_t h = 0;  // latent width, also the projection and decoder hidden width

  std::size_t entity_width() const { return fusion::entity_width(task, d); }
  std::size_t feature_width() const { return entity_width() + h; }
};

/// Weights drawn from N(0, (scale^2) / fan_in), biases zero. Parameter names:
/// hvib.M_mu, hvib.M_sigma, hvib.head_mu.{W,b}, hvib.head_sigma.{W,b},
/// fusion.attn.{W,b}, fusion.proj_e.{W,b}, fusion.proj_p.W, vae.M_mu,
/// vae.M_sigma, vae.dec1.{W,b}, vae.dec2.{W,b}.
ModelParams init_params(const ModelShape& shape, double scale, SeededRng& rng);

/// Recovers d and h from the parameter shapes; throws if they disagree.
ModelShape infer_shape(const ModelParams& params, TaskKind task);

struct Weights {
  hvib::EncoderWeights encoder;
  Var attn_w;
  Var attn_b;
  fusion::ProjectionWeights projection;
  Var vae_mu;
  Var vae_sigma;
  hmcvae::DecoderWeights decoder;
};

/// Binds every parameter leaf of `g` (which must hold a ModelParams).
Weights bind_weights(Graph& g);

/// Per-term values after batch reduction, and their weighted total.
struct LossBreakdown {
  double reg = 0.0;
  double cl = 0.0;
  double rank = 0.0;
  double vae = 0.0;
  double ce = 0.0;
  double align = 0.0;
  double overall = 0.0;
};

/// ib_beta * reg + cl + rank + vae + eta * ce + zeta * align.
double combine(const LossBreakdown& terms, const TrainConfig& config);

struct LossGraph {
  Var reg;
  Var cl;
  Var rank;
  Var vae;
  Var ce;
  Var align;
  Var overall;

  LossBreakdown values() const;
};

struct TrainingBatch {
  std::vector<const EmbeddedSample*> samples;
  std::vector<std::size_t> targets;  // row of the true category in `seen_prototypes`
  Tensor seen_prototypes;
  Tensor unseen_prototypes;  // conditions for synthesis; may be empty when synthesis is off
};

/// The combined objective on one batch. Sample-level terms are averaged over
/// the batch; the contrastive term is computed once on the batch and divided
/// by its size; the synthetic terms are computed once and the cross-entropy
/// divided by k. With a null `rng` every reparameterisation draw is zero,
/// except the synthesis noise, which then requires an rng and is skipped.
LossGraph overall_loss(Graph& g, const TrainingBatch& batch, const TrainConfig& config, SeededRng* rng);

/// Features of one sample with its latent draws (all exposed for tests).
struct SampleForward {
  hvib::LatentGaussian text_to_visual;
  hvib::LatentGaussian visual_to_text;
  fusion::AttentionResult attention;
  Var entity;
  Var feature;
};

SampleForward forward_sample(Graph& g, const Weights& w, const EmbeddedSample& sample, TaskKind task,
                             lorentz::Curvature c, SeededRng* rng);

/// Deterministic features (latent means, no noise), one row per sample.
/// Work is spread over `threads` workers (0 picks the hardware count).
Tensor sample_features(const ModelParams& params, const std::vector<const EmbeddedSample*>& samples, TaskKind task,
                       double curvature, unsigned threads = 0);

/// Similarity of each feature row to each prototype row.
Tensor score_features(const ModelParams& params, const Tensor& features, const Tensor& prototypes);

/// k decoded draws per prototype row, category-major.
Tensor synthesize_features(const ModelParams& params, const Tensor& prototypes, std::size_t k, SeededRng& rng);

}  // namespace hmgrl::engine
