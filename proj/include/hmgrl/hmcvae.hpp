#pragma once

#include <cstddef>
#include <vector>

#include "hmgrl/autodiff.hpp"
#include "hmgrl/lorentz.hpp"
#include "hmgrl/rng.hpp"
#include "hmgrl/types.hpp"

// Prototype-conditioned VAE over sample features: Lorentz encoder, two-layer
// decoder, unseen-category synthesis and the losses that train on it.
namespace hmgrl::hmcvae {

struct VaeLatent {
  Var mu;     // rows x h
  Var sigma;  // rows x h
  Var z;      // rows x h
};

/// mu = LLL(f; M'_mu), sigma = softplus(LLL(f; M'_sigma)) + floor, z = mu + sigma * eps.
/// Lorentz weights are h x F. A null `rng` forces eps = 0.
VaeLatent encode_vae(Var feature, Var lorentz_mu, Var lorentz_sigma, lorentz::Curvature c, SeededRng* rng);

/// p^e: t_E1 (MET) or the mean of t_E1 and t_E2 (MRE), as 1 x d.
Tensor conditional_prototype(const EmbeddedSample& sample, TaskKind task);

/// (d + h) -> hidden (tanh) -> F.
struct DecoderWeights {
  Var w1;
  Var b1;
  Var w2;
  Var b2;
};

/// Row-wise decoder output for conditions (rows x d) and latents (rows x h).
Var decode(Var condition, Var z, const DecoderWeights& w);

/// KL(N(mu, sigma^2) || N(0, I)) + ||feature - reconstruction||^2.
Var vae_loss(Var feature, Var reconstruction, const VaeLatent& latent);

struct SyntheticBatch {
  Var features;                       // (k * |Y_u|) x F
  std::vector<std::size_t> category;  // unseen-category row index per synthetic row
};

/// k decoder draws per unseen prototype, category-major (rows j*k .. j*k+k-1
/// belong to category j), each with eps ~ N(0, I_h).
SyntheticBatch synthesize_unseen(Var unseen_prototypes, std::size_t k, std::size_t latent_width,
                                 const DecoderWeights& w, SeededRng& rng);

/// -sum_rows log softmax(row)[label].
Var unseen_ce_loss(Var scores, const std::vector<std::size_t>& labels);

/// KL(softmax(diag(O)) || uniform) for a square O.
Var alignment_loss(Var scores);
/// Same divergence over per-category mean scores s_j = mean{O(r, j) : label(r) = j}.
Var alignment_loss(Var scores, const std::vector<std::size_t>& labels);

}  // namespace hmgrl::hmcvae
