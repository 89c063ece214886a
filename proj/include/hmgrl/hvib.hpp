#pragma once

#include "hmgrl/autodiff.hpp"
#include "hmgrl/lorentz.hpp"
#include "hmgrl/rng.hpp"

// Hyperbolic variational information bottleneck: per-modality Gaussian
// encoders over Lorentz linear layers, their KL regulariser, and the symmetric
// contrastive alignment between pooled text and image latents.
namespace hmgrl::hvib {

/// Floor added after softplus so that ln(sigma^2) stays finite.
inline constexpr double kSigmaFloor = 1e-6;

/// Diagonal Gaussian latent (rows x h) with its reparameterised draw.
struct LatentGaussian {
  Var mu;
  Var sigma;
  Var z;
  Tensor epsilon;
};

/// Shared by both directions (T->V and V->T). Lorentz weights are h x d,
/// head weights h x h with 1 x h biases.
struct EncoderWeights {
  Var lorentz_mu;
  Var lorentz_sigma;
  Var head_mu_w;
  Var head_mu_b;
  Var head_sigma_w;
  Var head_sigma_b;
};

/// mu = psi(LLL(X; M_mu)), sigma = softplus(psi(LLL(X; M_sigma))) + floor,
/// z = mu + sigma * eps with a fresh eps row per input row. A null `rng`
/// forces eps = 0.
LatentGaussian encode_modality(Var x, const EncoderWeights& w, lorentz::Curvature c, SeededRng* rng);

/// KL(N(mu, sigma^2) || N(0, I)) summed over columns, averaged over rows.
Var gaussian_kl(Var mu, Var sigma);
double gaussian_kl(const Tensor& mu, const Tensor& sigma);

/// Mean of the two directional KL terms.
Var regularization_loss(const LatentGaussian& text_to_visual, const LatentGaussian& visual_to_text);

/// Row average, 1 x h.
Var pooled_latent(Var z);

/// Symmetric InfoNCE over a batch with raw dot-product scores: row i of
/// `pooled_tv` is matched with row i of `pooled_vt`. Summed over the batch.
Var contrastive_loss(Var pooled_tv, Var pooled_vt);

}  // namespace hmgrl::hvib
