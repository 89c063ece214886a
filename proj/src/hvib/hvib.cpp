#include "hmgrl/hvib.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hmgrl::hvib {

namespace {

Var affine(Var x, Var w, Var b) { return ops::matmul(x, w) + b; }

}  // namespace

LatentGaussian encode_modality(Var x, const EncoderWeights& w, lorentz::Curvature c, SeededRng* rng) {
  if (!x.value().all_finite()) throw NumericalError("encode_modality", "non-finite input");
  Var mu = affine(lorentz::lorentz_linear_layer(x, w.lorentz_mu, c), w.head_mu_w, w.head_mu_b);
  Var sigma = ops::softplus(affine(lorentz::lorentz_linear_layer(x, w.lorentz_sigma, c), w.head_sigma_w,
                                   w.head_sigma_b)) +
              kSigmaFloor;
  Graph& g = x.graph();
  Tensor eps = rng != nullptr ? sample_standard_normal(*rng, {mu.rows(), mu.cols()})
                              : Tensor::matrix(mu.rows(), mu.cols());
  Var z = mu + sigma * g.constant(eps);
  return {mu, sigma, z, std::move(eps)};
}

Var gaussian_kl(Var mu, Var sigma) {
  for (double s : sigma.value().data()) {
    if (!(s > 0.0)) throw std::domain_error("gaussian_kl: sigma must be strictly positive");
  }
  if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols()) {
    throw std::invalid_argument("gaussian_kl: mu and sigma shapes differ");
  }
  Var inner = ops::square(mu) + ops::square(sigma) - 2.0 * ops::log(sigma);
  const double rows = static_cast<double>(mu.rows());
  const double count = static_cast<double>(mu.value().size());
  // 1/2 * sum(mu^2 + sigma^2 - 1 - ln sigma^2) / rows
  return ops::add_scalar(ops::sum(inner), -count) * (0.5 / rows);
}

double gaussian_kl(const Tensor& mu, const Tensor& sigma) {
  Graph g(nullptr, false);
  return gaussian_kl(g.constant(mu), g.constant(sigma)).item();
}

Var regularization_loss(const LatentGaussian& text_to_visual, const LatentGaussian& visual_to_text) {
  return 0.5 * (gaussian_kl(text_to_visual.mu, text_to_visual.sigma) +
                gaussian_kl(visual_to_text.mu, visual_to_text.sigma));
}

Var pooled_latent(Var z) {
  if (z.rows() == 0) throw std::invalid_argument("pooled_latent: zero rows");
  return ops::mean_rows(z);
}

Var contrastive_loss(Var pooled_tv, Var pooled_vt) {
  const std::size_t n = pooled_tv.rows();
  if (n == 0) throw std::invalid_argument("contrastive_loss: empty batch");
  if (pooled_vt.rows() != n || pooled_vt.cols() != pooled_tv.cols()) {
    throw std::invalid_argument("contrastive_loss: both sides need N rows of equal width");
  }
  std::vector<std::size_t> diagonal(n);
  std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
  Var scores = ops::matmul_nt(pooled_tv, pooled_vt);  // (i, j) = tv_i . vt_j
  Var text_side = ops::sum(ops::pick(ops::log_softmax_rows(scores), diagonal));
  Var image_side = ops::sum(ops::pick(ops::log_softmax_rows(ops::transpose(scores)), diagonal));
  return -0.5 * (text_side + image_side);
}

}  // namespace hmgrl::hvib
