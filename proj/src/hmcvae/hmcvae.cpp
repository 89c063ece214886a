#include "hmgrl/hmcvae.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hmgrl/hvib.hpp"

namespace hmgrl::hmcvae {

VaeLatent encode_vae(Var feature, Var lorentz_mu, Var lorentz_sigma, lorentz::Curvature c, SeededRng* rng) {
  if (!feature.value().all_finite()) throw NumericalError("encode_vae", "non-finite feature");
  Var mu = lorentz::lorentz_linear_layer(feature, lorentz_mu, c);
  Var sigma = ops::softplus(lorentz::lorentz_linear_layer(feature, lorentz_sigma, c)) + hvib::kSigmaFloor;
  Tensor eps = rng != nullptr ? sample_standard_normal(*rng, {mu.rows(), mu.cols()})
                              : Tensor::matrix(mu.rows(), mu.cols());
  Var z = mu + sigma * feature.graph().constant(std::move(eps));
  return {mu, sigma, z};
}

Tensor conditional_prototype(const EmbeddedSample& sample, TaskKind task) {
  const Tensor& tokens = sample.tokens;
  auto row = [&](std::uint32_t m) {
    if (m >= tokens.rows()) throw std::out_of_range("conditional_prototype: marker outside token rows");
    return tokens.row_span(m);
  };
  const auto e1 = row(sample.marker_e1);
  std::vector<double> out(e1.begin(), e1.end());
  if (task == TaskKind::kMre) {
    if (!sample.marker_e2) throw std::invalid_argument("conditional_prototype: MRE sample has no E2 marker");
    const auto e2 = row(*sample.marker_e2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (out[i] + e2[i]);
  }
  return Tensor::row(std::move(out));
}

Var decode(Var condition, Var z, const DecoderWeights& w) {
  if (condition.rows() != z.rows()) throw std::invalid_argument("decode: condition and latent row counts differ");
  if (condition.cols() + z.cols() != w.w1.rows()) {
    throw std::invalid_argument("decode: input width " + std::to_string(condition.cols() + z.cols()) +
                                " does not match decoder input " + std::to_string(w.w1.rows()));
  }
  Var hidden = ops::tanh(ops::matmul(ops::concat_cols({condition, z}), w.w1) + w.b1);
  return ops::matmul(hidden, w.w2) + w.b2;
}

Var vae_loss(Var feature, Var reconstruction, const VaeLatent& latent) {
  if (feature.rows() != reconstruction.rows() || feature.cols() != reconstruction.cols()) {
    throw std::invalid_argument("vae_loss: feature and reconstruction widths differ");
  }
  return hvib::gaussian_kl(latent.mu, latent.sigma) + ops::sum(ops::square(feature - reconstruction));
}

SyntheticBatch synthesize_unseen(Var unseen_prototypes, std::size_t k, std::size_t latent_width,
                                 const DecoderWeights& w, SeededRng& rng) {
  const std::size_t categories = unseen_prototypes.rows();
  if (categories == 0) throw std::invalid_argument("synthesize_unseen: empty unseen category set");
  if (k == 0) throw std::invalid_argument("synthesize_unseen: k must be at least 1");
  std::vector<std::size_t> rows;
  rows.reserve(categories * k);
  for (std::size_t j = 0; j < categories; ++j)
    for (std::size_t r = 0; r < k; ++r) rows.push_back(j);
  Graph& g = unseen_prototypes.graph();
  Var eps = g.constant(sample_standard_normal(rng, {rows.size(), latent_width}));
  Var condition = k == 1 ? unseen_prototypes : ops::select_rows(unseen_prototypes, rows);
  return {decode(condition, eps, w), std::move(rows)};
}

Var unseen_ce_loss(Var scores, const std::vector<std::size_t>& labels) {
  if (labels.size() != scores.rows()) throw std::invalid_argument("unseen_ce_loss: one label per row required");
  for (std::size_t l : labels) {
    if (l >= scores.cols()) throw std::out_of_range("unseen_ce_loss: label out of range");
  }
  return -ops::sum(ops::pick(ops::log_softmax_rows(scores), labels));
}

namespace {

/// KL(softmax(s) || uniform) = sum p log p + log n for a 1 x n row s.
Var kl_to_uniform(Var row) {
  Var log_p = ops::log_softmax_rows(row);
  Var entropy_term = ops::sum(ops::exp(log_p) * log_p);
  return ops::add_scalar(entropy_term, std::log(static_cast<double>(row.cols())));
}

}  // namespace

Var alignment_loss(Var scores) {
  if (scores.rows() != scores.cols()) {
    throw std::invalid_argument("alignment_loss: score matrix must be square, got " +
                                shape_string(scores.value().shape()));
  }
  return kl_to_uniform(ops::diag(scores));
}

Var alignment_loss(Var scores, const std::vector<std::size_t>& labels) {
  const std::size_t n = scores.cols();
  if (labels.size() != scores.rows()) throw std::invalid_argument("alignment_loss: one label per row required");
  std::vector<double> counts(n, 0.0);
  for (std::size_t l : labels) {
    if (l >= n) throw std::out_of_range("alignment_loss: label out of range");
    counts[l] += 1.0;
  }
  Tensor selector = Tensor::matrix(labels.size(), n);
  for (std::size_t r = 0; r < labels.size(); ++r) selector(r, labels[r]) = 1.0 / counts[labels[r]];
  for (std::size_t j = 0; j < n; ++j) {
    if (counts[j] == 0.0) throw std::invalid_argument("alignment_loss: category without synthetic rows");
  }
  // mean score of each category over its own rows: (O * S) summed down the rows.
  Graph& g = scores.graph();
  Var means = ops::sum_rows(scores * g.constant(std::move(selector)));
  return kl_to_uniform(means);
}

}  // namespace hmgrl::hmcvae
