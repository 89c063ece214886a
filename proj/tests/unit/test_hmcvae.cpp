#include <cmath>

#include "doctest.h"
#include "hmgrl/gradcheck.hpp"
#include "hmgrl/hmcvae.hpp"

using namespace hmgrl;
using namespace hmgrl::hmcvae;

namespace {

const lorentz::Curvature kUnit(-1.0);

EmbeddedSample markers(Tensor tokens, std::uint32_t e1, std::optional<std::uint32_t> e2) {
  EmbeddedSample s;
  s.tokens = std::move(tokens);
  s.patches = Tensor::matrix(1, s.tokens.cols());
  s.marker_e1 = e1;
  s.marker_e2 = e2;
  return s;
}

ModelParams decoder_params(std::size_t d, std::size_t h, std::size_t f, SeededRng& rng) {
  ModelParams p;
  p.add("w1", sample_standard_normal(rng, {d + h, h}));
  p.add("b1", sample_standard_normal(rng, {1, h}));
  p.add("w2", sample_standard_normal(rng, {h, f}));
  p.add("b2", sample_standard_normal(rng, {1, f}));
  return p;
}

DecoderWeights bind(Graph& g) { return {g.param("w1"), g.param("b1"), g.param("w2"), g.param("b2")}; }

double ce(const Tensor& scores, const std::vector<std::size_t>& labels) {
  Graph g;
  return unseen_ce_loss(g.constant(scores), labels).item();
}

double align(const Tensor& scores) {
  Graph g;
  return alignment_loss(g.constant(scores)).item();
}

// KL(softmax(s) || uniform) evaluated directly.
double kl_uniform_oracle(const std::vector<double>& s) {
  double z = 0.0;
  for (double v : s) z += std::exp(v);
  double kl = 0.0;
  for (double v : s) {
    const double p = std::exp(v) / z;
    kl += p * std::log(p * static_cast<double>(s.size()));
  }
  return kl;
}

}  // namespace

TEST_CASE("vae encoder") {
  SeededRng rng(2);
  const Tensor f = sample_standard_normal(rng, {3, 6});
  Graph g;
  const Var fv = g.constant(f);

  const VaeLatent zero = encode_vae(fv, g.constant(Tensor::matrix(4, 6)), g.constant(Tensor::matrix(4, 6)), kUnit, &rng);
  for (double v : zero.mu.value().data()) CHECK(v == 0.0);
  for (double v : zero.sigma.value().data()) CHECK(v == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(zero.z.cols() == 4);

  const Var m = g.constant(sample_standard_normal(rng, {4, 6}));
  const Var s = g.constant(sample_standard_normal(rng, {4, 6}));
  const VaeLatent quiet = encode_vae(fv, m, s, kUnit, nullptr);
  CHECK(quiet.z.value() == quiet.mu.value());
  for (double v : quiet.sigma.value().data()) CHECK(v > 0.0);
}

TEST_CASE("conditional prototypes") {
  CHECK(conditional_prototype(markers(Tensor::rows_of({{0.0, 0.0}, {1.0, 2.0}, {5.0, 5.0}}), 1, std::nullopt),
                              TaskKind::kMet) == Tensor::row({1.0, 2.0}));
  CHECK(conditional_prototype(markers(Tensor::rows_of({{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}}), 1, 2), TaskKind::kMre) ==
        Tensor::row({1.0, 1.0}));
  CHECK(conditional_prototype(markers(Tensor::rows_of({{0.0, 0.0}, {3.0, -1.0}, {3.0, -1.0}}), 1, 2), TaskKind::kMre) ==
        Tensor::row({3.0, -1.0}));
  CHECK_THROWS_AS(conditional_prototype(markers(Tensor::matrix(3, 2), 1, std::nullopt), TaskKind::kMre),
                  std::invalid_argument);
  CHECK_THROWS_AS(conditional_prototype(markers(Tensor::matrix(3, 2), 4, std::nullopt), TaskKind::kMet),
                  std::out_of_range);
}

TEST_CASE("decoder") {
  SeededRng rng(3);
  const std::size_t d = 3, h = 4;
  for (std::size_t f : {2 * d + h, 3 * d + h}) {
    ModelParams p = decoder_params(d, h, f, rng);
    Graph g(&p, false);
    const Var cond = g.constant(sample_standard_normal(rng, {2, d}));
    const Var z = g.constant(sample_standard_normal(rng, {2, h}));
    const Tensor out = decode(cond, z, bind(g)).value();
    CHECK(out.cols() == f);
    CHECK(decode(cond, z, bind(g)).value() == out);

    const DecoderWeights zero_last{g.param("w1"), g.param("b1"), g.constant(Tensor::matrix(h, f)), g.constant(Tensor::matrix(1, f))};
    CHECK(decode(cond, z, zero_last).value() == Tensor::matrix(2, f));
    CHECK_THROWS_AS(decode(cond, g.constant(Tensor::matrix(2, h + 1)), bind(g)), std::invalid_argument);
  }
}

TEST_CASE("vae loss examples") {
  Graph g;
  const Var f = g.constant(Tensor::row({0.5, -1.0}));
  const VaeLatent standard{g.constant(Tensor::row({0.0})), g.constant(Tensor::row({1.0})), {}};
  CHECK(vae_loss(f, f, standard).item() == 0.0);
  CHECK(vae_loss(f, g.constant(Tensor::row({1.5, 0.0})), standard).item() == 2.0);
  const VaeLatent shifted{g.constant(Tensor::row({1.0})), g.constant(Tensor::row({1.0})), {}};
  CHECK(vae_loss(f, f, shifted).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(vae_loss(f, g.constant(Tensor::row({1.0})), standard), std::invalid_argument);
}

TEST_CASE("reconstruction term is the unit-Gaussian negative log-likelihood up to a constant") {
  SeededRng rng(6);
  const Tensor x = sample_standard_normal(rng, {1, 7});
  const Tensor xhat = sample_standard_normal(rng, {1, 7});
  double log_likelihood = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    const double r = x[i] - xhat[i];
    log_likelihood += -0.5 * r * r - 0.5 * std::log(2.0 * M_PI);
  }
  Graph g;
  const VaeLatent standard{g.constant(Tensor::row({0.0})), g.constant(Tensor::row({1.0})), {}};
  const double recon = vae_loss(g.constant(x), g.constant(xhat), standard).item();
  CHECK(recon == doctest::Approx(-2.0 * log_likelihood - 7.0 * std::log(2.0 * M_PI)).epsilon(1e-13));
  CHECK(recon >= 0.0);
}

TEST_CASE("unseen synthesis") {
  SeededRng init(4);
  const std::size_t d = 3, h = 5, f = 2 * d + h;
  ModelParams p = decoder_params(d, h, f, init);
  Graph g(&p, false);
  const Var protos = g.constant(sample_standard_normal(init, {4, d}));

  SeededRng a(10), b(10);
  const SyntheticBatch one = synthesize_unseen(protos, 1, h, bind(g), a);
  CHECK(one.features.rows() == 4);
  CHECK(one.features.cols() == f);
  CHECK(one.category == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(synthesize_unseen(protos, 1, h, bind(g), b).features.value() == one.features.value());

  const SyntheticBatch three = synthesize_unseen(protos, 3, h, bind(g), a);
  CHECK(three.features.rows() == 12);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::count(three.category.begin(), three.category.end(), j) == 3);
  CHECK(three.category[4] == 1);

  // Identical conditions and identical noise decode to identical rows.
  const Tensor row = sample_standard_normal(init, {1, d});
  const Var twins = g.constant(Tensor::rows_of({{row[0], row[1], row[2]}, {row[0], row[1], row[2]}}));
  SeededRng c(11);
  const Tensor first = synthesize_unseen(twins, 1, h, bind(g), c).features.value();
  SeededRng replay(11);
  const Tensor eps = sample_standard_normal(replay, {2, h});
  const Tensor same_eps = Tensor::rows_of({{eps[0], eps[1], eps[2], eps[3], eps[4]}, {eps[0], eps[1], eps[2], eps[3], eps[4]}});
  const Tensor decoded = decode(twins, g.constant(same_eps), bind(g)).value();
  CHECK(std::equal(decoded.row_span(0).begin(), decoded.row_span(0).end(), decoded.row_span(1).begin()));
  CHECK(std::equal(first.row_span(0).begin(), first.row_span(0).end(), decoded.row_span(0).begin()));

  CHECK_THROWS_AS(synthesize_unseen(g.constant(Tensor::matrix(0, d)), 1, h, bind(g), c), std::exception);
  CHECK_THROWS_AS(synthesize_unseen(protos, 0, h, bind(g), c), std::invalid_argument);
}

TEST_CASE("unseen cross-entropy") {
  CHECK(ce(Tensor::matrix(2, 2), {0, 1}) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(ce(Tensor::rows_of({{10.0, 0.0}, {0.0, 10.0}}), {0, 1}) ==
        doctest::Approx(2.0 * std::log1p(std::exp(-10.0))).epsilon(1e-10));
  CHECK(ce(Tensor::rows_of({{10.0, 0.0}, {0.0, 10.0}}), {0, 1}) == doctest::Approx(9.08e-5).epsilon(1e-3));
  for (std::size_t n : {3u, 6u}) CHECK(ce(Tensor::matrix(n, n), std::vector<std::size_t>(n, 0)) ==
                                       doctest::Approx(n * std::log(static_cast<double>(n))).epsilon(1e-14));
  const Tensor s = Tensor::rows_of({{0.3, -1.0, 2.0}, {1.0, 0.0, 0.5}});
  const Tensor t = Tensor::rows_of({{5.3, 4.0, 7.0}, {1.0, 0.0, 0.5}});
  CHECK(ce(s, {2, 0}) == doctest::Approx(ce(t, {2, 0})).epsilon(1e-13));
  CHECK_THROWS_AS(ce(s, {3, 0}), std::out_of_range);
}

TEST_CASE("alignment loss") {
  CHECK(align(Tensor::rows_of({{2.5, 0.0}, {9.0, 2.5}})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(align(Tensor::matrix(3, 3))) < 1e-15);
  const double expected = 2.0 / 3.0 * std::log(4.0 / 3.0) + 1.0 / 3.0 * std::log(2.0 / 3.0);
  CHECK(align(Tensor::rows_of({{std::log(2.0), 5.0}, {-1.0, 0.0}})) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(align(Tensor::rows_of({{std::log(2.0), 0.0}, {0.0, 0.0}})) - 0.0566) < 1e-4);
  CHECK_THROWS_AS(align(Tensor::matrix(2, 3)), std::invalid_argument);

  SeededRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(5);
    const Tensor o = sample_standard_normal(rng, {n, n});
    std::vector<double> diag(n);
    Tensor shifted = o;
    for (std::size_t i = 0; i < n; ++i) {
      diag[i] = o(i, i);
      shifted(i, i) += 4.2;
    }
    const double loss = align(o);
    CHECK(loss > 0.0);
    CHECK(std::abs(loss - kl_uniform_oracle(diag)) < 1e-9);
    CHECK(std::abs(align(shifted) - loss) < 1e-12);
  }
}

TEST_CASE("grouped alignment uses per-category mean scores") {
  // Rows 0-1 belong to category 0, rows 2-3 to category 1.
  const Tensor o = Tensor::rows_of({{1.0, 9.0}, {3.0, 9.0}, {9.0, 0.5}, {9.0, -0.5}});
  Graph g;
  const double grouped = alignment_loss(g.constant(o), {0, 0, 1, 1}).item();
  CHECK(std::abs(grouped - kl_uniform_oracle({2.0, 0.0})) < 1e-12);
  // With one row per category it reduces to the diagonal form.
  const Tensor sq = Tensor::rows_of({{0.2, 1.0}, {3.0, -0.4}});
  CHECK(alignment_loss(g.constant(sq), {0, 1}).item() == doctest::Approx(align(sq)).epsilon(1e-14));
  CHECK_THROWS_AS(alignment_loss(g.constant(o), {0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("hmcvae losses pass the gradient check through synthesis") {
  SeededRng rng(91);
  const std::size_t d = 3, h = 4, f = 2 * d + h;
  ModelParams p = decoder_params(d, h, f, rng);
  for (auto& param : p) {
    for (double& v : param.value.data()) v *= 0.5;
  }
  p.add("M_mu", sample_standard_normal(rng, {h, f}));
  p.add("M_sigma", sample_standard_normal(rng, {h, f}));
  p.add("proj", sample_standard_normal(rng, {f, d}));
  const Tensor features = sample_standard_normal(rng, {3, f});
  const Tensor conditions = sample_standard_normal(rng, {3, d});
  const Tensor unseen = sample_standard_normal(rng, {3, d});

  const LossFn vae = [&](Graph& g) {
    SeededRng noise(1);
    const VaeLatent lat = encode_vae(g.constant(features), g.param("M_mu"), g.param("M_sigma"), kUnit, &noise);
    return vae_loss(g.constant(features), decode(g.constant(conditions), lat.z, bind(g)), lat);
  };
  auto synthetic_scores = [&](Graph& g, std::size_t k, std::vector<std::size_t>& labels) {
    SeededRng noise(2);
    const SyntheticBatch s = synthesize_unseen(g.constant(unseen), k, h, bind(g), noise);
    labels = s.category;
    return ops::matmul_nt(ops::matmul(s.features, g.param("proj")), g.constant(unseen));
  };
  const LossFn ce_k1 = [&](Graph& g) {
    std::vector<std::size_t> labels;
    const Var o = synthetic_scores(g, 1, labels);
    return unseen_ce_loss(o, labels);
  };
  const LossFn align_k1 = [&](Graph& g) {
    std::vector<std::size_t> labels;
    return alignment_loss(synthetic_scores(g, 1, labels));
  };
  const LossFn align_k3 = [&](Graph& g) {
    std::vector<std::size_t> labels;
    const Var o = synthetic_scores(g, 3, labels);
    return alignment_loss(o, labels) + unseen_ce_loss(o, labels);
  };
  for (const LossFn& fn : {vae, ce_k1, align_k1, align_k3}) {
    const Evaluation e = evaluate_with_gradients(fn, p);
    CHECK(max_relative_error(e.gradients, finite_difference_gradient(fn, p, 1e-5)) < 1e-4);
  }
  // The decoder receives gradient from the synthetic terms.
  const Evaluation e = evaluate_with_gradients(ce_k1, p);
  double decoder_norm = 0.0;
  for (double v : e.gradients[p.index_of("w1")].data()) decoder_norm += v * v;
  CHECK(decoder_norm > 0.0);
}
