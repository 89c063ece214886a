#include "hmgrl/engine/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace hmgrl::engine {

namespace {

Tensor random_weight(std::size_t fan_in, std::size_t fan_out, double scale, SeededRng& rng) {
  Tensor w = sample_standard_normal(rng, {fan_in, fan_out});
  const double std_dev = scale / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data()) v *= std_dev;
  return w;
}

}  // namespace

ModelParams init_params(const ModelShape& s, double scale, SeededRng& rng) {
  if (s.d == 0 || s.h == 0) throw std::invalid_argument("init_params: d and h must be positive");
  const std::size_t e = s.entity_width();
  const std::size_t f = s.feature_width();
  ModelParams p;
  // Lorentz weights are stored output x input (M maps R^in to R^out).
  auto lorentz_weight = [&](std::size_t in, std::size_t out) {
    return random_weight(in, out, scale, rng).reshaped({out, in});
  };
  p.add("hvib.M_mu", lorentz_weight(s.d, s.h));
  p.add("hvib.M_sigma", lorentz_weight(s.d, s.h));
  p.add("hvib.head_mu.W", random_weight(s.h, s.h, scale, rng));
  p.add("hvib.head_mu.b", Tensor::matrix(1, s.h));
  p.add("hvib.head_sigma.W", random_weight(s.h, s.h, scale, rng));
  p.add("hvib.head_sigma.b", Tensor::matrix(1, s.h));
  p.add("fusion.attn.W", random_weight(s.h + e, 1, scale, rng));
  p.add("fusion.attn.b", Tensor::matrix(1, 1));
  p.add("fusion.proj_e.W", random_weight(f, s.h, scale, rng));
  p.add("fusion.proj_e.b", Tensor::matrix(1, s.h));
  p.add("fusion.proj_p.W", random_weight(s.d, s.h, scale, rng));
  p.add("vae.M_mu", lorentz_weight(f, s.h));
  p.add("vae.M_sigma", lorentz_weight(f, s.h));
  p.add("vae.dec1.W", random_weight(s.d + s.h, s.h, scale, rng));
  p.add("vae.dec1.b", Tensor::matrix(1, s.h));
  p.add("vae.dec2.W", random_weight(s.h, f, scale, rng));
  p.add("vae.dec2.b", Tensor::matrix(1, f));
  return p;
}

ModelShape infer_shape(const ModelParams& params, TaskKind task) {
  const Tensor& m = params.at("hvib.M_mu").value;
  ModelShape s{task, m.cols(), m.rows()};
  const auto expect = [&](const char* name, std::size_t rows, std::size_t cols) {
    const Tensor& t = params.at(name).value;
    if (t.rows() != rows || t.cols() != cols) {
      throw std::invalid_argument(std::string("parameter ") + name + " has shape " + shape_string(t.shape()) +
                                  ", expected " + std::to_string(rows) + "x" + std::to_string(cols) + " for " +
                                  std::string(to_string(task)) + " with d=" + std::to_string(s.d) +
                                  ", h=" + std::to_string(s.h));
    }
  };
  expect("fusion.attn.W", s.h + s.entity_width(), 1);
  expect("fusion.proj_e.W", s.feature_width(), s.h);
  expect("vae.M_mu", s.h, s.feature_width());
  expect("vae.dec2.W", s.h, s.feature_width());
  return s;
}

Weights bind_weights(Graph& g) {
  Weights w;
  w.encoder = {g.param("hvib.M_mu"),      g.param("hvib.M_sigma"),      g.param("hvib.head_mu.W"),
               g.param("hvib.head_mu.b"), g.param("hvib.head_sigma.W"), g.param("hvib.head_sigma.b")};
  w.attn_w = g.param("fusion.attn.W");
  w.attn_b = g.param("fusion.attn.b");
  w.projection = {g.param("fusion.proj_e.W"), g.param("fusion.proj_e.b"), g.param("fusion.proj_p.W")};
  w.vae_mu = g.param("vae.M_mu");
  w.vae_sigma = g.param("vae.M_sigma");
  w.decoder = {g.param("vae.dec1.W"), g.param("vae.dec1.b"), g.param("vae.dec2.W"), g.param("vae.dec2.b")};
  return w;
}

double combine(const LossBreakdown& t, const TrainConfig& config) {
  return config.ib_beta * t.reg + t.cl + t.rank + t.vae + config.eta * t.ce + config.zeta * t.align;
}

LossBreakdown LossGraph::values() const {
  return {reg.item(), cl.item(), rank.item(), vae.item(), ce.item(), align.item(), overall.item()};
}

SampleForward forward_sample(Graph& g, const Weights& w, const EmbeddedSample& sample, TaskKind task,
                             lorentz::Curvature c, SeededRng* rng) {
  SampleForward out;
  out.text_to_visual = hvib::encode_modality(g.constant(sample.tokens), w.encoder, c, rng);
  out.visual_to_text = hvib::encode_modality(g.constant(sample.patches), w.encoder, c, rng);
  Var fused = ops::concat_rows({out.text_to_visual.z, out.visual_to_text.z});
  out.entity = g.constant(fusion::entity_representation(sample, task));
  out.attention = fusion::cross_modal_attention(fused, out.entity, w.attn_w, w.attn_b);
  out.feature = fusion::sample_feature(out.attention.pooled, out.entity);
  return out;
}

LossGraph overall_loss(Graph& g, const TrainingBatch& batch, const TrainConfig& config, SeededRng* rng) {
  const std::size_t n = batch.samples.size();
  if (n == 0) throw std::invalid_argument("overall_loss: empty batch");
  if (batch.targets.size() != n) throw std::invalid_argument("overall_loss: one target per sample required");
  const lorentz::Curvature c(config.curvature);
  const Weights w = bind_weights(g);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<Var> features, pooled_tv, pooled_vt, reg_terms, conditions;
  for (const EmbeddedSample* s : batch.samples) {
    SampleForward f = forward_sample(g, w, *s, config.task, c, rng);
    reg_terms.push_back(hvib::regularization_loss(f.text_to_visual, f.visual_to_text));
    pooled_tv.push_back(hvib::pooled_latent(f.text_to_visual.z));
    pooled_vt.push_back(hvib::pooled_latent(f.visual_to_text.z));
    features.push_back(f.feature);
    conditions.push_back(g.constant(hmcvae::conditional_prototype(*s, config.task)));
  }

  LossGraph out;
  Var reg_sum = reg_terms[0];
  for (std::size_t i = 1; i < n; ++i) reg_sum = reg_sum + reg_terms[i];
  out.reg = reg_sum * inv_n;
  out.cl = hvib::contrastive_loss(ops::concat_rows(pooled_tv), ops::concat_rows(pooled_vt)) * inv_n;

  Var feature_rows = ops::concat_rows(features);
  Var seen = g.constant(batch.seen_prototypes);
  Var scores = fusion::similarity_scores(feature_rows, seen, w.projection);
  Var rank_sum;
  for (std::size_t i = 0; i < n; ++i) {
    Var r = fusion::ranking_loss(ops::slice_rows(scores, i, 1), batch.targets[i], config.exclude_true_in_rank);
    rank_sum = i == 0 ? r : rank_sum + r;
  }
  out.rank = rank_sum * inv_n;

  // vae_loss over all rows: KL is already a row mean, the squared error a sum.
  hmcvae::VaeLatent latent = hmcvae::encode_vae(feature_rows, w.vae_mu, w.vae_sigma, c, rng);
  Var recon = hmcvae::decode(ops::concat_rows(conditions), latent.z, w.decoder);
  out.vae = hvib::gaussian_kl(latent.mu, latent.sigma) +
            ops::sum(ops::square(feature_rows - recon)) * inv_n;

  const bool synthesize = config.synthesize && rng != nullptr && batch.unseen_prototypes.size() > 0;
  if (synthesize) {
    Var unseen = g.constant(batch.unseen_prototypes);
    hmcvae::SyntheticBatch synthetic = hmcvae::synthesize_unseen(unseen, config.k, config.h, w.decoder, *rng);
    Var unseen_scores = fusion::similarity_scores(synthetic.features, unseen, w.projection);
    out.ce = hmcvae::unseen_ce_loss(unseen_scores, synthetic.category) * (1.0 / static_cast<double>(config.k));
    out.align = config.k == 1 ? hmcvae::alignment_loss(unseen_scores)
                              : hmcvae::alignment_loss(unseen_scores, synthetic.category);
  } else {
    out.ce = g.constant(Tensor::scalar(0.0));
    out.align = g.constant(Tensor::scalar(0.0));
  }

  out.overall = config.ib_beta * out.reg + out.cl + out.rank + out.vae + config.eta * out.ce + config.zeta * out.align;
  return out;
}

Tensor sample_features(const ModelParams& params, const std::vector<const EmbeddedSample*>& samples, TaskKind task,
                       double curvature, unsigned threads) {
  if (samples.empty()) return Tensor();
  const ModelShape shape = infer_shape(params, task);
  const lorentz::Curvature c(curvature);
  Tensor out = Tensor::matrix(samples.size(), shape.feature_width());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Graph g(&params, false);
      const Weights w = bind_weights(g);
      const Var f = forward_sample(g, w, *samples[i], task, c, nullptr).feature;
      std::copy(f.value().data().begin(), f.value().data().end(), out.row_span(i).begin());
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, samples.size());
  if (workers <= 1) {
    work(0, samples.size());
    return out;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (samples.size() + workers - 1) / workers;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(samples.size(), begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Tensor score_features(const ModelParams& params, const Tensor& features, const Tensor& prototypes) {
  if (prototypes.size() == 0) throw std::invalid_argument("score_features: empty prototype set");
  Graph g(&params, false);
  const Weights w = bind_weights(g);
  return fusion::similarity_scores(g.constant(features), g.constant(prototypes), w.projection).value();
}

Tensor synthesize_features(const ModelParams& params, const Tensor& prototypes, std::size_t k, SeededRng& rng) {
  Graph g(&params, false);
  const Weights w = bind_weights(g);
  const std::size_t h = params.at("hvib.M_mu").value.rows();
  return hmcvae::synthesize_unseen(g.constant(prototypes), k, h, w.decoder, rng).features.value();
}

}  // namespace hmgrl::engine
