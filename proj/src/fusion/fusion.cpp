#include "hmgrl/fusion.hpp"

#include <stdexcept>
#include <string>

namespace hmgrl::fusion {

std::size_t entity_width(TaskKind task, std::size_t d) { return (task == TaskKind::kMet ? 2 : 3) * d; }

Tensor entity_representation(const EmbeddedSample& sample, TaskKind task) {
  const Tensor& tokens = sample.tokens;
  const std::size_t t = tokens.rows();
  const std::size_t d = tokens.cols();
  std::vector<std::uint32_t> markers{sample.marker_cls, sample.marker_e1};
  if (task == TaskKind::kMre) {
    if (!sample.marker_e2) throw std::invalid_argument("entity_representation: MRE sample '" + sample.sample_id + "' has no E2 marker");
    markers.push_back(*sample.marker_e2);
  }
  std::vector<double> values;
  values.reserve(markers.size() * d);
  for (std::uint32_t m : markers) {
    if (m >= t) {
      throw std::out_of_range("entity_representation: marker " + std::to_string(m) + " outside " +
                              std::to_string(t) + " token rows");
    }
    const auto row = tokens.row_span(m);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor::row(std::move(values));
}

AttentionResult cross_modal_attention(Var fused, Var entity, Var attn_w, Var attn_b) {
  const std::size_t h = fused.cols();
  const std::size_t e = entity.cols();
  if (attn_w.rows() != h + e || attn_w.cols() != 1) {
    throw std::invalid_argument("cross_modal_attention: W_A must be " + std::to_string(h + e) + " x 1");
  }
  if (attn_b.rows() != 1 || attn_b.cols() != 1) throw std::invalid_argument("cross_modal_attention: b_A must be 1 x 1");
  // W_A . [u_i, e] + b_A = W_A[:h] . u_i + (W_A[h:] . e + b_A). The bracket is
  // the same for every row, and softmax is shift invariant, so only the row
  // term is evaluated: identical weights, and the inert entries get exactly
  // zero gradient instead of rounding noise.
  Var scores = ops::transpose(ops::matmul(fused, ops::slice_rows(attn_w, 0, h)));
  Var weights = ops::softmax_rows(scores);
  return {ops::matmul(weights, fused), weights};
}

Var sample_feature(Var pooled, Var entity) { return ops::concat_cols({pooled, entity}); }

Var similarity_scores(Var features, Var prototypes, const ProjectionWeights& w) {
  Var f = ops::matmul(features, w.feature_w) + w.feature_b;
  Var p = ops::matmul(prototypes, w.prototype_w);
  if (f.cols() != p.cols()) throw std::invalid_argument("similarity_scores: projection widths differ");
  return ops::matmul_nt(f, p);
}

Var ranking_loss(Var scores, std::size_t true_index, bool exclude_true) {
  const std::size_t k = scores.cols();
  if (k == 0 || scores.rows() != 1) throw std::invalid_argument("ranking_loss: expected a non-empty score row");
  if (true_index >= k) throw std::out_of_range("ranking_loss: true index out of range");
  Graph& g = scores.graph();
  Var positive = ops::slice_cols(scores, true_index, 1);
  Var margins = ops::relu(ops::add_scalar(scores - positive, 1.0));
  if (!exclude_true) return ops::sum(margins);
  Tensor mask = Tensor::matrix(1, k, 1.0);
  mask[true_index] = 0.0;
  return ops::sum(margins * g.constant(std::move(mask)));
}

}  // namespace hmgrl::fusion
