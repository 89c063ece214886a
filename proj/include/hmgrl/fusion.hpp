#pragma once

#include <cstddef>

#include "hmgrl/autodiff.hpp"
#include "hmgrl/types.hpp"

namespace hmgrl::fusion {

/// Width of the entity representation: 2d (MET) or 3d (MRE).
std::size_t entity_width(TaskKind task, std::size_t d);

/// Marker rows of the token matrix: [t_CLS, t_E1] or [t_CLS, t_E1, t_E2], as 1 x |e|.
Tensor entity_representation(const EmbeddedSample& sample, TaskKind task);

struct AttentionResult {
  Var pooled;   // 1 x h
  Var weights;  // 1 x (|T| + |V|)
};

/// Entity-queried attention over the fused rows U. Scores are
/// W_A . [u_i, e] + b_A with W_A of shape (h + |e|) x 1 and b_A 1 x 1; the
/// entity part and bias shift all rows equally and cancel in the softmax.
AttentionResult cross_modal_attention(Var fused, Var entity, Var attn_w, Var attn_b);

/// [pooled, entity].
Var sample_feature(Var pooled, Var entity);

/// Affine feature projection (F -> p) and linear prototype projection
/// (d -> p). A prototype bias would only add f_i . b to every score of row i.
struct ProjectionWeights {
  Var feature_w;
  Var feature_b;
  Var prototype_w;
};

/// (rows x K) dot products between projected features and projected prototypes.
Var similarity_scores(Var features, Var prototypes, const ProjectionWeights& w);

/// sum_i max(1 - o_true + o_i, 0) over a 1 x K score row. The true label is
/// part of the sum (contributing exactly 1) unless `exclude_true` is set.
Var ranking_loss(Var scores, std::size_t true_index, bool exclude_true = false);

}  // namespace hmgrl::fusion
