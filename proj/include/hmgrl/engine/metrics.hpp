#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmgrl/tensor.hpp"

namespace hmgrl::engine {

/// 2ab / (a + b); 0 when either side is 0.
double harmonic_mean(double a, double b);

/// Support-weighted mean of per-class F1. Classes absent from `truth` carry
/// zero weight, so predicting them only costs the true class its recall.
double weighted_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted);

/// argmax_j scores[j] - gamma * seen[j]; ties go to the lowest index.
std::size_t calibrated_argmax(std::span<const double> scores, const std::vector<bool>& seen, double gamma);

/// Row-wise calibrated_argmax over a samples x candidates score matrix.
std::vector<std::size_t> calibrated_predictions(const Tensor& scores, const std::vector<bool>& seen, double gamma);

/// `points` evenly spaced values from 0 to the 99th percentile (linear
/// interpolation) of per-row score ranges max - min. Collapses to {0} when
/// that percentile is 0.
std::vector<double> derive_gamma_grid(const Tensor& scores, std::size_t points);

struct GroupMetrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct ClassRow {
  std::string name;
  bool seen = false;
  std::size_t support = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> predicted;  // confusion counts over the candidate list
};

struct EvalReport {
  std::optional<GroupMetrics> seen;    // absent when no seen-category sample was evaluated
  std::optional<GroupMetrics> unseen;
  double overall_accuracy = 0.0;  // harmonic means
  double overall_f1 = 0.0;
  double gamma = 0.0;
  std::size_t predicted_seen = 0;
  std::vector<ClassRow> per_class;
};

/// Metrics for one calibration value. `truth` holds candidate indices.
EvalReport evaluate_scores(const Tensor& scores, const std::vector<std::size_t>& truth,
                           const std::vector<std::string>& candidates, const std::vector<bool>& seen, double gamma);

/// Harmonic-mean accuracy and seen-prediction count for every grid value.
struct GammaSweep {
  std::vector<double> grid;
  std::vector<double> harmonic;
  std::vector<std::size_t> predicted_seen;
  std::size_t best = 0;  // first maximiser, so ties go to the smallest gamma

  double best_gamma() const { return grid[best]; }
  double best_harmonic() const { return harmonic[best]; }
  /// Seen-prediction counts never increase as gamma grows (grid sorted).
  bool monotone() const;
};

/// Throws std::invalid_argument for an empty grid or when no sample belongs
/// to a non-seen candidate (the harmonic mean would be meaningless).
GammaSweep sweep_gamma(const Tensor& scores, const std::vector<std::size_t>& truth, const std::vector<bool>& seen,
                       std::vector<double> grid);

std::string report_to_json(const EvalReport& report, int indent = 2);
EvalReport report_from_json(std::string_view text);

}  // namespace hmgrl::engine
