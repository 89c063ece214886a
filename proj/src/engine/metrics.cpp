#include "hmgrl/engine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace hmgrl::engine {

using nlohmann::json;

double harmonic_mean(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

double weighted_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("weighted_f1: length mismatch");
  if (truth.empty()) return 0.0;
  std::map<std::size_t, std::size_t> support, true_pos, pred_count;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[truth[i]];
    ++pred_count[predicted[i]];
    if (truth[i] == predicted[i]) ++true_pos[truth[i]];
  }
  double total = 0.0;
  for (const auto& [label, n] : support) {
    const double tp = static_cast<double>(true_pos[label]);
    const double denom = static_cast<double>(n) + static_cast<double>(pred_count[label]);
    const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    total += f1 * static_cast<double>(n);
  }
  return total / static_cast<double>(truth.size());
}

std::size_t calibrated_argmax(std::span<const double> scores, const std::vector<bool>& seen, double gamma) {
  if (scores.empty()) throw std::invalid_argument("calibrated_argmax: empty candidate set");
  if (seen.size() != scores.size()) throw std::invalid_argument("calibrated_argmax: seen mask size mismatch");
  if (!(gamma >= 0.0)) throw std::invalid_argument("calibrated_argmax: gamma must be non-negative");
  std::size_t best = 0;
  double best_value = scores[0] - (seen[0] ? gamma : 0.0);
  for (std::size_t j = 1; j < scores.size(); ++j) {
    const double v = scores[j] - (seen[j] ? gamma : 0.0);
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

std::vector<std::size_t> calibrated_predictions(const Tensor& scores, const std::vector<bool>& seen, double gamma) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) out[i] = calibrated_argmax(scores.row_span(i), seen, gamma);
  return out;
}

std::vector<double> derive_gamma_grid(const Tensor& scores, std::size_t points) {
  if (points == 0) throw std::invalid_argument("derive_gamma_grid: need at least one point");
  std::vector<double> ranges;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row_span(i);
    if (row.empty()) continue;
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    ranges.push_back(*hi - *lo);
  }
  if (ranges.empty()) return {0.0};
  std::sort(ranges.begin(), ranges.end());
  const double pos = 0.99 * static_cast<double>(ranges.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const std::size_t upper = std::min(lower + 1, ranges.size() - 1);
  const double top = ranges[lower] + (pos - static_cast<double>(lower)) * (ranges[upper] - ranges[lower]);
  if (!(top > 0.0) || points == 1) return {0.0};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = top * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

EvalReport evaluate_scores(const Tensor& scores, const std::vector<std::size_t>& truth,
                           const std::vector<std::string>& candidates, const std::vector<bool>& seen, double gamma) {
  if (scores.rows() != truth.size()) throw std::invalid_argument("evaluate_scores: one label per score row required");
  if (candidates.size() != seen.size() || (scores.rows() > 0 && scores.cols() != candidates.size())) {
    throw std::invalid_argument("evaluate_scores: candidate list does not match score columns");
  }
  const auto predicted = calibrated_predictions(scores, seen, gamma);
  EvalReport report;
  report.gamma = gamma;
  report.per_class.resize(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    report.per_class[j].name = candidates[j];
    report.per_class[j].seen = seen[j];
    report.per_class[j].predicted.assign(candidates.size(), 0);
  }
  std::vector<std::size_t> truth_group[2], pred_group[2];
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= candidates.size()) throw std::out_of_range("evaluate_scores: label outside candidate list");
    ClassRow& row = report.per_class[truth[i]];
    ++row.support;
    ++row.predicted[predicted[i]];
    if (predicted[i] == truth[i]) ++row.correct;
    if (seen[predicted[i]]) ++report.predicted_seen;
    const int g = seen[truth[i]] ? 0 : 1;
    truth_group[g].push_back(truth[i]);
    pred_group[g].push_back(predicted[i]);
  }
  auto group = [&](int g) -> std::optional<GroupMetrics> {
    if (truth_group[g].empty()) return std::nullopt;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth_group[g].size(); ++i) correct += truth_group[g][i] == pred_group[g][i];
    const double n = static_cast<double>(truth_group[g].size());
    return GroupMetrics{truth_group[g].size(), static_cast<double>(correct) / n,
                        weighted_f1(truth_group[g], pred_group[g])};
  };
  report.seen = group(0);
  report.unseen = group(1);
  if (report.seen && report.unseen) {
    report.overall_accuracy = harmonic_mean(report.seen->accuracy, report.unseen->accuracy);
    report.overall_f1 = harmonic_mean(report.seen->f1, report.unseen->f1);
  }
  return report;
}

bool GammaSweep::monotone() const {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] >= grid[i - 1] && predicted_seen[i] > predicted_seen[i - 1]) return false;
  }
  return true;
}

GammaSweep sweep_gamma(const Tensor& scores, const std::vector<std::size_t>& truth, const std::vector<bool>& seen,
                       std::vector<double> grid) {
  if (grid.empty()) throw std::invalid_argument("sweep_gamma: empty gamma grid");
  if (std::none_of(truth.begin(), truth.end(), [&](std::size_t t) { return t < seen.size() && !seen[t]; })) {
    throw std::invalid_argument("sweep_gamma: validation data has no unseen-category samples; gamma cannot be selected");
  }
  std::sort(grid.begin(), grid.end());
  GammaSweep sweep;
  sweep.grid = std::move(grid);
  std::vector<std::string> names(seen.size());
  for (double gamma : sweep.grid) {
    const EvalReport r = evaluate_scores(scores, truth, names, seen, gamma);
    sweep.harmonic.push_back(r.overall_accuracy);
    sweep.predicted_seen.push_back(r.predicted_seen);
  }
  for (std::size_t i = 1; i < sweep.grid.size(); ++i) {
    if (sweep.harmonic[i] > sweep.harmonic[sweep.best]) sweep.best = i;
  }
  return sweep;
}

namespace {

json group_json(const std::optional<GroupMetrics>& g) {
  if (!g) return {{"accuracy", nullptr}, {"f1", nullptr}, {"count", 0}};
  return {{"accuracy", g->accuracy}, {"f1", g->f1}, {"count", g->count}};
}

std::optional<GroupMetrics> group_from(const json& j) {
  if (j.at("accuracy").is_null()) return std::nullopt;
  return GroupMetrics{j.at("count").get<std::size_t>(), j.at("accuracy").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

std::string report_to_json(const EvalReport& r, int indent) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"category", c.name},
                         {"seen", c.seen},
                         {"support", c.support},
                         {"correct", c.correct},
                         {"predicted", c.predicted}});
  }
  const json j = {{"seen", group_json(r.seen)},
                  {"unseen", group_json(r.unseen)},
                  {"overall", {{"accuracy", r.overall_accuracy}, {"f1", r.overall_f1}}},
                  {"gamma", r.gamma},
                  {"predicted_seen", r.predicted_seen},
                  {"per_class", per_class}};
  return j.dump(indent);
}

EvalReport report_from_json(std::string_view text) {
  const json j = json::parse(text);
  EvalReport r;
  r.seen = group_from(j.at("seen"));
  r.unseen = group_from(j.at("unseen"));
  r.overall_accuracy = j.at("overall").at("accuracy").get<double>();
  r.overall_f1 = j.at("overall").at("f1").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.predicted_seen = j.at("predicted_seen").get<std::size_t>();
  for (const auto& c : j.at("per_class")) {
    r.per_class.push_back({c.at("category").get<std::string>(), c.at("seen").get<bool>(),
                           c.at("support").get<std::size_t>(), c.at("correct").get<std::size_t>(),
                           c.at("predicted").get<std::vector<std::size_t>>()});
  }
  return r;
}

}  // namespace hmgrl::engine
