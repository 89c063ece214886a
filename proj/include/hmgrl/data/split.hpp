#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hmgrl/data/bundle.hpp"

namespace hmgrl::data {

/// Number of categories assigned to the seen (training), validation and
/// unseen (test) subsets.
struct CategoryCounts {
  std::size_t train = 4;
  std::size_t val = 4;
  std::size_t test = 4;
};

/// 4/4/4 for MET, 8/7/7 for MRE.
CategoryCounts default_category_counts(TaskKind task);

struct SplitOptions {
  CategoryCounts categories;
  double instance_ratio = 0.70;   // share of each seen category kept for train + val
  double train_val_ratio = 0.90;  // share of that selection going to train
  std::uint64_t seed = 0;
};

/// Category partition plus per-sample assignment. Category lists hold bundle
/// category indices; instance lists hold sample indices in ascending order.
struct GzslSplit {
  std::uint64_t seed = 0;
  std::vector<std::size_t> seen;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> unseen;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  friend bool operator==(const GzslSplit&, const GzslSplit&) = default;
};

/// Seen categories: floor(n * instance_ratio) instances selected, of which
/// floor(. * train_val_ratio) train and the rest validation; the remainder
/// goes to test. Every cell keeps at least one instance. Validation-category
/// instances form the validation set's unseen portion; unseen-category
/// instances go to test.
GzslSplit gzsl_split(const Bundle& bundle, const SplitOptions& options);

/// Throws std::logic_error when a partition invariant is broken.
void check_split(const GzslSplit& split, const Bundle& bundle);

std::string encode_split_json(const GzslSplit& split);
GzslSplit decode_split_json(std::string_view text);
void write_split(const GzslSplit& split, const std::filesystem::path& path);
GzslSplit read_split(const std::filesystem::path& path);

}  // namespace hmgrl::data
