#include "hmgrl/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hmgrl/rng.hpp"
#include "json.hpp"

namespace hmgrl::data {

using nlohmann::json;

namespace {

// Ratios such as 0.9 are not exact in binary; 70 * 0.9 must floor to 63.
std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

}  // namespace

CategoryCounts default_category_counts(TaskKind task) {
  return task == TaskKind::kMet ? CategoryCounts{4, 4, 4} : CategoryCounts{8, 7, 7};
}

GzslSplit gzsl_split(const Bundle& bundle, const SplitOptions& options) {
  const auto& counts = options.categories;
  const std::size_t total = counts.train + counts.val + counts.test;
  if (total != bundle.category_count()) {
    throw std::invalid_argument("gzsl_split: category counts sum to " + std::to_string(total) +
                                " but the bundle has " + std::to_string(bundle.category_count()) + " categories");
  }
  if (counts.train == 0) throw std::invalid_argument("gzsl_split: at least one seen category required");
  if (!(options.instance_ratio > 0.0 && options.instance_ratio < 1.0) ||
      !(options.train_val_ratio > 0.0 && options.train_val_ratio < 1.0)) {
    throw std::invalid_argument("gzsl_split: ratios must lie strictly between 0 and 1");
  }

  SeededRng rng(options.seed);
  std::vector<std::size_t> categories(bundle.category_count());
  std::iota(categories.begin(), categories.end(), std::size_t{0});
  rng.shuffle(categories);

  GzslSplit split;
  split.seed = options.seed;
  split.seen.assign(categories.begin(), categories.begin() + static_cast<std::ptrdiff_t>(counts.train));
  split.validation.assign(categories.begin() + static_cast<std::ptrdiff_t>(counts.train),
                          categories.begin() + static_cast<std::ptrdiff_t>(counts.train + counts.val));
  split.unseen.assign(categories.begin() + static_cast<std::ptrdiff_t>(counts.train + counts.val), categories.end());

  std::vector<std::vector<std::size_t>> by_category(bundle.category_count());
  for (std::size_t i = 0; i < bundle.samples.size(); ++i) by_category[bundle.samples[i].label].push_back(i);

  for (std::size_t c : split.seen) {
    auto instances = by_category[c];
    const std::size_t n = instances.size();
    if (n < 4) {
      throw std::invalid_argument("gzsl_split: seen category '" + bundle.prototypes.names()[c] + "' has " +
                                  std::to_string(n) + " instances; at least 4 are needed");
    }
    rng.shuffle(instances);
    const std::size_t selected = std::clamp(floor_count(static_cast<double>(n) * options.instance_ratio),
                                            std::size_t{2}, n - 1);
    const std::size_t train = std::clamp(floor_count(static_cast<double>(selected) * options.train_val_ratio),
                                         std::size_t{1}, selected - 1);
    split.train.insert(split.train.end(), instances.begin(), instances.begin() + static_cast<std::ptrdiff_t>(train));
    split.val.insert(split.val.end(), instances.begin() + static_cast<std::ptrdiff_t>(train),
                     instances.begin() + static_cast<std::ptrdiff_t>(selected));
    split.test.insert(split.test.end(), instances.begin() + static_cast<std::ptrdiff_t>(selected), instances.end());
  }
  for (std::size_t c : split.validation) split.val.insert(split.val.end(), by_category[c].begin(), by_category[c].end());
  for (std::size_t c : split.unseen) split.test.insert(split.test.end(), by_category[c].begin(), by_category[c].end());

  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void check_split(const GzslSplit& split, const Bundle& bundle) {
  const std::size_t k = bundle.category_count();
  std::vector<int> role(k, -1);
  auto mark = [&](const std::vector<std::size_t>& cats, int r) {
    for (std::size_t c : cats) {
      if (c >= k) throw std::logic_error("split: category index out of range");
      if (role[c] != -1) throw std::logic_error("split: category assigned twice");
      role[c] = r;
    }
  };
  mark(split.seen, 0);
  mark(split.validation, 1);
  mark(split.unseen, 2);
  if (std::count(role.begin(), role.end(), -1) != 0) throw std::logic_error("split: category subsets do not cover all categories");

  std::vector<int> seen_in(bundle.samples.size(), 0);
  auto visit = [&](const std::vector<std::size_t>& part, const char* name, auto allowed) {
    for (std::size_t i : part) {
      if (i >= bundle.samples.size()) throw std::logic_error(std::string("split: ") + name + " sample index out of range");
      ++seen_in[i];
      if (!allowed(role[bundle.samples[i].label])) {
        throw std::logic_error(std::string("split: ") + name + " holds a sample of a disallowed category role");
      }
    }
  };
  visit(split.train, "train", [](int r) { return r == 0; });
  visit(split.val, "val", [](int r) { return r == 0 || r == 1; });
  visit(split.test, "test", [](int r) { return r == 0 || r == 2; });
  for (int n : seen_in) {
    if (n != 1) throw std::logic_error("split: a sample appears in " + std::to_string(n) + " partitions");
  }
}

std::string encode_split_json(const GzslSplit& split) {
  const json j = {{"seed", split.seed},       {"seen", split.seen}, {"validation", split.validation},
                  {"unseen", split.unseen},   {"train", split.train}, {"val", split.val},
                  {"test", split.test}};
  return j.dump();
}

GzslSplit decode_split_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    GzslSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.seen = j.at("seen").get<std::vector<std::size_t>>();
    s.validation = j.at("validation").get<std::vector<std::size_t>>();
    s.unseen = j.at("unseen").get<std::vector<std::size_t>>();
    s.train = j.at("train").get<std::vector<std::size_t>>();
    s.val = j.at("val").get<std::vector<std::size_t>>();
    s.test = j.at("test").get<std::vector<std::size_t>>();
    return s;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, std::string("split file: ") + e.what());
  }
}

void write_split(const GzslSplit& split, const std::filesystem::path& path) {
  write_file(path, encode_split_json(split));
}

GzslSplit read_split(const std::filesystem::path& path) { return decode_split_json(read_file(path)); }

}  // namespace hmgrl::data
