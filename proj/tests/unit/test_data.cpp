#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "hmgrl/data/bundle.hpp"
#include "hmgrl/data/generator.hpp"
#include "hmgrl/data/split.hpp"

using namespace hmgrl;
using namespace hmgrl::data;
using hmgrl::testing::TempDir;

namespace {

FormatErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.code();
  }
  FAIL("expected a FormatError");
  return FormatErrorCode::kIo;
}

GeneratorSpec small_spec(TaskKind task = TaskKind::kMet) {
  GeneratorSpec s;
  s.task = task;
  s.categories = 3;
  s.d = 4;
  s.samples_per_category = 5;
  s.min_tokens = 4;
  s.max_tokens = 6;
  s.seed = 7;
  return s;
}

void put_u32_at(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32_at(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

// Offset of the first sample record: magic, version, header length, header.
std::size_t first_record(const std::string& bytes) { return 12 + get_u32_at(bytes, 8); }

Bundle uniform_bundle(std::size_t categories, std::size_t per_category) {
  GeneratorSpec s;
  s.categories = categories;
  s.samples_per_category = per_category;
  s.d = 2;
  s.min_tokens = 3;
  s.max_tokens = 3;
  s.min_patches = 1;
  s.max_patches = 1;
  return generate_synthetic_corpus(s);
}

}  // namespace

TEST_CASE("little-endian primitives") {
  ByteWriter w;
  w.put_u32(0x01020304u);
  w.put_u64(0x0102030405060708ull);
  w.put_f32(1.5f);
  w.put_f64(-2.25);
  w.put_string("abc");
  const std::string& b = w.bytes();
  CHECK(b.substr(0, 4) == std::string("\x04\x03\x02\x01", 4));
  ByteReader r(b);
  CHECK(r.get_u32() == 0x01020304u);
  CHECK(r.get_u64() == 0x0102030405060708ull);
  CHECK(r.get_f32() == 1.5f);
  CHECK(r.get_f64() == -2.25);
  CHECK(r.get_string() == "abc");
  CHECK(r.remaining() == 0);
  CHECK(code_of([&] { r.get_u32(); }) == FormatErrorCode::kTruncated);
}

TEST_CASE("bundle round trips") {
  SeededRng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Bundle b = hmgrl::testing::random_bundle(rng);
    CHECK(hmgrl::testing::same_bits(decode_bundle(encode_bundle(b)), b));
    CHECK(decode_bundle_json(encode_bundle_json(b)) == b);
  }
  TempDir dir;
  const Bundle g = generate_synthetic_corpus(small_spec(TaskKind::kMre));
  write_bundle(g, dir / "b.hmgb");
  write_bundle(g, dir / "b.json");
  CHECK(hmgrl::testing::same_bits(read_bundle(dir / "b.hmgb"), g));
  CHECK(read_bundle(dir / "b.json") == g);
}

TEST_CASE("bundle format errors") {
  const std::string good = encode_bundle(generate_synthetic_corpus(small_spec()));

  std::string magic = good;
  magic[0] = 'X';
  CHECK(code_of([&] { decode_bundle(magic); }) == FormatErrorCode::kBadMagic);
  CHECK(code_of([&] { decode_bundle("HM"); }) == FormatErrorCode::kBadMagic);

  std::string version = good;
  put_u32_at(version, 4, 2);
  CHECK(code_of([&] { decode_bundle(version); }) == FormatErrorCode::kVersionMismatch);

  CHECK(code_of([&] { decode_bundle(good.substr(0, good.size() - 3)); }) == FormatErrorCode::kTruncated);
  CHECK(code_of([&] { decode_bundle(good.substr(0, first_record(good) + 6)); }) == FormatErrorCode::kTruncated);
  CHECK(code_of([&] { decode_bundle(good + "xx"); }) == FormatErrorCode::kTrailingData);

  std::string header = good;
  header[12] = '[';
  CHECK(code_of([&] { decode_bundle(header); }) == FormatErrorCode::kBadHeader);

  // |T| is the third u32 of the first record, after the id and the label.
  std::string zero_tokens = good;
  const std::size_t rec = first_record(good);
  const std::size_t id_len = get_u32_at(good, rec);
  put_u32_at(zero_tokens, rec + 4 + id_len + 4, 0);
  CHECK(code_of([&] { decode_bundle(zero_tokens); }) == FormatErrorCode::kValidation);

  std::string bad_marker = good;
  put_u32_at(bad_marker, rec + 4 + id_len + 16, 999);
  CHECK(code_of([&] { decode_bundle(bad_marker); }) == FormatErrorCode::kValidation);

  CHECK(code_of([&] { read_bundle("/nonexistent/bundle.hmgb"); }) == FormatErrorCode::kIo);
}

TEST_CASE("bundle validation") {
  Bundle b = generate_synthetic_corpus(small_spec());
  SUBCASE("width") {
    b.samples[2].patches = Tensor::matrix(1, 5);
    CHECK(code_of([&] { validate_bundle(b); }) == FormatErrorCode::kInconsistentWidth);
  }
  SUBCASE("duplicate ids") {
    b.samples[1].sample_id = b.samples[0].sample_id;
    CHECK(code_of([&] { validate_bundle(b); }) == FormatErrorCode::kValidation);
  }
  SUBCASE("label without prototype") {
    b.samples[0].label = 3;
    CHECK(code_of([&] { validate_bundle(b); }) == FormatErrorCode::kValidation);
  }
  SUBCASE("E2 only under MRE") {
    b.samples[0].marker_e2 = 1;
    CHECK(code_of([&] { validate_bundle(b); }) == FormatErrorCode::kValidation);
  }
  SUBCASE("too few tokens") {
    b.samples[0].tokens = Tensor::matrix(2, 4);
    b.samples[0].marker_e1 = 1;
    CHECK(code_of([&] { validate_bundle(b); }) == FormatErrorCode::kValidation);
  }
  SUBCASE("manifest width") {
    std::string text = encode_bundle_json(b);
    const auto pos = text.find("\"prototypes\"");
    REQUIRE(pos != std::string::npos);
    text.insert(text.find('[', text.find('[', pos) + 1) + 1, "0.5,");
    CHECK(code_of([&] { decode_bundle_json(text); }) == FormatErrorCode::kInconsistentWidth);
  }
}

TEST_CASE("split protocol on 100 instances per category") {
  const Bundle b = uniform_bundle(12, 100);
  const GzslSplit s = gzsl_split(b, {default_category_counts(TaskKind::kMet), 0.70, 0.90, 3});
  CHECK(s.seen.size() == 4);
  CHECK(s.validation.size() == 4);
  CHECK(s.unseen.size() == 4);
  check_split(s, b);
  for (std::size_t c : s.seen) {
    auto count = [&](const std::vector<std::size_t>& part) {
      return std::count_if(part.begin(), part.end(), [&](std::size_t i) { return b.samples[i].label == c; });
    };
    CHECK(count(s.train) == 63);
    CHECK(count(s.val) == 7);
    CHECK(count(s.test) == 30);
  }
  for (std::size_t c : s.unseen) {
    CHECK(std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return b.samples[i].label == c; }) == 100);
  }
  CHECK(s.train.size() == 4 * 63);
  CHECK(s.val.size() == 4 * 7 + 4 * 100);
  CHECK(s.test.size() == 4 * 30 + 4 * 100);
  CHECK(default_category_counts(TaskKind::kMre).train == 8);
  CHECK(default_category_counts(TaskKind::kMre).val == 7);
  CHECK(default_category_counts(TaskKind::kMre).test == 7);
}

TEST_CASE("split invariants over reseeded runs") {
  const Bundle b = uniform_bundle(12, 20);
  std::set<std::vector<std::size_t>> partitions;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GzslSplit s = gzsl_split(b, {{4, 4, 4}, 0.70, 0.90, seed});
    CHECK_NOTHROW(check_split(s, b));
    CHECK(s == gzsl_split(b, {{4, 4, 4}, 0.70, 0.90, seed}));
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    partitions.insert(s.seen);
  }
  CHECK(partitions.size() > 1);
}

TEST_CASE("split cells stay populated on small categories") {
  const Bundle b = uniform_bundle(3, 4);
  const GzslSplit s = gzsl_split(b, {{1, 1, 1}, 0.70, 0.90, 0});
  check_split(s, b);
  CHECK(s.train.size() == 1);
  CHECK(s.val.size() == 1 + 4);
  CHECK(s.test.size() == 2 + 4);
  CHECK_THROWS_AS(gzsl_split(uniform_bundle(3, 3), {{1, 1, 1}, 0.70, 0.90, 0}), std::invalid_argument);
  CHECK_THROWS_AS(gzsl_split(b, {{1, 1, 2}, 0.70, 0.90, 0}), std::invalid_argument);
}

TEST_CASE("broken splits are rejected") {
  const Bundle b = uniform_bundle(3, 10);
  const GzslSplit good = gzsl_split(b, {{1, 1, 1}, 0.70, 0.90, 5});
  GzslSplit leak = good;
  leak.train.push_back(leak.test.back());
  CHECK_THROWS_AS(check_split(leak, b), std::logic_error);
  GzslSplit unseen_train = good;
  const std::size_t unseen_sample = unseen_train.test.back();
  unseen_train.test.pop_back();
  unseen_train.train.push_back(unseen_sample);
  CHECK_THROWS_AS(check_split(unseen_train, b), std::logic_error);
  GzslSplit dropped = good;
  dropped.val.pop_back();
  CHECK_THROWS_AS(check_split(dropped, b), std::logic_error);
}

TEST_CASE("split file round trip") {
  const Bundle b = uniform_bundle(6, 10);
  const GzslSplit s = gzsl_split(b, {{2, 2, 2}, 0.70, 0.90, 11});
  CHECK(decode_split_json(encode_split_json(s)) == s);
  TempDir dir;
  write_split(s, dir / "split.json");
  CHECK(read_split(dir / "split.json") == s);
  CHECK(code_of([] { decode_split_json("{\"seen\": 3}"); }) == FormatErrorCode::kBadHeader);
}

TEST_CASE("generator determinism and shape") {
  const GeneratorSpec spec = small_spec(TaskKind::kMre);
  const Bundle a = generate_synthetic_corpus(spec);
  CHECK(encode_bundle(a) == encode_bundle(generate_synthetic_corpus(spec)));
  CHECK(a.samples.size() == 15);
  CHECK(a.samples[6].sample_id == "category-1-1");
  CHECK(a.samples[6].label == 1);
  for (const auto& s : a.samples) {
    CHECK(s.tokens.rows() >= 4);
    CHECK(s.tokens.rows() <= 6);
    CHECK(s.marker_cls == 0);
    CHECK(s.marker_e1 >= 1);
    CHECK(s.marker_e1 + 1 < s.tokens.rows());
    REQUIRE(s.marker_e2);
    CHECK(*s.marker_e2 != s.marker_e1);
    CHECK(*s.marker_e2 + 1 < s.tokens.rows());
  }
  GeneratorSpec other = spec;
  other.seed = 8;
  CHECK(encode_bundle(generate_synthetic_corpus(other)) != encode_bundle(a));
  // Every value is stored at f32 precision, so the binary round trip is exact.
  CHECK(decode_bundle(encode_bundle(a)) == a);
}

TEST_CASE("generated corpora are separable at a large scale-to-spread ratio") {
  GeneratorSpec spec;
  spec.categories = 8;
  spec.d = 16;
  spec.samples_per_category = 50;
  spec.prototype_scale = 1.0;
  spec.spread = 0.1;
  spec.seed = 4;
  const Bundle b = generate_synthetic_corpus(spec);
  std::size_t correct = 0;
  for (const auto& s : b.samples) {
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (std::size_t c = 0; c < b.category_count(); ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < b.d; ++j) dist += std::pow(s.tokens(s.marker_cls, j) - b.prototypes.matrix()(c, j), 2);
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    correct += best == s.label;
  }
  CHECK(static_cast<double>(correct) / b.samples.size() > 0.9);
}

TEST_CASE("coupling limits") {
  GeneratorSpec spec = small_spec();
  spec.spread = 1e-7;
  spec.coupling = 1.0;
  const Bundle tight = generate_synthetic_corpus(spec);
  for (const auto& s : tight.samples) {
    for (std::size_t j = 0; j < spec.d; ++j) CHECK(std::abs(s.patches(0, j) - s.tokens(0, j)) < 1e-5);
  }

  // With no coupling the patch rows do not depend on the category centres.
  spec.spread = 0.2;
  spec.coupling = 0.0;
  GeneratorSpec rescaled = spec;
  rescaled.prototype_scale = 5.0;
  const Bundle a = generate_synthetic_corpus(spec);
  const Bundle b = generate_synthetic_corpus(rescaled);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].patches == b.samples[i].patches);
    CHECK(a.samples[i].tokens != b.samples[i].tokens);
  }
}

TEST_CASE("generator spec validation names the field") {
  auto message = [](const GeneratorSpec& s) {
    try {
      validate_generator_spec(s);
    } catch (const FormatError& e) {
      CHECK(e.code() == FormatErrorCode::kValidation);
      return std::string(e.what());
    }
    return std::string();
  };
  GeneratorSpec s = small_spec();
  s.coupling = 2.0;
  CHECK(message(s).find("'coupling'") != std::string::npos);
  s = small_spec();
  s.spread = 0.0;
  CHECK(message(s).find("'spread'") != std::string::npos);
  s = small_spec(TaskKind::kMre);
  s.min_tokens = 3;
  CHECK(message(s).find("'min_tokens'") != std::string::npos);
  s = small_spec();
  s.names = {"a"};
  CHECK(message(s).find("'names'") != std::string::npos);
  CHECK(message(small_spec()).empty());

  const GeneratorSpec parsed = generator_spec_from_json(generator_spec_to_json(small_spec(TaskKind::kMre)));
  CHECK(parsed == small_spec(TaskKind::kMre));
  CHECK(code_of([] { generator_spec_from_json("{\"colour\": 1}"); }) == FormatErrorCode::kValidation);
  CHECK(code_of([] { generator_spec_from_json("{\"coupling\": 2}"); }) == FormatErrorCode::kValidation);
  CHECK(code_of([] { generator_spec_from_json("not json"); }) == FormatErrorCode::kBadHeader);
}
