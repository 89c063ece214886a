#include "hmgrl/data/generator.hpp"

#include <cmath>

#include "hmgrl/rng.hpp"
#include "json.hpp"

namespace hmgrl::data {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw FormatError(FormatErrorCode::kValidation, "generator spec field '" + field + "': " + why);
}

std::vector<std::string> category_names(const GeneratorSpec& spec) {
  if (!spec.names.empty()) return spec.names;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.categories; ++i) names.push_back("category-" + std::to_string(i));
  return names;
}

std::size_t draw_count(SeededRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

// Storage precision is f32; round at generation so a bundle equals its own
// round trip through the binary format.
double stored(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void validate_generator_spec(const GeneratorSpec& spec) {
  if (spec.categories == 0) bad_field("categories", "must be at least 1");
  if (!spec.names.empty() && spec.names.size() != spec.categories) {
    bad_field("names", "has " + std::to_string(spec.names.size()) + " entries for " +
                           std::to_string(spec.categories) + " categories");
  }
  if (spec.d == 0) bad_field("d", "must be positive");
  if (spec.samples_per_category == 0) bad_field("samples_per_category", "must be positive");
  if (spec.min_tokens < 3) bad_field("min_tokens", "must be at least 3");
  if (spec.max_tokens < spec.min_tokens) bad_field("max_tokens", "is below min_tokens");
  if (spec.task == TaskKind::kMre && spec.min_tokens < 4) bad_field("min_tokens", "must be at least 4 for two entity markers");
  if (spec.min_patches == 0) bad_field("min_patches", "must be at least 1");
  if (spec.max_patches < spec.min_patches) bad_field("max_patches", "is below min_patches");
  if (!(spec.prototype_scale > 0.0) || !std::isfinite(spec.prototype_scale)) bad_field("prototype_scale", "must be positive");
  if (!(spec.spread > 0.0) || !std::isfinite(spec.spread)) bad_field("spread", "must be positive");
  if (!(spec.coupling >= 0.0 && spec.coupling <= 1.0)) bad_field("coupling", "must lie in [0, 1]");
}

GeneratorSpec generator_spec_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, std::string("generator spec: ") + e.what());
  }
  if (!j.is_object()) throw FormatError(FormatErrorCode::kBadHeader, "generator spec: expected a JSON object");
  GeneratorSpec spec;
  std::string field;
  try {
    for (const auto& [key, value] : j.items()) {
      field = key;
      if (key == "task") spec.task = task_from_string(value.get<std::string>());
      else if (key == "categories") spec.categories = value.get<std::size_t>();
      else if (key == "names") spec.names = value.get<std::vector<std::string>>();
      else if (key == "d") spec.d = value.get<std::size_t>();
      else if (key == "samples_per_category") spec.samples_per_category = value.get<std::size_t>();
      else if (key == "min_tokens") spec.min_tokens = value.get<std::size_t>();
      else if (key == "max_tokens") spec.max_tokens = value.get<std::size_t>();
      else if (key == "min_patches") spec.min_patches = value.get<std::size_t>();
      else if (key == "max_patches") spec.max_patches = value.get<std::size_t>();
      else if (key == "prototype_scale") spec.prototype_scale = value.get<double>();
      else if (key == "spread") spec.spread = value.get<double>();
      else if (key == "coupling") spec.coupling = value.get<double>();
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else bad_field(key, "unknown field");
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    bad_field(field, e.what());
  }
  validate_generator_spec(spec);
  return spec;
}

std::string generator_spec_to_json(const GeneratorSpec& spec) {
  const json j = {{"task", std::string(to_string(spec.task))},
                  {"categories", spec.categories},
                  {"names", spec.names},
                  {"d", spec.d},
                  {"samples_per_category", spec.samples_per_category},
                  {"min_tokens", spec.min_tokens},
                  {"max_tokens", spec.max_tokens},
                  {"min_patches", spec.min_patches},
                  {"max_patches", spec.max_patches},
                  {"prototype_scale", spec.prototype_scale},
                  {"spread", spec.spread},
                  {"coupling", spec.coupling},
                  {"seed", spec.seed}};
  return j.dump(2);
}

GeneratorSpec read_generator_spec(const std::filesystem::path& path) {
  return generator_spec_from_json(read_file(path));
}

Bundle generate_synthetic_corpus(const GeneratorSpec& spec) {
  validate_generator_spec(spec);
  const std::size_t d = spec.d;
  const std::size_t k = spec.categories;
  const double sw = spec.spread;
  const double rho = spec.coupling;

  // Stream 0 draws prototypes; streams 1.. belong to samples.
  SeededRng proto_rng = SeededRng::derived(spec.seed, 0);
  Tensor centers = Tensor::matrix(k, d);
  for (double& v : centers.data()) v = spec.prototype_scale * proto_rng.standard_normal();
  Tensor prototype_rows = Tensor::matrix(k, d);
  for (std::size_t i = 0; i < k * d; ++i) {
    prototype_rows[i] = stored(centers[i] + 0.25 * sw * proto_rng.standard_normal());
  }

  Bundle bundle;
  bundle.task = spec.task;
  bundle.d = d;
  const auto names = category_names(spec);
  bundle.samples.reserve(k * spec.samples_per_category);
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t n = 0; n < spec.samples_per_category; ++n) {
      const std::size_t index = y * spec.samples_per_category + n;
      SeededRng rng = SeededRng::derived(spec.seed, index + 1);
      std::vector<double> base(d);
      for (std::size_t j = 0; j < d; ++j) base[j] = centers(y, j) + sw * rng.standard_normal();

      EmbeddedSample s;
      s.sample_id = names[y] + "-" + std::to_string(n);
      s.label = static_cast<std::uint32_t>(y);
      const std::size_t t = draw_count(rng, spec.min_tokens, spec.max_tokens);
      const std::size_t v = draw_count(rng, spec.min_patches, spec.max_patches);
      s.tokens = Tensor::matrix(t, d);
      for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t j = 0; j < d; ++j) s.tokens(r, j) = stored(base[j] + sw * rng.standard_normal());
      }
      s.patches = Tensor::matrix(v, d);
      for (std::size_t r = 0; r < v; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
          const double noise = rng.standard_normal();
          s.patches(r, j) = stored(rho * base[j] + (1.0 - rho) * noise + sw * rng.standard_normal());
        }
      }
      // CLS leads, the last row plays SEP; entity markers sit in between.
      s.marker_cls = 0;
      const std::size_t inner = t - 2;
      s.marker_e1 = static_cast<std::uint32_t>(1 + rng.uniform_index(inner));
      if (spec.task == TaskKind::kMre) {
        std::size_t e2 = 1 + static_cast<std::size_t>(rng.uniform_index(inner - 1));
        if (e2 >= s.marker_e1) ++e2;
        s.marker_e2 = static_cast<std::uint32_t>(e2);
      }
      bundle.samples.push_back(std::move(s));
    }
  }
  bundle.prototypes = PrototypeSet(names, std::move(prototype_rows));
  validate_bundle(bundle);
  return bundle;
}

}  // namespace hmgrl::data
