#include "hmgrl/data/bundle.hpp"

#include <set>

#include "json.hpp"

namespace hmgrl::data {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw FormatError(FormatErrorCode::kValidation, message); }

void check_matrix_width(const Tensor& m, std::size_t d, const std::string& what) {
  if (m.cols() != d) {
    throw FormatError(FormatErrorCode::kInconsistentWidth,
                      what + " has width " + std::to_string(m.cols()) + ", bundle d is " + std::to_string(d));
  }
}

void put_matrix(ByteWriter& w, const Tensor& m) {
  for (double v : m.data()) w.put_f32(static_cast<float>(v));
}

Tensor get_matrix(ByteReader& r, std::size_t rows, std::size_t cols) {
  Tensor m = Tensor::matrix(rows, cols);
  for (double& v : m.data()) v = static_cast<double>(r.get_f32());
  return m;
}

json header_of(const Bundle& b) {
  return {{"task", std::string(to_string(b.task))},
          {"d", b.d},
          {"categories", b.prototypes.names()},
          {"num_categories", b.category_count()},
          {"num_samples", b.samples.size()}};
}

}  // namespace

void validate_bundle(const Bundle& bundle) {
  if (bundle.d == 0) invalid("d must be positive");
  if (bundle.prototypes.empty()) invalid("bundle has no categories");
  check_matrix_width(bundle.prototypes.matrix(), bundle.d, "prototype matrix");
  std::set<std::string> ids;
  for (const auto& s : bundle.samples) {
    const std::string where = "sample '" + s.sample_id + "'";
    if (!ids.insert(s.sample_id).second) invalid("duplicate " + where);
    if (s.label >= bundle.category_count()) invalid(where + " label " + std::to_string(s.label) + " has no prototype");
    if (s.tokens.rows() < 3) invalid(where + " needs at least 3 token rows (CLS, token, SEP), has " + std::to_string(s.tokens.rows()));
    if (s.patches.rows() < 1) invalid(where + " has no patch rows");
    check_matrix_width(s.tokens, bundle.d, where + " tokens");
    check_matrix_width(s.patches, bundle.d, where + " patches");
    const std::size_t t = s.tokens.rows();
    if (s.marker_cls >= t || s.marker_e1 >= t) invalid(where + " marker index outside token rows");
    const bool mre = bundle.task == TaskKind::kMre;
    if (mre != s.marker_e2.has_value()) invalid(where + (mre ? " lacks the E2 marker required by MRE" : " carries an E2 marker under MET"));
    if (s.marker_e2 && *s.marker_e2 >= t) invalid(where + " E2 marker outside token rows");
    if (!s.tokens.all_finite() || !s.patches.all_finite()) invalid(where + " has non-finite embeddings");
  }
}

std::string encode_bundle(const Bundle& bundle) {
  validate_bundle(bundle);
  ByteWriter w;
  w.put_bytes(kBundleMagic);
  w.put_u32(kBundleVersion);
  w.put_string(header_of(bundle).dump());
  for (const auto& s : bundle.samples) {
    w.put_string(s.sample_id);
    w.put_u32(s.label);
    w.put_u32(static_cast<std::uint32_t>(s.tokens.rows()));
    w.put_u32(static_cast<std::uint32_t>(s.patches.rows()));
    w.put_u32(s.marker_cls);
    w.put_u32(s.marker_e1);
    w.put_u32(s.marker_e2.value_or(kAbsentMarker));
    put_matrix(w, s.tokens);
    put_matrix(w, s.patches);
  }
  put_matrix(w, bundle.prototypes.matrix());
  return w.bytes();
}

Bundle decode_bundle(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.get_bytes(4) != kBundleMagic) {
    throw FormatError(FormatErrorCode::kBadMagic, "not an HMGB bundle");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kBundleVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "bundle version " + std::to_string(version) + ", reader supports " + std::to_string(kBundleVersion));
  }
  Bundle b;
  std::vector<std::string> names;
  std::size_t num_samples = 0;
  try {
    const json header = json::parse(r.get_string());
    b.task = task_from_string(header.at("task").get<std::string>());
    b.d = header.at("d").get<std::size_t>();
    names = header.at("categories").get<std::vector<std::string>>();
    num_samples = header.at("num_samples").get<std::size_t>();
    if (header.at("num_categories").get<std::size_t>() != names.size()) {
      throw FormatError(FormatErrorCode::kBadHeader, "num_categories disagrees with category list");
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, e.what());
  }
  if (b.d == 0) throw FormatError(FormatErrorCode::kBadHeader, "d must be positive");

  b.samples.reserve(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    EmbeddedSample s;
    s.sample_id = r.get_string();
    s.label = r.get_u32();
    const std::uint32_t t = r.get_u32();
    const std::uint32_t v = r.get_u32();
    s.marker_cls = r.get_u32();
    s.marker_e1 = r.get_u32();
    const std::uint32_t e2 = r.get_u32();
    if (e2 != kAbsentMarker) s.marker_e2 = e2;
    if (t == 0) invalid("sample '" + s.sample_id + "' claims zero token rows; markers cannot exist");
    if ((static_cast<std::uint64_t>(t) + v) * b.d * 4 > r.remaining()) {
      throw FormatError(FormatErrorCode::kTruncated, "sample '" + s.sample_id + "' embeddings run past end of file");
    }
    s.tokens = get_matrix(r, t, b.d);
    s.patches = get_matrix(r, v, b.d);
    b.samples.push_back(std::move(s));
  }
  Tensor prototypes = get_matrix(r, names.size(), b.d);
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorCode::kTrailingData,
                      std::to_string(r.remaining()) + " bytes after the prototype matrix (inconsistent d?)");
  }
  b.prototypes = PrototypeSet(std::move(names), std::move(prototypes));
  validate_bundle(b);
  return b;
}

namespace {

json matrix_json(const Tensor& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row_span(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Tensor matrix_from_json(const json& rows, std::size_t d, const std::string& what) {
  std::vector<double> values;
  for (const auto& row : rows) {
    auto v = row.get<std::vector<double>>();
    if (v.size() != d) {
      throw FormatError(FormatErrorCode::kInconsistentWidth,
                        what + " row has width " + std::to_string(v.size()) + ", bundle d is " + std::to_string(d));
    }
    values.insert(values.end(), v.begin(), v.end());
  }
  return Tensor::matrix(rows.size(), d, std::move(values));
}

}  // namespace

std::string encode_bundle_json(const Bundle& bundle) {
  validate_bundle(bundle);
  json j = header_of(bundle);
  j["prototypes"] = matrix_json(bundle.prototypes.matrix());
  json samples = json::array();
  for (const auto& s : bundle.samples) {
    json js = {{"id", s.sample_id},
               {"label", s.label},
               {"cls", s.marker_cls},
               {"e1", s.marker_e1},
               {"tokens", matrix_json(s.tokens)},
               {"patches", matrix_json(s.patches)}};
    if (s.marker_e2) js["e2"] = *s.marker_e2;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  return j.dump(1);
}

Bundle decode_bundle_json(std::string_view text) {
  Bundle b;
  try {
    const json j = json::parse(text);
    b.task = task_from_string(j.at("task").get<std::string>());
    b.d = j.at("d").get<std::size_t>();
    auto names = j.at("categories").get<std::vector<std::string>>();
    b.prototypes = PrototypeSet(std::move(names), matrix_from_json(j.at("prototypes"), b.d, "prototype"));
    for (const auto& js : j.at("samples")) {
      EmbeddedSample s;
      s.sample_id = js.at("id").get<std::string>();
      s.label = js.at("label").get<std::uint32_t>();
      s.marker_cls = js.at("cls").get<std::uint32_t>();
      s.marker_e1 = js.at("e1").get<std::uint32_t>();
      if (js.contains("e2")) s.marker_e2 = js.at("e2").get<std::uint32_t>();
      s.tokens = matrix_from_json(js.at("tokens"), b.d, "token");
      s.patches = matrix_from_json(js.at("patches"), b.d, "patch");
      b.samples.push_back(std::move(s));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, std::string("bundle manifest: ") + e.what());
  }
  validate_bundle(b);
  return b;
}

void write_bundle(const Bundle& bundle, const std::filesystem::path& path) {
  write_file(path, path.extension() == ".json" ? encode_bundle_json(bundle) : encode_bundle(bundle));
}

Bundle read_bundle(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && bytes[first] == '{') return decode_bundle_json(bytes);
  return decode_bundle(bytes);
}

}  // namespace hmgrl::data
