#include "hmgrl/engine/checkpoint.hpp"

#include <bit>
#include <cstdio>

#include "json.hpp"

namespace hmgrl::engine {

using data::ByteReader;
using data::ByteWriter;
using data::FormatError;
using data::FormatErrorCode;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw std::invalid_argument("expected 16 hex digits");
  return std::stoull(s, nullptr, 16);
}

// Doubles travel as bit patterns so the header is exact.
std::string bits(double v) { return hex64(std::bit_cast<std::uint64_t>(v)); }
double from_bits(const json& j) { return std::bit_cast<double>(parse_hex64(j.get<std::string>())); }

void put_tensor(ByteWriter& w, const Tensor& t) {
  for (double v : t.data()) w.put_f64(v);
}

Tensor get_tensor(ByteReader& r, const std::vector<std::size_t>& shape) {
  Tensor t(shape);
  if (t.size() * 8 > r.remaining()) throw FormatError(FormatErrorCode::kTruncated, "parameter data runs past end of file");
  for (double& v : t.data()) v = r.get_f64();
  return t;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  const auto& opt = c.optimizer;
  const bool has_moments = opt.first_moment.size() == c.params.size() && opt.second_moment.size() == c.params.size();
  json words = json::array();
  for (std::uint64_t word : c.rng.words) words.push_back(hex64(word));
  const json header = {
      {"config", json::parse(config_to_json(c.config))},
      {"config_hash", hex64(config_hash(c.config))},
      {"epoch", c.epoch},
      {"rng", {{"algorithm", std::string(SeededRng::kAlgorithm)},
               {"seed", hex64(c.rng.seed)},
               {"words", words},
               {"has_spare", c.rng.has_spare},
               {"spare", bits(c.rng.spare)}}},
      {"optimizer", {{"kind", std::string(to_string(opt.kind))},
                     {"learning_rate", bits(opt.learning_rate)},
                     {"beta1", bits(opt.beta1)},
                     {"beta2", bits(opt.beta2)},
                     {"epsilon", bits(opt.epsilon)},
                     {"step", opt.step},
                     {"moments", has_moments}}},
      {"gamma", bits(c.gamma)},
      {"best_harmonic", bits(c.best_harmonic)},
      {"best_epoch", c.best_epoch}};

  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put_u32(kCheckpointVersion);
  w.put_string(header.dump());
  w.put_u32(static_cast<std::uint32_t>(c.params.size()));
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Parameter& p = c.params[i];
    w.put_string(p.name);
    w.put_u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) w.put_u64(e);
    put_tensor(w, p.value);
    if (has_moments) {
      put_tensor(w, opt.first_moment[i]);
      put_tensor(w, opt.second_moment[i]);
    }
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.get_bytes(4) != kCheckpointMagic) throw FormatError(FormatErrorCode::kBadMagic, "not an HMGC checkpoint");
  const std::uint32_t version = r.get_u32();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  bool has_moments = false;
  try {
    const json h = json::parse(r.get_string());
    c.config = config_from_json(h.at("config").dump(), TrainConfig{});
    if (parse_hex64(h.at("config_hash").get<std::string>()) != config_hash(c.config)) {
      throw FormatError(FormatErrorCode::kValidation, "config hash does not match the stored config");
    }
    c.epoch = h.at("epoch").get<std::size_t>();
    const json& rng = h.at("rng");
    if (rng.at("algorithm").get<std::string>() != SeededRng::kAlgorithm) {
      throw FormatError(FormatErrorCode::kValidation, "checkpoint RNG algorithm differs from this build");
    }
    c.rng.seed = parse_hex64(rng.at("seed").get<std::string>());
    const auto& words = rng.at("words");
    if (words.size() != 4) throw std::invalid_argument("rng.words must hold 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.rng.words[i] = parse_hex64(words[i].get<std::string>());
    c.rng.has_spare = rng.at("has_spare").get<bool>();
    c.rng.spare = from_bits(rng.at("spare"));
    const json& opt = h.at("optimizer");
    c.optimizer.kind = optimizer_from_string(opt.at("kind").get<std::string>());
    c.optimizer.learning_rate = from_bits(opt.at("learning_rate"));
    c.optimizer.beta1 = from_bits(opt.at("beta1"));
    c.optimizer.beta2 = from_bits(opt.at("beta2"));
    c.optimizer.epsilon = from_bits(opt.at("epsilon"));
    c.optimizer.step = opt.at("step").get<std::uint64_t>();
    has_moments = opt.at("moments").get<bool>();
    c.gamma = from_bits(h.at("gamma"));
    c.best_harmonic = from_bits(h.at("best_harmonic"));
    c.best_epoch = h.at("best_epoch").get<std::size_t>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, std::string("checkpoint header: ") + e.what());
  }

  const std::uint32_t count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const std::uint32_t rank = r.get_u32();
    if (rank > 2) throw FormatError(FormatErrorCode::kBadHeader, "parameter '" + name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.get_u64());
    c.params.add(name, get_tensor(r, shape));
    if (has_moments) {
      c.optimizer.first_moment.push_back(get_tensor(r, shape));
      c.optimizer.second_moment.push_back(get_tensor(r, shape));
    }
  }
  if (r.remaining() != 0) throw FormatError(FormatErrorCode::kTrailingData, "bytes after the last parameter");
  return c;
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  data::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(data::read_file(path)); }

}  // namespace hmgrl::engine
