#include "hmgrl/engine/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace hmgrl::engine {

using nlohmann::json;

std::string_view to_string(SynthesisSource source) {
  switch (source) {
    case SynthesisSource::kUnseen: return "unseen";
    case SynthesisSource::kValidation: return "validation";
    case SynthesisSource::kHeldOut: return "held_out";
  }
  return "unseen";
}

namespace {

SynthesisSource source_from_string(const std::string& name) {
  if (name == "unseen") return SynthesisSource::kUnseen;
  if (name == "validation") return SynthesisSource::kValidation;
  if (name == "held_out") return SynthesisSource::kHeldOut;
  throw std::invalid_argument("expected 'unseen', 'validation' or 'held_out', got '" + name + "'");
}

json to_json(const TrainConfig& c) {
  return {{"task", std::string(to_string(c.task))},
          {"h", c.h},
          {"learning_rate", c.learning_rate},
          {"optimizer", std::string(to_string(c.optimizer))},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"eta", c.eta},
          {"zeta", c.zeta},
          {"gamma_grid", c.gamma_grid},
          {"gamma_points", c.gamma_points},
          {"k", c.k},
          {"ib_beta", c.ib_beta},
          {"curvature", c.curvature},
          {"seed", c.seed},
          {"synthesize", c.synthesize},
          {"exclude_true_in_rank", c.exclude_true_in_rank},
          {"synthesis_source", std::string(to_string(c.synthesis_source))},
          {"init_scale", c.init_scale}};
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

TrainConfig default_config(TaskKind task) {
  TrainConfig c;
  c.task = task;
  if (task == TaskKind::kMre) {
    c.epochs = 25;
    c.batch_size = 8;
  }
  return c;
}

void validate_config(const TrainConfig& c) {
  require(c.h >= 1, "h", "must be at least 1");
  require(std::isfinite(c.learning_rate) && c.learning_rate > 0.0, "learning_rate", "must be positive");
  require(c.epochs >= 1, "epochs", "must be at least 1");
  require(c.batch_size >= 1, "batch_size", "must be at least 1");
  require(std::isfinite(c.eta) && c.eta >= 0.0, "eta", "must be non-negative");
  require(std::isfinite(c.zeta) && c.zeta >= 0.0, "zeta", "must be non-negative");
  for (double g : c.gamma_grid) require(std::isfinite(g) && g >= 0.0, "gamma_grid", "entries must be non-negative");
  require(c.gamma_points >= 1, "gamma_points", "must be at least 1");
  require(c.k >= 1, "k", "must be at least 1");
  require(std::isfinite(c.ib_beta) && c.ib_beta >= 0.0, "ib_beta", "must be non-negative");
  require(std::isfinite(c.curvature) && c.curvature < 0.0, "curvature", "must be negative");
  require(std::isfinite(c.init_scale) && c.init_scale > 0.0, "init_scale", "must be positive");
}

std::string config_to_json(const TrainConfig& config) { return to_json(config).dump(2); }

TrainConfig config_from_json(std::string_view text, const TrainConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<file>", "expected a JSON object");
  TrainConfig c = base;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "task") c.task = task_from_string(v.get<std::string>());
      else if (key == "h") c.h = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "optimizer") c.optimizer = optimizer_from_string(v.get<std::string>());
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "eta") c.eta = v.get<double>();
      else if (key == "zeta") c.zeta = v.get<double>();
      else if (key == "gamma_grid") c.gamma_grid = v.get<std::vector<double>>();
      else if (key == "gamma_points") c.gamma_points = v.get<std::size_t>();
      else if (key == "k") c.k = v.get<std::size_t>();
      else if (key == "ib_beta") c.ib_beta = v.get<double>();
      else if (key == "curvature") c.curvature = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "synthesize") c.synthesize = v.get<bool>();
      else if (key == "exclude_true_in_rank") c.exclude_true_in_rank = v.get<bool>();
      else if (key == "synthesis_source") c.synthesis_source = source_from_string(v.get<std::string>());
      else if (key == "init_scale") c.init_scale = v.get<double>();
      else throw ConfigError(key, "unknown field");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  }
  validate_config(c);
  return c;
}

TrainConfig read_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return config_from_json(text, base);
}

std::uint64_t config_hash(const TrainConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(config).dump()) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace hmgrl::engine
