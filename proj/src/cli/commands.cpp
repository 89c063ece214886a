#include "hmgrl/cli/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hmgrl/data/generator.hpp"
#include "hmgrl/data/split.hpp"
#include "hmgrl/engine/features.hpp"
#include "hmgrl/engine/gradient_suite.hpp"
#include "hmgrl/engine/trainer.hpp"
#include "json.hpp"

namespace hmgrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Usage problem detected after parsing (missing path, conflicting flags).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> gamma;
  std::size_t seeds = 1;
  std::string bundle;
  std::string split;
  std::string checkpoint;
  std::string features;
  std::string task;
  std::vector<std::size_t> categories;
  std::optional<std::size_t> k;
  std::optional<std::size_t> epochs;
  unsigned threads = 0;
  bool corrupt = false;
};

void log_line(std::ostream& out, json j) { out << j.dump() << '\n' << std::flush; }

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string("cannot read ") + what + " '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void require_path(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string("missing required ") + flag);
  if (!fs::exists(path)) throw UsageError(std::string(flag) + " path does not exist: '" + path + "'");
}

/// The seed flag wins over HMGRL_SEED, which wins over the config file.
std::optional<std::uint64_t> effective_seed(const Options& o) {
  if (o.seed) return o.seed;
  if (const char* env = std::getenv("HMGRL_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw engine::ConfigError("HMGRL_SEED", std::string("not an unsigned integer: '") + env + "'");
    return static_cast<std::uint64_t>(v);
  }
  return std::nullopt;
}

/// Reads the run config file: bundle/split/checkpoint/out entries fill
/// paths not given as flags; the remaining fields are TrainConfig keys.
json load_config_file(Options& o) {
  if (o.config.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_text(o.config, "--config"));
  } catch (const json::exception& e) {
    throw engine::ConfigError("--config", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw engine::ConfigError("--config", "expected a JSON object");
  const std::pair<const char*, std::string*> paths[] = {
      {"bundle", &o.bundle}, {"split", &o.split}, {"checkpoint", &o.checkpoint}, {"out", &o.out}};
  for (const auto& [key, target] : paths) {
    if (!j.contains(key)) continue;
    if (!j.at(key).is_string()) throw engine::ConfigError(key, "expected a path string");
    if (target->empty()) *target = j.at(key).get<std::string>();
    j.erase(key);
  }
  return j;
}

/// Task defaults, then file fields, then flags (seed also from HMGRL_SEED).
engine::TrainConfig build_config(const Options& o, const json& fields, TaskKind task) {
  if (fields.contains("task") && fields.at("task").is_string()) task = task_from_string(fields.at("task").get<std::string>());
  engine::TrainConfig config = engine::default_config(task);
  if (!fields.empty()) config = engine::config_from_json(fields.dump(), config);
  if (const auto seed = effective_seed(o)) config.seed = *seed;
  if (o.epochs) config.epochs = *o.epochs;
  if (o.k) config.k = *o.k;
  engine::validate_config(config);
  return config;
}

json group_json(const std::optional<engine::GroupMetrics>& g) {
  if (!g) return nullptr;
  return {{"accuracy", g->accuracy}, {"f1", g->f1}, {"count", g->count}};
}

json breakdown_json(const engine::LossBreakdown& b) {
  return {{"reg", b.reg}, {"cl", b.cl},       {"rank", b.rank},       {"vae", b.vae},
          {"ce", b.ce},   {"align", b.align}, {"overall", b.overall}};
}

int cmd_gen_data(Options& o, std::ostream& out) {
  if (o.config.empty()) throw UsageError("missing required --config (generator spec)");
  data::GeneratorSpec spec = data::generator_spec_from_json(read_text(o.config, "--config"));
  if (const auto seed = effective_seed(o)) spec.seed = *seed;
  if (o.out.empty()) throw UsageError("missing required --out");
  const data::Bundle bundle = data::generate_synthetic_corpus(spec);
  data::write_bundle(bundle, o.out);
  log_line(out, {{"event", "bundle_written"},
                 {"path", o.out},
                 {"samples", bundle.samples.size()},
                 {"categories", bundle.category_count()},
                 {"d", bundle.d},
                 {"seed", spec.seed}});
  return kExitOk;
}

int cmd_split(Options& o, std::ostream& out) {
  load_config_file(o);
  require_path(o.bundle, "--bundle");
  if (o.out.empty()) throw UsageError("missing required --out");
  const data::Bundle bundle = data::read_bundle(o.bundle);
  data::SplitOptions options;
  options.categories = data::default_category_counts(bundle.task);
  if (!o.categories.empty()) {
    if (o.categories.size() != 3) throw UsageError("--categories takes three counts: train val test");
    options.categories = {o.categories[0], o.categories[1], o.categories[2]};
  }
  options.seed = effective_seed(o).value_or(0);
  const data::GzslSplit split = data::gzsl_split(bundle, options);
  data::write_split(split, o.out);
  log_line(out, {{"event", "split_written"},
                 {"path", o.out},
                 {"seed", split.seed},
                 {"train", split.train.size()},
                 {"val", split.val.size()},
                 {"test", split.test.size()}});
  return kExitOk;
}

struct SeedOutcome {
  std::uint64_t seed;
  engine::EvalReport test;
};

SeedOutcome train_one(const data::Bundle& bundle, const data::GzslSplit& split, const engine::TrainConfig& config,
                      const fs::path& dir, unsigned threads, std::ostream& out) {
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl");
  if (!log) throw UsageError("cannot write to output directory '" + dir.string() + "'");
  fs::path last_path = dir / "last.ckpt";
  engine::TrainOptions options;
  options.threads = threads;
  options.on_epoch = [&](const engine::EpochRecord& r) {
    const json line = {{"event", "epoch"},
                       {"seed", config.seed},
                       {"epoch", r.epoch},
                       {"steps", r.steps},
                       {"loss", breakdown_json(r.train_loss)},
                       {"validation", json::parse(engine::report_to_json(r.validation, -1))},
                       {"selected", r.selected}};
    log << line.dump() << '\n';
    log_line(out, line);
  };
  options.on_checkpoint = [&](const engine::Checkpoint& c) { engine::write_checkpoint(c, last_path); };
  const engine::TrainResult result = engine::train(bundle, split, config, options);
  engine::write_checkpoint(result.best, dir / "best.ckpt");

  const engine::Evaluation test = engine::evaluate(bundle, split, result.best, std::nullopt, threads);
  data::write_file(dir / "test_report.json", engine::report_to_json(test.report));
  json summary = {{"event", "trained"},
                  {"seed", config.seed},
                  {"dir", dir.string()},
                  {"best_epoch", result.best.best_epoch},
                  {"gamma", result.best.gamma},
                  {"validation_harmonic", result.best.best_harmonic},
                  {"test", {{"seen", group_json(test.report.seen)},
                            {"unseen", group_json(test.report.unseen)},
                            {"overall", {{"accuracy", test.report.overall_accuracy}, {"f1", test.report.overall_f1}}}}}};
  if (result.initial_loss) summary["initial_loss"] = breakdown_json(*result.initial_loss);
  if (result.final_loss) summary["final_loss"] = breakdown_json(*result.final_loss);
  log << summary.dump() << '\n';
  log_line(out, summary);
  return {config.seed, test.report};
}

json mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return {{"mean", mean}, {"std", sd}};
}

int cmd_train(Options& o, std::ostream& out) {
  const json fields = load_config_file(o);
  require_path(o.bundle, "--bundle");
  require_path(o.split, "--split");
  if (o.out.empty()) throw UsageError("missing required --out (output directory)");
  if (o.seeds == 0) throw UsageError("--seeds must be at least 1");
  const data::Bundle bundle = data::read_bundle(o.bundle);
  const engine::TrainConfig config = build_config(o, fields, bundle.task);
  const data::GzslSplit split = data::read_split(o.split);

  if (o.seeds == 1) {
    train_one(bundle, split, config, o.out, o.threads, out);
    return kExitOk;
  }
  std::vector<SeedOutcome> outcomes;
  for (std::size_t i = 0; i < o.seeds; ++i) {
    engine::TrainConfig c = config;
    c.seed = config.seed + i;
    outcomes.push_back(train_one(bundle, split, c, fs::path(o.out) / ("seed-" + std::to_string(c.seed)), o.threads, out));
  }
  auto collect = [&](auto get) {
    std::vector<double> xs;
    for (const auto& s : outcomes) xs.push_back(get(s.test));
    return mean_std(xs);
  };
  auto acc = [](const std::optional<engine::GroupMetrics>& g) { return g ? g->accuracy : 0.0; };
  auto f1 = [](const std::optional<engine::GroupMetrics>& g) { return g ? g->f1 : 0.0; };
  const json summary = {
      {"event", "seed_summary"},
      {"seeds", o.seeds},
      {"seen_accuracy", collect([&](const engine::EvalReport& r) { return acc(r.seen); })},
      {"seen_f1", collect([&](const engine::EvalReport& r) { return f1(r.seen); })},
      {"unseen_accuracy", collect([&](const engine::EvalReport& r) { return acc(r.unseen); })},
      {"unseen_f1", collect([&](const engine::EvalReport& r) { return f1(r.unseen); })},
      {"overall_accuracy", collect([](const engine::EvalReport& r) { return r.overall_accuracy; })},
      {"overall_f1", collect([](const engine::EvalReport& r) { return r.overall_f1; })}};
  data::write_file(fs::path(o.out) / "summary.json", summary.dump(2));
  log_line(out, summary);
  return kExitOk;
}

int cmd_eval(Options& o, std::ostream& out) {
  load_config_file(o);
  require_path(o.bundle, "--bundle");
  require_path(o.split, "--split");
  require_path(o.checkpoint, "--checkpoint");
  if (o.gamma && !(*o.gamma >= 0.0)) throw UsageError("--gamma must be non-negative");
  const data::Bundle bundle = data::read_bundle(o.bundle);
  const data::GzslSplit split = data::read_split(o.split);
  const engine::Checkpoint checkpoint = engine::read_checkpoint(o.checkpoint);
  const engine::Evaluation result = engine::evaluate(bundle, split, checkpoint, o.gamma, o.threads);
  const std::string report = engine::report_to_json(result.report);
  if (!o.out.empty()) data::write_file(o.out, report);
  if (!o.features.empty()) {
    const engine::GzslView view = engine::make_view(bundle, split);
    engine::FeatureDump dump;
    dump.features = engine::sample_features(checkpoint.params, view.test, bundle.task, checkpoint.config.curvature,
                                            o.threads);
    for (const EmbeddedSample* s : view.test) dump.labels.push_back(s->label);
    engine::write_features(dump, o.features);
  }
  log_line(out, {{"event", "evaluated"},
                 {"gamma", result.report.gamma},
                 {"gamma_source", o.gamma ? "flag" : "checkpoint"},
                 {"calibration_monotone", result.report.unseen ? result.sweep.monotone() : true},
                 {"report", json::parse(report)}});
  return kExitOk;
}

int cmd_synth(Options& o, std::ostream& out) {
  load_config_file(o);
  require_path(o.bundle, "--bundle");
  require_path(o.split, "--split");
  require_path(o.checkpoint, "--checkpoint");
  if (o.out.empty()) throw UsageError("missing required --out");
  const data::Bundle bundle = data::read_bundle(o.bundle);
  const data::GzslSplit split = data::read_split(o.split);
  const engine::Checkpoint checkpoint = engine::read_checkpoint(o.checkpoint);
  if (split.unseen.empty()) throw UsageError("the split has no unseen categories to synthesise");
  const std::size_t k = o.k.value_or(checkpoint.config.k);
  if (k == 0) throw UsageError("--k must be at least 1");
  SeededRng rng(effective_seed(o).value_or(checkpoint.config.seed));
  engine::FeatureDump dump;
  dump.features = engine::synthesize_features(checkpoint.params, bundle.prototypes.subset(split.unseen).matrix(), k, rng);
  for (std::size_t c : split.unseen)
    for (std::size_t r = 0; r < k; ++r) dump.labels.push_back(static_cast<std::uint32_t>(c));
  engine::write_features(dump, o.out);
  log_line(out, {{"event", "synthesized"}, {"path", o.out}, {"rows", dump.labels.size()}, {"k", k}});
  return kExitOk;
}

int cmd_gradcheck(Options& o, std::ostream& out) {
  engine::GradientSuiteOptions suite;
  const json fields = load_config_file(o);
  const engine::TrainConfig config =
      build_config(o, fields, o.task.empty() ? TaskKind::kMet : task_from_string(o.task));
  suite.task = o.task.empty() ? config.task : task_from_string(o.task);
  suite.k = config.k;
  suite.seed = config.seed;
  if (const auto seed = effective_seed(o)) suite.seed = *seed;
  if (o.k) suite.k = *o.k;
  suite.corrupt = o.corrupt;
  const engine::GradientSuiteReport report = engine::run_gradient_suite(suite);
  const std::string text = engine::suite_report_to_json(report);
  if (!o.out.empty()) data::write_file(o.out, text);
  for (const auto& t : report.terms) {
    log_line(out, {{"event", "gradcheck"},
                   {"term", t.name},
                   {"max_relative_error", t.max_relative_error},
                   {"passed", t.passed}});
  }
  log_line(out, {{"event", "gradcheck_summary"}, {"passed", report.passed}, {"tolerance", report.tolerance}});
  return report.passed ? kExitOk : kExitNumerical;
}

void error_line(std::ostream& err, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["level"] = "error";
  extra["kind"] = kind;
  extra["message"] = message;
  err << extra.dump() << '\n' << std::flush;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized zero-shot multimodal information extraction on embedding bundles", "hmgrl"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--seed", o.seed, "Seed (overrides HMGRL_SEED and the config file)");
    cmd->add_option("--out", o.out, "Output path");
    cmd->add_option("--threads", o.threads, "Evaluation worker threads (0 = hardware count)");
  };
  auto inputs = [&](CLI::App* cmd) {
    cmd->add_option("--bundle", o.bundle, "Embedding bundle (.hmgb or .json)");
    cmd->add_option("--split", o.split, "Split file");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic embedding bundle from a spec");
  common(gen);
  CLI::App* split = app.add_subcommand("split", "Partition categories and instances");
  common(split);
  split->add_option("--bundle", o.bundle, "Embedding bundle");
  split->add_option("--categories", o.categories, "Seen, validation and unseen category counts")->expected(3);
  CLI::App* train = app.add_subcommand("train", "Train, select gamma on validation, report test metrics");
  common(train);
  inputs(train);
  train->add_option("--seeds", o.seeds, "Number of consecutive seeds; >1 adds a mean and std summary");
  train->add_option("--epochs", o.epochs, "Override the configured epoch count");
  train->add_option("--k", o.k, "Synthetic samples per unseen category");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  common(eval);
  inputs(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  eval->add_option("--gamma", o.gamma, "Calibration override (skips the selected value)");
  eval->add_option("--features", o.features, "Also export test-sample features (HMGF)");
  CLI::App* synth = app.add_subcommand("synth", "Dump synthetic unseen-category features");
  common(synth);
  inputs(synth);
  synth->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  synth->add_option("--k", o.k, "Samples per unseen category");
  CLI::App* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  common(grad);
  grad->add_option("--task", o.task, "MET or MRE");
  grad->add_option("--k", o.k, "Synthetic samples per unseen category");
  grad->add_flag("--corrupt", o.corrupt, "Perturb the analytic gradient (self-test)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (split->parsed()) return cmd_split(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (synth->parsed()) return cmd_synth(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out);
  } catch (const NumericalError& e) {
    error_line(err, "numerical", e.what(), {{"operation", e.op()}});
    return kExitNumerical;
  } catch (const engine::ConfigError& e) {
    error_line(err, "config", e.what(), {{"field", e.field()}});
    return kExitValidation;
  } catch (const data::FormatError& e) {
    error_line(err, "format", e.what(), {{"code", std::string(data::to_string(e.code()))}});
    return kExitValidation;
  } catch (const std::exception& e) {
    error_line(err, "validation", e.what());
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace hmgrl::cli
