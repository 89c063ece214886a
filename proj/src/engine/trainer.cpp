#include "hmgrl/engine/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hmgrl::engine {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kMeasureStream = 2;

Tensor prototype_rows(const data::Bundle& bundle, const std::vector<std::size_t>& categories) {
  return bundle.prototypes.subset(categories).matrix();
}

CandidateSet make_candidates(const data::Bundle& bundle, const std::vector<std::size_t>& seen,
                             const std::vector<std::size_t>& others) {
  CandidateSet c;
  c.categories = seen;
  c.categories.insert(c.categories.end(), others.begin(), others.end());
  for (std::size_t i = 0; i < c.categories.size(); ++i) {
    c.names.push_back(bundle.prototypes.names()[c.categories[i]]);
    c.seen.push_back(i < seen.size());
  }
  c.prototypes = prototype_rows(bundle, c.categories);
  return c;
}

const Tensor& synthesis_conditions(const GzslView& view, const TrainConfig& config) {
  switch (config.synthesis_source) {
    case SynthesisSource::kValidation: return view.validation_prototypes;
    case SynthesisSource::kHeldOut: return view.held_out_prototypes;
    case SynthesisSource::kUnseen: break;
  }
  return view.unseen_prototypes;
}

TrainingBatch make_batch(const GzslView& view, const TrainConfig& config, const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end) {
  TrainingBatch batch;
  for (std::size_t i = begin; i < end; ++i) {
    batch.samples.push_back(view.train[order[i]]);
    batch.targets.push_back(view.train_targets[order[i]]);
  }
  batch.seen_prototypes = view.seen_prototypes;
  if (config.synthesize) batch.unseen_prototypes = synthesis_conditions(view, config);
  return batch;
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x) {
  sum.reg += x.reg;
  sum.cl += x.cl;
  sum.rank += x.rank;
  sum.vae += x.vae;
  sum.ce += x.ce;
  sum.align += x.align;
  sum.overall += x.overall;
}

LossBreakdown scaled(LossBreakdown x, double f) {
  x.reg *= f;
  x.cl *= f;
  x.rank *= f;
  x.vae *= f;
  x.ce *= f;
  x.align *= f;
  x.overall *= f;
  return x;
}

void check_compatible(const Checkpoint& c, const TrainConfig& config, std::size_t d) {
  if (config_hash(c.config) != config_hash(config)) {
    throw std::invalid_argument("resume checkpoint was written with a different config");
  }
  infer_shape(c.params, config.task);
  if (c.params.at("hvib.M_mu").value.cols() != d) throw std::invalid_argument("resume checkpoint width differs from bundle d");
}

}  // namespace

std::vector<std::size_t> CandidateSet::truth(const std::vector<const EmbeddedSample*>& samples) const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const EmbeddedSample* s : samples) {
    const auto it = std::find(categories.begin(), categories.end(), s->label);
    if (it == categories.end()) {
      throw std::invalid_argument("sample '" + s->sample_id + "' belongs to no candidate category");
    }
    out.push_back(static_cast<std::size_t>(it - categories.begin()));
  }
  return out;
}

GzslView make_view(const data::Bundle& bundle, const data::GzslSplit& split) {
  data::check_split(split, bundle);
  GzslView v;
  v.task = bundle.task;
  v.d = bundle.d;
  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<const EmbeddedSample*> out;
    for (std::size_t i : idx) out.push_back(&bundle.samples[i]);
    return out;
  };
  v.train = gather(split.train);
  v.val = gather(split.val);
  v.test = gather(split.test);
  v.seen_prototypes = prototype_rows(bundle, split.seen);
  if (!split.validation.empty()) v.validation_prototypes = prototype_rows(bundle, split.validation);
  if (!split.unseen.empty()) v.unseen_prototypes = prototype_rows(bundle, split.unseen);
  std::vector<std::size_t> held_out = split.validation;
  held_out.insert(held_out.end(), split.unseen.begin(), split.unseen.end());
  if (!held_out.empty()) v.held_out_prototypes = prototype_rows(bundle, held_out);
  v.validation_candidates = make_candidates(bundle, split.seen, split.validation);
  v.test_candidates = make_candidates(bundle, split.seen, split.unseen);
  CandidateSet seen_only = make_candidates(bundle, split.seen, {});
  v.train_targets = seen_only.truth(v.train);
  return v;
}

Checkpoint initial_checkpoint(const TrainConfig& config, std::size_t d) {
  validate_config(config);
  Checkpoint c;
  c.config = config;
  SeededRng init = SeededRng::derived(config.seed, kInitStream);
  c.params = init_params(ModelShape{config.task, d, config.h}, config.init_scale, init);
  c.optimizer = OptimizerState::for_params(c.params, config.optimizer, config.learning_rate);
  c.rng = SeededRng::derived(config.seed, kTrainStream).state();
  return c;
}

LossBreakdown dataset_loss(const ModelParams& params, const GzslView& view, const TrainConfig& config) {
  if (view.train.empty()) throw std::invalid_argument("dataset_loss: empty training set");
  SeededRng rng = SeededRng::derived(config.seed, kMeasureStream);
  std::vector<std::size_t> order(view.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  LossBreakdown sum;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    Graph g(&params, false);
    accumulate(sum, overall_loss(g, make_batch(view, config, order, begin, end), config, &rng).values());
    ++batches;
  }
  return scaled(sum, 1.0 / static_cast<double>(batches));
}

Tensor candidate_scores(const ModelParams& params, const std::vector<const EmbeddedSample*>& samples,
                        const CandidateSet& candidates, const TrainConfig& config, unsigned threads) {
  if (candidates.categories.empty()) throw std::invalid_argument("candidate_scores: empty prototype set");
  if (samples.empty()) return Tensor::matrix(0, candidates.categories.size());
  const Tensor features = sample_features(params, samples, config.task, config.curvature, threads);
  return score_features(params, features, candidates.prototypes);
}

std::size_t calibrated_predict(const ModelParams& params, const EmbeddedSample& sample, const CandidateSet& candidates,
                               const TrainConfig& config, double gamma) {
  const Tensor scores = candidate_scores(params, {&sample}, candidates, config, 1);
  return calibrated_argmax(scores.row_span(0), candidates.seen, gamma);
}

TrainResult train(const data::Bundle& bundle, const data::GzslSplit& split, const TrainConfig& config,
                  const TrainOptions& options) {
  validate_config(config);
  if (config.task != bundle.task) throw ConfigError("task", "config task differs from the bundle task");
  const GzslView view = make_view(bundle, split);
  if (view.train.empty()) throw std::invalid_argument("train: the split has no training samples");

  Checkpoint state = options.resume ? *options.resume : initial_checkpoint(config, bundle.d);
  if (options.resume) check_compatible(state, config, bundle.d);
  TrainResult result;
  result.best = options.resume_best ? *options.resume_best : state;
  SeededRng rng = SeededRng::from_state(state.rng);

  if (options.measure_losses && !options.resume) result.initial_loss = dataset_loss(state.params, view, config);

  const std::vector<std::size_t> val_truth = view.validation_candidates.truth(view.val);
  const std::size_t last_epoch =
      options.stop_after_epoch > 0 ? std::min(options.stop_after_epoch, config.epochs) : config.epochs;

  for (std::size_t epoch = state.epoch + 1; epoch <= last_epoch; ++epoch) {
    std::vector<std::size_t> order(view.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    EpochRecord record;
    record.epoch = epoch;
    LossBreakdown sum;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      try {
        Graph g(&state.params);
        LossGraph loss = overall_loss(g, make_batch(view, config, order, begin, end), config, &rng);
        g.backward(loss.overall);
        optimizer_step(state.optimizer, state.params, g.parameter_gradients());
        accumulate(sum, loss.values());
      } catch (const NumericalError& e) {
        throw NumericalError(e.op(), "epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(record.steps + 1) + ": " + e.what());
      }
      ++record.steps;
    }
    record.train_loss = scaled(sum, 1.0 / static_cast<double>(record.steps));

    const Tensor scores = candidate_scores(state.params, view.val, view.validation_candidates, config, options.threads);
    const std::vector<double> grid =
        config.gamma_grid.empty() ? derive_gamma_grid(scores, config.gamma_points) : config.gamma_grid;
    record.sweep = sweep_gamma(scores, val_truth, view.validation_candidates.seen, grid);
    record.validation = evaluate_scores(scores, val_truth, view.validation_candidates.names,
                                        view.validation_candidates.seen, record.sweep.best_gamma());

    state.epoch = epoch;
    state.rng = rng.state();
    if (record.sweep.best_harmonic() > state.best_harmonic) {
      state.best_harmonic = record.sweep.best_harmonic();
      state.best_epoch = epoch;
      state.gamma = record.sweep.best_gamma();
      record.selected = true;
    }
    if (record.selected) result.best = state;
    if (options.on_checkpoint) options.on_checkpoint(state);
    if (options.on_epoch) options.on_epoch(record);
    result.history.push_back(std::move(record));
  }

  if (options.measure_losses) result.final_loss = dataset_loss(state.params, view, config);
  result.last = std::move(state);
  return result;
}

Evaluation evaluate(const data::Bundle& bundle, const data::GzslSplit& split, const Checkpoint& checkpoint,
                    std::optional<double> gamma, unsigned threads) {
  const TrainConfig& config = checkpoint.config;
  if (config.task != bundle.task) throw ConfigError("task", "checkpoint task differs from the bundle task");
  const GzslView view = make_view(bundle, split);
  const double g = gamma.value_or(checkpoint.gamma);
  if (!(g >= 0.0)) throw std::invalid_argument("evaluate: gamma must be non-negative");
  const Tensor scores = candidate_scores(checkpoint.params, view.test, view.test_candidates, config, threads);
  const std::vector<std::size_t> truth = view.test_candidates.truth(view.test);
  Evaluation out;
  out.report = evaluate_scores(scores, truth, view.test_candidates.names, view.test_candidates.seen, g);
  if (out.report.unseen) {
    std::vector<double> grid =
        config.gamma_grid.empty() ? derive_gamma_grid(scores, config.gamma_points) : config.gamma_grid;
    grid.push_back(g);
    out.sweep = sweep_gamma(scores, truth, view.test_candidates.seen, std::move(grid));
  }
  return out;
}

}  // namespace hmgrl::engine
