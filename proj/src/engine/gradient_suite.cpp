#include "hmgrl/engine/gradient_suite.hpp"

#include <stdexcept>

#include "hmgrl/data/generator.hpp"
#include "hmgrl/engine/model.hpp"
#include "hmgrl/gradcheck.hpp"
#include "json.hpp"

namespace hmgrl::engine {

namespace {

using TermPicker = Var LossGraph::*;

struct Term {
  const char* name;
  TermPicker member;
};

constexpr Term kTerms[] = {{"reg", &LossGraph::reg},   {"cl", &LossGraph::cl},       {"rank", &LossGraph::rank},
                           {"vae", &LossGraph::vae},   {"ce", &LossGraph::ce},       {"align", &LossGraph::align},
                           {"overall", &LossGraph::overall}};

}  // namespace

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& o) {
  if (o.batch == 0 || o.seen == 0 || o.unseen == 0) throw std::invalid_argument("gradient suite: empty instance");
  data::GeneratorSpec spec;
  spec.task = o.task;
  spec.categories = o.seen + o.unseen;
  spec.d = o.d;
  spec.samples_per_category = o.batch;
  spec.min_tokens = o.task == TaskKind::kMre ? 4 : 3;
  spec.max_tokens = 6;
  spec.min_patches = 1;
  spec.max_patches = 3;
  spec.prototype_scale = 1.0;
  spec.spread = 0.3;
  spec.seed = o.seed;
  const data::Bundle bundle = data::generate_synthetic_corpus(spec);

  TrainConfig config = default_config(o.task);
  config.h = o.h;
  config.k = o.k;
  config.seed = o.seed;

  TrainingBatch batch;
  SeededRng pick = SeededRng::derived(o.seed, 7);
  for (std::size_t i = 0; i < o.batch; ++i) {
    const std::size_t category = static_cast<std::size_t>(pick.uniform_index(o.seen));
    batch.samples.push_back(&bundle.samples[category * o.batch + i]);
    batch.targets.push_back(category);
  }
  std::vector<std::size_t> seen(o.seen), unseen(o.unseen);
  for (std::size_t j = 0; j < o.seen; ++j) seen[j] = j;
  for (std::size_t j = 0; j < o.unseen; ++j) unseen[j] = o.seen + j;
  batch.seen_prototypes = bundle.prototypes.subset(seen).matrix();
  batch.unseen_prototypes = bundle.prototypes.subset(unseen).matrix();

  SeededRng init = SeededRng::derived(o.seed, 0);
  ModelParams params = init_params(ModelShape{o.task, o.d, o.h}, 1.0, init);
  const RngState noise = SeededRng::derived(o.seed, 1).state();

  GradientSuiteReport report;
  report.tolerance = o.tolerance;
  report.passed = true;
  for (const Term& term : kTerms) {
    const LossFn fn = [&, member = term.member](Graph& g) {
      SeededRng rng = SeededRng::from_state(noise);
      return overall_loss(g, batch, config, &rng).*member;
    };
    Evaluation analytic = evaluate_with_gradients(fn, params);
    if (o.corrupt && !analytic.gradients.empty()) analytic.gradients.back()[0] += 1e-2;
    const Gradients numeric = finite_difference_gradient(fn, params, o.step);
    TermCheck check;
    check.name = term.name;
    check.loss = analytic.loss;
    check.max_relative_error = max_relative_error(analytic.gradients, numeric);
    check.coordinates = params.scalar_count();
    check.passed = check.max_relative_error < o.tolerance;
    report.passed = report.passed && check.passed;
    report.terms.push_back(check);
  }
  return report;
}

std::string suite_report_to_json(const GradientSuiteReport& report) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : report.terms) {
    terms.push_back({{"term", t.name},
                     {"loss", t.loss},
                     {"max_relative_error", t.max_relative_error},
                     {"coordinates", t.coordinates},
                     {"passed", t.passed}});
  }
  return nlohmann::json{{"tolerance", report.tolerance}, {"passed", report.passed}, {"terms", terms}}.dump(2);
}

}  // namespace hmgrl::engine
