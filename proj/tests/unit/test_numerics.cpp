#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hmgrl/autodiff.hpp"
#include "hmgrl/gradcheck.hpp"
#include "hmgrl/optimizer.hpp"
#include "hmgrl/rng.hpp"

using namespace hmgrl;

namespace {

ModelParams single(const char* name, Tensor value) {
  ModelParams p;
  p.add(name, std::move(value));
  return p;
}

}  // namespace

TEST_CASE("tensor shape contract") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor::row({1, 2, 3}).rows() == 1);
  CHECK(Tensor::scalar(4.0).rows() == 1);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::rows_of({{1, 2}, {3}}), std::invalid_argument);
  CHECK(t.reshaped({3, 2}).cols() == 2);
}

TEST_CASE("parameter names are unique") {
  ModelParams p;
  p.add("w", Tensor::row({1.0}));
  CHECK_THROWS_AS(p.add("w", Tensor::row({2.0})), std::invalid_argument);
  CHECK_THROWS_AS(p.at("missing"), std::out_of_range);
  CHECK(p.scalar_count() == 1);
}

TEST_CASE("reverse-mode gradients of closed-form losses") {
  SUBCASE("sum of squares") {
    ModelParams p = single("x", Tensor::row({3.0}));
    const Evaluation e = evaluate_with_gradients([](Graph& g) { return ops::sum(ops::square(g.param("x"))); }, p);
    CHECK(e.loss == 9.0);
    CHECK(e.gradients[0][0] == 6.0);
    CHECK(p.at("x").gradient[0] == 6.0);
  }
  SUBCASE("constant loss") {
    ModelParams p = single("x", Tensor::row({3.0, -1.0}));
    const Evaluation e = evaluate_with_gradients([](Graph& g) { return g.constant(Tensor::scalar(5.0)); }, p);
    CHECK(e.loss == 5.0);
    CHECK(e.gradients[0][0] == 0.0);
    CHECK(e.gradients[0][1] == 0.0);
  }
  SUBCASE("product rule") {
    ModelParams p;
    p.add("x", Tensor::row({2.0}));
    p.add("y", Tensor::row({3.0}));
    const Evaluation e = evaluate_with_gradients([](Graph& g) { return ops::sum(g.param("x") * g.param("y")); }, p);
    CHECK(e.loss == 6.0);
    CHECK(e.gradients[0][0] == 3.0);
    CHECK(e.gradients[1][0] == 2.0);
  }
}

TEST_CASE("non-finite intermediates name the operation") {
  ModelParams p = single("x", Tensor::row({-1.0}));
  try {
    evaluate_with_gradients([](Graph& g) { return ops::sum(ops::log(g.param("x"))); }, p);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.op() == "log");
  }
}

TEST_CASE("central differences") {
  SUBCASE("square at 3") {
    ModelParams p = single("x", Tensor::row({3.0}));
    const Gradients g = finite_difference_gradient([](Graph& gr) { return ops::sum(ops::square(gr.param("x"))); }, p, 1e-5);
    CHECK(std::abs(g[0][0] - 6.0) < 1e-8);
    CHECK(p.at("x").value[0] == 3.0);
  }
  SUBCASE("constant") {
    ModelParams p = single("x", Tensor::row({3.0}));
    const Gradients g = finite_difference_gradient([](Graph& gr) { return gr.constant(Tensor::scalar(2.0)); }, p, 1e-5);
    CHECK(g[0][0] == 0.0);
  }
  SUBCASE("tanh slope at 0 matches the sine example's derivative") {
    // sin is not a graph primitive; tanh'(0) = cos(0) = 1 gives the same oracle.
    ModelParams p = single("x", Tensor::row({0.0}));
    const Gradients g = finite_difference_gradient([](Graph& gr) { return ops::sum(ops::tanh(gr.param("x"))); }, p, 1e-5);
    CHECK(std::abs(g[0][0] - 1.0) < 1e-9);
  }
  SUBCASE("non-positive step") {
    ModelParams p = single("x", Tensor::row({0.0}));
    const LossFn f = [](Graph& gr) { return ops::sum(gr.param("x")); };
    CHECK_THROWS_AS(finite_difference_gradient(f, p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(finite_difference_gradient(f, p, -1e-5), std::invalid_argument);
  }
}

TEST_CASE("relative error uses a floored denominator") {
  const Gradients a{Tensor::row({1.0, 0.0})};
  const Gradients b{Tensor::row({1.0 + 1e-6, 1e-12})};
  // The second coordinate dominates: 1e-12 over the 1e-8 floor.
  CHECK(max_relative_error(a, b) == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(max_relative_error({Tensor::row({1.0})}, {Tensor::row({1.0 + 1e-6})}) ==
        doctest::Approx(1e-6 / (1.0 + 1e-6)).epsilon(1e-6));
  CHECK(max_relative_error(a, a) == 0.0);
}

TEST_CASE("every graph primitive passes the gradient check") {
  SeededRng rng(11);
  ModelParams p;
  p.add("a", sample_standard_normal(rng, {3, 4}));
  p.add("b", sample_standard_normal(rng, {4, 2}));
  p.add("c", sample_standard_normal(rng, {3, 4}));
  p.add("r", sample_standard_normal(rng, {1, 4}));
  p.add("pos", Tensor::matrix(3, 4, 0.5));
  for (double& v : p.at("pos").value.data()) v += rng.uniform();

  const std::vector<std::pair<const char*, LossFn>> cases = {
      {"matmul", [](Graph& g) { return ops::sum(ops::square(ops::matmul(g.param("a"), g.param("b")))); }},
      {"matmul_nt", [](Graph& g) { return ops::sum(ops::tanh(ops::matmul_nt(g.param("a"), g.param("c")))); }},
      {"transpose", [](Graph& g) { return ops::sum(ops::square(ops::matmul(ops::transpose(g.param("b")), ops::transpose(g.param("a"))))); }},
      {"broadcast", [](Graph& g) { return ops::sum(ops::square(g.param("a") + g.param("r") - g.param("c"))); }},
      {"mul", [](Graph& g) { return ops::sum(g.param("a") * g.param("c") * g.param("a")); }},
      {"log exp", [](Graph& g) { return ops::sum(ops::log(g.param("pos")) + ops::exp(g.param("a") * 0.3)); }},
      {"softplus relu", [](Graph& g) { return ops::sum(ops::softplus(g.param("a")) + ops::relu(g.param("c") + 0.05)); }},
      {"softmax", [](Graph& g) { return ops::sum(ops::square(ops::softmax_rows(g.param("a")) - g.param("pos"))); }},
      {"log_softmax", [](Graph& g) { return ops::sum(ops::pick(ops::log_softmax_rows(g.param("c")), {0, 3, 1})); }},
      {"concat slice", [](Graph& g) {
         Var x = ops::concat_cols({g.param("a"), g.param("c")});
         Var y = ops::concat_rows({g.param("a"), g.param("r")});
         return ops::sum(ops::square(ops::slice_cols(x, 2, 4))) + ops::sum(ops::tanh(ops::slice_rows(y, 2, 2)));
       }},
      {"select mean", [](Graph& g) {
         Var s = ops::select_rows(g.param("a"), {2, 0, 2});
         return ops::sum(ops::square(ops::mean_rows(s))) + ops::sum(ops::sum_rows(g.param("c") * g.param("c")));
       }},
      {"diag", [](Graph& g) {
         Var sq = ops::matmul_nt(g.param("a"), g.param("c"));
         return ops::sum(ops::square(ops::diag(sq)));
       }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    const Evaluation e = evaluate_with_gradients(fn, p);
    const Gradients fd = finite_difference_gradient(fn, p, 1e-5);
    CHECK(max_relative_error(e.gradients, fd) < 1e-6);
  }
}

TEST_CASE("optimizer steps") {
  SUBCASE("zero gradient leaves Adam parameters unchanged") {
    ModelParams p = single("w", Tensor::row({0.3, -2.0}));
    OptimizerState s = OptimizerState::for_params(p, OptimizerKind::kAdam, 0.1);
    for (int i = 0; i < 3; ++i) optimizer_step(s, p, {Tensor::row({0.0, 0.0})});
    CHECK(p.at("w").value == Tensor::row({0.3, -2.0}));
    CHECK(s.step == 3);
  }
  SUBCASE("first Adam step moves by the learning rate against the sign") {
    ModelParams p = single("w", Tensor::row({1.0, 1.0, 1.0}));
    OptimizerState s = OptimizerState::for_params(p, OptimizerKind::kAdam, 1e-3);
    optimizer_step(s, p, {Tensor::row({4.0, -0.5, 1e-2})});
    CHECK(p.at("w").value[0] - 1.0 == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.at("w").value[1] - 1.0 == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(p.at("w").value[2] - 1.0 == doctest::Approx(-1e-3).epsilon(1e-5));
  }
  SUBCASE("plain SGD") {
    ModelParams p = single("w", Tensor::row({1.0}));
    OptimizerState s = OptimizerState::for_params(p, OptimizerKind::kSgd, 0.1);
    optimizer_step(s, p, {Tensor::row({2.0})});
    CHECK(p.at("w").value[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    ModelParams p = single("w", Tensor::row({1.0}));
    OptimizerState s = OptimizerState::for_params(p, OptimizerKind::kSgd, 0.1);
    CHECK_THROWS_AS(optimizer_step(s, p, {Tensor::row({1.0, 2.0})}), std::invalid_argument);
    CHECK_THROWS_AS(optimizer_step(s, p, {}), std::invalid_argument);
  }
  CHECK(optimizer_from_string(to_string(OptimizerKind::kSgd)) == OptimizerKind::kSgd);
}

TEST_CASE("standard normal draws") {
  SeededRng rng(2024);
  const Tensor t = sample_standard_normal(rng, {1000000});
  const double n = static_cast<double>(t.size());
  const double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / n;
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  var /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);

  SeededRng a(5), b(5);
  CHECK(sample_standard_normal(a, {7, 3}) == sample_standard_normal(b, {7, 3}));
}

TEST_CASE("rng state resumes the exact sequence") {
  SeededRng rng(99);
  rng.standard_normal();  // leaves a cached spare
  const RngState mid = rng.state();
  CHECK(mid.has_spare);
  std::vector<double> expected;
  for (int i = 0; i < 9; ++i) expected.push_back(i % 2 ? rng.uniform() : rng.standard_normal());
  SeededRng resumed = SeededRng::from_state(mid);
  for (int i = 0; i < 9; ++i) CHECK(expected[i] == (i % 2 ? resumed.uniform() : resumed.standard_normal()));

  CHECK(SeededRng::derived(1, 0).next_u64() != SeededRng::derived(1, 1).next_u64());
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("splitmix64 reference output") {
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xE220A8397B1DCDAFull);
}
