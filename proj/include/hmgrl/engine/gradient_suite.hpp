#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hmgrl/types.hpp"

namespace hmgrl::engine {

/// Random small instance on which every loss term is differentiated both ways.
struct GradientSuiteOptions {
  TaskKind task = TaskKind::kMet;
  std::size_t d = 8;
  std::size_t h = 8;
  std::size_t batch = 4;
  std::size_t seen = 3;
  std::size_t unseen = 2;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: perturbs the analytic gradient so the check must fail.
  bool corrupt = false;
};

struct TermCheck {
  std::string name;
  double loss = 0.0;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

struct GradientSuiteReport {
  std::vector<TermCheck> terms;  // reg, cl, rank, vae, ce, align, overall
  double tolerance = 0.0;
  bool passed = false;
};

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options);

std::string suite_report_to_json(const GradientSuiteReport& report);

}  // namespace hmgrl::engine
