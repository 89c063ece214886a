#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hmgrl/autodiff.hpp"
#include "hmgrl/tensor.hpp"

namespace hmgrl::lorentz {

/// Negative sectional curvature c of the hyperboloid <x, x>_L = 1/c.
class Curvature {
 public:
  explicit Curvature(double c = -1.0);
  double value() const { return c_; }
  /// sqrt(-c), written k throughout.
  double sqrt_neg() const { return k_; }

 private:
  double c_;
  double k_;
};

/// A point x = [x0, x_s] on the n-dimensional Lorentz model.
struct LorentzPoint {
  std::vector<double> coords;
  std::size_t dimension() const { return coords.size() - 1; }
};

/// A tangent vector at the origin; coords[0] is 0.
struct TangentVector {
  std::vector<double> coords;
  std::span<const double> spatial() const { return std::span(coords).subspan(1); }
};

/// -x0*y0 + sum_i x_i*y_i.
double lorentz_inner(std::span<const double> x, std::span<const double> y);

/// [1/sqrt(-c), 0, ..., 0] with n spatial zeros.
LorentzPoint origin(Curvature c, std::size_t n);

/// [0, x]; x must be non-empty.
TangentVector lift_to_tangent(std::span<const double> x);

/// Drops the leading time-like coordinate.
std::vector<double> project_spatial(const TangentVector& v);

LorentzPoint exp_at_origin(const TangentVector& z, Curvature c);
TangentVector log_at_origin(const LorentzPoint& p, Curvature c);

/// exp0([0, M * log0(p)_s]) for an m x n weight M.
LorentzPoint lorentz_linear_transform(const LorentzPoint& p, const Tensor& weight, Curvature c);

/// log0(M_c(exp0([0, x]))) projected to its m spatial coordinates.
std::vector<double> lorentz_linear_layer(std::span<const double> x, const Tensor& weight, Curvature c);
/// Row-wise layer on a matrix of row vectors.
Tensor lorentz_linear_layer(const Tensor& rows, const Tensor& weight, Curvature c);

// Differentiable row-wise versions. Tangent inputs/outputs carry only the
// spatial coordinates (the leading zero is implicit); points carry all n+1.

/// rows x n tangent (spatial) -> rows x (n+1) points.
Var exp_at_origin(Var tangent, Curvature c);
/// rows x (n+1) points -> rows x n tangent (spatial).
Var log_at_origin(Var points, Curvature c);
/// rows x (n+1) points, weight m x n -> rows x (m+1) points.
Var lorentz_linear_transform(Var points, Var weight, Curvature c);
/// rows x n Euclidean input, weight m x n -> rows x m.
Var lorentz_linear_layer(Var x, Var weight, Curvature c);

}  // namespace hmgrl::lorentz
