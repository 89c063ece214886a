#include "hmgrl/lorentz.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hmgrl::lorentz {

namespace {

// Below this argument the closed forms below lose digits to cancellation and
// the Taylor series are used instead.
constexpr double kSeriesThreshold = 1e-2;
constexpr double kOffManifoldTolerance = 1e-6;

/// sinh(a) / a.
double sinhc(double a) {
  if (std::abs(a) < kSeriesThreshold) {
    const double a2 = a * a;
    return 1.0 + a2 / 6.0 * (1.0 + a2 / 20.0 * (1.0 + a2 / 42.0 * (1.0 + a2 / 72.0)));
  }
  return std::sinh(a) / a;
}

/// (a cosh(a) - sinh(a)) / a^3, the derivative of sinhc divided by a.
double sinhc_slope(double a) {
  if (std::abs(a) < kSeriesThreshold) {
    const double a2 = a * a;
    return 1.0 / 3.0 + a2 / 30.0 + a2 * a2 / 840.0 + a2 * a2 * a2 / 45360.0;
  }
  return (a * std::cosh(a) - std::sinh(a)) / (a * a * a);
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Geodesic distance from the origin for beta = c <o, p>_L, after validation.
double arc_from_beta(double beta) {
  if (!(beta >= 1.0 - kOffManifoldTolerance)) {
    throw std::domain_error("log_at_origin: point off the manifold (beta = " + std::to_string(beta) + ")");
  }
  if (beta <= 1.0) return 0.0;
  const double delta = beta - 1.0;
  return std::log1p(delta + std::sqrt(delta * (beta + 1.0)));
}

struct ExpRow {
  double alpha;
  double s;  // sinhc(alpha)
};

ExpRow exp_row(std::span<const double> z, double k, std::span<double> out) {
  const double alpha = k * norm(z);
  const double s = sinhc(alpha);
  out[0] = std::cosh(alpha) / k;
  for (std::size_t i = 0; i < z.size(); ++i) out[i + 1] = s * z[i];
  return {alpha, s};
}

struct LogRow {
  double arc;
  double factor;  // acosh(beta) / sqrt(beta^2 - 1)
};

LogRow log_row(std::span<const double> p, double k, std::span<double> out) {
  const double arc = arc_from_beta(k * p[0]);
  const double factor = 1.0 / sinhc(arc);
  for (std::size_t i = 1; i < p.size(); ++i) out[i - 1] = factor * p[i];
  return {arc, factor};
}

}  // namespace

Curvature::Curvature(double c) : c_(c), k_(std::sqrt(-c)) {
  if (!(c < 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("curvature must be negative and finite, got " + std::to_string(c));
  }
}

double lorentz_inner(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("lorentz_inner: dimension mismatch");
  if (x.size() < 2) throw std::invalid_argument("lorentz_inner: dimension must be at least 2");
  double s = -x[0] * y[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

LorentzPoint origin(Curvature c, std::size_t n) {
  if (n < 1) throw std::invalid_argument("origin: dimension must be at least 1");
  LorentzPoint o{std::vector<double>(n + 1, 0.0)};
  o.coords[0] = 1.0 / c.sqrt_neg();
  return o;
}

TangentVector lift_to_tangent(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("lift_to_tangent: empty vector");
  TangentVector v{std::vector<double>(x.size() + 1, 0.0)};
  std::copy(x.begin(), x.end(), v.coords.begin() + 1);
  return v;
}

std::vector<double> project_spatial(const TangentVector& v) {
  return {v.coords.begin() + 1, v.coords.end()};
}

LorentzPoint exp_at_origin(const TangentVector& z, Curvature c) {
  if (z.coords.size() < 2) throw std::invalid_argument("exp_at_origin: dimension must be at least 1");
  if (z.coords[0] != 0.0) throw std::domain_error("exp_at_origin: tangent vector has non-zero time coordinate");
  LorentzPoint p{std::vector<double>(z.coords.size())};
  exp_row(z.spatial(), c.sqrt_neg(), p.coords);
  return p;
}

TangentVector log_at_origin(const LorentzPoint& p, Curvature c) {
  if (p.coords.size() < 2) throw std::invalid_argument("log_at_origin: dimension must be at least 1");
  TangentVector v{std::vector<double>(p.coords.size(), 0.0)};
  log_row(p.coords, c.sqrt_neg(), std::span(v.coords).subspan(1));
  return v;
}

LorentzPoint lorentz_linear_transform(const LorentzPoint& p, const Tensor& weight, Curvature c) {
  const std::size_t n = p.dimension();
  if (weight.cols() != n) {
    throw std::invalid_argument("lorentz_linear_transform: weight has " + std::to_string(weight.cols()) +
                                " columns, point dimension is " + std::to_string(n));
  }
  const TangentVector v = log_at_origin(p, c);
  const auto vs = v.spatial();
  TangentVector w{std::vector<double>(weight.rows() + 1, 0.0)};
  for (std::size_t i = 0; i < weight.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += weight(i, j) * vs[j];
    w.coords[i + 1] = acc;
  }
  return exp_at_origin(w, c);
}

std::vector<double> lorentz_linear_layer(std::span<const double> x, const Tensor& weight, Curvature c) {
  const LorentzPoint p = exp_at_origin(lift_to_tangent(x), c);
  return project_spatial(log_at_origin(lorentz_linear_transform(p, weight, c), c));
}

Tensor lorentz_linear_layer(const Tensor& rows, const Tensor& weight, Curvature c) {
  Tensor out = Tensor::matrix(rows.rows(), weight.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto y = lorentz_linear_layer(rows.row_span(r), weight, c);
    std::copy(y.begin(), y.end(), out.row_span(r).begin());
  }
  return out;
}

Var exp_at_origin(Var tangent, Curvature c) {
  const Tensor& z = tangent.value();
  const double k = c.sqrt_neg();
  Tensor out = Tensor::matrix(z.rows(), z.cols() + 1);
  std::vector<ExpRow> cache(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) cache[r] = exp_row(z.row_span(r), k, out.row_span(r));
  const std::size_t iz = tangent.id();
  return tangent.graph().record(
      "lorentz_exp0", std::move(out), {tangent},
      [iz, k, cache = std::move(cache)](Graph& g, const Tensor& go) {
        const Tensor& zv = g.value(iz);
        Tensor& gz = g.grad_buffer(iz);
        const std::size_t n = zv.cols();
        for (std::size_t r = 0; r < zv.rows(); ++r) {
          const auto zr = zv.row_span(r);
          const double s = cache[r].s;
          const double t = sinhc_slope(cache[r].alpha);
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += zr[i] * go(r, i + 1);
          const double radial = go(r, 0) * k * s + k * k * t * dot;
          for (std::size_t i = 0; i < n; ++i) gz(r, i) += s * go(r, i + 1) + radial * zr[i];
        }
      });
}

Var log_at_origin(Var points, Curvature c) {
  const Tensor& p = points.value();
  if (p.cols() < 2) throw std::invalid_argument("log_at_origin: points need at least 2 coordinates");
  const double k = c.sqrt_neg();
  Tensor out = Tensor::matrix(p.rows(), p.cols() - 1);
  std::vector<LogRow> cache(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) cache[r] = log_row(p.row_span(r), k, out.row_span(r));
  const std::size_t ip = points.id();
  return points.graph().record(
      "lorentz_log0", std::move(out), {points},
      [ip, k, cache = std::move(cache)](Graph& g, const Tensor& go) {
        const Tensor& pv = g.value(ip);
        Tensor& gp = g.grad_buffer(ip);
        const std::size_t n = pv.cols() - 1;
        for (std::size_t r = 0; r < pv.rows(); ++r) {
          const double f = cache[r].factor;
          // dF/dbeta = -sinhc_slope(a) / sinhc(a)^3 with beta = cosh(a).
          const double s = sinhc(cache[r].arc);
          const double df = -sinhc_slope(cache[r].arc) / (s * s * s);
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            dot += pv(r, i + 1) * go(r, i);
            gp(r, i + 1) += f * go(r, i);
          }
          gp(r, 0) += k * df * dot;
        }
      });
}

Var lorentz_linear_transform(Var points, Var weight, Curvature c) {
  if (weight.cols() + 1 != points.cols()) {
    throw std::invalid_argument("lorentz_linear_transform: weight columns do not match point dimension");
  }
  return exp_at_origin(ops::matmul_nt(log_at_origin(points, c), weight), c);
}

Var lorentz_linear_layer(Var x, Var weight, Curvature c) {
  return log_at_origin(lorentz_linear_transform(exp_at_origin(x, c), weight, c), c);
}

}  // namespace hmgrl::lorentz
