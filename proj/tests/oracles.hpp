#pragma once

// Finite-difference and quadrature oracles shared by the unit tests and the
// acceptance runner.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tnfp/benchmarks.hpp"
#include "tnfp/problem.hpp"
#include "tnfp/quadrature.hpp"

namespace oracle {

using Field = std::function<double(std::span<const double>)>;

// Fourth-order central first derivative along axis a.
inline double d1(const Field& f, std::vector<double> x, int a, double h) {
  const double x0 = x[a];
  auto at = [&](double t) {
    x[a] = x0 + t;
    return f(x);
  };
  return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
}

inline std::vector<double> gradient(const Field& f, const std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) g[a] = d1(f, x, static_cast<int>(a), h);
  return g;
}

// Fourth-order central Hessian, row-major.
inline std::vector<double> hessian(const Field& f, const std::vector<double>& x, double h) {
  const std::size_t d = x.size();
  std::vector<double> hess(d * d);
  for (std::size_t a = 0; a < d; ++a) {
    std::vector<double> y = x;
    auto at = [&](double t) {
      y[a] = x[a] + t;
      return f(y);
    };
    hess[a * d + a] = (-at(-2 * h) + 16 * at(-h) - 30 * at(0) + 16 * at(h) - at(2 * h)) / (12 * h * h);
    for (std::size_t b = a + 1; b < d; ++b) {
      const Field fb = [&](std::span<const double> z) {
        return d1(f, std::vector<double>(z.begin(), z.end()), static_cast<int>(b), h);
      };
      hess[a * d + b] = hess[b * d + a] = d1(fb, x, static_cast<int>(a), h);
    }
  }
  return hess;
}

// Second-order central difference of a scalar function of one parameter.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

// |a - b| / max(|a|, |b|, floor).
inline double rel_diff(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest relative mismatch between two vectors, normalized by the larger entry magnitude.
inline double max_rel_diff(std::span<const double> a, std::span<const double> b, double floor = 1e-12) {
  double scale = floor;
  for (std::size_t k = 0; k < a.size(); ++k) scale = std::max({scale, std::abs(a[k]), std::abs(b[k])});
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
  return worst;
}

// Residual of the Gibbs density exp(-H)/Z at x with finite-difference derivatives.
inline double gibbs_residual(const tnfp::Benchmark& bm, double z, const std::vector<double>& x, double& p) {
  const Field density = [&](std::span<const double> y) { return tnfp::exact_density(bm, y, z); };
  p = density(x);
  const double h = 1e-3;
  const std::vector<double> g = gradient(density, x, h);
  const std::vector<double> hs = hessian(density, x, h);
  return tnfp::residual(bm.problem, x, p, g, hs);
}

// Composite Gauss-Legendre integral over [a, b] with M panels and n points.
inline double quad(const std::function<double(double)>& f, double a, double b, int panels = 64, int points = 16) {
  return tnfp::composite_integrate(f, a, b, panels, points);
}

}  // namespace oracle
