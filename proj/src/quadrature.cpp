#include "tnfp/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tnfp/errors.hpp"

namespace tnfp {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& value, double& derivative) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    value = 1.0;
    derivative = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  value = p1;
  derivative = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1 || n > 64) {
    throw ConfigError("gauss_legendre: point count must be in [1, 64], got " + std::to_string(n));
  }
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
    return rule;
  }
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double value = 0.0;
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      legendre(n, x, value, derivative);
      const double step = value / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) {
        break;
      }
    }
    legendre(n, x, value, derivative);
    const double weight = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = weight;
    rule.weights[n - 1 - i] = weight;
  }
  if (n % 2 == 1) {
    rule.nodes[n / 2] = 0.0;
  }
  return rule;
}

CompositeRule composite_rule(double a, double b, int panels, int points) {
  if (panels < 1) {
    throw ConfigError("composite_rule: panel count must be positive");
  }
  const QuadratureRule base = gauss_legendre(points);
  CompositeRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * points);
  rule.weights.reserve(static_cast<std::size_t>(panels) * points);
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + width * p;
    const double mid = lo + 0.5 * width;
    for (int q = 0; q < points; ++q) {
      rule.nodes.push_back(mid + 0.5 * width * base.nodes[q]);
      rule.weights.push_back(0.5 * width * base.weights[q]);
    }
  }
  return rule;
}

double composite_integrate(const std::function<double(double)>& f, double a, double b, int panels, int points) {
  const CompositeRule rule = composite_rule(a, b, panels, points);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    sum += rule.weights[q] * f(rule.nodes[q]);
  }
  return sum;
}

}  // namespace tnfp
