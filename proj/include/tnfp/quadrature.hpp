#pragma once

#include <functional>
#include <vector>

namespace tnfp {

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;    // strictly increasing
  std::vector<double> weights;  // sum to 2
};

/// n-point Gauss-Legendre rule, 1 <= n <= 64. Throws ConfigError otherwise.
QuadratureRule gauss_legendre(int n);

/// Nodes and weights of the composite rule: `panels` equal subintervals of
/// [a, b], each carrying the mapped `points`-point Gauss-Legendre rule.
/// Nodes are ordered left to right.
struct CompositeRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

CompositeRule composite_rule(double a, double b, int panels, int points);

double composite_integrate(const std::function<double(double)>& f, double a, double b, int panels = 16,
                           int points = 16);

}  // namespace tnfp
