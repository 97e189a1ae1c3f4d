#pragma once

#include <functional>
#include <span>
#include <vector>

namespace tnfp {

using Point = std::span<const double>;
using ScalarField = std::function<double(Point)>;
using VectorField = std::function<void(Point, std::span<double>)>;
/// Fills a row-major d x d matrix.
using MatrixField = std::function<void(Point, std::span<double>)>;
/// (x, i, j, k) -> d/dx_k D_ij(x)
using DiffusionGradient = std::function<double(Point, int, int, int)>;
/// (x, i, j) -> d/dx_i d/dx_j D_ij(x)
using DiffusionCurvature = std::function<double(Point, int, int)>;

/// Coefficients of the stationary Fokker-Planck operator written in
/// non-divergence form at one point:
///   L p = zeroth * p + sum_j first_j dp/dx_j + sum_ij second_ij d2p/dx_i dx_j.
struct OperatorCoefficients {
  double zeroth = 0.0;
  std::vector<double> first;
  std::vector<double> second;  // row-major d x d, symmetric
};

/// Steady-state Fokker-Planck problem
///   L p = -sum_i d/dx_i (f_i p) + 1/2 sum_ij d2/dx_i dx_j (D_ij p) = 0.
struct Problem {
  int dim = 0;
  VectorField drift;
  ScalarField drift_divergence;
  MatrixField diffusion;
  DiffusionGradient diffusion_gradient;
  DiffusionCurvature diffusion_curvature;
  /// Gibbs potential H when the exact solution exp(-H)/Z is known.
  ScalarField potential;
  /// Lets the coefficient assembly skip derivative callables when D is constant.
  bool constant_diffusion = false;

  OperatorCoefficients coefficients(Point x) const;
};

/// Applies L at x to a candidate density given its value, gradient and
/// row-major Hessian, using the expanded form
///   -(div f) p - f.grad p + 1/2 sum_ij [ (d_i d_j D_ij) p + (d_i D_ij) d_j p
///                                         + (d_j D_ij) d_i p + D_ij d_ij p ].
double residual(const Problem& problem, Point x, double p, std::span<const double> grad,
                std::span<const double> hess);

/// Same operator from precomputed coefficients (the training hot path).
inline double apply_operator(const OperatorCoefficients& coeffs, double p, std::span<const double> grad,
                             std::span<const double> hess) {
  const std::size_t d = coeffs.first.size();
  double value = coeffs.zeroth * p;
  for (std::size_t j = 0; j < d; ++j) {
    value += coeffs.first[j] * grad[j];
  }
  for (std::size_t k = 0; k < d * d; ++k) {
    value += coeffs.second[k] * hess[k];
  }
  return value;
}

/// Potential with gradient and Hessian (row-major).
struct Potential {
  int dim = 0;
  ScalarField value;
  VectorField gradient;
  MatrixField hessian;
};

/// Diffusion matrix with the derivatives the operator needs, plus a
/// square root sigma (sigma sigma^T = D) for SDE simulation.
struct Diffusion {
  int dim = 0;
  MatrixField matrix;
  DiffusionGradient gradient;
  DiffusionCurvature curvature;
  MatrixField sqrt;
  bool constant = false;
};

/// Gibbs construction: f = -1/2 D grad H + g with g_i = sum_j d_j (D_ij / 2),
/// so that exp(-H) is stationary. The divergence of f is assembled from the
/// supplied derivative callables by the product rule. Throws ConfigError on
/// dimension mismatch.
Problem make_gibbs_problem(const Potential& potential, const Diffusion& diffusion);

/// Constant isotropic diffusion D = kappa I with sigma = sqrt(kappa) I.
Diffusion isotropic_diffusion(int dim, double kappa);

}  // namespace tnfp
