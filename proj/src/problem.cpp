#include "tnfp/problem.hpp"

#include <cmath>

#include "tnfp/errors.hpp"

namespace tnfp {

OperatorCoefficients Problem::coefficients(Point x) const {
  const int d = dim;
  OperatorCoefficients coeffs;
  coeffs.first.assign(d, 0.0);
  coeffs.second.assign(static_cast<std::size_t>(d) * d, 0.0);

  std::vector<double> f(d);
  drift(x, f);
  diffusion(x, coeffs.second);
  for (double& entry : coeffs.second) {
    entry *= 0.5;
  }
  coeffs.zeroth = -drift_divergence(x);
  for (int k = 0; k < d; ++k) {
    coeffs.first[k] = -f[k];
  }
  if (!constant_diffusion) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        coeffs.zeroth += 0.5 * diffusion_curvature(x, i, j);
      }
    }
    for (int k = 0; k < d; ++k) {
      for (int i = 0; i < d; ++i) {
        coeffs.first[k] += 0.5 * diffusion_gradient(x, i, k, i) + 0.5 * diffusion_gradient(x, k, i, i);
      }
    }
  }
  return coeffs;
}

double residual(const Problem& problem, Point x, double p, std::span<const double> grad,
                std::span<const double> hess) {
  const int d = problem.dim;
  if (static_cast<int>(grad.size()) != d || static_cast<int>(hess.size()) != d * d) {
    throw ConfigError("residual: gradient/Hessian shape does not match the problem dimension");
  }
  std::vector<double> f(d);
  std::vector<double> diff(static_cast<std::size_t>(d) * d);
  problem.drift(x, f);
  problem.diffusion(x, diff);

  double value = -problem.drift_divergence(x) * p;
  for (int i = 0; i < d; ++i) {
    value -= f[i] * grad[i];
  }
  double second_order = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double term = diff[i * d + j] * hess[i * d + j];
      if (!problem.constant_diffusion) {
        term += problem.diffusion_curvature(x, i, j) * p;
        term += problem.diffusion_gradient(x, i, j, i) * grad[j];
        term += problem.diffusion_gradient(x, i, j, j) * grad[i];
      }
      second_order += term;
    }
  }
  return value + 0.5 * second_order;
}

Problem make_gibbs_problem(const Potential& potential, const Diffusion& diffusion) {
  if (potential.dim <= 0 || potential.dim != diffusion.dim) {
    throw ConfigError("make_gibbs_problem: potential dimension " + std::to_string(potential.dim) +
                      " does not match diffusion dimension " + std::to_string(diffusion.dim));
  }
  const int d = potential.dim;
  Problem problem;
  problem.dim = d;
  problem.potential = potential.value;
  problem.diffusion = diffusion.matrix;
  problem.diffusion_gradient = diffusion.gradient;
  problem.diffusion_curvature = diffusion.curvature;
  problem.constant_diffusion = diffusion.constant;

  problem.drift = [potential, diffusion, d](Point x, std::span<double> out) {
    std::vector<double> grad_h(d);
    std::vector<double> diff(static_cast<std::size_t>(d) * d);
    potential.gradient(x, grad_h);
    diffusion.matrix(x, diff);
    for (int i = 0; i < d; ++i) {
      double value = 0.0;
      for (int j = 0; j < d; ++j) {
        value -= 0.5 * diff[i * d + j] * grad_h[j];
        if (!diffusion.constant) {
          value += 0.5 * diffusion.gradient(x, i, j, j);
        }
      }
      out[i] = value;
    }
  };

  // div f = -1/2 sum_ij [ (d_i D_ij) d_j H + D_ij d_ij H ] + 1/2 sum_ij d_i d_j D_ij
  problem.drift_divergence = [potential, diffusion, d](Point x) {
    std::vector<double> grad_h(d);
    std::vector<double> hess_h(static_cast<std::size_t>(d) * d);
    std::vector<double> diff(static_cast<std::size_t>(d) * d);
    potential.gradient(x, grad_h);
    potential.hessian(x, hess_h);
    diffusion.matrix(x, diff);
    double value = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        value -= 0.5 * diff[i * d + j] * hess_h[i * d + j];
        if (!diffusion.constant) {
          value -= 0.5 * diffusion.gradient(x, i, j, i) * grad_h[j];
          value += 0.5 * diffusion.curvature(x, i, j);
        }
      }
    }
    return value;
  };
  return problem;
}

Diffusion isotropic_diffusion(int dim, double kappa) {
  Diffusion diffusion;
  diffusion.dim = dim;
  diffusion.constant = true;
  diffusion.matrix = [dim, kappa](Point, std::span<double> out) {
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        out[i * dim + j] = i == j ? kappa : 0.0;
      }
    }
  };
  diffusion.gradient = [](Point, int, int, int) { return 0.0; };
  diffusion.curvature = [](Point, int, int) { return 0.0; };
  const double root = std::sqrt(kappa);
  diffusion.sqrt = [dim, root](Point, std::span<double> out) {
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        out[i * dim + j] = i == j ? root : 0.0;
      }
    }
  };
  return diffusion;
}

}  // namespace tnfp
