#include "tnfp/benchmarks.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "tnfp/errors.hpp"
#include "tnfp/quadrature.hpp"

namespace tnfp {

namespace {

// 2 (x1^2 + x2^2 - 1)^2
PotentialGroup ring_group(std::vector<int> coords) {
  PotentialGroup g;
  g.coords = std::move(coords);
  g.value = [](Point x) {
    const double rho = x[0] * x[0] + x[1] * x[1] - 1.0;
    return 2.0 * rho * rho;
  };
  g.gradient = [](Point x, std::span<double> out) {
    const double rho = x[0] * x[0] + x[1] * x[1] - 1.0;
    out[0] = 8.0 * rho * x[0];
    out[1] = 8.0 * rho * x[1];
  };
  g.hessian = [](Point x, std::span<double> out) {
    const double rho = x[0] * x[0] + x[1] * x[1] - 1.0;
    out[0] = 8.0 * rho + 16.0 * x[0] * x[0];
    out[1] = 16.0 * x[0] * x[1];
    out[2] = out[1];
    out[3] = 8.0 * rho + 16.0 * x[1] * x[1];
  };
  return g;
}

// 3 ((x1^4 - x2)^2 + 2 x2^2)
PotentialGroup banana_group(std::vector<int> coords) {
  PotentialGroup g;
  g.coords = std::move(coords);
  g.value = [](Point x) {
    const double u = x[0] * x[0] * x[0] * x[0] - x[1];
    return 3.0 * (u * u + 2.0 * x[1] * x[1]);
  };
  g.gradient = [](Point x, std::span<double> out) {
    const double x3 = x[0] * x[0] * x[0];
    const double u = x3 * x[0] - x[1];
    out[0] = 24.0 * u * x3;
    out[1] = -6.0 * u + 12.0 * x[1];
  };
  g.hessian = [](Point x, std::span<double> out) {
    const double x2 = x[0] * x[0];
    const double u = x2 * x2 - x[1];
    out[0] = 24.0 * (4.0 * x2 * x2 * x2 + 3.0 * u * x2);
    out[1] = -24.0 * x2 * x[0];
    out[2] = out[1];
    out[3] = 18.0;
  };
  return g;
}

struct LogTerm {
  int local;
  double scale;   // c in -ln(c x^2 + e)
  double offset;  // e
};

// a (sum_k x_k^2 + b sum_{k<l} x_k x_l) - sum_logs ln(c x_k^2 + e)
PotentialGroup quadratic_log_group(std::vector<int> coords, double a, double b, std::vector<LogTerm> logs = {}) {
  PotentialGroup g;
  const int k = static_cast<int>(coords.size());
  g.coords = std::move(coords);
  g.value = [k, a, b, logs](Point x) {
    double squares = 0.0;
    double cross = 0.0;
    for (int i = 0; i < k; ++i) {
      squares += x[i] * x[i];
      for (int l = i + 1; l < k; ++l) {
        cross += x[i] * x[l];
      }
    }
    double value = a * (squares + b * cross);
    for (const LogTerm& t : logs) {
      value -= std::log(t.scale * x[t.local] * x[t.local] + t.offset);
    }
    return value;
  };
  g.gradient = [k, a, b, logs](Point x, std::span<double> out) {
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      total += x[i];
    }
    for (int i = 0; i < k; ++i) {
      out[i] = a * (2.0 * x[i] + b * (total - x[i]));
    }
    for (const LogTerm& t : logs) {
      const double xi = x[t.local];
      out[t.local] -= 2.0 * t.scale * xi / (t.scale * xi * xi + t.offset);
    }
  };
  g.hessian = [k, a, b, logs](Point x, std::span<double> out) {
    for (int i = 0; i < k; ++i) {
      for (int l = 0; l < k; ++l) {
        out[i * k + l] = i == l ? 2.0 * a : a * b;
      }
    }
    for (const LogTerm& t : logs) {
      const double xi = x[t.local];
      const double den = t.scale * xi * xi + t.offset;
      out[t.local * k + t.local] -= 2.0 * t.scale * (t.offset - t.scale * xi * xi) / (den * den);
    }
  };
  return g;
}

Potential assemble_potential(int dim, const std::vector<PotentialGroup>& groups) {
  Potential potential;
  potential.dim = dim;
  potential.value = [groups](Point x) {
    double value = 0.0;
    std::vector<double> local;
    for (const PotentialGroup& g : groups) {
      local.resize(g.coords.size());
      for (std::size_t i = 0; i < g.coords.size(); ++i) {
        local[i] = x[g.coords[i]];
      }
      value += g.value(local);
    }
    return value;
  };
  potential.gradient = [groups, dim](Point x, std::span<double> out) {
    std::fill(out.begin(), out.begin() + dim, 0.0);
    std::vector<double> local;
    std::vector<double> grad;
    for (const PotentialGroup& g : groups) {
      const std::size_t k = g.coords.size();
      local.resize(k);
      grad.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        local[i] = x[g.coords[i]];
      }
      g.gradient(local, grad);
      for (std::size_t i = 0; i < k; ++i) {
        out[g.coords[i]] += grad[i];
      }
    }
  };
  potential.hessian = [groups, dim](Point x, std::span<double> out) {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(dim) * dim, 0.0);
    std::vector<double> local;
    std::vector<double> hess;
    for (const PotentialGroup& g : groups) {
      const std::size_t k = g.coords.size();
      local.resize(k);
      hess.resize(k * k);
      for (std::size_t i = 0; i < k; ++i) {
        local[i] = x[g.coords[i]];
      }
      g.hessian(local, hess);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
          out[g.coords[i] * dim + g.coords[l]] += hess[i * k + l];
        }
      }
    }
  };
  return potential;
}

// D = 2 diag(1, 1, [[1 + V, V], [V, 1 + V]]) with V = 0.1 x3^2 x4^2 (0-based coords 2, 3).
Diffusion unimode4d_diffusion() {
  Diffusion diffusion;
  diffusion.dim = 4;
  auto coupling = [](Point x) { return 0.1 * x[2] * x[2] * x[3] * x[3]; };
  diffusion.matrix = [coupling](Point x, std::span<double> out) {
    std::fill(out.begin(), out.begin() + 16, 0.0);
    const double v = coupling(x);
    out[0] = 2.0;
    out[5] = 2.0;
    out[10] = 2.0 * (1.0 + v);
    out[15] = 2.0 * (1.0 + v);
    out[11] = 2.0 * v;
    out[14] = 2.0 * v;
  };
  // d_k D_ij is 2 d_k V on the lower block, zero elsewhere.
  diffusion.gradient = [](Point x, int i, int j, int k) {
    if (i < 2 || j < 2) {
      return 0.0;
    }
    if (k == 2) {
      return 2.0 * 0.2 * x[2] * x[3] * x[3];
    }
    if (k == 3) {
      return 2.0 * 0.2 * x[2] * x[2] * x[3];
    }
    return 0.0;
  };
  diffusion.curvature = [](Point x, int i, int j) {
    if (i < 2 || j < 2) {
      return 0.0;
    }
    if (i == 2 && j == 2) {
      return 2.0 * 0.2 * x[3] * x[3];
    }
    if (i == 3 && j == 3) {
      return 2.0 * 0.2 * x[2] * x[2];
    }
    return 2.0 * 0.4 * x[2] * x[3];
  };
  // Symmetric square root; the 2x2 block uses sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
  diffusion.sqrt = [coupling](Point x, std::span<double> out) {
    std::fill(out.begin(), out.begin() + 16, 0.0);
    const double root2 = std::sqrt(2.0);
    out[0] = root2;
    out[5] = root2;
    const double v = coupling(x);
    const double a = 2.0 * (1.0 + v);
    const double b = 2.0 * v;
    const double s = std::sqrt(a * a - b * b);
    const double t = std::sqrt(2.0 * a + 2.0 * s);
    out[10] = (a + s) / t;
    out[15] = (a + s) / t;
    out[11] = b / t;
    out[14] = b / t;
  };
  return diffusion;
}

}  // namespace

BenchmarkId parse_benchmark(std::string_view name) {
  if (name == "ring2d") return BenchmarkId::Ring2D;
  if (name == "unimode4d") return BenchmarkId::UniMode4D;
  if (name == "unimode6d") return BenchmarkId::UniMode6D;
  if (name == "multimode6d") return BenchmarkId::MultiMode6D;
  if (name == "multimode10d") return BenchmarkId::MultiMode10D;
  throw ConfigError("unknown benchmark '" + std::string(name) + "'");
}

std::string_view benchmark_name(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Ring2D: return "ring2d";
    case BenchmarkId::UniMode4D: return "unimode4d";
    case BenchmarkId::UniMode6D: return "unimode6d";
    case BenchmarkId::MultiMode6D: return "multimode6d";
    case BenchmarkId::MultiMode10D: return "multimode10d";
  }
  return "unknown";
}

Benchmark make_benchmark(BenchmarkId id) {
  Benchmark b;
  b.id = id;
  BenchmarkDefaults& def = b.defaults;
  switch (id) {
    case BenchmarkId::Ring2D:
      b.dim = 2;
      b.groups.push_back(ring_group({0, 1}));
      b.diffusion = isotropic_diffusion(2, 2.0);
      def.domain = Domain::isotropic({-0.0056, 0.0026}, 2.1467);
      break;
    case BenchmarkId::UniMode4D:
      b.dim = 4;
      b.groups.push_back(banana_group({0, 1}));
      b.groups.push_back(quadratic_log_group({2, 3}, 2.0, -0.3));
      b.diffusion = unimode4d_diffusion();
      def.domain = Domain::isotropic({-0.0043, 0.1048, 0.0044, 0.0081}, 2.6472);
      def.refine_candidates = {0.4, 0.8, 1.2, 1.6, 2.0, 2.4};
      def.refine_threshold = 0.999;
      break;
    case BenchmarkId::UniMode6D:
      b.dim = 6;
      b.groups.push_back(banana_group({0, 1}));
      b.groups.push_back(banana_group({2, 3}));
      b.groups.push_back(banana_group({4, 5}));
      b.diffusion = isotropic_diffusion(6, 2.0);
      def.domain = Domain::cube(6, 1.5191);
      def.refine_candidates = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4};
      def.refine_threshold = 0.990;
      def.tffn_batch = 16000;
      break;
    case BenchmarkId::MultiMode6D:
      b.dim = 6;
      b.groups.push_back(quadratic_log_group({0, 1, 2}, 2.0, 0.5, {{0, 1.0, 0.02}, {1, 1.0, 0.02}}));
      b.groups.push_back(quadratic_log_group({3, 4, 5}, 0.5, 0.2));
      b.diffusion = isotropic_diffusion(6, 2.0);
      def.domain = Domain::isotropic({-0.0322, 0.0598, -0.0045, 0.0197, -0.0036, 0.0054}, 5.2872);
      def.refine_candidates = {1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6, 4.0, 4.4, 4.8, 5.2};
      def.refine_threshold = 0.97;
      def.constraint_weight = 100.0;
      def.trbfn_batch = 40000;
      break;
    case BenchmarkId::MultiMode10D:
      b.dim = 10;
      b.groups.push_back(quadratic_log_group({0, 1, 2}, 2.5, 0.1));
      b.groups.push_back(quadratic_log_group({3, 4, 5}, 2.0, 0.2));
      b.groups.push_back(quadratic_log_group({6, 7}, 3.0, -0.01));
      b.groups.push_back(quadratic_log_group({8, 9}, 3.0, -0.01, {{0, 2.0, 0.02}}));
      b.diffusion = isotropic_diffusion(10, 2.0);
      def.domain = Domain::isotropic({0.0017, -0.0016, -0.0026, -0.0025, 0.0058, -0.0030, 0.0, -0.0025, -0.0183, -0.0012},
                                     2.8580);
      def.anisotropic_half_width = {2.2911, 2.1985, 2.17, 2.4365, 2.622, 2.3835, 2.2343, 1.875, 2.1955, 2.0016};
      def.refine_candidates = {0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4};
      def.constraint_weight = 100.0;
      def.trbfn_batch = 10000;
      break;
  }
  b.potential = assemble_potential(b.dim, b.groups);
  b.problem = make_gibbs_problem(b.potential, b.diffusion);
  return b;
}

namespace {

// Tensor Gauss-Legendre integral of exp(-g) over the box [lo, hi] in the group's coordinates.
double group_integral(const PotentialGroup& group, std::span<const double> lo, std::span<const double> hi,
                      int panels) {
  const std::size_t k = group.coords.size();
  std::vector<CompositeRule> rules;
  rules.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    rules.push_back(composite_rule(lo[i], hi[i], panels, 16));
  }
  const std::size_t nodes = rules[0].nodes.size();
  std::vector<std::size_t> index(k, 0);
  std::vector<double> x(k);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      x[i] = rules[i].nodes[index[i]];
      weight *= rules[i].weights[index[i]];
    }
    total += weight * std::exp(-group.value(x));
    std::size_t axis = k;
    while (axis > 0) {
      --axis;
      if (++index[axis] < nodes) {
        break;
      }
      index[axis] = 0;
      if (axis == 0) {
        return total;
      }
    }
  }
}

}  // namespace

double exact_normalizer(const Benchmark& benchmark, const Domain& domain, double rel_tol) {
  if (domain.dim() != benchmark.dim) {
    throw ConfigError("exact_normalizer: domain dimension does not match the benchmark");
  }
  double product = 1.0;
  for (const PotentialGroup& group : benchmark.groups) {
    const std::size_t k = group.coords.size();
    std::vector<double> lo(k);
    std::vector<double> hi(k);
    for (std::size_t i = 0; i < k; ++i) {
      lo[i] = domain.lower(group.coords[i]);
      hi[i] = domain.upper(group.coords[i]);
    }
    // Cap the tensor grid at roughly 1.5e8 nodes.
    const double max_nodes_per_axis = std::pow(1.5e8, 1.0 / static_cast<double>(k));
    int panels = 2;
    double previous = group_integral(group, lo, hi, panels);
    bool converged = false;
    while (16.0 * panels * 2 <= max_nodes_per_axis) {
      panels *= 2;
      const double current = group_integral(group, lo, hi, panels);
      const bool close = std::abs(current - previous) <= rel_tol * std::abs(current);
      previous = current;
      if (close) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericalError("exact_normalizer: panel refinement did not converge for a group of size " +
                           std::to_string(k));
    }
    product *= previous;
  }
  return product;
}

double exact_normalizer_whole_space(const Benchmark& benchmark) {
  return exact_normalizer(benchmark, Domain::cube(benchmark.dim, 8.0));
}

double exact_density(const Benchmark& benchmark, Point x, double normalization) {
  return std::exp(-benchmark.potential.value(x)) / normalization;
}

}  // namespace tnfp
