#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/problem.hpp"

namespace tnfp {

enum class BenchmarkId { Ring2D, UniMode4D, UniMode6D, MultiMode6D, MultiMode10D };

/// "ring2d", "unimode4d", "unimode6d", "multimode6d", "multimode10d". Throws ConfigError.
BenchmarkId parse_benchmark(std::string_view name);
std::string_view benchmark_name(BenchmarkId id);

/// Term of a separable potential acting on a subset of coordinates.
struct PotentialGroup {
  std::vector<int> coords;
  ScalarField value;       // on the group's own coordinates
  VectorField gradient;    // length coords.size()
  MatrixField hessian;     // coords.size() squared, row-major
};

/// Reference settings used by the published experiments for one benchmark.
struct BenchmarkDefaults {
  Domain domain;                          // estimated numerical support (center, B)
  std::vector<double> anisotropic_half_width;  // empty unless published
  std::vector<double> refine_candidates;  // S_n without the trailing B
  std::optional<double> refine_threshold;
  double constraint_weight = 50000.0;     // W1
  double boundary_weight = 100.0;         // W2
  int trbfn_batch = 5000;
  int tffn_batch = 4096;
};

struct Benchmark {
  BenchmarkId id;
  int dim = 0;
  std::vector<PotentialGroup> groups;
  Potential potential;
  Diffusion diffusion;
  Problem problem;
  BenchmarkDefaults defaults;
};

Benchmark make_benchmark(BenchmarkId id);

/// Integral of exp(-H) over `domain`, as a product of per-group tensor
/// Gauss-Legendre integrals refined by panel doubling until the relative
/// change drops below `rel_tol`. Throws NumericalError when the panel cap is
/// reached first.
double exact_normalizer(const Benchmark& benchmark, const Domain& domain, double rel_tol = 1e-10);

/// Normalizer over a box wide enough that exp(-H) is negligible outside it
/// (|x_j| <= 8 for every built-in potential); stands in for the whole space.
double exact_normalizer_whole_space(const Benchmark& benchmark);

/// exp(-H(x)) / normalization.
double exact_density(const Benchmark& benchmark, Point x, double normalization);

}  // namespace tnfp
