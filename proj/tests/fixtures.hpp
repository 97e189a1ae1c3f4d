#pragma once

// Random small models, problems of any dimension and the derivative checks
// built on the finite-difference oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "tnfp/benchmarks.hpp"
#include "tnfp/problem.hpp"
#include "tnfp/rng.hpp"
#include "tnfp/tffn.hpp"
#include "tnfp/training.hpp"
#include "tnfp/trbfn.hpp"

namespace fixture {

using namespace tnfp;

// H = 1/2 |x|^2 + 0.3 sum_j x_j x_{j+1} with D = kappa I, for dimensions without a benchmark.
inline Problem coupled_problem(int d, double kappa = 1.5) {
  Potential h;
  h.dim = d;
  h.value = [d](Point x) {
    double v = 0.0;
    for (int j = 0; j < d; ++j) v += 0.5 * x[j] * x[j] + (j + 1 < d ? 0.3 * x[j] * x[j + 1] : 0.0);
    return v;
  };
  h.gradient = [d](Point x, std::span<double> g) {
    for (int j = 0; j < d; ++j) g[j] = x[j] + (j > 0 ? 0.3 * x[j - 1] : 0.0) + (j + 1 < d ? 0.3 * x[j + 1] : 0.0);
  };
  h.hessian = [d](Point, std::span<double> m) {
    std::fill(m.begin(), m.end(), 0.0);
    for (int j = 0; j < d; ++j) {
      m[j * d + j] = 1.0;
      if (j + 1 < d) m[j * d + j + 1] = m[(j + 1) * d + j] = 0.3;
    }
  };
  return make_gibbs_problem(h, isotropic_diffusion(d, kappa));
}

// Benchmark problem where one exists (state-dependent diffusion in 4D), otherwise the coupled quadratic.
inline Problem problem_for(int d) {
  if (d == 2) return make_benchmark(BenchmarkId::Ring2D).problem;
  if (d == 4) return make_benchmark(BenchmarkId::UniMode4D).problem;
  return coupled_problem(d);
}

inline Domain random_domain(int d, Philox& rng) {
  Domain box;
  for (int j = 0; j < d; ++j) {
    box.center.push_back(rng.uniform(-0.3, 0.3));
    box.half_width.push_back(rng.uniform(1.2, 2.2));
  }
  return box;
}

inline std::vector<RbfKind> random_kinds(int m, Philox& rng) {
  std::vector<RbfKind> kinds;
  for (int l = 0; l < m; ++l) kinds.push_back(static_cast<RbfKind>(rng.next_u32() % 3));
  return kinds;
}

// Initialized model with every raw parameter perturbed so weights, mixtures and bandwidths differ.
template <class Real = double>
TrbfnModel<Real> random_trbfn(std::uint64_t seed, int d, int rank, std::vector<RbfKind> kinds) {
  Philox rng(seed, stream_id("fixture-trbfn"));
  const Domain box = random_domain(d, rng);
  TrbfnModel<Real> model = TrbfnModel<Real>::initialize(box, rank, std::move(kinds), seed);
  std::span<Real> raw = model.mutable_params();
  for (int i = 0; i < rank; ++i) {
    raw[model.weight_index(i)] = static_cast<Real>(rng.uniform(-1, 1));
    for (int j = 0; j < d; ++j) {
      const double r = box.half_width[j];
      for (int l = 0; l < model.bases(); ++l) {
        raw[model.alpha_index(i, j, l)] = static_cast<Real>(rng.uniform(-1, 1));
        raw[model.shift_index(i, j, l)] = static_cast<Real>(box.center[j] + rng.uniform(-0.5, 0.5) * r);
        raw[model.log_bandwidth_index(i, j, l)] = static_cast<Real>(std::log(rng.uniform(0.4, 1.2) * r));
      }
    }
  }
  model.refresh();
  return model;
}

template <class Real = double>
TffnModel<Real> random_tffn(std::uint64_t seed, int d, int rank, std::vector<int> widths) {
  Philox rng(seed, stream_id("fixture-tffn"));
  const Domain box = random_domain(d, rng);
  TffnModel<Real> model = TffnModel<Real>::initialize(box, rank, MlpShape{std::move(widths)}, seed);
  // Nonzero biases so no unit sits at a symmetric point.
  for (Real& p : model.mutable_params()) p += static_cast<Real>(rng.uniform(-0.2, 0.2));
  model.refresh();
  return model;
}

inline std::vector<double> interior_points(const Domain& box, int count, Philox& rng, double shrink = 0.95) {
  std::vector<double> points;
  for (int k = 0; k < count; ++k) {
    for (int j = 0; j < box.dim(); ++j) {
      points.push_back(box.center[j] + shrink * rng.uniform(-1, 1) * box.half_width[j]);
    }
  }
  return points;
}

// Largest normalized mismatch of grad and Hessian against central differences of
// the density (gradient) and of the analytic gradient (Hessian).
template <class Model>
double spatial_derivative_error(const Model& model, std::span<const double> x) {
  const int d = model.dim();
  typename Model::Workspace ws(model);
  auto derivs = [&](std::span<const double> y, std::vector<double>& g, std::vector<double>& h) {
    double p = 0.0;
    std::vector<double> gr(d), hr(d * d);
    model.eval_derivs(y, p, gr, hr, ws);
    g.assign(gr.begin(), gr.end());
    h.assign(hr.begin(), hr.end());
    return p;
  };
  std::vector<double> g, h;
  const double p = derivs(x, g, h);
  const double step = 1e-5;
  std::vector<double> g_fd(d), h_fd(d * d);
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> gp, hp, gm, hm;
  for (int a = 0; a < d; ++a) {
    y[a] = x[a] + step;
    const double pp = derivs(y, gp, hp);
    y[a] = x[a] - step;
    const double pm = derivs(y, gm, hm);
    y[a] = x[a];
    g_fd[a] = (pp - pm) / (2 * step);
    for (int b = 0; b < d; ++b) h_fd[b * d + a] = (gp[b] - gm[b]) / (2 * step);
  }
  if (!std::isfinite(p)) return INFINITY;
  return std::max(oracle::max_rel_diff(g, g_fd, 1e-8), oracle::max_rel_diff(h, h_fd, 1e-8));
}

// Largest normalized mismatch between the assembled loss gradient and central
// differences of the loss over every raw parameter.
template <class Model>
double loss_gradient_error(const Model& model, const Problem& problem, std::span<const double> batch, double w1,
                           double w2) {
  using Real = typename Model::real_type;
  std::vector<Real> grad(model.parameter_count());
  loss_and_gradient(model, problem, batch, w1, w2, std::span<Real>(grad));
  std::vector<double> analytic(grad.begin(), grad.end());
  std::vector<double> numeric(grad.size());
  Model probe = model;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const Real base = model.params()[k];
    const double step = 1e-6 * std::max(1.0, std::abs(static_cast<double>(base)));
    auto at = [&](double t) {
      probe.mutable_params()[k] = static_cast<Real>(base + t);
      probe.refresh();
      return loss(probe, problem, batch, w1, w2).total;
    };
    numeric[k] = (at(step) - at(-step)) / (2 * step);
    probe.mutable_params()[k] = base;
  }
  return oracle::max_rel_diff(analytic, numeric, 1e-8);
}

// Composite rule applied separately between the kinks of k((x - s)/h) (x = s, s +- h).
inline double piecewise_quad(const std::function<double(double)>& f, double a, double b, std::vector<double> cuts) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double lo = std::clamp(cuts[k - 1], a, b);
    const double hi = std::clamp(cuts[k], a, b);
    if (hi > lo) total += oracle::quad(f, lo, hi, 64, 16);
  }
  return total;
}

// Z as sum_i c_i prod_j (piecewise Gauss-Legendre integral of the factor).
template <class Model>
double quadrature_z(const Model& m) {
  double z = 0.0;
  for (int i = 0; i < m.rank(); ++i) {
    double product = m.weight(i);
    for (int j = 0; j < m.dim(); ++j) {
      std::vector<double> cuts;
      for (int l = 0; l < m.bases(); ++l) {
        const double s = m.shift(i, j, l);
        const double h = m.bandwidth(i, j, l);
        cuts.insert(cuts.end(), {s - h, s, s + h});
      }
      const Domain& box = m.domain();
      product *= piecewise_quad([&](double t) { return static_cast<double>(m.factor_eval(i, j, t).v); },
                                box.lower(j), box.upper(j), cuts);
    }
    z += product;
  }
  return z;
}

}  // namespace fixture
