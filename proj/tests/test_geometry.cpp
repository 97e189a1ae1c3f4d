#include <doctest.h>
#include <omp.h>

#include <cmath>

#include "tnfp/benchmarks.hpp"
#include "tnfp/errors.hpp"
#include "tnfp/geometry.hpp"
#include "tnfp/rng.hpp"

using namespace tnfp;

namespace {

Problem ou_1d() {
  Problem p;
  p.dim = 1;
  p.drift = [](Point x, std::span<double> f) { f[0] = -x[0]; };
  p.drift_divergence = [](Point) { return -1.0; };
  p.diffusion = [](Point, std::span<double> d) { d[0] = 2.0; };
  p.diffusion_gradient = [](Point, int, int, int) { return 0.0; };
  p.diffusion_curvature = [](Point, int, int) { return 0.0; };
  p.constant_diffusion = true;
  return p;
}

Problem still(int dim) {
  Problem p;
  p.dim = dim;
  p.drift = [](Point, std::span<double> f) { std::fill(f.begin(), f.end(), 0.0); };
  return p;
}

const MatrixField kZeroSigma = [](Point, std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); };

SdeSimConfig small_config(std::uint64_t seed) {
  SdeSimConfig c;
  c.burnin_steps = 100;
  c.terminal_steps = 400;
  c.num_trajectories = 3;
  c.seed = seed;
  return c;
}

RefinementResult refine_table(const std::vector<double>& radii, const std::vector<double>& integrals,
                              double threshold, double b) {
  return refine_domain(
      [&](double r) {
        for (std::size_t k = 0; k < radii.size(); ++k) {
          if (radii[k] == r) return integrals[k];
        }
        FAIL("unexpected radius");
        return 0.0;
      },
      radii, threshold, b);
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("Philox4x32-10 known-answer vector") {
    // Zero key and zero counter, from the Random123 reference tests.
    Philox rng(0, 0);
    CHECK(rng.next_u32() == 0x6627e8d5u);
    CHECK(rng.next_u32() == 0xe169c58du);
    CHECK(rng.next_u32() == 0xbc57ac4cu);
    CHECK(rng.next_u32() == 0x9b00dbd8u);
  }

  TEST_CASE("config validation") {
    SdeSimConfig c = small_config(0);
    CHECK_NOTHROW(c.validate());
    c.burnin_steps = c.terminal_steps;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(0);
    c.margin = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(0);
    c.step_size = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("zero drift and zero noise stay at the origin") {
    const SdeSimConfig c = small_config(1);
    const auto points = euler_maruyama(still(2), kZeroSigma, {{0, 0}, {0, 0}, {0, 0}}, c);
    CHECK(points.size() == 3u * 300u);
    for (const auto& z : points) {
      CHECK(z[0] == 0.0);
      CHECK(z[1] == 0.0);
    }
  }

  TEST_CASE("degenerate support is an input error") {
    const SdeSimConfig c = small_config(1);
    const SupportAccumulator acc = simulate_support(still(2), kZeroSigma, {{0, 0}, {0, 0}, {0, 0}}, c);
    CHECK_THROWS_AS(estimate_domain(acc, c.margin), InputError);
  }

  TEST_CASE("Ornstein-Uhlenbeck stationary moments") {
    SdeSimConfig c;
    c.burnin_steps = 1000;
    c.terminal_steps = 501000;
    c.num_trajectories = 10;
    c.seed = 11;
    const MatrixField sigma = [](Point, std::span<double> s) { s[0] = std::sqrt(2.0); };
    double sum = 0.0;
    double sq = 0.0;
    long long n = 0;
    euler_maruyama(ou_1d(), sigma, std::vector<std::vector<double>>(10, {0.0}), c,
                   [&](int, long long, std::span<const double> z) {
                     sum += z[0];
                     sq += z[0] * z[0];
                     ++n;
                   });
    CHECK(n == 5000000);
    const double mean = sum / n;
    CHECK(std::abs(mean) <= 0.05);
    CHECK(std::abs(sq / n - mean * mean - 1.0) <= 0.1);
  }

  TEST_CASE("same seed gives identical trajectories") {
    const Benchmark bm = make_benchmark(BenchmarkId::UniMode4D);
    const std::vector<std::vector<double>> start(3, std::vector<double>(4, 0.0));
    const auto a = euler_maruyama(bm.problem, bm.diffusion.sqrt, start, small_config(5));
    const auto b = euler_maruyama(bm.problem, bm.diffusion.sqrt, start, small_config(5));
    const auto c = euler_maruyama(bm.problem, bm.diffusion.sqrt, start, small_config(6));
    CHECK(a == b);
    CHECK(a != c);
  }

  TEST_CASE("support statistics do not depend on the thread count") {
    const Benchmark bm = make_benchmark(BenchmarkId::Ring2D);
    const std::vector<std::vector<double>> start(4, std::vector<double>(2, 0.0));
    SdeSimConfig c = small_config(9);
    c.num_trajectories = 4;
    const auto points = euler_maruyama(bm.problem, bm.diffusion.sqrt, start, c);
    const SupportEstimate from_points = estimate_domain(points, c.margin);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const SupportEstimate serial = estimate_domain(simulate_support(bm.problem, bm.diffusion.sqrt, start, c), c.margin);
    omp_set_num_threads(3);
    const SupportEstimate from_acc = estimate_domain(simulate_support(bm.problem, bm.diffusion.sqrt, start, c), c.margin);
    omp_set_num_threads(saved);
    CHECK(serial.center == from_acc.center);
    CHECK(serial.half_width == from_acc.half_width);
    // Per-trajectory partial sums differ from a flat sum only in rounding.
    for (int j = 0; j < 2; ++j) CHECK(from_points.center[j] == doctest::Approx(from_acc.center[j]).epsilon(1e-12));
    CHECK(from_points.half_width == doctest::Approx(from_acc.half_width).epsilon(1e-12));
  }

  TEST_CASE("non-finite state is a divergence error") {
    Problem blowup = still(1);
    blowup.drift = [](Point x, std::span<double> f) { f[0] = 1e300 * (1.0 + x[0] * x[0]); };
    SdeSimConfig c = small_config(1);
    c.num_trajectories = 1;
    CHECK_THROWS_AS(euler_maruyama(blowup, kZeroSigma, {{1.0}}, c), DivergenceError);
  }

  TEST_CASE("estimate_domain examples") {
    const std::vector<std::vector<double>> two{{0, 0}, {2, 0}};
    const SupportEstimate e = estimate_domain(two, 1.1);
    CHECK(e.center == std::vector<double>{1.0, 0.0});
    CHECK(e.half_width == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(e.domain.half_width == std::vector<double>{e.half_width, e.half_width});
    const std::vector<std::vector<double>> one{{0.3, -0.2}};
    CHECK_THROWS_AS(estimate_domain(one, 1.1), InputError);
    CHECK_THROWS_AS(estimate_domain(std::vector<std::vector<double>>{}, 1.1), InputError);
  }

  TEST_CASE("estimated box contains every sample") {
    // One-sided deviations: the farthest point lies below the mean.
    const std::vector<std::vector<double>> pts{{0.0}, {0.1}, {0.2}, {-3.0}};
    const SupportEstimate e = estimate_domain(pts, 1.01);
    for (const auto& z : pts) CHECK(e.domain.contains(z));
  }

  TEST_CASE("anisotropic examples") {
    const std::vector<std::vector<double>> two{{0, 0}, {2, 4}};
    const Domain d = estimate_domain_anisotropic(two);
    CHECK(d.center == std::vector<double>{1.0, 2.0});
    CHECK(d.half_width == std::vector<double>{1.0, 2.0});
    const std::vector<std::vector<double>> pts{{0.5, 1.0}, {-1.5, 2.0}, {2.0, -0.5}};
    std::vector<std::vector<double>> flipped = pts;
    for (auto& z : flipped) z[1] = -z[1];
    const Domain a = estimate_domain_anisotropic(pts);
    const Domain b = estimate_domain_anisotropic(flipped);
    CHECK(a.half_width[1] == doctest::Approx(b.half_width[1]).epsilon(1e-15));
    CHECK(a.half_width[0] == b.half_width[0]);
  }

  TEST_CASE("ring2d support with the published settings") {
    const Benchmark bm = make_benchmark(BenchmarkId::Ring2D);
    SdeSimConfig c;
    c.seed = 2024;
    const std::vector<std::vector<double>> start(c.num_trajectories, std::vector<double>(2, 0.0));
    const SupportEstimate e = estimate_domain(simulate_support(bm.problem, bm.diffusion.sqrt, start, c), c.margin);
    CHECK(std::abs(e.center[0] - (-0.0056)) <= 0.05);
    CHECK(std::abs(e.center[1] - 0.0026) <= 0.05);
    CHECK(std::abs(e.half_width - 2.1467) <= 0.3);
  }

  TEST_CASE("refinement picks the smallest candidate above the threshold") {
    // Integration of a trained TRBFN(800, 3) in 10D.
    const std::vector<double> radii{0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4};
    const std::vector<double> values{0.00, 0.017, 0.132, 0.277, 0.476, 0.784, 0.967, 0.999};
    CHECK(refine_table(radii, values, 0.97, 2.858).radius == 2.4);
    CHECK(refine_table(radii, values, 0.0, 2.858).radius == 0.6);  // 0.3 integrates to 0, not above 0
    const RefinementResult r = refine_table(radii, values, 0.97, 2.858);
    CHECK_FALSE(r.fallback);
    CHECK(r.log.size() == radii.size());
    CHECK(r.log[6].integral == 0.967);
  }

  TEST_CASE("threshold zero picks the smallest candidate with positive mass") {
    const std::vector<double> radii{0.4, 0.8};
    CHECK(refine_table(radii, {0.138, 0.703}, 0.0, 2.6472).radius == 0.4);
  }

  TEST_CASE("strict comparison falls back to B") {
    const std::vector<double> radii{0.5, 1.0, 1.5};
    const RefinementResult r = refine_table(radii, {0.99, 0.99, 0.99}, 0.99, 2.0);
    CHECK(r.fallback);
    CHECK(r.radius == 2.0);
    const RefinementResult empty = refine_domain([](double) { return 1.0; }, {}, 0.9, 1.7);
    CHECK(empty.fallback);
    CHECK(empty.radius == 1.7);
  }

  TEST_CASE("4D unimode table with theta = 0.95") {
    const std::vector<double> radii{0.4, 0.8, 1.2, 1.6, 2.0, 2.4};
    const std::vector<double> values{0.138, 0.703, 0.964, 0.996, 0.999, 0.999};
    CHECK(refine_table(radii, values, 0.95, 2.6472).radius == 1.2);
  }

  TEST_CASE("unsorted candidates are rejected") {
    CHECK_THROWS_AS(refine_domain([](double) { return 1.0; }, std::vector<double>{1.0, 0.5}, 0.9, 2.0), ConfigError);
  }
}

TEST_SUITE("geometry_slow") {
  TEST_CASE("multimode10d anisotropic support with the published settings") {
    const Benchmark bm = make_benchmark(BenchmarkId::MultiMode10D);
    SdeSimConfig c;
    c.seed = 2024;
    const std::vector<std::vector<double>> start(c.num_trajectories, std::vector<double>(10, 0.0));
    const Domain d = estimate_domain_anisotropic(simulate_support(bm.problem, bm.diffusion.sqrt, start, c));
    const double published[] = {2.2911, 2.1985, 2.17, 2.4365, 2.622, 2.3835, 2.2343, 1.875, 2.1955, 2.0016};
    for (int j = 0; j < 10; ++j) {
      CAPTURE(j);
      CHECK(std::abs(d.half_width[j] - published[j]) <= 0.3);
    }
  }
}
