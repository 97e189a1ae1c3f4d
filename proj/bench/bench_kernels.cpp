// Serial reference vs. OpenMP chunked assembly of the loss gradient.
//
//   bench_kernels [repeats]
//
// Prints seconds per call for each kernel and model, and the largest
// relative gradient difference between the two paths.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "tnfp/benchmarks.hpp"
#include "tnfp/rng.hpp"
#include "tnfp/tffn.hpp"
#include "tnfp/training.hpp"
#include "tnfp/trbfn.hpp"

using namespace tnfp;

namespace {

template <class F>
double seconds_per_call(int repeats, F&& f) {
  f();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < repeats; ++k) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / repeats;
}

template <class Model>
void compare(const char* label, const Model& model, const Problem& problem, int batch_size, int repeats) {
  using Real = typename Model::real_type;
  Philox rng(1, stream_id("bench"));
  const std::vector<double> batch = sample_uniform(model.domain(), batch_size, rng);
  std::vector<Real> serial(model.parameter_count()), parallel(model.parameter_count());
  const double t_serial = seconds_per_call(repeats, [&] {
    loss_and_gradient_serial(model, problem, batch, 50000.0, 100.0, std::span<Real>(serial));
  });
  const double t_parallel = seconds_per_call(repeats, [&] {
    loss_and_gradient(model, problem, batch, 50000.0, 100.0, std::span<Real>(parallel));
  });
  double scale = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < serial.size(); ++k) {
    scale = std::max(scale, std::abs(static_cast<double>(serial[k])));
    diff = std::max(diff, std::abs(static_cast<double>(serial[k]) - static_cast<double>(parallel[k])));
  }
  std::printf("%-28s batch %5d  serial %.4f s  openmp(%d) %.4f s  speedup %.2f  max rel diff %.2e\n", label,
              batch_size, t_serial, omp_get_max_threads(), t_parallel, t_serial / t_parallel,
              scale > 0 ? diff / scale : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  const Benchmark ring = make_benchmark(BenchmarkId::Ring2D);
  const std::vector<RbfKind> w3{RbfKind::Wendland, RbfKind::Wendland, RbfKind::Wendland};
  compare("TRBFN(200,3) float", TrbfnModel<float>::initialize(ring.defaults.domain, 200, w3, 1), ring.problem, 2000,
          repeats);
  compare("TRBFN(200,3) double", TrbfnModel<double>::initialize(ring.defaults.domain, 200, w3, 1), ring.problem, 2000,
          repeats);
  compare("TFFN(32,[1 8 8 1]) double", TffnModel<double>::initialize(ring.defaults.domain, 32, MlpShape{{1, 8, 8, 1}}, 1),
          ring.problem, 2048, repeats);
  const Benchmark ten = make_benchmark(BenchmarkId::MultiMode10D);
  compare("TRBFN(100,3) float 10D", TrbfnModel<float>::initialize(ten.defaults.domain, 100, w3, 1), ten.problem, 1000,
          repeats);
  return 0;
}
