#include <doctest.h>
#include <omp.h>

#include <cmath>

#include "fixtures.hpp"
#include "tnfp/benchmarks.hpp"
#include "tnfp/errors.hpp"
#include "tnfp/training.hpp"

using namespace tnfp;

namespace {

// Exact Gibbs density of a benchmark behind the model interface. Its two
// parameters do not enter the density, so the loss gradient is zero.
class GibbsStub {
 public:
  using real_type = double;
  struct Workspace {
    explicit Workspace(const GibbsStub&) {}
  };

  GibbsStub(const Benchmark* bm, Domain domain)
      : bm_(bm), domain_(std::move(domain)), z_(exact_normalizer_whole_space(*bm)) {}

  int dim() const { return bm_->dim; }
  const Domain& domain() const { return domain_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  void refresh() {}
  bool fresh() const { return true; }
  double normalization() const { return z_; }
  PenaltyTerms penalty_terms() const { return {}; }
  std::vector<std::uint8_t> parameter_groups() const { return {0, 1}; }

  void eval_derivs(std::span<const double> x, double& p, std::span<double> grad, std::span<double> hess,
                   Workspace&) const {
    const int d = dim();
    p = exact_density(*bm_, x, z_);
    std::vector<double> gh(d), hh(d * d);
    bm_->potential.gradient(x, gh);
    bm_->potential.hessian(x, hh);
    for (int a = 0; a < d; ++a) {
      grad[a] = -p * gh[a];
      for (int b = 0; b < d; ++b) hess[a * d + b] = p * (gh[a] * gh[b] - hh[a * d + b]);
    }
  }
  double accumulate_point_gradient(std::span<const double> x, double wp, std::span<const double> wg,
                                   std::span<const double> wh, std::span<double>, Workspace& ws) const {
    const int d = dim();
    double p = 0.0;
    std::vector<double> g(d), h(d * d);
    eval_derivs(x, p, g, h, ws);
    double total = wp * p;
    for (int a = 0; a < d; ++a) total += wg[a] * g[a];
    for (int k = 0; k < d * d; ++k) total += wh[k] * h[k];
    return total;
  }
  void accumulate_normalization_gradient(double, std::span<double>) const {}
  void accumulate_penalty_gradient(double, double, std::span<double>) const {}
  void finalize_gradient(std::span<double>) const {}

 private:
  const Benchmark* bm_;
  Domain domain_;
  double z_;
  std::vector<double> params_{0.25, -0.5};
};

TrainConfig small_config(long long epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 300;
  c.seed = 42;
  c.schedule.lr_start = 1e-2;
  return c;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("uniform batches") {
    const Domain box = Domain::isotropic({0.5, 0.5, 0.5}, 0.5);
    Philox rng(1, stream_id("train", 0));
    const std::vector<double> pts = sample_uniform(box, 1000, rng);
    CHECK(pts.size() == 3000u);
    for (const double v : pts) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    Philox again(1, stream_id("train", 0));
    CHECK(sample_uniform(box, 1000, again) == pts);
    Philox zero(1, 0);
    CHECK_THROWS_AS(sample_uniform(box, 0, zero), ConfigError);
  }

  TEST_CASE("sample mean is within three standard errors of the center") {
    const Domain box = Domain::isotropic({1.0, -2.0}, 3.0);
    Philox rng(2, 2);
    const int n = 1000000;
    const std::vector<double> pts = sample_uniform(box, n, rng);
    const double se = 3.0 / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < 2; ++j) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) sum += pts[2 * k + j];
      CHECK(std::abs(sum / n - box.center[j]) <= 3 * se);
    }
  }

  TEST_CASE("exact solution has vanishing residual") {
    const Benchmark bm = make_benchmark(BenchmarkId::Ring2D);
    const GibbsStub stub(&bm, bm.defaults.domain);
    Philox rng(3, 3);
    const std::vector<double> batch = sample_uniform(stub.domain(), 500, rng);
    GibbsStub::Workspace ws(stub);
    for (int b = 0; b < 500; ++b) {
      const std::span<const double> x(batch.data() + 2 * b, 2);
      double p = 0.0;
      std::vector<double> g(2), h(4);
      stub.eval_derivs(x, p, g, h, ws);
      CHECK(std::abs(residual(bm.problem, x, p, g, h)) <= 1e-10);
    }
    std::vector<double> grad(2);
    const LossBreakdown l = loss_and_gradient(stub, bm.problem, batch, 50000.0, 100.0, std::span<double>(grad));
    CHECK(l.residual <= 500 * 1e-20);
  }

  TEST_CASE("one step on the exact solution does not move the parameters") {
    const Benchmark bm = make_benchmark(BenchmarkId::Ring2D);
    GibbsStub stub(&bm, bm.defaults.domain);
    const std::vector<double> before(stub.params().begin(), stub.params().end());
    TrainConfig c = small_config(1);
    TrainState state;
    train(stub, bm.problem, c, state);
    for (std::size_t k = 0; k < before.size(); ++k) {
      CHECK(std::abs(stub.params()[k] - before[k]) <= c.schedule.lr_start);
    }
  }

  TEST_CASE("zero penalty weights leave the residual sum") {
    const TrbfnModel<double> m = fixture::random_trbfn(4, 2, 3, {RbfKind::Wendland, RbfKind::Gaussian});
    Philox rng(4, 4);
    const std::vector<double> batch = fixture::interior_points(m.domain(), 64, rng);
    const LossBreakdown plain = loss(m, fixture::problem_for(2), batch, 0.0, 0.0);
    const LossBreakdown weighted = loss(m, fixture::problem_for(2), batch, 50000.0, 100.0);
    CHECK(plain.total == plain.residual);
    CHECK(weighted.residual == plain.residual);
    CHECK(weighted.total == doctest::Approx(plain.residual + 50000.0 * weighted.constraint + 100.0 * weighted.boundary)
                                .epsilon(1e-15));
  }

  TEST_CASE("doubling every residual quadruples the residual term") {
    const TrbfnModel<double> m = fixture::random_trbfn(5, 3, 2, {RbfKind::Gaussian});
    Philox rng(5, 5);
    const std::vector<double> batch = fixture::interior_points(m.domain(), 64, rng);
    // D = 2 kappa I doubles the operator of a constant-diffusion Gibbs problem.
    const double once = loss(m, fixture::coupled_problem(3, 1.5), batch, 0.0, 0.0).residual;
    const double twice = loss(m, fixture::coupled_problem(3, 3.0), batch, 0.0, 0.0).residual;
    CHECK(twice == doctest::Approx(4.0 * once).epsilon(1e-12));
  }

  TEST_CASE("parallel and serial assembly agree") {
    const TrbfnModel<double> m = fixture::random_trbfn(6, 2, 8, {RbfKind::Wendland, RbfKind::InverseMultiquadric});
    Philox rng(6, 6);
    const std::vector<double> batch = fixture::interior_points(m.domain(), 1000, rng);
    std::vector<double> a(m.parameter_count()), b(m.parameter_count());
    const Problem problem = fixture::problem_for(2);
    const LossBreakdown la = loss_and_gradient(m, problem, batch, 50000.0, 100.0, std::span<double>(a));
    const LossBreakdown lb = loss_and_gradient_serial(m, problem, batch, 50000.0, 100.0, std::span<double>(b));
    CHECK(la.total == doctest::Approx(lb.total).epsilon(1e-12));
    CHECK(oracle::max_rel_diff(a, b) <= 1e-12);
  }

  TEST_CASE("assembly does not depend on the thread count") {
    const TffnModel<double> m = fixture::random_tffn(7, 2, 3, {1, 8, 8, 1});
    Philox rng(7, 7);
    const std::vector<double> batch = fixture::interior_points(m.domain(), 700, rng);
    const Problem problem = fixture::problem_for(2);
    const int saved = omp_get_max_threads();
    std::vector<double> ref(m.parameter_count()), other(m.parameter_count());
    omp_set_num_threads(1);
    const LossBreakdown l1 = loss_and_gradient(m, problem, batch, 0.0, 0.0, std::span<double>(ref));
    for (const int threads : {2, 3, 8}) {
      omp_set_num_threads(threads);
      const LossBreakdown lt = loss_and_gradient(m, problem, batch, 0.0, 0.0, std::span<double>(other));
      CHECK(lt.total == l1.total);
      CHECK(other == ref);
    }
    omp_set_num_threads(saved);
  }

  TEST_CASE("zero epochs return the model unchanged") {
    TrbfnModel<float> m = fixture::random_trbfn<float>(8, 2, 4, {RbfKind::Wendland});
    const std::vector<float> before(m.params().begin(), m.params().end());
    TrainState state;
    const auto history = train(m, fixture::problem_for(2), small_config(0), state);
    CHECK(history.empty());
    CHECK(std::vector<float>(m.params().begin(), m.params().end()) == before);
  }

  TEST_CASE("training is reproducible and resumable") {
    const Problem problem = fixture::problem_for(2);
    const TrbfnModel<float> start = fixture::random_trbfn<float>(9, 2, 6, {RbfKind::Wendland, RbfKind::Wendland});
    const TrainConfig c = small_config(12);

    TrbfnModel<float> a = start;
    TrainState sa;
    const auto ha = train(a, problem, c, sa);
    REQUIRE(ha.size() == 12u);
    CHECK(ha.front().lr == c.schedule.lr_start);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    TrbfnModel<float> b = start;
    TrainState sb;
    const auto hb = train(b, problem, c, sb);
    omp_set_num_threads(saved);
    CHECK(std::vector<float>(a.params().begin(), a.params().end()) ==
          std::vector<float>(b.params().begin(), b.params().end()));
    for (std::size_t k = 0; k < ha.size(); ++k) CHECK(ha[k].loss.total == hb[k].loss.total);

    // Stop after 5 epochs, then continue from the captured state.
    struct Stop {};
    TrbfnModel<float> c1 = start;
    TrainState s1;
    TrbfnModel<float> snapshot = start;
    TrainState snapshot_state;
    try {
      train(c1, problem, c, s1, EpochCallback<TrbfnModel<float>>([&](const EpochRecord& r, const auto& m, const auto& s) {
              if (r.epoch == 4) {
                snapshot = m;
                snapshot_state = s;
                throw Stop{};
              }
            }));
    } catch (const Stop&) {
    }
    CHECK(snapshot_state.epoch == 5);
    const auto rest = train(snapshot, problem, c, snapshot_state);
    CHECK(rest.size() == 7u);
    CHECK(std::vector<float>(snapshot.params().begin(), snapshot.params().end()) ==
          std::vector<float>(a.params().begin(), a.params().end()));
  }

  TEST_CASE("every optimizer lowers the loss on a small run") {
    const Problem problem = fixture::problem_for(2);
    for (const OptimizerKind kind : {OptimizerKind::Lion, OptimizerKind::Adam, OptimizerKind::TwoStep}) {
      TrbfnModel<double> m = fixture::random_trbfn(10, 2, 4, {RbfKind::Gaussian});
      TrainConfig c = small_config(60);
      c.optimizer.kind = kind;
      c.phase_length = 10;
      TrainState s;
      const auto h = train(m, problem, c, s);
      CHECK(h.back().loss.total < h.front().loss.total);
    }
  }

  TEST_CASE("two-step keeps the frozen group bit-identical within a phase") {
    const Problem problem = fixture::problem_for(2);
    TrbfnModel<float> m = fixture::random_trbfn<float>(11, 2, 3, {RbfKind::Wendland, RbfKind::Gaussian});
    const std::vector<std::uint8_t> groups = m.parameter_groups();
    TrainConfig c = small_config(10);
    c.optimizer.kind = OptimizerKind::TwoStep;
    c.phase_length = 5;
    std::vector<float> previous(m.params().begin(), m.params().end());
    bool ok = true;
    TrainState s;
    train(m, problem, c, s, EpochCallback<TrbfnModel<float>>([&](const EpochRecord& r, const auto& model, const auto&) {
            const auto active = static_cast<std::uint8_t>(two_step_schedule(r.epoch, c.phase_length));
            for (std::size_t k = 0; k < previous.size(); ++k) {
              if (groups[k] != active && model.params()[k] != previous[k]) ok = false;
            }
            previous.assign(model.params().begin(), model.params().end());
          }));
    CHECK(ok);
  }

  TEST_CASE("non-finite residuals abort with the epoch") {
    Problem broken = fixture::problem_for(2);
    broken.drift = [](Point, std::span<double> f) { f[0] = f[1] = NAN; };
    TrbfnModel<double> m = fixture::random_trbfn(12, 2, 2, {RbfKind::Gaussian});
    Philox rng(12, 12);
    const std::vector<double> batch = fixture::interior_points(m.domain(), 10, rng);
    CHECK_THROWS_AS(loss(m, broken, batch, 0.0, 0.0), NumericalError);
    TrainState s;
    try {
      train(m, broken, small_config(3), s);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 0);
    }
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.constraint_weight = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.epochs = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}
