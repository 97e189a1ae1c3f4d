// Acceptance runner: one PASS/FAIL line per criterion, then supplementary
// checks. Progress goes to stderr, the summary to stdout.
//
//   acceptance [--only 1,2,8] [--workdir DIR]
//
// Exit status is 0 only when every selected criterion passes.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tnfp/benchmarks.hpp"
#include "tnfp/commands.hpp"
#include "tnfp/config.hpp"
#include "tnfp/errors.hpp"
#include "tnfp/evaluation.hpp"
#include "tnfp/geometry.hpp"
#include "tnfp/training.hpp"

using namespace tnfp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3g", v);
  return buffer;
}

class Clock {
 public:
  double minutes() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() / 60.0;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const std::vector<double> kThresholds{1e-2, 5e-2, 1e-1};
const std::vector<RbfKind> kWendland3{RbfKind::Wendland, RbfKind::Wendland, RbfKind::Wendland};

// Desk-scale Ring2D training setup shared by criteria 4, 6 and 9.
TrainConfig ring_config(OptimizerKind kind, long long epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 2000;
  c.seed = seed;
  c.constraint_weight = 50000.0;
  c.boundary_weight = 100.0;
  c.optimizer.kind = kind;
  c.schedule.lr_start = 9e-4;
  c.schedule.lr_end = 8e-6;
  return c;
}

struct RunResult {
  std::vector<EpochRecord> history;
  double tail_loss = INFINITY;  // mean total loss over the last 100 epochs
  std::optional<long long> diverged;
  double minutes = 0.0;
};

template <class Model>
RunResult run_training(Model& model, const Problem& problem, const TrainConfig& config, const std::string& label) {
  RunResult out;
  Clock clock;
  TrainState state;
  const long long every = std::max(1LL, config.epochs / 10);
  try {
    out.history = train(model, problem, config, state,
                        EpochCallback<Model>([&](const EpochRecord& r, const Model&, const TrainState&) {
                          if (r.epoch % every == 0) {
                            std::cerr << "  " << label << " epoch " << r.epoch << " loss " << sci(r.loss.total)
                                      << " residual " << sci(r.loss.residual) << " (" << sci(clock.minutes())
                                      << " min)\n";
                          }
                        }));
  } catch (const DivergenceError& e) {
    out.diverged = e.step();
    std::cerr << "  " << label << " diverged: " << e.what() << '\n';
  }
  if (!out.diverged && !out.history.empty()) {
    const std::size_t n = std::min<std::size_t>(100, out.history.size());
    double sum = 0.0;
    for (std::size_t k = out.history.size() - n; k < out.history.size(); ++k) sum += out.history[k].loss.total;
    out.tail_loss = sum / static_cast<double>(n);
  }
  out.minutes = clock.minutes();
  return out;
}

struct Ring {
  Benchmark bm = make_benchmark(BenchmarkId::Ring2D);
  double z = exact_normalizer_whole_space(bm);
};

template <class Model>
double gamma_error(const Ring& ring, const Model& model, double eps = 0.1) {
  const DensityFn exact = [&](Point x) { return exact_density(ring.bm, x, ring.z); };
  const DensityFn approx = [&](Point x) { return static_cast<double>(model.density(x)); };
  const std::vector<double> thresholds{eps};
  return relative_error(exact, approx, Domain::cube(2, 2.0), 100000, thresholds, 2024)[0].error;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  double worst = 0.0;
  std::string where;
  for (const BenchmarkId id : {BenchmarkId::Ring2D, BenchmarkId::UniMode4D, BenchmarkId::UniMode6D,
                               BenchmarkId::MultiMode6D, BenchmarkId::MultiMode10D}) {
    const Benchmark bm = make_benchmark(id);
    const double z = exact_normalizer_whole_space(bm);
    Philox rng(1, stream_id("acceptance-1"));
    const Domain& box = bm.defaults.domain;
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> x(bm.dim);
      for (int j = 0; j < bm.dim; ++j) x[j] = rng.uniform(box.lower(j), box.upper(j));
      double p = 0.0;
      const double r = oracle::gibbs_residual(bm, z, x, p);
      const double scaled = std::abs(r) / std::max(1.0, p);
      if (scaled > worst) {
        worst = scaled;
        where = std::string(benchmark_name(id));
      }
    }
  }
  return {worst <= 1e-6, "max |L p*| / max(1, p*) = " + sci(worst) + " (" + where + "), bound 1e-6, 5 x 1000 points"};
}

Outcome criterion2() {
  double spatial = 0.0, loss_grad = 0.0;
  int models = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int d = 1 + static_cast<int>(seed % 4);
    Philox rng(seed, stream_id("acceptance-2"));
    const TrbfnModel<double> m = fixture::random_trbfn(seed, d, 1 + static_cast<int>(seed % 4),
                                                       fixture::random_kinds(1 + static_cast<int>(seed % 3), rng));
    const std::vector<double> pts = fixture::interior_points(m.domain(), 5, rng);
    for (int k = 0; k < 5; ++k)
      spatial = std::max(spatial, fixture::spatial_derivative_error(m, std::span(pts).subspan(k * d, d)));
    const std::vector<double> batch = fixture::interior_points(m.domain(), 16, rng, 1.0);
    loss_grad = std::max(loss_grad, fixture::loss_gradient_error(m, fixture::problem_for(d), batch, 50000.0, 100.0));
    ++models;

    const TffnModel<double> t = fixture::random_tffn(seed, d, 1 + static_cast<int>(seed % 2), {1, 4, 4, 1});
    const std::vector<double> tpts = fixture::interior_points(t.domain(), 5, rng);
    for (int k = 0; k < 5; ++k)
      spatial = std::max(spatial, fixture::spatial_derivative_error(t, std::span(tpts).subspan(k * d, d)));
    const std::vector<double> tbatch = fixture::interior_points(t.domain(), 8, rng);
    loss_grad = std::max(loss_grad, fixture::loss_gradient_error(t, fixture::problem_for(d), tbatch, 0.0, 0.0));
    ++models;
  }
  return {spatial <= 1e-6 && loss_grad <= 1e-5, std::to_string(models) + " models: spatial " + sci(spatial) +
                                                    " (bound 1e-6), loss gradient " + sci(loss_grad) + " (bound 1e-5)"};
}

// Random TRBFN satisfying the shift and bandwidth constraints.
TrbfnModel<double> constrained_trbfn(std::uint64_t seed, int d, int rank, const std::vector<RbfKind>& kinds) {
  TrbfnModel<double> m = fixture::random_trbfn(seed, d, rank, kinds);
  Philox rng(seed, stream_id("acceptance-3"));
  std::span<double> raw = m.mutable_params();
  const Domain& box = m.domain();
  for (int i = 0; i < rank; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int l = 0; l < m.bases(); ++l) {
        const double room = box.half_width[j] - std::abs(raw[m.shift_index(i, j, l)] - box.center[j]);
        raw[m.log_bandwidth_index(i, j, l)] = std::log(rng.uniform(0.05, 1.0) * room);
      }
    }
  }
  m.refresh();
  return m;
}

Outcome criterion3(const std::vector<const TffnModel<double>*>& trained) {
  double trbfn = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Philox rng(seed, stream_id("acceptance-3k"));
    const TrbfnModel<double> m = constrained_trbfn(seed, 1 + static_cast<int>(seed % 4), 4, fixture::random_kinds(3, rng));
    trbfn = std::max(trbfn, std::abs(m.normalization() - fixture::quadrature_z(m)) / m.normalization());
  }
  double tffn = 0.0;
  for (const TffnModel<double>* t : trained) {
    const double z16 = t->normalization_with(16, 16);
    tffn = std::max(tffn, std::abs(t->normalization_with(32, 16) - z16) / z16);
  }
  const bool have_trained = !trained.empty();
  return {trbfn <= 1e-10 && have_trained && tffn < 1e-10,
          "TRBFN analytic vs piecewise GL(64,16) " + sci(trbfn) + " on 30 models (bound 1e-10); TFFN Z(M=32) vs "
              "Z(M=16) " + (have_trained ? sci(tffn) : std::string("n/a")) + " on " + std::to_string(trained.size()) +
              " trained checkpoints (bound 1e-10)"};
}

struct Crit4 {
  Outcome outcome;
  RunResult run;
  std::optional<TrbfnModel<float>> model;
};

Crit4 criterion4(const Ring& ring) {
  Crit4 c;
  TrbfnModel<float> model = TrbfnModel<float>::initialize(ring.bm.defaults.domain, 200, kWendland3, 1);
  c.run = run_training(model, ring.bm.problem, ring_config(OptimizerKind::Lion, 20000, 1), "crit4 lion");
  const double err = c.run.diverged ? INFINITY : gamma_error(ring, model);
  c.outcome = {err <= 2e-2, "Ring2D TRBFN(200,3) LION 2e4 epochs: Gamma_0.1 error " + sci(err) + " (bound 2e-2), " +
                                sci(c.run.minutes) + " min"};
  c.model = std::move(model);
  return c;
}

struct Crit5 {
  Outcome outcome;
  std::vector<TffnModel<double>> checkpoints;  // epochs 5000, 10000, 15000, 20000
};

Crit5 criterion5(const Ring& ring) {
  Crit5 c;
  TffnModel<double> model = TffnModel<double>::initialize(ring.bm.defaults.domain, 32, MlpShape{{1, 8, 8, 1}}, 1);
  TrainConfig config = ring_config(OptimizerKind::Lion, 20000, 1);
  config.batch_size = 2048;
  config.schedule.lr_start = 1e-3;
  config.constraint_weight = 0.0;
  config.boundary_weight = 0.0;
  Clock clock;
  TrainState state;
  std::optional<long long> diverged;
  try {
    train(model, ring.bm.problem, config, state,
          EpochCallback<TffnModel<double>>([&](const EpochRecord& r, const TffnModel<double>& m, const TrainState& s) {
            if (s.epoch % 5000 == 0) c.checkpoints.push_back(m);
            if (r.epoch % 2000 == 0) {
              std::cerr << "  crit5 tffn epoch " << r.epoch << " loss " << sci(r.loss.total) << " ("
                        << sci(clock.minutes()) << " min)\n";
            }
          }));
  } catch (const DivergenceError& e) {
    diverged = e.step();
  }
  const double err = diverged ? INFINITY : gamma_error(ring, model);
  c.outcome = {err <= 1e-1, "Ring2D TFFN(32,[1 8 8 1]) 2e4 epochs: Gamma_0.1 error " + sci(err) + " (bound 1e-1), " +
                                sci(clock.minutes()) + " min"};
  return c;
}

Outcome criterion6(const Ring& ring, const RunResult& lion) {
  std::map<std::string, RunResult> runs;
  for (const auto& [name, kind] : {std::pair{"adam", OptimizerKind::Adam}, std::pair{"sgd", OptimizerKind::Sgd}}) {
    TrbfnModel<float> model = TrbfnModel<float>::initialize(ring.bm.defaults.domain, 200, kWendland3, 1);
    runs[name] = run_training(model, ring.bm.problem, ring_config(kind, 20000, 1), std::string("crit6 ") + name);
  }
  auto text = [](const RunResult& r) {
    return r.diverged ? "diverged at epoch " + std::to_string(*r.diverged) : sci(r.tail_loss);
  };
  const bool pass = lion.tail_loss < runs["adam"].tail_loss && lion.tail_loss < runs["sgd"].tail_loss;
  return {pass, "final loss (mean of last 100 epochs) LION " + text(lion) + ", ADAM " + text(runs["adam"]) +
                    ", SGD " + text(runs["sgd"])};
}

Outcome criterion7(const Ring& ring) {
  bool pass = true;
  std::string detail;
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SdeSimConfig c;
    c.seed = seed;
    const std::vector<std::vector<double>> start(c.num_trajectories, std::vector<double>(2, 0.0));
    const SupportEstimate e =
        estimate_domain(simulate_support(ring.bm.problem, ring.bm.diffusion.sqrt, start, c), c.margin);
    const bool ok = std::abs(e.center[0]) <= 0.05 && std::abs(e.center[1]) <= 0.05 && e.half_width >= 1.8 &&
                    e.half_width <= 2.5;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": O = (" +
              sci(e.center[0]) + ", " + sci(e.center[1]) + "), B = " + sci(e.half_width);
  }
  return {pass, detail + " (|O_j| <= 0.05, B in [1.8, 2.5])"};
}

struct TableCase {
  std::string name;
  std::vector<double> radii;
  std::vector<double> integrals;
  double threshold;
  double b;
  double expected;
};

Outcome criterion8(std::vector<std::string>& notes) {
  const std::vector<TableCase> cases{
      {"multimode10d", {0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4}, {0.00, 0.017, 0.132, 0.277, 0.476, 0.784, 0.967, 0.999},
       0.97, 2.622, 2.4},
      {"unimode4d", {0.4, 0.8, 1.2, 1.6, 2.0, 2.4}, {0.138, 0.703, 0.964, 0.996, 0.999, 0.999}, 0.999, 2.6472, 2.0},
      {"unimode4d, threshold 0.95", {0.4, 0.8, 1.2, 1.6, 2.0, 2.4}, {0.138, 0.703, 0.964, 0.996, 0.999, 0.999}, 0.95,
       2.6472, 1.2},
      {"unimode6d", {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4}, {0.002, 0.081, 0.344, 0.739, 0.979, 0.998, 0.999}, 0.99,
       1.5191, 1.2},
      {"multimode6d", {1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6, 4.0, 4.4, 4.8, 5.2},
       {0.227, 0.494, 0.661, 0.752, 0.809, 0.853, 0.896, 0.940, 0.978, 0.997, 0.999}, 0.97, 5.2872, 4.4},
  };
  bool pass = true;
  std::string detail;
  for (const TableCase& t : cases) {
    const RefinementResult r = refine_domain(
        [&](double radius) {
          for (std::size_t k = 0; k < t.radii.size(); ++k) {
            if (t.radii[k] == radius) return t.integrals[k];
          }
          return std::nan("");
        },
        t.radii, t.threshold, t.b);
    const bool ok = r.radius == t.expected;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + t.name + " -> " + sci(r.radius) + (r.fallback ? " (fallback B)" : "") +
              (ok ? "" : " expected " + sci(t.expected));
    if (!ok && t.name == "unimode4d") {
      notes.push_back(
          "criterion 8, unimode4d: the tabulated integral at r = 2.0 is 0.999, equal to the threshold 0.999, and "
          "the selection rule requires integral > threshold, so no candidate qualifies and r* falls back to B = "
          "2.6472. The expected r* = 2.0 is consistent only with an unrounded integral above 0.999.");
    }
  }
  return {pass, detail};
}

Outcome criterion9(const Ring& ring) {
  const std::vector<RbfKind> kinds{RbfKind::Wendland, RbfKind::InverseMultiquadric};
  std::vector<double> err[2], boundary[2];
  for (int with = 0; with < 2; ++with) {
    for (const std::uint64_t seed : {1ull, 2ull}) {
      TrbfnModel<float> model = TrbfnModel<float>::initialize(ring.bm.defaults.domain, 100, kinds, seed);
      TrainConfig config = ring_config(OptimizerKind::Lion, 10000, seed);
      config.boundary_weight = with ? 100.0 : 0.0;
      const RunResult r = run_training(model, ring.bm.problem, config,
                                       std::string("crit9 ") + (with ? "with" : "without") + " seed " +
                                           std::to_string(seed));
      err[with].push_back(r.diverged ? INFINITY : gamma_error(ring, model));
      boundary[with].push_back(model.penalty_terms().boundary);
    }
  }
  auto mean = [](const std::vector<double>& v) { return (v[0] + v[1]) / 2.0; };
  // Seed-to-seed spread of either arm as the noise level.
  const double noise = std::max(std::abs(err[0][0] - err[0][1]), std::abs(err[1][0] - err[1][1]));
  const bool error_ok = mean(err[1]) <= mean(err[0]) + noise;
  const bool boundary_ok = mean(boundary[1]) * 10.0 <= mean(boundary[0]);
  return {error_ok && boundary_ok,
          "TRBFN(100, W+IMQ) 1e4 epochs x 2 seeds: Gamma_0.1 error with W2 " + sci(mean(err[1])) + ", without " +
              sci(mean(err[0])) + ", noise " + sci(noise) + "; boundary sum with " + sci(mean(boundary[1])) +
              ", without " + sci(mean(boundary[0])) + " (need >= 10x smaller)"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion10(const fs::path& workdir) {
  // Every stage, twice, with different thread counts; outputs compared byte for byte.
  const fs::path root = workdir / "determinism";
  fs::remove_all(root);
  std::string differing;
  const int saved = omp_get_max_threads();
  std::vector<std::string> outputs[2];
  for (int pass = 0; pass < 2; ++pass) {
    omp_set_num_threads(pass == 0 ? 1 : 4);
    const fs::path dir = root / std::to_string(pass);
    fs::create_directories(dir);
    for (const std::string family : {"trbfn", "tffn"}) {
      std::istringstream ini("seed = 5\nprecision = double\n[sde]\nbenchmark = ring2d\nburnin_steps = 2000\n"
                             "terminal_steps = 6000\ntrajectories = 4\n[domain]\nfile = " +
                             (dir / "dom.json").string() + "\ncandidates = 0.5, 1.0, 1.5\nthreshold = 0.5\n"
                             "[model]\nfamily = " + family + "\nrank = 6\nwidths = 1, 4, 1\ncheckpoint = " +
                             (dir / (family + ".json")).string() + "\n[train]\nepochs = 20\nbatch_size = 300\n"
                             "[eval]\nsamples = 5000\nresolution = 11\n");
      const RunConfig config = parse_config(ini);
      std::ostringstream log;
      cmd_estimate_domain(config, (dir / "dom.json").string(), log);
      cmd_train(config, (dir / (family + ".json")).string(), log);
      cmd_refine(config, (dir / (family + ".refined.json")).string(), log);
      cmd_eval(config, (dir / (family + ".report.csv")).string(), log);
      cmd_export_slice(config, (dir / (family + ".slice.csv")).string(), log);
      cmd_integrate_table(config, (dir / (family + ".table.csv")).string(), log);
      outputs[pass].push_back(log.str());
    }
  }
  omp_set_num_threads(saved);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(root / "0")) {
    const fs::path other = root / "1" / entry.path().filename();
    const auto normalize = [&](std::string text, int pass) {
      // Paths inside artifacts name the run directory.
      const std::string dir = (root / std::to_string(pass)).string();
      for (std::size_t at; (at = text.find(dir)) != std::string::npos;) text.replace(at, dir.size(), "<dir>");
      return text;
    };
    ++files;
    if (normalize(slurp(entry.path()), 0) != normalize(slurp(other), 1)) {
      differing += " " + entry.path().filename().string();
    }
  }
  const bool logs_equal = outputs[0] == outputs[1];
  return {differing.empty() && logs_equal && files > 0,
          std::to_string(files) + " artifacts of every stage for TRBFN and TFFN, 1 vs 4 threads: " +
              (differing.empty() ? std::string("byte-identical") : "differ:" + differing) +
              (logs_equal ? ", logs identical" : ", logs differ")};
}

// Slice of the criterion-4 model at resolution 201: the maximum should sit on the unit circle.
std::string slice_note(const TrbfnModel<float>& model) {
  const Domain& box = model.domain();
  const DensityFn f = [&](Point x) { return static_cast<double>(model.density(x)); };
  const SliceGrid g = slice_grid(f, box, box.center, 0, 1, 201);
  std::size_t best = 0;
  for (std::size_t k = 1; k < g.values.size(); ++k) {
    if (g.values[k] > g.values[best]) best = k;
  }
  const double x = g.xa[best / 201], y = g.xb[best % 201];
  const double spacing = 2.0 * box.half_width[0] / 200.0;
  const double radius = std::hypot(x, y);
  const bool ok = std::abs(radius - 1.0) <= spacing * std::numbers::sqrt2;
  return std::string(ok ? "PASS" : "FAIL") + " example slice/ring2d: maximum of the 201 x 201 slice at radius " +
         sci(radius) + " (unit circle within grid spacing " + sci(spacing) + ")";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria 1-10");
  std::vector<int> only;
  std::string workdir = (fs::temp_directory_path() / "tnfp_acceptance").string();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--workdir", workdir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  auto selected = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  const Ring ring;
  std::map<int, Outcome> results;
  std::vector<std::string> supplementary;
  std::vector<std::string> notes;
  auto record = [&](int k, Outcome o) {
    std::cerr << "criterion " << k << (o.pass ? " PASS: " : " FAIL: ") << o.detail << '\n';
    results[k] = std::move(o);
  };

  if (selected(1)) record(1, criterion1());
  if (selected(2)) record(2, criterion2());
  if (selected(7)) record(7, criterion7(ring));
  if (selected(8)) record(8, criterion8(notes));
  if (selected(10)) record(10, criterion10(workdir));

  std::optional<Crit4> crit4;
  if (selected(4) || selected(6)) {
    crit4 = criterion4(ring);
    if (selected(4)) {
      record(4, crit4->outcome);
      const double residual = crit4->run.diverged ? INFINITY : crit4->run.history.back().loss.residual;
      supplementary.push_back(std::string(residual < 1e-2 ? "PASS" : "FAIL") +
                              " example train/ring2d: final residual loss (sum over the 2000-point batch) " +
                              sci(residual) + ", bound 1e-2");
      if (crit4->model) supplementary.push_back(slice_note(*crit4->model));
    }
  }
  if (selected(6)) record(6, criterion6(ring, crit4->run));

  std::optional<Crit5> crit5;
  if (selected(5) || selected(3)) {
    crit5 = criterion5(ring);
    if (selected(5)) record(5, crit5->outcome);
  }
  if (selected(3)) {
    std::vector<const TffnModel<double>*> trained;
    for (const auto& m : crit5->checkpoints) trained.push_back(&m);
    record(3, criterion3(trained));
  }
  if (selected(9)) record(9, criterion9(ring));

  bool all = true;
  std::cout << "Acceptance criteria\n";
  for (const auto& [k, o] : results) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << '\n';
    all = all && o.pass;
  }
  if (!supplementary.empty()) {
    std::cout << "Supplementary examples\n";
    for (const std::string& s : supplementary) std::cout << s << '\n';
  }
  for (const std::string& n : notes) std::cout << "note: " << n << '\n';
  return all ? 0 : 1;
}
