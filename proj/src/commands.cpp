#include "tnfp/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "tnfp/benchmarks.hpp"
#include "tnfp/errors.hpp"
#include "tnfp/evaluation.hpp"
#include "tnfp/geometry.hpp"
#include "tnfp/io.hpp"
#include "tnfp/training.hpp"

namespace tnfp {

namespace {

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  if (path.empty()) {
    throw ConfigError("no output path given (--out)");
  }
  std::ofstream out(path, std::ios::binary | mode);
  if (!out) {
    throw InputError("cannot open '" + path + "' for writing");
  }
  return out;
}

// Calls f.template operator()<Model>() for the model type of (family, precision).
template <class F>
void with_model_type(ModelFamily family, Precision precision, F&& f) {
  if (family == ModelFamily::Trbfn) {
    if (precision == Precision::Single) {
      f.template operator()<TrbfnModel<float>>();
    } else {
      f.template operator()<TrbfnModel<double>>();
    }
  } else if (precision == Precision::Single) {
    f.template operator()<TffnModel<float>>();
  } else {
    f.template operator()<TffnModel<double>>();
  }
}

template <class Model>
Model initial_model(const RunConfig& config, const Domain& domain) {
  if constexpr (std::is_same_v<Model, TrbfnModel<typename Model::real_type>>) {
    return Model::initialize(domain, config.rank, config.kinds, config.seed);
  } else {
    return Model::initialize(domain, config.rank, MlpShape{config.widths}, config.seed, config.quad_panels,
                             config.quad_points);
  }
}

std::string model_label(const Checkpoint& c) {
  std::ostringstream label;
  if (c.family == ModelFamily::Trbfn) {
    label << "TRBFN(" << c.rank << " " << c.kinds.size() << ")";
  } else {
    label << "TFFN(" << c.rank << " [";
    for (std::size_t k = 0; k < c.shape.widths.size(); ++k) label << (k ? " " : "") << c.shape.widths[k];
    label << "])";
  }
  return label.str();
}

const std::string& checkpoint_path(const RunConfig& config) {
  if (config.checkpoint.empty()) {
    throw ConfigError("no checkpoint given ([model] checkpoint)");
  }
  return config.checkpoint;
}

// Loads the checkpoint named in the config; its benchmark must match the config's.
Checkpoint load_checkpoint(const RunConfig& config, const std::string& path) {
  Checkpoint c = read_checkpoint(path);
  if (c.benchmark != config.benchmark) {
    throw ConfigError("checkpoint '" + path + "' was trained on " + c.benchmark + ", config names " +
                      config.benchmark);
  }
  return c;
}

// Restores the checkpointed model and calls f(model).
template <class F>
void with_checkpoint_model(const Checkpoint& c, F&& f) {
  with_model_type(c.family, c.precision, [&]<class Model>() { f(restore_model<Model>(c)); });
}

template <class Model>
DensityFn density_of(const Model& model) {
  return [&model](Point x) { return static_cast<double>(model.density(x)); };
}

double largest_half_width(const Domain& d) { return *std::max_element(d.half_width.begin(), d.half_width.end()); }

std::string loss_row(const EpochRecord& r) {
  return std::to_string(r.epoch) + ',' + format_double(r.loss.total) + ',' + format_double(r.loss.residual) + ',' +
         format_double(r.loss.constraint) + ',' + format_double(r.loss.boundary) + '\n';
}

constexpr const char* kLossHeader = "epoch,total,residual,constraint,boundary\n";

// Keeps the loss rows of epochs before `epoch`, so a resumed run rewrites the
// rows a crashed run may have logged after its last checkpoint.
void truncate_loss_csv(const std::string& path, long long epoch) {
  std::string kept = kLossHeader;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) < epoch) kept += line + '\n';
  }
  open_output(path) << kept;
}

}  // namespace

std::string loss_csv_path(const RunConfig& config, const std::string& out) {
  return config.loss_csv.empty() ? out + ".loss.csv" : config.loss_csv;
}

void cmd_estimate_domain(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  const Benchmark bm = make_benchmark(parse_benchmark(config.benchmark));
  SdeSimConfig sde = config.sde;
  sde.seed = config.seed;
  const std::vector<std::vector<double>> initial(sde.num_trajectories, std::vector<double>(bm.dim, 0.0));
  const SupportAccumulator points = simulate_support(bm.problem, bm.diffusion.sqrt, initial, sde);
  DomainFile file;
  if (config.anisotropic) {
    file.domain = estimate_domain_anisotropic(points);
    file.domain.validate();
    file.provenance.method = "estimate-anisotropic";
  } else {
    file.domain = estimate_domain(points, sde.margin).domain;
    file.provenance.method = "estimate";
  }
  file.provenance.benchmark = config.benchmark;
  file.provenance.seed = config.seed;
  file.provenance.trajectories = sde.num_trajectories;
  file.provenance.burnin_steps = sde.burnin_steps;
  file.provenance.terminal_steps = sde.terminal_steps;
  file.provenance.step_size = sde.step_size;
  file.provenance.margin = config.anisotropic ? 1.0 : sde.margin;
  file.provenance.samples = points.count();
  write_domain_file(out, file);
  log << "estimate-domain: " << points.count() << " points, center";
  for (const double c : file.domain.center) log << ' ' << format_double(c);
  log << ", half width";
  for (const double h : file.domain.half_width) log << ' ' << format_double(h);
  log << '\n';
}

void cmd_train(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  if (out.empty()) {
    throw ConfigError("no output path given (--out)");
  }
  const Benchmark bm = make_benchmark(parse_benchmark(config.benchmark));
  TrainConfig train_config = config.train;
  train_config.seed = config.seed;
  const std::string csv_path = loss_csv_path(config, out);

  Checkpoint resumed;
  Domain domain;
  if (config.resume) {
    resumed = load_checkpoint(config, config.checkpoint.empty() ? out : config.checkpoint);
    if (resumed.family != config.family) {
      throw ConfigError("checkpoint holds a " + std::string(family_name(resumed.family)) + " model, config asks for " +
                        std::string(family_name(config.family)));
    }
    if (resumed.precision != config.precision) {
      throw ConfigError("checkpoint precision is " + std::string(precision_name(resumed.precision)) +
                        ", config asks for " + std::string(precision_name(config.precision)));
    }
    if (resumed.seed != config.seed) {
      throw ConfigError("checkpoint was trained with seed " + std::to_string(resumed.seed) + ", config gives " +
                        std::to_string(config.seed));
    }
    domain = resumed.domain;
  } else {
    if (config.domain_file.empty()) {
      throw ConfigError("no domain file given ([domain] file)");
    }
    domain = read_domain_file(config.domain_file).domain;
  }
  if (domain.dim() != bm.dim) {
    throw ConfigError("domain has dimension " + std::to_string(domain.dim()) + ", " + config.benchmark + " needs " +
                      std::to_string(bm.dim));
  }

  with_model_type(config.family, config.precision, [&]<class Model>() {
    Model model = config.resume ? restore_model<Model>(resumed) : initial_model<Model>(config, domain);
    TrainState state = config.resume ? resumed.state : TrainState{};
    if (config.resume) {
      truncate_loss_csv(csv_path, state.epoch);
    } else {
      open_output(csv_path) << kLossHeader;
    }
    std::ofstream csv = open_output(csv_path, std::ios::app);
    auto save = [&](const Model& m, const TrainState& s) {
      Checkpoint c = make_checkpoint(m);
      c.benchmark = config.benchmark;
      c.seed = config.seed;
      c.state = s;
      write_checkpoint(out, c);
    };
    const long long report_every = std::max(1LL, train_config.epochs / 20);
    const EpochCallback<Model> on_epoch = [&](const EpochRecord& r, const Model& m, const TrainState& s) {
      csv << loss_row(r);
      if (config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0) {
        csv.flush();
        save(m, s);
      }
      if (r.epoch % report_every == 0 || s.epoch == train_config.epochs) {
        log << "epoch " << r.epoch << " loss " << format_double(r.loss.total) << " residual "
            << format_double(r.loss.residual) << '\n';
      }
    };
    log << "train: " << model.parameter_count() << " parameters, epochs " << state.epoch << ".."
        << train_config.epochs << '\n';
    train(model, bm.problem, train_config, state, on_epoch);
    csv.flush();
    if (!csv) {
      throw InputError("failed to write '" + csv_path + "'");
    }
    save(model, state);
  });
}

void cmd_refine(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  const std::string& path = checkpoint_path(config);
  const Checkpoint c = load_checkpoint(config, path);
  const double b = largest_half_width(c.domain);
  RefinementResult result;
  with_checkpoint_model(c, [&](const auto& model) {
    const std::vector<double>& center = c.domain.center;
    result = refine_domain([&](double r) { return model.box_integral(center, r); }, config.candidates,
                           config.threshold, b);
  });
  log << "refine: radius,integral\n";
  for (const RefinementEntry& e : result.log) {
    log << format_double(e.radius) << ',' << format_double(e.integral) << '\n';
  }
  if (result.fallback) {
    log << "refine: warning: no candidate exceeds " << format_double(config.threshold) << ", keeping B = "
        << format_double(b) << '\n';
  }
  log << "refine: r* = " << format_double(result.radius) << '\n';
  DomainFile file;
  file.domain = Domain::isotropic(c.domain.center, result.radius);
  file.provenance.method = "refine";
  file.provenance.benchmark = c.benchmark;
  file.provenance.seed = c.seed;
  file.provenance.threshold = config.threshold;
  write_domain_file(out, file);
}

void cmd_eval(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  const Checkpoint c = load_checkpoint(config, checkpoint_path(config));
  const Benchmark bm = make_benchmark(parse_benchmark(c.benchmark));
  Domain box = c.domain;
  if (!config.box_center.empty()) box.center = config.box_center;
  if (config.box_half_width.size() == 1) {
    box.half_width.assign(box.dim(), config.box_half_width[0]);
  } else if (!config.box_half_width.empty()) {
    box.half_width = config.box_half_width;
  }
  if (box.center.size() != static_cast<std::size_t>(bm.dim) || box.half_width.size() != box.center.size()) {
    throw ConfigError("eval: box_center and box_half_width must match the dimension " + std::to_string(bm.dim));
  }
  const double z = exact_normalizer_whole_space(bm);
  const DensityFn exact = [&](Point x) { return exact_density(bm, x, z); };
  EvalReport report;
  std::size_t parameters = 0;
  with_checkpoint_model(c, [&](const auto& model) {
    report = evaluate(exact, density_of(model), box, config.samples, config.thresholds, config.seed);
    parameters = model.parameter_count();
  });
  std::ofstream file = open_output(out);
  write_report_csv(file, config.report_name.empty() ? model_label(c) : config.report_name, parameters, report);
  for (const ErrorRow& row : report.rows) {
    log << "eval: eps " << format_double(row.threshold) << " n " << row.count << " error "
        << (row.defined() ? format_double(row.error) : "undefined") << '\n';
  }
  log << "eval: l2 (rms) " << format_double(report.l2_difference) << '\n';
}

void cmd_export_slice(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  const Checkpoint c = load_checkpoint(config, checkpoint_path(config));
  const std::vector<double> fixed = config.slice_fixed.empty() ? c.domain.center : config.slice_fixed;
  SliceGrid grid;
  with_checkpoint_model(c, [&](const auto& model) {
    grid = slice_grid(density_of(model), c.domain, fixed, config.slice_a, config.slice_b, config.resolution);
  });
  std::ofstream file = open_output(out);
  write_slice_csv(file, grid);
  log << "export-slice: " << grid.values.size() << " values\n";
}

void cmd_integrate_table(const RunConfig& config, const std::string& out, std::ostream& log) {
  config.validate();
  const Checkpoint c = load_checkpoint(config, checkpoint_path(config));
  std::vector<double> radii = config.radii;
  if (radii.empty()) {
    radii = config.candidates;
    radii.push_back(largest_half_width(c.domain));
  }
  std::vector<IntegralEntry> table;
  with_checkpoint_model(c, [&](const auto& model) { table = integral_table(model, c.domain.center, radii); });
  std::ofstream file = open_output(out);
  write_integral_csv(file, table);
  for (const IntegralEntry& e : table) {
    log << "integrate-table: " << format_double(e.radius) << ' ' << format_double(e.integral) << '\n';
  }
}

}  // namespace tnfp
