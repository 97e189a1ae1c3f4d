#include "tnfp/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include "tnfp/errors.hpp"
#include "tnfp/rng.hpp"

namespace tnfp {

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::vector<double> eval_sample(const Domain& box, long long samples, std::uint64_t seed) {
  box.validate();
  if (samples < 1) {
    throw ConfigError("eval: sample count must be positive");
  }
  const int d = box.dim();
  Philox rng(seed, stream_id("eval"));
  std::vector<double> points(static_cast<std::size_t>(samples) * d);
  for (long long k = 0; k < samples; ++k) {
    for (int j = 0; j < d; ++j) {
      points[static_cast<std::size_t>(k) * d + j] = rng.uniform(box.lower(j), box.upper(j));
    }
  }
  return points;
}

std::vector<double> evaluate_all(const DensityFn& f, std::span<const double> points, int dim) {
  const long long n = static_cast<long long>(points.size()) / dim;
  std::vector<double> values(n);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < n; ++k) {
    values[k] = f(points.subspan(static_cast<std::size_t>(k) * dim, dim));
  }
  return values;
}

std::vector<ErrorRow> relative_error(std::span<const double> exact, std::span<const double> model,
                                     std::span<const double> thresholds) {
  std::vector<ErrorRow> rows;
  for (const double eps : thresholds) {
    if (!(eps > 0.0)) {
      throw ConfigError("eval: thresholds must be positive");
    }
    ErrorRow row{eps, 0, 0.0};
    double sum = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      if (exact[k] > eps) {
        sum += std::abs(exact[k] - model[k]) / exact[k];
        ++row.count;
      }
    }
    row.error = row.count > 0 ? sum / static_cast<double>(row.count) : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

double l2_difference(std::span<const double> exact, std::span<const double> model) {
  if (exact.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double diff = exact[k] - model[k];
    sum += diff * diff;
  }
  return std::sqrt(sum / static_cast<double>(exact.size()));
}

EvalReport evaluate(const DensityFn& exact, const DensityFn& model, const Domain& box, long long samples,
                    std::span<const double> thresholds, std::uint64_t seed) {
  const std::vector<double> points = eval_sample(box, samples, seed);
  const std::vector<double> p_exact = evaluate_all(exact, points, box.dim());
  const std::vector<double> p_model = evaluate_all(model, points, box.dim());
  EvalReport report;
  report.rows = relative_error(p_exact, p_model, thresholds);
  report.l2_difference = l2_difference(p_exact, p_model);
  report.seed = seed;
  report.box = box;
  report.samples = samples;
  return report;
}

std::vector<ErrorRow> relative_error(const DensityFn& exact, const DensityFn& model, const Domain& box,
                                     long long samples, std::span<const double> thresholds, std::uint64_t seed) {
  return evaluate(exact, model, box, samples, thresholds, seed).rows;
}

double l2_difference(const DensityFn& exact, const DensityFn& model, const Domain& box, long long samples,
                     std::uint64_t seed) {
  return evaluate(exact, model, box, samples, {}, seed).l2_difference;
}

SliceGrid slice_grid(const DensityFn& model, const Domain& domain, std::span<const double> fixed, int axis_a,
                     int axis_b, int resolution) {
  const int d = domain.dim();
  if (axis_a == axis_b || axis_a < 0 || axis_b < 0 || axis_a >= d || axis_b >= d) {
    throw ConfigError("slice: the free coordinates must be two distinct indices below the dimension");
  }
  if (resolution < 1) {
    throw ConfigError("slice: resolution must be positive");
  }
  if (static_cast<int>(fixed.size()) != d) {
    throw ConfigError("slice: fixed point must have one entry per dimension");
  }
  SliceGrid grid;
  grid.axis_a = axis_a;
  grid.axis_b = axis_b;
  auto axis = [&](int j) {
    std::vector<double> values(resolution);
    if (resolution == 1) {
      values[0] = fixed[j];
      return values;
    }
    const double lo = domain.lower(j);
    const double step = 2.0 * domain.half_width[j] / (resolution - 1);
    for (int k = 0; k < resolution; ++k) values[k] = k + 1 == resolution ? domain.upper(j) : lo + k * step;
    return values;
  };
  grid.xa = axis(axis_a);
  grid.xb = axis(axis_b);
  std::vector<double> points(static_cast<std::size_t>(resolution) * resolution * d);
  for (int u = 0; u < resolution; ++u) {
    for (int v = 0; v < resolution; ++v) {
      double* x = points.data() + (static_cast<std::size_t>(u) * resolution + v) * d;
      std::copy(fixed.begin(), fixed.end(), x);
      x[axis_a] = grid.xa[u];
      x[axis_b] = grid.xb[v];
    }
  }
  grid.values = evaluate_all(model, points, d);
  return grid;
}

void write_slice_csv(std::ostream& out, const SliceGrid& grid) {
  out << "x_a,x_b,value\n";
  const std::size_t n = grid.xb.size();
  for (std::size_t u = 0; u < grid.xa.size(); ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      out << format_double(grid.xa[u]) << ',' << format_double(grid.xb[v]) << ','
          << format_double(grid.values[u * n + v]) << '\n';
    }
  }
}

void write_report_csv(std::ostream& out, const std::string& model_name, std::size_t parameter_count,
                      const EvalReport& report) {
  out << "model,params";
  for (const ErrorRow& row : report.rows) out << ",error_eps_" << format_double(row.threshold);
  for (const ErrorRow& row : report.rows) out << ",count_eps_" << format_double(row.threshold);
  out << ",l2_rms,samples,seed\n";
  out << model_name << ',' << parameter_count;
  for (const ErrorRow& row : report.rows) out << ',' << format_double(row.error);
  for (const ErrorRow& row : report.rows) out << ',' << row.count;
  out << ',' << format_double(report.l2_difference) << ',' << report.samples << ',' << report.seed << '\n';
}

void write_integral_csv(std::ostream& out, std::span<const IntegralEntry> table) {
  out << "radius,integral\n";
  for (const IntegralEntry& e : table) out << format_double(e.radius) << ',' << format_double(e.integral) << '\n';
}

}  // namespace tnfp
