#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/problem.hpp"

namespace tnfp {

/// Density callable; must be safe to call concurrently.
using DensityFn = std::function<double(Point)>;

struct ErrorRow {
  double threshold = 0.0;  // epsilon
  long long count = 0;     // points with p* > epsilon
  double error = 0.0;      // mean |p* - p_N| / p*, NaN when count == 0
  bool defined() const noexcept { return count > 0; }
};

struct IntegralEntry {
  double radius = 0.0;
  double integral = 0.0;
};

struct EvalReport {
  std::vector<ErrorRow> rows;
  double l2_difference = 0.0;  // RMS of p* - p_N over the sample
  std::vector<IntegralEntry> integral_table;
  std::uint64_t seed = 0;
  Domain box;                  // Gamma
  long long samples = 0;
};

/// Uniform points on `box`, row-major, drawn from the "eval" stream of `seed`.
std::vector<double> eval_sample(const Domain& box, long long samples, std::uint64_t seed);

/// Evaluates `f` at every row of `points` (parallel, order-preserving).
std::vector<double> evaluate_all(const DensityFn& f, std::span<const double> points, int dim);

/// Mean relative deviation over the points with exact > epsilon, for each
/// epsilon, sharing one sample.
std::vector<ErrorRow> relative_error(std::span<const double> exact, std::span<const double> model,
                                     std::span<const double> thresholds);
std::vector<ErrorRow> relative_error(const DensityFn& exact, const DensityFn& model, const Domain& box,
                                     long long samples, std::span<const double> thresholds, std::uint64_t seed);

/// Root-mean-square of exact - model.
double l2_difference(std::span<const double> exact, std::span<const double> model);
double l2_difference(const DensityFn& exact, const DensityFn& model, const Domain& box, long long samples,
                     std::uint64_t seed);

/// Relative errors and RMS difference from a single shared sample.
EvalReport evaluate(const DensityFn& exact, const DensityFn& model, const Domain& box, long long samples,
                    std::span<const double> thresholds, std::uint64_t seed);

/// (r, integral of p_N over the cube of half-edge r about `center`) for each radius.
template <class Model>
std::vector<IntegralEntry> integral_table(const Model& model, std::span<const double> center,
                                          std::span<const double> radii) {
  std::vector<IntegralEntry> table;
  table.reserve(radii.size());
  for (const double r : radii) table.push_back({r, r > 0.0 ? model.box_integral(center, r) : 0.0});
  return table;
}

struct SliceGrid {
  int axis_a = 0;
  int axis_b = 1;
  std::vector<double> xa;      // resolution values
  std::vector<double> xb;
  std::vector<double> values;  // row-major over (xa, xb)
};

/// p_N on a regular grid over coordinates (a, b) spanning the domain, other
/// coordinates taken from `fixed`. Resolution 1 evaluates at `fixed` only.
SliceGrid slice_grid(const DensityFn& model, const Domain& domain, std::span<const double> fixed, int axis_a,
                     int axis_b, int resolution);

/// CSV writers. Numbers are printed with round-trip precision.
void write_slice_csv(std::ostream& out, const SliceGrid& grid);
void write_report_csv(std::ostream& out, const std::string& model_name, std::size_t parameter_count,
                      const EvalReport& report);
void write_integral_csv(std::ostream& out, std::span<const IntegralEntry> table);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace tnfp
