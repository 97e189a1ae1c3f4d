#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tnfp/benchmarks.hpp"
#include "tnfp/geometry.hpp"
#include "tnfp/io.hpp"
#include "tnfp/training.hpp"

namespace tnfp {

/// Settings of every pipeline stage. Read from an INI file with optional
/// global keys (seed, precision, threads) and the sections [sde], [domain],
/// [model], [train], [eval]; unknown sections or keys are errors. Values not
/// given default to the published settings of the chosen benchmark.
struct RunConfig {
  // global
  std::uint64_t seed = 0;
  Precision precision = Precision::Single;
  int threads = 0;  // 0: OpenMP default

  // [sde]
  std::string benchmark = "ring2d";
  SdeSimConfig sde;
  bool anisotropic = false;

  // [domain]
  std::string domain_file;
  std::vector<double> candidates;
  double threshold = 0.999;

  // [model]
  ModelFamily family = ModelFamily::Trbfn;
  int rank = 200;
  std::vector<RbfKind> kinds{RbfKind::Wendland, RbfKind::Wendland, RbfKind::Wendland};
  std::vector<int> widths{1, 8, 8, 1};
  int quad_panels = 16;
  int quad_points = 16;
  std::string checkpoint;

  // [train]
  TrainConfig train;
  long long checkpoint_every = 0;  // 0: only at the end
  std::string loss_csv;            // empty: <out>.loss.csv
  bool resume = false;

  // [eval]
  std::vector<double> box_center;      // empty: the model domain
  std::vector<double> box_half_width;  // one value (isotropic) or one per dimension
  long long samples = 100000;
  std::vector<double> thresholds{1e-2, 5e-2, 1e-1};
  std::vector<double> radii;           // empty: candidates followed by the domain half width
  int slice_a = 0;
  int slice_b = 1;
  std::vector<double> slice_fixed;     // empty: the domain center
  int resolution = 101;
  std::string report_name;             // model label in the report CSV

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// Published defaults for `benchmark`, before any file overrides.
RunConfig default_config(const std::string& benchmark);

/// Parses INI text. The benchmark named in [sde] selects the defaults.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Writes every key, so parse_config(write_config(c)) == c.
void write_config(std::ostream& out, const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace tnfp
