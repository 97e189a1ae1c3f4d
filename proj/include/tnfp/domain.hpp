#pragma once

#include <span>
#include <vector>

namespace tnfp {

/// Axis-aligned box  prod_j [center_j - half_width_j, center_j + half_width_j].
struct Domain {
  std::vector<double> center;
  std::vector<double> half_width;

  static Domain isotropic(std::vector<double> center, double half_width);
  static Domain cube(int dim, double half_width);

  int dim() const noexcept { return static_cast<int>(center.size()); }
  double lower(int j) const { return center[j] - half_width[j]; }
  double upper(int j) const { return center[j] + half_width[j]; }
  bool contains(std::span<const double> x) const;
  double volume() const;
  /// Throws InputError unless every half width is finite and positive.
  void validate() const;

  bool operator==(const Domain&) const = default;
};

}  // namespace tnfp
