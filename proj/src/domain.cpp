#include "tnfp/domain.hpp"

#include <cmath>
#include <string>

#include "tnfp/errors.hpp"

namespace tnfp {

Domain Domain::isotropic(std::vector<double> center, double half_width) {
  Domain domain;
  domain.half_width.assign(center.size(), half_width);
  domain.center = std::move(center);
  return domain;
}

Domain Domain::cube(int dim, double half_width) {
  return isotropic(std::vector<double>(static_cast<std::size_t>(dim), 0.0), half_width);
}

bool Domain::contains(std::span<const double> x) const {
  for (int j = 0; j < dim(); ++j) {
    if (x[j] < lower(j) || x[j] > upper(j)) {
      return false;
    }
  }
  return true;
}

double Domain::volume() const {
  double volume = 1.0;
  for (const double r : half_width) {
    volume *= 2.0 * r;
  }
  return volume;
}

void Domain::validate() const {
  if (center.empty() || center.size() != half_width.size()) {
    throw InputError("domain: center and half-width must be non-empty and of equal length");
  }
  for (std::size_t j = 0; j < half_width.size(); ++j) {
    if (!(half_width[j] > 0.0) || !std::isfinite(half_width[j]) || !std::isfinite(center[j])) {
      throw InputError("domain: degenerate half-width " + std::to_string(half_width[j]) + " in dimension " +
                       std::to_string(j));
    }
  }
}

}  // namespace tnfp
