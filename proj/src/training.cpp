#include "tnfp/training.hpp"

namespace tnfp {

std::vector<double> sample_uniform(const Domain& domain, int count, Philox& rng) {
  if (count < 1) {
    throw ConfigError("sample_uniform: batch size must be positive");
  }
  const int d = domain.dim();
  std::vector<double> points(static_cast<std::size_t>(count) * d);
  for (int b = 0; b < count; ++b) {
    for (int j = 0; j < d; ++j) {
      points[static_cast<std::size_t>(b) * d + j] = rng.uniform(domain.lower(j), domain.upper(j));
    }
  }
  return points;
}

void TrainConfig::validate() const {
  if (epochs < 0) {
    throw ConfigError("train: epochs must be non-negative");
  }
  if (batch_size < 1) {
    throw ConfigError("train: batch_size must be positive");
  }
  if (!(constraint_weight >= 0.0) || !(boundary_weight >= 0.0)) {
    throw ConfigError("train: penalty weights must be non-negative");
  }
  if (!(schedule.lr_start >= 0.0) || !(schedule.lr_end >= 0.0) || !(schedule.power > 0.0)) {
    throw ConfigError("train: learning rates must be non-negative and the schedule power positive");
  }
  if (phase_length < 1) {
    throw ConfigError("train: phase_length must be positive");
  }
  if (chunk_size < 1) {
    throw ConfigError("train: chunk_size must be positive");
  }
}

}  // namespace tnfp
