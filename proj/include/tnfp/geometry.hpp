#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/problem.hpp"

namespace tnfp {

struct SdeSimConfig {
  double step_size = 0.001;
  long long burnin_steps = 1'000'000;
  long long terminal_steps = 1'500'000;
  int num_trajectories = 10;
  double margin = 1.1;  // C
  std::uint64_t seed = 0;

  /// Throws ConfigError unless 0 < burnin < terminal, h > 0, C > 1, Q >= 1.
  void validate() const;
};

/// Visitor for retained trajectory points: (trajectory index, step, state).
using TrajectorySink = std::function<void(int, long long, std::span<const double>)>;

/// Euler-Maruyama  z <- z + f(z) h + sigma(z) dW,  dW ~ N(0, h I).
///
/// Trajectory k draws its increments from Philox stream ("sde", k) of
/// config.seed, so results do not depend on execution order. Points from
/// steps burnin+1 .. terminal are passed to `sink` in trajectory order.
/// Throws DivergenceError on a non-finite state.
void euler_maruyama(const Problem& problem, const MatrixField& sigma, const std::vector<std::vector<double>>& initial,
                    const SdeSimConfig& config, const TrajectorySink& sink);

/// Collects every retained point; count = Q (terminal - burnin).
std::vector<std::vector<double>> euler_maruyama(const Problem& problem, const MatrixField& sigma,
                                                const std::vector<std::vector<double>>& initial,
                                                const SdeSimConfig& config);

/// Running mean and per-coordinate extrema of a point set.
class SupportAccumulator {
 public:
  explicit SupportAccumulator(int dim);
  void add(std::span<const double> z);
  /// Folds `other` in after this accumulator's points.
  void merge(const SupportAccumulator& other);

  long long count() const noexcept { return count_; }
  std::vector<double> mean() const;
  /// max_i |center_j - z_ij| for each coordinate j.
  std::vector<double> max_deviation(std::span<const double> center) const;

 private:
  long long count_ = 0;
  std::vector<double> sum_;
  std::vector<double> min_;
  std::vector<double> max_;
};

struct SupportEstimate {
  std::vector<double> center;  // O
  double half_width = 0.0;     // B
  Domain domain;
};

/// O = mean of the points, B = C max_j max_i |O_j - z_ij|; every half width set to B.
/// Throws InputError for an empty set or B = 0.
SupportEstimate estimate_domain(const SupportAccumulator& points, double margin);
SupportEstimate estimate_domain(std::span<const std::vector<double>> points, double margin);

/// Per-coordinate r_j = max_i |O_j - z_ij| (no margin factor).
Domain estimate_domain_anisotropic(const SupportAccumulator& points);
Domain estimate_domain_anisotropic(std::span<const std::vector<double>> points);

/// Simulates Q trajectories in parallel (each on its own stream) and folds
/// their statistics in trajectory order.
SupportAccumulator simulate_support(const Problem& problem, const MatrixField& sigma,
                                    const std::vector<std::vector<double>>& initial, const SdeSimConfig& config);

/// One row of a refinement log.
struct RefinementEntry {
  double radius;
  double integral;
};

struct RefinementResult {
  double radius;  // r*
  bool fallback;  // no candidate exceeded the threshold; r* = B
  std::vector<RefinementEntry> log;
};

/// Smallest candidate r (candidates ascending) with integral(r) > threshold;
/// B when none qualifies.
RefinementResult refine_domain(const std::function<double(double)>& integral, std::span<const double> candidates,
                               double threshold, double initial_half_width);

}  // namespace tnfp
