#include "tnfp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tnfp/errors.hpp"
#include "tnfp/rng.hpp"

namespace tnfp {

void SdeSimConfig::validate() const {
  if (!(step_size > 0.0)) {
    throw ConfigError("sde: step_size must be positive");
  }
  if (burnin_steps <= 0 || burnin_steps >= terminal_steps) {
    throw ConfigError("sde: require 0 < burnin_steps < terminal_steps");
  }
  if (!(margin > 1.0)) {
    throw ConfigError("sde: margin factor C must exceed 1");
  }
  if (num_trajectories < 1) {
    throw ConfigError("sde: need at least one trajectory");
  }
}

namespace {

template <class Visit>
void run_trajectory(const Problem& problem, const MatrixField& sigma, std::span<const double> start,
                    const SdeSimConfig& config, int trajectory, Visit&& visit) {
  const int d = problem.dim;
  Philox rng(config.seed, stream_id("sde", static_cast<std::uint64_t>(trajectory)));
  std::vector<double> z(start.begin(), start.end());
  std::vector<double> drift(d);
  std::vector<double> root(static_cast<std::size_t>(d) * d);
  std::vector<double> noise(d);
  const double scale = std::sqrt(config.step_size);
  for (long long t = 0; t < config.terminal_steps; ++t) {
    problem.drift(z, drift);
    sigma(z, root);
    for (int j = 0; j < d; ++j) {
      noise[j] = scale * rng.normal();
    }
    for (int i = 0; i < d; ++i) {
      double step = drift[i] * config.step_size;
      for (int j = 0; j < d; ++j) {
        step += root[i * d + j] * noise[j];
      }
      z[i] += step;
      if (!std::isfinite(z[i])) {
        throw DivergenceError("euler_maruyama: non-finite state in trajectory " + std::to_string(trajectory), t + 1);
      }
    }
    if (t >= config.burnin_steps) {
      visit(t + 1, std::span<const double>(z));
    }
  }
}

void check_initial(const Problem& problem, const std::vector<std::vector<double>>& initial,
                   const SdeSimConfig& config) {
  config.validate();
  if (static_cast<int>(initial.size()) != config.num_trajectories) {
    throw ConfigError("euler_maruyama: need one initial point per trajectory");
  }
  for (const auto& z0 : initial) {
    if (static_cast<int>(z0.size()) != problem.dim) {
      throw ConfigError("euler_maruyama: initial point dimension mismatch");
    }
  }
}

}  // namespace

void euler_maruyama(const Problem& problem, const MatrixField& sigma, const std::vector<std::vector<double>>& initial,
                    const SdeSimConfig& config, const TrajectorySink& sink) {
  check_initial(problem, initial, config);
  for (int k = 0; k < config.num_trajectories; ++k) {
    run_trajectory(problem, sigma, initial[k], config, k,
                   [&](long long step, std::span<const double> z) { sink(k, step, z); });
  }
}

std::vector<std::vector<double>> euler_maruyama(const Problem& problem, const MatrixField& sigma,
                                                const std::vector<std::vector<double>>& initial,
                                                const SdeSimConfig& config) {
  std::vector<std::vector<double>> points;
  points.reserve(static_cast<std::size_t>(config.num_trajectories) *
                 static_cast<std::size_t>(std::max(0LL, config.terminal_steps - config.burnin_steps)));
  euler_maruyama(problem, sigma, initial, config,
                 [&](int, long long, std::span<const double> z) { points.emplace_back(z.begin(), z.end()); });
  return points;
}

SupportAccumulator::SupportAccumulator(int dim)
    : sum_(dim, 0.0),
      min_(dim, std::numeric_limits<double>::infinity()),
      max_(dim, -std::numeric_limits<double>::infinity()) {}

void SupportAccumulator::add(std::span<const double> z) {
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    sum_[j] += z[j];
    min_[j] = std::min(min_[j], z[j]);
    max_[j] = std::max(max_[j], z[j]);
  }
  ++count_;
}

void SupportAccumulator::merge(const SupportAccumulator& other) {
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    sum_[j] += other.sum_[j];
    min_[j] = std::min(min_[j], other.min_[j]);
    max_[j] = std::max(max_[j], other.max_[j]);
  }
  count_ += other.count_;
}

std::vector<double> SupportAccumulator::mean() const {
  std::vector<double> mean(sum_.size());
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    mean[j] = sum_[j] / static_cast<double>(count_);
  }
  return mean;
}

std::vector<double> SupportAccumulator::max_deviation(std::span<const double> center) const {
  std::vector<double> deviation(sum_.size());
  for (std::size_t j = 0; j < sum_.size(); ++j) {
    deviation[j] = std::max(center[j] - min_[j], max_[j] - center[j]);
  }
  return deviation;
}

namespace {

SupportAccumulator accumulate(std::span<const std::vector<double>> points) {
  if (points.empty()) {
    throw InputError("estimate_domain: empty point set");
  }
  SupportAccumulator acc(static_cast<int>(points.front().size()));
  for (const auto& z : points) {
    acc.add(z);
  }
  return acc;
}

}  // namespace

SupportEstimate estimate_domain(const SupportAccumulator& points, double margin) {
  if (points.count() == 0) {
    throw InputError("estimate_domain: empty point set");
  }
  SupportEstimate estimate;
  estimate.center = points.mean();
  const std::vector<double> deviation = points.max_deviation(estimate.center);
  estimate.half_width = margin * *std::max_element(deviation.begin(), deviation.end());
  if (!(estimate.half_width > 0.0)) {
    throw InputError("estimate_domain: degenerate domain, all points coincide (B = 0)");
  }
  estimate.domain = Domain::isotropic(estimate.center, estimate.half_width);
  return estimate;
}

SupportEstimate estimate_domain(std::span<const std::vector<double>> points, double margin) {
  return estimate_domain(accumulate(points), margin);
}

Domain estimate_domain_anisotropic(const SupportAccumulator& points) {
  if (points.count() == 0) {
    throw InputError("estimate_domain_anisotropic: empty point set");
  }
  Domain domain;
  domain.center = points.mean();
  domain.half_width = points.max_deviation(domain.center);
  for (std::size_t j = 0; j < domain.half_width.size(); ++j) {
    if (!(domain.half_width[j] > 0.0)) {
      throw InputError("estimate_domain_anisotropic: degenerate extent in dimension " + std::to_string(j));
    }
  }
  return domain;
}

Domain estimate_domain_anisotropic(std::span<const std::vector<double>> points) {
  return estimate_domain_anisotropic(accumulate(points));
}

SupportAccumulator simulate_support(const Problem& problem, const MatrixField& sigma,
                                    const std::vector<std::vector<double>>& initial, const SdeSimConfig& config) {
  check_initial(problem, initial, config);
  const int q = config.num_trajectories;
  std::vector<SupportAccumulator> partial(q, SupportAccumulator(problem.dim));
  std::vector<std::string> errors(q);
  std::vector<long long> error_steps(q, -1);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < q; ++k) {
    try {
      run_trajectory(problem, sigma, initial[k], config, k,
                     [&](long long, std::span<const double> z) { partial[k].add(z); });
    } catch (const DivergenceError& e) {
      errors[k] = e.what();
      error_steps[k] = e.step();
    }
  }
  SupportAccumulator total(problem.dim);
  for (int k = 0; k < q; ++k) {
    if (error_steps[k] >= 0) {
      throw DivergenceError("simulate_support: trajectory " + std::to_string(k) + " diverged", error_steps[k]);
    }
    total.merge(partial[k]);
  }
  return total;
}

RefinementResult refine_domain(const std::function<double(double)>& integral, std::span<const double> candidates,
                               double threshold, double initial_half_width) {
  if (!std::is_sorted(candidates.begin(), candidates.end())) {
    throw ConfigError("refine_domain: candidate radii must be ascending");
  }
  RefinementResult result{initial_half_width, true, {}};
  for (const double r : candidates) {
    const double value = integral(r);
    result.log.push_back({r, value});
    if (result.fallback && value > threshold) {
      result.radius = r;
      result.fallback = false;
    }
  }
  return result;
}

}  // namespace tnfp
