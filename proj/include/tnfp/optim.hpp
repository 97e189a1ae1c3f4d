#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tnfp {

enum class OptimizerKind { Lion, Adam, Sgd, TwoStep };

/// "lion", "adam", "sgd", "two_step" (also "two-step"). Throws ConfigError.
OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Lion;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
  double eps = 1e-8;
};

/// Moment buffers shaped like the parameter vector. ADAM keeps a per-parameter
/// step count so a frozen group does not advance its bias correction.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::vector<std::int64_t> steps;
  std::int64_t step = 0;

  void resize(std::size_t n);
};

/// LION:  c = b1 m + (1 - b1) g;  theta -= lr (sign(c) + wd theta);  m = b2 m + (1 - b2) g.
/// Entries with mask[k] == 0 are left untouched, buffers included. An empty mask updates everything.
template <class Real>
void lion_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
               const OptimizerConfig& config, std::span<const std::uint8_t> mask = {});

/// ADAM with bias correction.
template <class Real>
void adam_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
               const OptimizerConfig& config, std::span<const std::uint8_t> mask = {});

/// theta -= lr g.
template <class Real>
void sgd_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
              std::span<const std::uint8_t> mask = {});

struct LrSchedule {
  double lr_start = 1e-3;
  double lr_end = 8e-6;
  long long total_steps = 100000;
  double power = 1.0;
};

/// lr_end + (lr_start - lr_end) (1 - t / total)^power; t outside [0, total] clamps.
double poly_lr(const LrSchedule& schedule, long long t);

enum class ParameterGroup : std::uint8_t { Combination = 0, Base = 1 };

/// Alternating phases of `phase_length` epochs, combination parameters first.
ParameterGroup two_step_schedule(long long epoch, long long phase_length = 100);

/// Learning rate for the two-step method: the polynomial schedule restarted
/// at the beginning of every phase, spanning one phase.
double two_step_lr(const LrSchedule& schedule, long long epoch, long long phase_length = 100);

}  // namespace tnfp
