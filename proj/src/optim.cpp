#include "tnfp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tnfp/errors.hpp"

namespace tnfp {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "lion") return OptimizerKind::Lion;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "two_step" || name == "two-step") return OptimizerKind::TwoStep;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Lion: return "lion";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::TwoStep: return "two_step";
  }
  return "unknown";
}

void OptimizerState::resize(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  steps.assign(n, 0);
  step = 0;
}

namespace {

void check_shapes(std::size_t params, std::size_t grads, const OptimizerState& state, std::size_t mask) {
  if (params != grads || state.m.size() != params || (mask != 0 && mask != params)) {
    throw ConfigError("optimizer: parameter, gradient, state and mask sizes differ");
  }
}

bool active(std::span<const std::uint8_t> mask, std::size_t k) { return mask.empty() || mask[k] != 0; }

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

template <class Real>
void lion_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
               const OptimizerConfig& config, std::span<const std::uint8_t> mask) {
  check_shapes(params.size(), grads.size(), state, mask.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!active(mask, k)) {
      continue;
    }
    const double g = grads[k];
    const double c = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
    const double theta = params[k];
    params[k] = static_cast<Real>(theta - lr * (sign(c) + config.weight_decay * theta));
    state.m[k] = config.beta2 * state.m[k] + (1.0 - config.beta2) * g;
  }
  ++state.step;
}

template <class Real>
void adam_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
               const OptimizerConfig& config, std::span<const std::uint8_t> mask) {
  check_shapes(params.size(), grads.size(), state, mask.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!active(mask, k)) {
      continue;
    }
    const double g = grads[k];
    const std::int64_t t = ++state.steps[k];
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
    state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[k] / (1.0 - std::pow(config.beta1, static_cast<double>(t)));
    const double v_hat = state.v[k] / (1.0 - std::pow(config.beta2, static_cast<double>(t)));
    const double theta = params[k];
    params[k] = static_cast<Real>(theta - lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * theta));
  }
  ++state.step;
}

template <class Real>
void sgd_step(std::span<Real> params, std::span<const Real> grads, OptimizerState& state, double lr,
              std::span<const std::uint8_t> mask) {
  check_shapes(params.size(), grads.size(), state, mask.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (active(mask, k)) {
      params[k] = static_cast<Real>(params[k] - lr * grads[k]);
    }
  }
  ++state.step;
}

double poly_lr(const LrSchedule& schedule, long long t) {
  if (schedule.total_steps <= 0 || t >= schedule.total_steps) {
    return schedule.lr_end;
  }
  const double frac = 1.0 - static_cast<double>(std::max(t, 0LL)) / static_cast<double>(schedule.total_steps);
  return schedule.lr_end + (schedule.lr_start - schedule.lr_end) * std::pow(frac, schedule.power);
}

ParameterGroup two_step_schedule(long long epoch, long long phase_length) {
  if (phase_length <= 0) {
    throw ConfigError("two_step_schedule: phase length must be positive");
  }
  return (epoch / phase_length) % 2 == 0 ? ParameterGroup::Combination : ParameterGroup::Base;
}

double two_step_lr(const LrSchedule& schedule, long long epoch, long long phase_length) {
  LrSchedule phase = schedule;
  phase.total_steps = phase_length;
  return poly_lr(phase, epoch % phase_length);
}

template void lion_step<float>(std::span<float>, std::span<const float>, OptimizerState&, double,
                               const OptimizerConfig&, std::span<const std::uint8_t>);
template void lion_step<double>(std::span<double>, std::span<const double>, OptimizerState&, double,
                                const OptimizerConfig&, std::span<const std::uint8_t>);
template void adam_step<float>(std::span<float>, std::span<const float>, OptimizerState&, double,
                               const OptimizerConfig&, std::span<const std::uint8_t>);
template void adam_step<double>(std::span<double>, std::span<const double>, OptimizerState&, double,
                                const OptimizerConfig&, std::span<const std::uint8_t>);
template void sgd_step<float>(std::span<float>, std::span<const float>, OptimizerState&, double,
                              std::span<const std::uint8_t>);
template void sgd_step<double>(std::span<double>, std::span<const double>, OptimizerState&, double,
                               std::span<const std::uint8_t>);

}  // namespace tnfp
