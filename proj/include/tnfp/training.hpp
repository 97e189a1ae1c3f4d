#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/errors.hpp"
#include "tnfp/optim.hpp"
#include "tnfp/problem.hpp"
#include "tnfp/rng.hpp"

namespace tnfp {

/// M i.i.d. uniform points on the box, row-major (M x d).
std::vector<double> sample_uniform(const Domain& domain, int count, Philox& rng);

struct LossBreakdown {
  double total = 0.0;
  double residual = 0.0;    // sum over the batch of (L p)^2
  double constraint = 0.0;  // unweighted hinge sum
  double boundary = 0.0;    // unweighted boundary sum
};

struct TrainConfig {
  long long epochs = 100000;
  int batch_size = 5000;
  double constraint_weight = 50000.0;  // W1
  double boundary_weight = 100.0;      // W2
  OptimizerConfig optimizer;
  LrSchedule schedule;                 // total_steps is set from epochs by train()
  long long phase_length = 100;        // two-step only
  std::uint64_t seed = 0;
  int chunk_size = 64;                 // points per deterministic reduction chunk

  /// Throws ConfigError on negative weights, empty batches and similar.
  void validate() const;
};

struct EpochRecord {
  long long epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  long long epoch = 0;  // next epoch to run
  OptimizerState optimizer;
};

/// Points per reduction chunk for a batch: a function of the batch size only,
/// so the summation tree is the same for every thread count.
inline int reduction_chunk(int batch_size, int chunk_size) {
  constexpr int kMaxChunks = 256;
  return std::max(chunk_size, (batch_size + kMaxChunks - 1) / kMaxChunks);
}

namespace detail {

template <class Model>
struct PointTerms {
  double residual = 0.0;
  double contraction = 0.0;
};

// Residual at one point and, when `grad` is non-empty, its contribution to the
// materialized gradient. Returns false on a non-finite residual.
template <class Model>
bool point_terms(const Model& model, const Problem& problem, std::span<const double> x,
                 typename Model::Workspace& ws, std::vector<typename Model::real_type>& jets,
                 std::span<typename Model::real_type> grad, PointTerms<Model>& out) {
  using Real = typename Model::real_type;
  const int d = model.dim();
  jets.resize(static_cast<std::size_t>(2) * (d + d * d) + 1);
  std::span<Real> g(jets.data(), d);
  std::span<Real> h(jets.data() + d, static_cast<std::size_t>(d) * d);
  Real p = Real(0);
  model.eval_derivs(x, p, g, h, ws);
  const OperatorCoefficients coeffs = problem.coefficients(x);
  double r = coeffs.zeroth * static_cast<double>(p);
  for (int a = 0; a < d; ++a) r += coeffs.first[a] * static_cast<double>(g[a]);
  for (int k = 0; k < d * d; ++k) r += coeffs.second[k] * static_cast<double>(h[k]);
  if (!std::isfinite(r)) {
    return false;
  }
  out.residual = r;
  out.contraction = 0.0;
  if (!grad.empty()) {
    std::span<Real> wg(jets.data() + d + d * d, d);
    std::span<Real> wh(jets.data() + 2 * d + d * d, static_cast<std::size_t>(d) * d);
    const double two_r = 2.0 * r;
    for (int a = 0; a < d; ++a) wg[a] = static_cast<Real>(two_r * coeffs.first[a]);
    for (int k = 0; k < d * d; ++k) wh[k] = static_cast<Real>(two_r * coeffs.second[k]);
    out.contraction = static_cast<double>(model.accumulate_point_gradient(
        x, static_cast<Real>(two_r * coeffs.zeroth), std::span<const Real>(wg), std::span<const Real>(wh), grad, ws));
  }
  return true;
}

inline std::string point_text(std::span<const double> x) {
  std::string text = "(";
  for (std::size_t j = 0; j < x.size(); ++j) {
    text += (j ? ", " : "") + std::to_string(x[j]);
  }
  return text + ")";
}

template <class Model>
LossBreakdown finish(const Model& model, double residual_sum, double contraction_sum, double w_constraint,
                     double w_boundary, std::span<typename Model::real_type> grad) {
  using Real = typename Model::real_type;
  const auto penalties = model.penalty_terms();
  LossBreakdown loss;
  loss.residual = residual_sum;
  loss.constraint = penalties.constraint;
  loss.boundary = penalties.boundary;
  loss.total = residual_sum + w_constraint * penalties.constraint + w_boundary * penalties.boundary;
  if (!grad.empty()) {
    model.accumulate_normalization_gradient(static_cast<Real>(-contraction_sum / model.normalization()), grad);
    model.accumulate_penalty_gradient(static_cast<Real>(w_constraint), static_cast<Real>(w_boundary), grad);
    model.finalize_gradient(grad);
  }
  return loss;
}

}  // namespace detail

/// Loss  sum_b (L p(x_b))^2 + W1 constraint + W2 boundary  on a batch (row-major
/// M x d). When `grad` is non-empty it receives the exact gradient with respect
/// to the raw parameters (overwritten).
///
/// Points are processed in fixed chunks, each with its own gradient buffer, and
/// chunk results are summed in chunk order, so the output does not depend on the
/// number of threads. Throws NumericalError naming the first non-finite point.
template <class Model>
LossBreakdown loss_and_gradient(const Model& model, const Problem& problem, std::span<const double> batch,
                                double w_constraint, double w_boundary, std::span<typename Model::real_type> grad,
                                int chunk_size = 64) {
  using Real = typename Model::real_type;
  const int d = model.dim();
  if (problem.dim != d || batch.size() % static_cast<std::size_t>(d) != 0) {
    throw ConfigError("loss: batch, model and problem dimensions disagree");
  }
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != model.parameter_count()) {
    throw ConfigError("loss: gradient buffer has the wrong size");
  }
  const long long count = static_cast<long long>(batch.size()) / d;
  const int chunk = reduction_chunk(static_cast<int>(count), chunk_size);
  const long long chunks = (count + chunk - 1) / chunk;
  const std::size_t n_params = model.parameter_count();
  std::vector<Real> partial(want_grad ? static_cast<std::size_t>(chunks) * n_params : 0, Real(0));
  std::vector<double> residual(chunks, 0.0);
  std::vector<double> contraction(chunks, 0.0);
  std::vector<long long> bad(chunks, -1);

#pragma omp parallel
  {
    typename Model::Workspace ws(model);
    std::vector<Real> jets;
    detail::PointTerms<Model> terms;
#pragma omp for schedule(dynamic, 1)
    for (long long c = 0; c < chunks; ++c) {
      std::span<Real> local = want_grad ? std::span<Real>(partial.data() + c * n_params, n_params) : std::span<Real>();
      const long long end = std::min(count, (c + 1) * chunk);
      for (long long b = c * chunk; b < end; ++b) {
        const std::span<const double> x = batch.subspan(static_cast<std::size_t>(b) * d, d);
        if (!detail::point_terms(model, problem, x, ws, jets, local, terms)) {
          bad[c] = b;
          break;
        }
        residual[c] += terms.residual * terms.residual;
        contraction[c] += terms.contraction;
      }
    }
  }

  double residual_sum = 0.0;
  double contraction_sum = 0.0;
  for (long long c = 0; c < chunks; ++c) {
    if (bad[c] >= 0) {
      throw NumericalError("loss: non-finite residual at batch point " + std::to_string(bad[c]) + " " +
                           detail::point_text(batch.subspan(static_cast<std::size_t>(bad[c]) * d, d)));
    }
    residual_sum += residual[c];
    contraction_sum += contraction[c];
  }
  if (want_grad) {
    std::vector<double> sum(n_params, 0.0);
    for (long long c = 0; c < chunks; ++c) {
      const Real* src = partial.data() + c * n_params;
      for (std::size_t k = 0; k < n_params; ++k) sum[k] += static_cast<double>(src[k]);
    }
    for (std::size_t k = 0; k < n_params; ++k) grad[k] = static_cast<Real>(sum[k]);
  }
  return detail::finish(model, residual_sum, contraction_sum, w_constraint, w_boundary, grad);
}

/// Single-threaded reference: one workspace, one gradient buffer, points in
/// batch order. Agrees with loss_and_gradient up to summation order.
template <class Model>
LossBreakdown loss_and_gradient_serial(const Model& model, const Problem& problem, std::span<const double> batch,
                                       double w_constraint, double w_boundary,
                                       std::span<typename Model::real_type> grad) {
  using Real = typename Model::real_type;
  const int d = model.dim();
  if (problem.dim != d || batch.size() % static_cast<std::size_t>(d) != 0) {
    throw ConfigError("loss: batch, model and problem dimensions disagree");
  }
  std::fill(grad.begin(), grad.end(), Real(0));
  typename Model::Workspace ws(model);
  std::vector<Real> jets;
  detail::PointTerms<Model> terms;
  double residual_sum = 0.0;
  double contraction_sum = 0.0;
  const std::size_t count = batch.size() / d;
  for (std::size_t b = 0; b < count; ++b) {
    const std::span<const double> x = batch.subspan(b * d, d);
    if (!detail::point_terms(model, problem, x, ws, jets, grad, terms)) {
      throw NumericalError("loss: non-finite residual at batch point " + std::to_string(b) + " " +
                           detail::point_text(x));
    }
    residual_sum += terms.residual * terms.residual;
    contraction_sum += terms.contraction;
  }
  return detail::finish(model, residual_sum, contraction_sum, w_constraint, w_boundary, grad);
}

/// Loss value only.
template <class Model>
LossBreakdown loss(const Model& model, const Problem& problem, std::span<const double> batch, double w_constraint,
                   double w_boundary) {
  return loss_and_gradient(model, problem, batch, w_constraint, w_boundary, std::span<typename Model::real_type>());
}

/// Called after every epoch with the record and the updated model.
template <class Model>
using EpochCallback = std::function<void(const EpochRecord&, const Model&, const TrainState&)>;

/// Algorithm 3: for each epoch sample a uniform batch from stream ("train", epoch),
/// take the exact loss gradient and apply one optimizer step. Starts at
/// state.epoch, so a restored state resumes the run exactly. Returns the
/// records of the epochs run by this call. Throws DivergenceError with the
/// epoch index when the loss or the parameters stop being finite.
template <class Model>
std::vector<EpochRecord> train(Model& model, const Problem& problem, const TrainConfig& config, TrainState& state,
                               const EpochCallback<Model>& on_epoch = {}) {
  using Real = typename Model::real_type;
  config.validate();
  const std::size_t n = model.parameter_count();
  if (state.optimizer.m.size() != n) {
    state.optimizer.resize(n);
  }
  if (!model.fresh()) {
    model.refresh();
  }
  LrSchedule schedule = config.schedule;
  schedule.total_steps = config.epochs;
  const std::vector<std::uint8_t> groups = model.parameter_groups();
  std::vector<std::uint8_t> mask(n, 1);
  std::vector<Real> grad(n);
  std::vector<EpochRecord> history;
  for (; state.epoch < config.epochs; ++state.epoch) {
    const long long epoch = state.epoch;
    Philox rng(config.seed, stream_id("train", static_cast<std::uint64_t>(epoch)));
    const std::vector<double> batch = sample_uniform(model.domain(), config.batch_size, rng);
    EpochRecord record;
    record.epoch = epoch;
    try {
      record.loss = loss_and_gradient(model, problem, batch, config.constraint_weight, config.boundary_weight,
                                      std::span<Real>(grad), config.chunk_size);
    } catch (const NumericalError& e) {
      throw DivergenceError(std::string("train: ") + e.what(), epoch);
    }
    if (!std::isfinite(record.loss.total)) {
      throw DivergenceError("train: non-finite loss", epoch);
    }
    std::span<Real> params = model.mutable_params();
    switch (config.optimizer.kind) {
      case OptimizerKind::Lion:
        record.lr = poly_lr(schedule, epoch);
        lion_step<Real>(params, grad, state.optimizer, record.lr, config.optimizer);
        break;
      case OptimizerKind::Adam:
        record.lr = poly_lr(schedule, epoch);
        adam_step<Real>(params, grad, state.optimizer, record.lr, config.optimizer);
        break;
      case OptimizerKind::Sgd:
        record.lr = poly_lr(schedule, epoch);
        sgd_step<Real>(params, grad, state.optimizer, record.lr);
        break;
      case OptimizerKind::TwoStep: {
        const auto active = static_cast<std::uint8_t>(two_step_schedule(epoch, config.phase_length));
        for (std::size_t k = 0; k < n; ++k) mask[k] = groups[k] == active ? 1 : 0;
        record.lr = two_step_lr(schedule, epoch, config.phase_length);
        lion_step<Real>(params, grad, state.optimizer, record.lr, config.optimizer, mask);
        break;
      }
    }
    try {
      model.refresh();
    } catch (const ParameterError& e) {
      throw DivergenceError(std::string("train: ") + e.what(), epoch);
    }
    history.push_back(record);
    if (on_epoch) {
      TrainState next = state;
      next.epoch = epoch + 1;
      on_epoch(record, model, next);
    }
  }
  return history;
}

}  // namespace tnfp
