#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/quadrature.hpp"
#include "tnfp/rank_blocks.hpp"
#include "tnfp/tensor_jet.hpp"
#include "tnfp/trbfn.hpp"

namespace tnfp {

/// Layer widths [1, w_1, ..., w_L, 1] of a scalar-to-scalar MLP with tanh
/// hidden layers and a softplus output. Parameters of layer l (1-based) are
/// the row-major weight matrix W_l (widths[l] x widths[l-1]) followed by the
/// bias b_l, layers stored in order.
struct MlpShape {
  std::vector<int> widths;

  /// Throws ConfigError unless widths = [1, ..., 1] with at least one hidden layer.
  void validate() const;
  int layers() const noexcept { return static_cast<int>(widths.size()) - 1; }
  std::size_t parameter_count() const;
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;
  /// Total number of units over layers 1..L (size of one tape channel).
  std::size_t unit_count() const;
  std::size_t unit_offset(int layer) const;
};

/// Pre- and post-activation jets (value, d/dx, d2/dx2) of every unit.
template <class Real>
struct MlpTape {
  std::vector<Real> z, dz, ddz;
  std::vector<Real> a, da, dda;
  Real x{};

  void resize(const MlpShape& shape);
};

/// Value, first and second input derivative of the network at x.
template <class Real>
Jet1<Real> mlp_forward2(const MlpShape& shape, std::span<const Real> params, Real x, MlpTape<Real>& tape);

/// Value only.
template <class Real>
Real mlp_forward(const MlpShape& shape, std::span<const Real> params, Real x, std::vector<Real>& scratch);

/// Adds d/dtheta [ out_adj.v v + out_adj.d1 v' + out_adj.d2 v'' ] into `grad`
/// (same layout as params) using the tape of the matching forward pass.
template <class Real>
void mlp_backward2(const MlpShape& shape, std::span<const Real> params, const MlpTape<Real>& tape,
                   const Jet1<Real>& out_adj, std::span<Real> grad, std::vector<Real>& scratch);

/// One-dimensional truncation factor max(1 - ((t - O)/r)^2, 0)^3 with its
/// first and second derivatives in t.
Jet1<double> envelope_1d(double center, double half_width, double t);

struct EnvelopeValue {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  // row-major d x d
};

/// Tensor-product envelope prod_j envelope_1d over the domain.
EnvelopeValue envelope(const Domain& domain, std::span<const double> x);

/// Tensor feed-forward network
///
///   p(x) = (1/Z) sum_i prod_j k_ij(x_j) e_j(x_j),
///
/// with k_ij scalar MLPs, e_j the truncation factor of the domain and
/// Z = sum_i prod_j integral of k_ij e_j by composite Gauss-Legendre
/// quadrature. The rank weights are fixed at 1. Parameters of factor (i, j)
/// occupy one contiguous block, blocks stored rank-major.
///
/// Internally the networks of one coordinate are evaluated for all ranks at
/// once, so gradient buffers passed to accumulate_* use an accumulation
/// layout (coordinate, parameter, rank with the rank fastest);
/// finalize_gradient permutes them to the raw layout in place.
template <class Real>
class TffnModel {
 public:
  using real_type = Real;

  class Workspace {
   public:
    explicit Workspace(const TffnModel& model);

   private:
    friend class TffnModel;
    struct Tape {
      // Per unit, rank fastest: activation jets, pre-activation derivatives, activation derivatives.
      std::vector<Real> a, da, dda, dz, ddz, g1, g2, g3;
      std::vector<Real> z;  // pre-activation scratch of one unit
    };
    std::vector<Tape> tapes;                 // per coordinate
    std::vector<Real> ev, ed1, ed2;          // envelope jets per coordinate
    std::vector<Real> kv, kd1, kd2;          // network jets, d * N
    std::vector<Real> fv, fd1, fd2;          // factor jets k e, d * N
    std::vector<Real> av, ad1, ad2;          // factor adjoints, d * N
    std::vector<Real> scratch;
    std::vector<double> point;
    bool cached = false;
    bool inside = false;
    detail::RankBlockScratch<Real> blocks;
  };

  TffnModel(Domain domain, int rank, MlpShape shape, int quad_panels = 16, int quad_points = 16);

  /// Xavier/Glorot uniform weights, zero biases.
  static TffnModel initialize(Domain domain, int rank, MlpShape shape, std::uint64_t seed, int quad_panels = 16,
                              int quad_points = 16);

  int dim() const noexcept { return domain_.dim(); }
  int rank() const noexcept { return rank_; }
  const MlpShape& shape() const noexcept { return shape_; }
  const Domain& domain() const noexcept { return domain_; }
  int quad_panels() const noexcept { return panels_; }
  int quad_points() const noexcept { return points_; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const Real> params() const noexcept { return params_; }
  std::span<Real> mutable_params() noexcept {
    fresh_ = false;
    return params_;
  }
  std::size_t factor_offset(int i, int j) const noexcept {
    return (static_cast<std::size_t>(i) * dim() + j) * shape_.parameter_count();
  }
  std::span<const Real> factor_params(int i, int j) const {
    return std::span<const Real>(params_).subspan(factor_offset(i, j), shape_.parameter_count());
  }

  /// Recomputes the quadrature factor integrals and Z. Throws ParameterError
  /// when Z underflows or is not finite.
  void refresh();
  bool fresh() const noexcept { return fresh_; }
  double normalization() const;
  double factor_integral(int i, int j) const { return factor_integrals_[static_cast<std::size_t>(i) * dim() + j]; }

  /// Z recomputed with a different composite rule (for refinement checks).
  double normalization_with(int panels, int points) const;

  Real density(std::span<const double> x, Workspace& ws) const;
  Real density(std::span<const double> x) const;
  void eval_derivs(std::span<const double> x, Real& p, std::span<Real> grad, std::span<Real> hess,
                   Workspace& ws) const;

  /// See TrbfnModel::accumulate_point_gradient.
  Real accumulate_point_gradient(std::span<const double> x, Real wp, std::span<const Real> wg,
                                 std::span<const Real> wh, std::span<Real> grad, Workspace& ws) const;
  void accumulate_normalization_gradient(Real z_adjoint, std::span<Real> grad) const;

  /// The network has no shift/bandwidth constraints or boundary term.
  PenaltyTerms penalty_terms() const { return {}; }
  void accumulate_penalty_gradient(Real, Real, std::span<Real>) const {}
  void finalize_gradient(std::span<Real> grad) const;

  /// Integral of p over prod_j [center_j - radius, center_j + radius] intersected with the domain.
  double box_integral(std::span<const double> center, double radius) const;

  std::vector<std::uint8_t> parameter_groups() const { return std::vector<std::uint8_t>(params_.size(), 0); }

 private:
  void require_fresh() const;
  std::size_t packed(int j, std::size_t p) const noexcept {
    return (static_cast<std::size_t>(j) * shape_.parameter_count() + p) * rank_;
  }
  std::size_t max_width() const noexcept;
  // All ranks' networks of coordinate j at t; values into out[N].
  void forward_values(int j, Real t, Real* out, std::vector<Real>& scratch) const;
  // Jets of all ranks' networks of coordinate j at t, recorded on the tape.
  void forward_jets(int j, Real t, typename Workspace::Tape& tape, Real* kv, Real* kd1, Real* kd2) const;
  // Adds the parameter adjoints of coordinate j (accumulation layout) given per-rank output adjoints.
  void backward_jets(int j, Real t, const typename Workspace::Tape& tape, const Real* bv, const Real* b1,
                     const Real* b2, std::span<Real> grad, std::vector<Real>& scratch) const;
  // Per-rank integral of k_ij e_j over [a, b] with a composite rule.
  void integrate_factors(int j, double a, double b, int panels, int points, std::vector<double>& out) const;
  void forward_point(std::span<const double> x, Workspace& ws) const;

  Domain domain_;
  int rank_;
  MlpShape shape_;
  int panels_;
  int points_;
  std::vector<Real> params_;
  std::vector<Real> packed_;                    // (j, p, i) with i fastest
  std::vector<Real> ones_;
  bool fresh_ = false;
  std::vector<double> factor_integrals_;
  double z_ = 0.0;
  Real inv_z_ = Real(0);
};

extern template class TffnModel<float>;
extern template class TffnModel<double>;

}  // namespace tnfp
