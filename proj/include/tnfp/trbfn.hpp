#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/rank_blocks.hpp"
#include "tnfp/tensor_jet.hpp"

namespace tnfp {

enum class RbfKind { Gaussian, InverseMultiquadric, Wendland };

/// "gaussian", "imq" (also "inverse_multiquadric", "inverse_quadratic"), "wendland".
RbfKind parse_rbf_kind(std::string_view name);
std::string_view rbf_kind_name(RbfKind kind);
/// Comma separated list, e.g. "wendland,wendland,imq".
std::vector<RbfKind> parse_rbf_kinds(std::string_view list);

struct RbfValue {
  double value;
  double d1;
  double d2;
};

/// k(|u|) and its first two derivatives in u:
///   Gaussian             exp(-u^2)
///   InverseMultiquadric  ((1 + |u|)^2)^(-5/2)
///   Wendland             max((1 - |u|)^3, 0) (3|u| + 1)
/// At u = 0 the derivative of the even extension is used (d1 = 0 for all kinds).
RbfValue rbf_eval(RbfKind kind, double u);

/// Same, with the third derivative (needed for shift/bandwidth gradients of k'').
template <class Real>
struct RbfJet3 {
  Real v;
  Real d1;
  Real d2;
  Real d3;
};

template <class Real>
inline RbfJet3<Real> rbf_eval3(RbfKind kind, Real u) {
  const Real t = std::abs(u);
  const Real sign = u > Real(0) ? Real(1) : (u < Real(0) ? Real(-1) : Real(0));
  switch (kind) {
    case RbfKind::Gaussian: {
      const Real e = std::exp(-u * u);
      return {e, Real(-2) * u * e, (Real(4) * u * u - Real(2)) * e, (Real(12) * u - Real(8) * u * u * u) * e};
    }
    case RbfKind::InverseMultiquadric: {
      const Real inv = Real(1) / (Real(1) + t);
      const Real inv2 = inv * inv;
      const Real inv5 = inv2 * inv2 * inv;
      return {inv5, Real(-5) * sign * inv5 * inv, Real(30) * inv5 * inv2, Real(-210) * sign * inv5 * inv2 * inv};
    }
    case RbfKind::Wendland: {
      if (t >= Real(1)) {
        return {Real(0), Real(0), Real(0), Real(0)};
      }
      // 1 - 6u^2 + 8|u|^3 - 3u^4 on |u| < 1
      const Real u2 = u * u;
      return {Real(1) - Real(6) * u2 + Real(8) * u2 * t - Real(3) * u2 * u2,
              Real(-12) * u + Real(24) * u * t - Real(12) * u2 * u, Real(-12) + Real(48) * t - Real(36) * u2,
              Real(48) * sign - Real(72) * u};
    }
  }
  return {Real(0), Real(0), Real(0), Real(0)};
}

/// Odd antiderivative P of k(|u|) with P(0) = 0.
double rbf_primitive(RbfKind kind, double u);

/// Integral over [a, b] of k(|x - s| / |h|) dx in closed form. Throws ParameterError for h = 0.
double analytic_integral_1d(RbfKind kind, double s, double h, double a, double b);

struct PenaltyTerms {
  double constraint = 0.0;
  double boundary = 0.0;
};

/// Tensor radial-basis-function density on a hyperrectangle:
///
///   p(x) = (1/Z) sum_i c_i prod_j k_ij(x_j),
///   k_ij(t) = sum_l alpha_ijl K_l(|t - s_ijl| / h_ijl),
///   Z = sum_i c_i prod_j integral of k_ij over [O_j - r_j, O_j + r_j].
///
/// Raw parameters are unconstrained: c = softmax(gamma), alpha_ij = softmax(a_ij)
/// and h = exp(eta). The raw vector is laid out as
///   [gamma_0 .. gamma_{N-1}] then, for each (i, j) in row-major order,
///   [a_0 .. a_{m-1}, s_0 .. s_{m-1}, eta_0 .. eta_{m-1}].
///
/// Gradient buffers passed to the accumulate_* members have the same length
/// but an internal accumulation layout (rank index fastest, so the point
/// kernel vectorizes over ranks) and hold derivatives with respect to the
/// materialized (c, alpha, s, h). finalize_gradient converts them to
/// raw-parameter derivatives in the raw layout, in place.
template <class Real>
class TrbfnModel {
 public:
  using real_type = Real;

  class Workspace {
   public:
    explicit Workspace(const TrbfnModel& model);

   private:
    friend class TrbfnModel;
    // Forward results at `point`, structure of arrays with the rank index fastest.
    std::vector<Real> u;                     // d * m * N
    std::vector<Real> bv, bd1, bd2, bd3;     // basis jets, d * m * N
    std::vector<Real> fv, fd1, fd2;          // factor jets, d * N
    std::vector<double> point;
    bool cached = false;
    std::vector<Real> av, ad1, ad2;          // factor adjoints, d * N
    detail::RankBlockScratch<Real> blocks;
  };

  TrbfnModel(Domain domain, int rank, std::vector<RbfKind> kinds);

  /// Shifts ~ N(O_j, sqrt(r_j)) clipped to [O_j - r_j + 1e-3 r_j, O_j + r_j - 1e-3 r_j],
  /// bandwidths 0.9 r_j, uniform mixture and rank weights.
  static TrbfnModel initialize(Domain domain, int rank, std::vector<RbfKind> kinds, std::uint64_t seed);

  int dim() const noexcept { return domain_.dim(); }
  int rank() const noexcept { return rank_; }
  int bases() const noexcept { return static_cast<int>(kinds_.size()); }
  const Domain& domain() const noexcept { return domain_; }
  const std::vector<RbfKind>& kinds() const noexcept { return kinds_; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const Real> params() const noexcept { return params_; }
  /// Invalidates the normalization cache until refresh() is called.
  std::span<Real> mutable_params() noexcept {
    fresh_ = false;
    return params_;
  }
  /// Recomputes materialized weights and Z. Throws ParameterError when Z <= 0.
  void refresh();
  bool fresh() const noexcept { return fresh_; }

  std::size_t weight_index(int i) const noexcept { return static_cast<std::size_t>(i); }
  std::size_t block_index(int i, int j) const noexcept {
    return static_cast<std::size_t>(rank_) + (static_cast<std::size_t>(i) * dim() + j) * 3 * bases();
  }
  std::size_t alpha_index(int i, int j, int l) const noexcept { return block_index(i, j) + l; }
  std::size_t shift_index(int i, int j, int l) const noexcept { return block_index(i, j) + bases() + l; }
  std::size_t log_bandwidth_index(int i, int j, int l) const noexcept { return block_index(i, j) + 2 * bases() + l; }

  /// Materialized values (valid after refresh()).
  Real weight(int i) const { return weights_[i]; }
  Real alpha(int i, int j, int l) const { return alphas_[soa(j, l, i)]; }
  Real shift(int i, int j, int l) const { return shifts_[soa(j, l, i)]; }
  Real bandwidth(int i, int j, int l) const { return bandwidths_[soa(j, l, i)]; }
  double normalization() const;
  double factor_integral(int i, int j) const { return factor_integrals_[static_cast<std::size_t>(i) * dim() + j]; }

  /// k_ij(t) with first and second derivatives in t.
  Jet1<Real> factor_eval(int i, int j, Real t) const;

  Real density(std::span<const double> x, Workspace& ws) const;
  Real density(std::span<const double> x) const;

  /// Normalized density, gradient (length d) and row-major Hessian (d x d).
  void eval_derivs(std::span<const double> x, Real& p, std::span<Real> grad, std::span<Real> hess,
                   Workspace& ws) const;

  /// Adds (1/Z) d/dtheta [wp q + wg.grad q + wh:hess q] at x into `grad`
  /// (accumulation layout) and returns wp p + wg.grad p + wh:hess p.
  /// The Z dependence is handled separately by accumulate_normalization_gradient.
  /// Reuses the forward pass of an immediately preceding eval_derivs at x.
  Real accumulate_point_gradient(std::span<const double> x, Real wp, std::span<const Real> wg,
                                 std::span<const Real> wh, std::span<Real> grad, Workspace& ws) const;

  /// Adds z_adjoint * dZ/dtheta (accumulation layout).
  void accumulate_normalization_gradient(Real z_adjoint, std::span<Real> grad) const;

  /// Constraint hinge  sum max(|s - O_j| - r_j, 0) + max(|h| - |r_j - |s - O_j||, 0)
  /// and boundary sum  sum_ij k_ij(O_j + r_j) + k_ij(O_j - r_j).
  PenaltyTerms penalty_terms() const;
  /// Adds w_constraint * d(constraint) + w_boundary * d(boundary); hinge subgradient is 0 at kinks.
  void accumulate_penalty_gradient(Real w_constraint, Real w_boundary, std::span<Real> grad) const;

  /// Converts an accumulation-layout gradient to raw-parameter derivatives
  /// in the raw layout, in place.
  void finalize_gradient(std::span<Real> grad) const;

  /// Integral of p over prod_j [center_j - radius, center_j + radius].
  double box_integral(std::span<const double> center, double radius) const;

  /// 0 for combination parameters (gamma, a), 1 for base parameters (s, eta).
  std::vector<std::uint8_t> parameter_groups() const;

 private:
  // Materialized arrays and workspace basis arrays: (j, l, i) with i fastest.
  std::size_t soa(int j, int l, int i) const noexcept {
    return (static_cast<std::size_t>(j) * bases() + l) * rank_ + i;
  }
  // Accumulation layout: [c_0 .. c_{N-1}] then, per (j, l), blocks alpha[N], s[N], h[N].
  std::size_t acc_alpha(int i, int j, int l) const noexcept {
    return static_cast<std::size_t>(rank_) + ((static_cast<std::size_t>(j) * bases() + l) * 3) * rank_ + i;
  }
  std::size_t acc_shift(int i, int j, int l) const noexcept { return acc_alpha(i, j, l) + rank_; }
  std::size_t acc_bandwidth(int i, int j, int l) const noexcept { return acc_alpha(i, j, l) + 2 * static_cast<std::size_t>(rank_); }

  void require_fresh() const;
  // Basis and factor jets of every rank at x into ws.
  void forward_all(std::span<const double> x, Workspace& ws) const;
  // Scalar factor jet at t plus per-basis third-order jets.
  void factor_with_basis(int i, int j, Real t, Jet1<Real>& factor, RbfJet3<Real>* basis) const;
  // Scalar chain from a factor adjoint to (alpha, s, h) of that factor.
  void chain_factor_adjoint(int i, int j, Real t, const Jet1<Real>& adjoint, const RbfJet3<Real>* basis,
                            std::span<Real> grad) const;

  Domain domain_;
  int rank_;
  std::vector<RbfKind> kinds_;
  std::vector<Real> params_;
  bool fresh_ = false;
  std::vector<Real> weights_;
  std::vector<Real> alphas_;
  std::vector<Real> shifts_;
  std::vector<Real> bandwidths_;
  std::vector<Real> inv_bandwidths_;
  std::vector<double> factor_integrals_;
  double z_ = 0.0;
  Real inv_z_ = Real(0);
};

extern template class TrbfnModel<float>;
extern template class TrbfnModel<double>;

}  // namespace tnfp
