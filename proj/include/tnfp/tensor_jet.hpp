#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace tnfp {

/// Value and first two derivatives of a one-dimensional factor.
template <class Real>
struct Jet1 {
  Real v{};
  Real d1{};
  Real d2{};
};

/// Assembles rank-N tensor products  q(x) = sum_i c_i prod_j F_ij(x_j)
/// together with grad q and the Hessian of q, and the reverse pass that
/// maps adjoints of (q, grad q, hess q) back to adjoints of the factor jets
/// and of the weights c_i.
///
/// Each partial product is a second-order jet in d variables (scalar,
/// gradient, Hessian). Prefix and suffix products let the reverse pass
/// form prod_{k != j} F_ik without dividing by factors that may vanish
/// (compactly supported kernels are exactly zero on most of the domain).
template <class Real>
class TensorJetAssembler {
 public:
  explicit TensorJetAssembler(int dim) : d_(dim), stride_(1 + dim + dim * dim) {
    prefix_.resize(static_cast<std::size_t>(dim + 1) * stride_);
    suffix_.resize(static_cast<std::size_t>(dim + 1) * stride_);
    excl_.resize(stride_);
  }

  int dim() const noexcept { return d_; }

  /// Accumulates c_i prod_j F_ij for one rank into (q, grad, hess).
  void add_rank(Real weight, std::span<const Jet1<Real>> factors, Real& q, std::span<Real> grad,
                std::span<Real> hess) {
    switch (d_) {
      case 1: return add_rank_impl<1>(weight, factors, q, grad, hess);
      case 2: return add_rank_impl<2>(weight, factors, q, grad, hess);
      case 3: return add_rank_impl<3>(weight, factors, q, grad, hess);
      case 4: return add_rank_impl<4>(weight, factors, q, grad, hess);
      case 6: return add_rank_impl<6>(weight, factors, q, grad, hess);
      case 10: return add_rank_impl<10>(weight, factors, q, grad, hess);
      default: return add_rank_impl<0>(weight, factors, q, grad, hess);
    }
  }

  /// Reverse pass for one rank given adjoints (wp, wg, wh) of the rank's
  /// contribution c_i * (q_i, grad q_i, hess q_i).
  ///
  /// Writes d(contraction)/dF_ij into factor_adjoints[j] (scaled by c_i) and
  /// returns the unweighted contraction  wp q_i + wg.grad q_i + wh:hess q_i,
  /// which is d(contraction)/dc_i.
  Real reverse_rank(Real weight, std::span<const Jet1<Real>> factors, Real wp, std::span<const Real> wg,
                    std::span<const Real> wh, std::span<Jet1<Real>> factor_adjoints) {
    switch (d_) {
      case 1: return reverse_rank_impl<1>(weight, factors, wp, wg, wh, factor_adjoints);
      case 2: return reverse_rank_impl<2>(weight, factors, wp, wg, wh, factor_adjoints);
      case 3: return reverse_rank_impl<3>(weight, factors, wp, wg, wh, factor_adjoints);
      case 4: return reverse_rank_impl<4>(weight, factors, wp, wg, wh, factor_adjoints);
      case 6: return reverse_rank_impl<6>(weight, factors, wp, wg, wh, factor_adjoints);
      case 10: return reverse_rank_impl<10>(weight, factors, wp, wg, wh, factor_adjoints);
      default: return reverse_rank_impl<0>(weight, factors, wp, wg, wh, factor_adjoints);
    }
  }

 private:
  // D > 0 fixes the dimension at compile time so the small loops unroll; D = 0 uses d_.
  template <int D>
  int dim_of() const noexcept {
    return D > 0 ? D : d_;
  }

  template <int D>
  void add_rank_impl(Real weight, std::span<const Jet1<Real>> factors, Real& q, std::span<Real> grad,
                     std::span<Real> hess) {
    const int d = dim_of<D>();
    build_prefix<D>(factors);
    const Real* full = jet(prefix_, d);
    q += weight * full[0];
    for (int a = 0; a < d; ++a) {
      grad[a] += weight * full[1 + a];
    }
    for (int k = 0; k < d * d; ++k) {
      hess[k] += weight * full[1 + d + k];
    }
  }

  template <int D>
  Real reverse_rank_impl(Real weight, std::span<const Jet1<Real>> factors, Real wp, std::span<const Real> wg,
                         std::span<const Real> wh, std::span<Jet1<Real>> factor_adjoints) {
    const int d = dim_of<D>();
    build_prefix<D>(factors);
    build_suffix<D>(factors);
    for (int j = 0; j < d; ++j) {
      multiply<D>(jet(prefix_, j), jet(suffix_, j + 1), excl_.data());
      const Real* e = excl_.data();
      Real bar_v = wp * e[0];
      for (int a = 0; a < d; ++a) {
        bar_v += wg[a] * e[1 + a];
      }
      for (int k = 0; k < d * d; ++k) {
        bar_v += wh[k] * e[1 + d + k];
      }
      Real bar_d1 = wg[j] * e[0];
      for (int b = 0; b < d; ++b) {
        bar_d1 += (wh[j * d + b] + wh[b * d + j]) * e[1 + b];
      }
      const Real bar_d2 = wh[j * d + j] * e[0];
      factor_adjoints[j] = {weight * bar_v, weight * bar_d1, weight * bar_d2};
    }
    const Real* full = jet(prefix_, d);
    Real contraction = wp * full[0];
    for (int a = 0; a < d; ++a) {
      contraction += wg[a] * full[1 + a];
    }
    for (int k = 0; k < d * d; ++k) {
      contraction += wh[k] * full[1 + d + k];
    }
    return contraction;
  }

  Real* jet(std::vector<Real>& storage, int index) { return storage.data() + static_cast<std::size_t>(index) * stride_; }

  void set_one(Real* out) const {
    std::fill(out, out + stride_, Real(0));
    out[0] = Real(1);
  }

  // out = in * F where F depends on coordinate j only.
  template <int D>
  void multiply_factor(const Real* in, const Jet1<Real>& f, int j, Real* out) const {
    const int d = dim_of<D>();
    const Real* in_g = in + 1;
    const Real* in_h = in + 1 + d;
    Real* out_g = out + 1;
    Real* out_h = out + 1 + d;
    out[0] = in[0] * f.v;
    for (int a = 0; a < d; ++a) {
      out_g[a] = in_g[a] * f.v;
    }
    out_g[j] += in[0] * f.d1;
    for (int k = 0; k < d * d; ++k) {
      out_h[k] = in_h[k] * f.v;
    }
    for (int a = 0; a < d; ++a) {
      const Real cross = in_g[a] * f.d1;
      out_h[a * d + j] += cross;
      out_h[j * d + a] += cross;
    }
    out_h[j * d + j] += in[0] * f.d2;
  }

  // General jet product (second order, truncated).
  template <int D>
  void multiply(const Real* a, const Real* b, Real* out) const {
    const int d = dim_of<D>();
    const Real* ag = a + 1;
    const Real* ah = a + 1 + d;
    const Real* bg = b + 1;
    const Real* bh = b + 1 + d;
    out[0] = a[0] * b[0];
    for (int i = 0; i < d; ++i) {
      out[1 + i] = a[0] * bg[i] + b[0] * ag[i];
    }
    Real* oh = out + 1 + d;
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < d; ++k) {
        oh[i * d + k] = a[0] * bh[i * d + k] + b[0] * ah[i * d + k] + ag[i] * bg[k] + bg[i] * ag[k];
      }
    }
  }

  template <int D>
  void build_prefix(std::span<const Jet1<Real>> factors) {
    const int d = dim_of<D>();
    set_one(jet(prefix_, 0));
    for (int j = 0; j < d; ++j) {
      multiply_factor<D>(jet(prefix_, j), factors[j], j, jet(prefix_, j + 1));
    }
  }

  template <int D>
  void build_suffix(std::span<const Jet1<Real>> factors) {
    const int d = dim_of<D>();
    set_one(jet(suffix_, d));
    for (int j = d - 1; j >= 0; --j) {
      multiply_factor<D>(jet(suffix_, j + 1), factors[j], j, jet(suffix_, j));
    }
  }

  int d_;
  int stride_;
  std::vector<Real> prefix_;
  std::vector<Real> suffix_;
  std::vector<Real> excl_;
};

/// Products of all entries but one, without division: out[j] = prod_{k != j} values[k].
template <class Real>
void exclusive_products(std::span<const Real> values, std::span<Real> out) {
  const std::size_t n = values.size();
  Real running = Real(1);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = running;
    running *= values[j];
  }
  running = Real(1);
  for (std::size_t j = n; j-- > 0;) {
    out[j] *= running;
    running *= values[j];
  }
}

}  // namespace tnfp
