#include "tnfp/trbfn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tnfp/errors.hpp"
#include "tnfp/rng.hpp"

namespace tnfp {

RbfKind parse_rbf_kind(std::string_view name) {
  if (name == "gaussian") return RbfKind::Gaussian;
  if (name == "imq" || name == "inverse_multiquadric" || name == "inverse_quadratic") {
    return RbfKind::InverseMultiquadric;
  }
  if (name == "wendland") return RbfKind::Wendland;
  throw ConfigError("unknown radial basis function '" + std::string(name) + "'");
}

std::string_view rbf_kind_name(RbfKind kind) {
  switch (kind) {
    case RbfKind::Gaussian: return "gaussian";
    case RbfKind::InverseMultiquadric: return "imq";
    case RbfKind::Wendland: return "wendland";
  }
  return "unknown";
}

std::vector<RbfKind> parse_rbf_kinds(std::string_view list) {
  std::vector<RbfKind> kinds;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t end = list.find(',', start);
    if (end == std::string_view::npos) {
      end = list.size();
    }
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      kinds.push_back(parse_rbf_kind(item));
    }
    start = end + 1;
  }
  if (kinds.empty()) {
    throw ConfigError("empty radial basis function list");
  }
  return kinds;
}

RbfValue rbf_eval(RbfKind kind, double u) {
  const RbfJet3<double> jet = rbf_eval3<double>(kind, u);
  return {jet.v, jet.d1, jet.d2};
}

double rbf_primitive(RbfKind kind, double u) {
  const double t = std::abs(u);
  const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  switch (kind) {
    case RbfKind::Gaussian:
      return 0.5 * std::sqrt(std::numbers::pi) * std::erf(u);
    case RbfKind::InverseMultiquadric: {
      const double inv = 1.0 / (1.0 + t);
      const double inv2 = inv * inv;
      return sign * 0.25 * (1.0 - inv2 * inv2);
    }
    case RbfKind::Wendland: {
      const double c = std::min(t, 1.0);
      const double c2 = c * c;
      return sign * (c - 2.0 * c2 * c + 2.0 * c2 * c2 - 0.6 * c2 * c2 * c);
    }
  }
  return 0.0;
}

double analytic_integral_1d(RbfKind kind, double s, double h, double a, double b) {
  if (h == 0.0) {
    throw ParameterError("analytic_integral_1d: zero bandwidth");
  }
  const double scale = std::abs(h);
  return scale * (rbf_primitive(kind, (b - s) / scale) - rbf_primitive(kind, (a - s) / scale));
}

namespace {

// Basis jets of one kernel kind for n ranks at coordinate value x.
template <class Real>
void basis_block(RbfKind kind, Real x, const Real* s, const Real* ih, int n, Real* u, Real* v, Real* d1, Real* d2,
                 Real* d3) {
  switch (kind) {
    case RbfKind::Wendland:
#pragma omp simd
      for (int k = 0; k < n; ++k) {
        const Real uu = (x - s[k]) * ih[k];
        const Real t = std::abs(uu);
        const Real w = std::max(Real(1) - t, Real(0));
        const Real sg = static_cast<Real>(uu > Real(0)) - static_cast<Real>(uu < Real(0));
        u[k] = uu;
        v[k] = w * w * w * (Real(3) * t + Real(1));
        d1[k] = Real(-12) * uu * w * w;
        d2[k] = Real(-12) * w * (Real(1) - Real(3) * t);
        d3[k] = static_cast<Real>(t < Real(1)) * (Real(48) * sg - Real(72) * uu);
      }
      break;
    case RbfKind::InverseMultiquadric:
#pragma omp simd
      for (int k = 0; k < n; ++k) {
        const Real uu = (x - s[k]) * ih[k];
        const Real t = std::abs(uu);
        const Real sg = static_cast<Real>(uu > Real(0)) - static_cast<Real>(uu < Real(0));
        const Real inv = Real(1) / (Real(1) + t);
        const Real inv2 = inv * inv;
        const Real inv5 = inv2 * inv2 * inv;
        u[k] = uu;
        v[k] = inv5;
        d1[k] = Real(-5) * sg * inv5 * inv;
        d2[k] = Real(30) * inv5 * inv2;
        d3[k] = Real(-210) * sg * inv5 * inv2 * inv;
      }
      break;
    case RbfKind::Gaussian:
      for (int k = 0; k < n; ++k) {
        const Real uu = (x - s[k]) * ih[k];
        const Real e = std::exp(-uu * uu);
        u[k] = uu;
        v[k] = e;
        d1[k] = Real(-2) * uu * e;
        d2[k] = (Real(4) * uu * uu - Real(2)) * e;
        d3[k] = (Real(12) * uu - Real(8) * uu * uu * uu) * e;
      }
      break;
  }
}

template <class Real>
Real sign_of(Real v) {
  return v > Real(0) ? Real(1) : (v < Real(0) ? Real(-1) : Real(0));
}

}  // namespace

template <class Real>
TrbfnModel<Real>::Workspace::Workspace(const TrbfnModel& model) {
  const int d = model.dim();
  const std::size_t n = model.rank();
  const std::size_t basis_size = d * model.bases() * n;
  u.resize(basis_size);
  bv.resize(basis_size);
  bd1.resize(basis_size);
  bd2.resize(basis_size);
  bd3.resize(basis_size);
  fv.resize(d * n);
  fd1.resize(d * n);
  fd2.resize(d * n);
  av.resize(d * n);
  ad1.resize(d * n);
  ad2.resize(d * n);
  point.resize(d);
  blocks.resize(d, model.rank(), d <= 4 ? 64 : 16);
}

template <class Real>
TrbfnModel<Real>::TrbfnModel(Domain domain, int rank, std::vector<RbfKind> kinds)
    : domain_(std::move(domain)), rank_(rank), kinds_(std::move(kinds)) {
  domain_.validate();
  if (rank_ < 1) {
    throw ConfigError("trbfn: rank must be positive");
  }
  if (kinds_.empty()) {
    throw ConfigError("trbfn: need at least one basis per factor");
  }
  params_.assign(static_cast<std::size_t>(rank_) + static_cast<std::size_t>(rank_) * dim() * 3 * bases(), Real(0));
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      for (int l = 0; l < bases(); ++l) {
        params_[shift_index(i, j, l)] = static_cast<Real>(domain_.center[j]);
        params_[log_bandwidth_index(i, j, l)] = static_cast<Real>(std::log(0.9 * domain_.half_width[j]));
      }
    }
  }
}

template <class Real>
TrbfnModel<Real> TrbfnModel<Real>::initialize(Domain domain, int rank, std::vector<RbfKind> kinds,
                                              std::uint64_t seed) {
  TrbfnModel model(std::move(domain), rank, std::move(kinds));
  Philox rng(seed, stream_id("init-trbfn"));
  const Domain& dom = model.domain();
  std::span<Real> raw = model.mutable_params();
  for (int i = 0; i < model.rank(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      const double center = dom.center[j];
      const double r = dom.half_width[j];
      for (int l = 0; l < model.bases(); ++l) {
        const double inset = 1e-3 * r;
        const double s = std::clamp(center + std::sqrt(r) * rng.normal(), center - r + inset, center + r - inset);
        raw[model.shift_index(i, j, l)] = static_cast<Real>(s);
        raw[model.log_bandwidth_index(i, j, l)] = static_cast<Real>(std::log(0.9 * r));
      }
    }
  }
  model.refresh();
  return model;
}

template <class Real>
void TrbfnModel<Real>::refresh() {
  const int d = dim();
  const int m = bases();
  weights_.resize(rank_);
  {
    Real peak = params_[0];
    for (int i = 1; i < rank_; ++i) peak = std::max(peak, params_[i]);
    double total = 0.0;
    std::vector<double> e(rank_);
    for (int i = 0; i < rank_; ++i) {
      e[i] = std::exp(static_cast<double>(params_[i] - peak));
      total += e[i];
    }
    for (int i = 0; i < rank_; ++i) weights_[i] = static_cast<Real>(e[i] / total);
  }
  const std::size_t size = static_cast<std::size_t>(rank_) * d * m;
  alphas_.resize(size);
  shifts_.resize(size);
  bandwidths_.resize(size);
  inv_bandwidths_.resize(size);
  factor_integrals_.resize(static_cast<std::size_t>(rank_) * d);
  double z = 0.0;
  for (int i = 0; i < rank_; ++i) {
    double product = 1.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t base = block_index(i, j);
      Real peak = params_[base];
      for (int l = 1; l < m; ++l) peak = std::max(peak, params_[base + l]);
      double total = 0.0;
      for (int l = 0; l < m; ++l) total += std::exp(static_cast<double>(params_[base + l] - peak));
      double integral = 0.0;
      for (int l = 0; l < m; ++l) {
        const std::size_t k = soa(j, l, i);
        alphas_[k] = static_cast<Real>(std::exp(static_cast<double>(params_[base + l] - peak)) / total);
        shifts_[k] = params_[shift_index(i, j, l)];
        bandwidths_[k] = std::exp(params_[log_bandwidth_index(i, j, l)]);
        inv_bandwidths_[k] = Real(1) / bandwidths_[k];
        if (!(bandwidths_[k] > Real(0)) || !std::isfinite(static_cast<double>(inv_bandwidths_[k])) ||
            !std::isfinite(static_cast<double>(shifts_[k]))) {
          throw ParameterError("trbfn: bandwidth or shift out of range at rank " + std::to_string(i));
        }
        integral += alphas_[k] * analytic_integral_1d(kinds_[l], shifts_[k], bandwidths_[k], domain_.lower(j),
                                                       domain_.upper(j));
      }
      factor_integrals_[static_cast<std::size_t>(i) * d + j] = integral;
      product *= integral;
    }
    z += weights_[i] * product;
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw ParameterError("trbfn: degenerate normalization constant Z = " + std::to_string(z) +
                         " (all mass outside the domain)");
  }
  z_ = z;
  inv_z_ = static_cast<Real>(1.0 / z);
  fresh_ = true;
}

template <class Real>
void TrbfnModel<Real>::require_fresh() const {
  if (!fresh_) {
    throw std::logic_error("trbfn: stale normalization cache, call refresh() after changing parameters");
  }
}

template <class Real>
double TrbfnModel<Real>::normalization() const {
  require_fresh();
  return z_;
}

template <class Real>
void TrbfnModel<Real>::factor_with_basis(int i, int j, Real t, Jet1<Real>& factor, RbfJet3<Real>* basis) const {
  factor = {Real(0), Real(0), Real(0)};
  for (int l = 0; l < bases(); ++l) {
    const std::size_t k = soa(j, l, i);
    const Real inv_h = inv_bandwidths_[k];
    basis[l] = rbf_eval3<Real>(kinds_[l], (t - shifts_[k]) * inv_h);
    const Real a = alphas_[k];
    factor.v += a * basis[l].v;
    factor.d1 += a * basis[l].d1 * inv_h;
    factor.d2 += a * basis[l].d2 * inv_h * inv_h;
  }
}

template <class Real>
Jet1<Real> TrbfnModel<Real>::factor_eval(int i, int j, Real t) const {
  require_fresh();
  std::vector<RbfJet3<Real>> basis(bases());
  Jet1<Real> factor;
  factor_with_basis(i, j, t, factor, basis.data());
  return factor;
}

template <class Real>
void TrbfnModel<Real>::forward_all(std::span<const double> x, Workspace& ws) const {
  const int d = dim();
  const int m = bases();
  const int n = rank_;
  for (int j = 0; j < d; ++j) {
    const Real xj = static_cast<Real>(x[j]);
    Real* fv = ws.fv.data() + static_cast<std::size_t>(j) * n;
    Real* fd1 = ws.fd1.data() + static_cast<std::size_t>(j) * n;
    Real* fd2 = ws.fd2.data() + static_cast<std::size_t>(j) * n;
    std::fill(fv, fv + n, Real(0));
    std::fill(fd1, fd1 + n, Real(0));
    std::fill(fd2, fd2 + n, Real(0));
    for (int l = 0; l < m; ++l) {
      const std::size_t k0 = soa(j, l, 0);
      Real* bv = ws.bv.data() + k0;
      Real* bd1 = ws.bd1.data() + k0;
      Real* bd2 = ws.bd2.data() + k0;
      basis_block<Real>(kinds_[l], xj, shifts_.data() + k0, inv_bandwidths_.data() + k0, n, ws.u.data() + k0, bv, bd1,
                        bd2, ws.bd3.data() + k0);
      const Real* alpha = alphas_.data() + k0;
      const Real* ih = inv_bandwidths_.data() + k0;
#pragma omp simd
      for (int i = 0; i < n; ++i) {
        const Real a = alpha[i];
        fv[i] += a * bv[i];
        fd1[i] += a * ih[i] * bd1[i];
        fd2[i] += a * ih[i] * ih[i] * bd2[i];
      }
    }
  }
  std::copy(x.begin(), x.end(), ws.point.begin());
  ws.cached = true;
}

template <class Real>
void TrbfnModel<Real>::eval_derivs(std::span<const double> x, Real& p, std::span<Real> grad, std::span<Real> hess,
                                   Workspace& ws) const {
  require_fresh();
  const int d = dim();
  forward_all(x, ws);
  std::vector<double> acc(1 + d + static_cast<std::size_t>(d) * d, 0.0);
  detail::dispatch_dim(d, [&]<int D>() {
    detail::forward_rank_blocks<Real, D>(d, rank_, ws.fv.data(), ws.fd1.data(), ws.fd2.data(), weights_.data(),
                                         ws.blocks, acc);
  });
  p = static_cast<Real>(acc[0]) * inv_z_;
  for (int a = 0; a < d; ++a) grad[a] = static_cast<Real>(acc[1 + a]) * inv_z_;
  for (int k = 0; k < d * d; ++k) hess[k] = static_cast<Real>(acc[1 + d + k]) * inv_z_;
}

template <class Real>
Real TrbfnModel<Real>::density(std::span<const double> x, Workspace& ws) const {
  (void)ws;
  return density(x);
}

template <class Real>
Real TrbfnModel<Real>::density(std::span<const double> x) const {
  require_fresh();
  const int d = dim();
  Real q = Real(0);
  for (int i = 0; i < rank_; ++i) {
    Real product = weights_[i];
    for (int j = 0; j < d && product != Real(0); ++j) {
      Real value = Real(0);
      for (int l = 0; l < bases(); ++l) {
        const std::size_t k = soa(j, l, i);
        const Real u = (static_cast<Real>(x[j]) - shifts_[k]) * inv_bandwidths_[k];
        if (kinds_[l] == RbfKind::Wendland && std::abs(u) >= Real(1)) {
          continue;
        }
        value += alphas_[k] * rbf_eval3<Real>(kinds_[l], u).v;
      }
      product *= value;
    }
    q += product;
  }
  return q * inv_z_;
}

template <class Real>
void TrbfnModel<Real>::chain_factor_adjoint(int i, int j, Real t, const Jet1<Real>& adjoint,
                                            const RbfJet3<Real>* basis, std::span<Real> grad) const {
  for (int l = 0; l < bases(); ++l) {
    const RbfJet3<Real>& b = basis[l];
    const std::size_t k = soa(j, l, i);
    const Real inv_h = inv_bandwidths_[k];
    const Real inv_h2 = inv_h * inv_h;
    const Real inv_h3 = inv_h2 * inv_h;
    const Real a = alphas_[k];
    const Real u = (t - shifts_[k]) * inv_h;
    grad[acc_alpha(i, j, l)] += adjoint.v * b.v + adjoint.d1 * b.d1 * inv_h + adjoint.d2 * b.d2 * inv_h2;
    grad[acc_shift(i, j, l)] -= a * (adjoint.v * b.d1 * inv_h + adjoint.d1 * b.d2 * inv_h2 + adjoint.d2 * b.d3 * inv_h3);
    grad[acc_bandwidth(i, j, l)] -= a * (adjoint.v * u * b.d1 * inv_h + adjoint.d1 * (u * b.d2 + b.d1) * inv_h2 +
                                         adjoint.d2 * (u * b.d3 + Real(2) * b.d2) * inv_h3);
  }
}

template <class Real>
Real TrbfnModel<Real>::accumulate_point_gradient(std::span<const double> x, Real wp, std::span<const Real> wg,
                                                 std::span<const Real> wh, std::span<Real> grad,
                                                 Workspace& ws) const {
  require_fresh();
  if (!ws.cached || !std::equal(x.begin(), x.end(), ws.point.begin())) {
    forward_all(x, ws);
  }
  const int d = dim();
  const int m = bases();
  const int n = rank_;
  const Real contraction = detail::dispatch_dim(d, [&]<int D>() {
    return detail::reverse_rank_blocks<Real, D>(d, n, ws.fv.data(), ws.fd1.data(), ws.fd2.data(), weights_.data(),
                                                inv_z_, wp, wg, wh, ws.blocks, ws.av.data(), ws.ad1.data(),
                                                ws.ad2.data());
  });
  const Real* rt = ws.blocks.rank_term.data();
#pragma omp simd
  for (int i = 0; i < n; ++i) grad[i] += rt[i] * inv_z_;
  for (int j = 0; j < d; ++j) {
    const Real* av = ws.av.data() + static_cast<std::size_t>(j) * n;
    const Real* ad1 = ws.ad1.data() + static_cast<std::size_t>(j) * n;
    const Real* ad2 = ws.ad2.data() + static_cast<std::size_t>(j) * n;
    for (int l = 0; l < m; ++l) {
      const std::size_t k0 = soa(j, l, 0);
      const Real* u = ws.u.data() + k0;
      const Real* bv = ws.bv.data() + k0;
      const Real* bd1 = ws.bd1.data() + k0;
      const Real* bd2 = ws.bd2.data() + k0;
      const Real* bd3 = ws.bd3.data() + k0;
      const Real* ih = inv_bandwidths_.data() + k0;
      const Real* alpha = alphas_.data() + k0;
      Real* g_alpha = grad.data() + acc_alpha(0, j, l);
      Real* g_shift = grad.data() + acc_shift(0, j, l);
      Real* g_band = grad.data() + acc_bandwidth(0, j, l);
#pragma omp simd
      for (int i = 0; i < n; ++i) {
        const Real h1 = ih[i];
        const Real h2 = h1 * h1;
        const Real h3 = h2 * h1;
        g_alpha[i] += av[i] * bv[i] + ad1[i] * bd1[i] * h1 + ad2[i] * bd2[i] * h2;
        g_shift[i] -= alpha[i] * (av[i] * bd1[i] * h1 + ad1[i] * bd2[i] * h2 + ad2[i] * bd3[i] * h3);
        g_band[i] -= alpha[i] * (av[i] * u[i] * bd1[i] * h1 + ad1[i] * (u[i] * bd2[i] + bd1[i]) * h2 +
                                 ad2[i] * (u[i] * bd3[i] + Real(2) * bd2[i]) * h3);
      }
    }
  }
  return contraction * inv_z_;
}

template <class Real>
void TrbfnModel<Real>::accumulate_normalization_gradient(Real z_adjoint, std::span<Real> grad) const {
  require_fresh();
  const int d = dim();
  std::vector<double> integrals(d);
  std::vector<double> excl(d);
  for (int i = 0; i < rank_; ++i) {
    double product = 1.0;
    for (int j = 0; j < d; ++j) {
      integrals[j] = factor_integral(i, j);
      product *= integrals[j];
    }
    grad[weight_index(i)] += z_adjoint * static_cast<Real>(product);
    exclusive_products<double>(integrals, excl);
    for (int j = 0; j < d; ++j) {
      const double bar = static_cast<double>(z_adjoint) * weights_[i] * excl[j];
      if (bar == 0.0) {
        continue;
      }
      const double lo = domain_.lower(j);
      const double hi = domain_.upper(j);
      for (int l = 0; l < bases(); ++l) {
        const std::size_t k = soa(j, l, i);
        const double h = bandwidths_[k];
        const double s = shifts_[k];
        const double ua = (lo - s) / h;
        const double ub = (hi - s) / h;
        const double pa = rbf_primitive(kinds_[l], ua);
        const double pb = rbf_primitive(kinds_[l], ub);
        const double ka = rbf_eval(kinds_[l], ua).value;
        const double kb = rbf_eval(kinds_[l], ub).value;
        const double a = alphas_[k];
        grad[acc_alpha(i, j, l)] += static_cast<Real>(bar * h * (pb - pa));
        grad[acc_shift(i, j, l)] += static_cast<Real>(bar * a * (ka - kb));
        grad[acc_bandwidth(i, j, l)] += static_cast<Real>(bar * a * (pb - ub * kb - pa + ua * ka));
      }
    }
  }
}

template <class Real>
PenaltyTerms TrbfnModel<Real>::penalty_terms() const {
  require_fresh();
  PenaltyTerms terms;
  std::vector<RbfJet3<Real>> basis(bases());
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      const double center = domain_.center[j];
      const double r = domain_.half_width[j];
      for (int l = 0; l < bases(); ++l) {
        const std::size_t k = soa(j, l, i);
        const double offset = std::abs(static_cast<double>(shifts_[k]) - center);
        const double h = bandwidths_[k];
        terms.constraint += std::max(offset - r, 0.0) + std::max(std::abs(h) - std::abs(r - offset), 0.0);
      }
      Jet1<Real> factor;
      factor_with_basis(i, j, static_cast<Real>(center + r), factor, basis.data());
      terms.boundary += factor.v;
      factor_with_basis(i, j, static_cast<Real>(center - r), factor, basis.data());
      terms.boundary += factor.v;
    }
  }
  return terms;
}

template <class Real>
void TrbfnModel<Real>::accumulate_penalty_gradient(Real w_constraint, Real w_boundary, std::span<Real> grad) const {
  require_fresh();
  std::vector<RbfJet3<Real>> basis(bases());
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      const double center = domain_.center[j];
      const double r = domain_.half_width[j];
      if (w_constraint != Real(0)) {
        for (int l = 0; l < bases(); ++l) {
          const std::size_t k = soa(j, l, i);
          const double diff = static_cast<double>(shifts_[k]) - center;
          const double offset = std::abs(diff);
          const double h = bandwidths_[k];
          double ds = 0.0;
          double dh = 0.0;
          if (offset - r > 0.0) {
            ds += sign_of(diff);
          }
          if (std::abs(h) - std::abs(r - offset) > 0.0) {
            dh += sign_of(h);
            ds += sign_of(r - offset) * sign_of(diff);
          }
          grad[acc_shift(i, j, l)] += w_constraint * static_cast<Real>(ds);
          grad[acc_bandwidth(i, j, l)] += w_constraint * static_cast<Real>(dh);
        }
      }
      if (w_boundary != Real(0)) {
        const Jet1<Real> unit{w_boundary, Real(0), Real(0)};
        for (const double edge : {center + r, center - r}) {
          Jet1<Real> factor;
          const Real t = static_cast<Real>(edge);
          factor_with_basis(i, j, t, factor, basis.data());
          chain_factor_adjoint(i, j, t, unit, basis.data(), grad);
        }
      }
    }
  }
}

template <class Real>
void TrbfnModel<Real>::finalize_gradient(std::span<Real> grad) const {
  require_fresh();
  const std::vector<Real> acc(grad.begin(), grad.end());
  Real mean = Real(0);
  for (int i = 0; i < rank_; ++i) mean += weights_[i] * acc[i];
  for (int i = 0; i < rank_; ++i) grad[weight_index(i)] = weights_[i] * (acc[i] - mean);
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      Real alpha_mean = Real(0);
      for (int l = 0; l < bases(); ++l) alpha_mean += alpha(i, j, l) * acc[acc_alpha(i, j, l)];
      for (int l = 0; l < bases(); ++l) {
        grad[alpha_index(i, j, l)] = alpha(i, j, l) * (acc[acc_alpha(i, j, l)] - alpha_mean);
        grad[shift_index(i, j, l)] = acc[acc_shift(i, j, l)];
        grad[log_bandwidth_index(i, j, l)] = acc[acc_bandwidth(i, j, l)] * bandwidth(i, j, l);
      }
    }
  }
}

template <class Real>
double TrbfnModel<Real>::box_integral(std::span<const double> center, double radius) const {
  require_fresh();
  // The density lives on the domain, so the sub-box is clipped to it.
  std::vector<double> lo(dim()), hi(dim());
  for (int j = 0; j < dim(); ++j) {
    lo[j] = std::max(domain_.lower(j), center[j] - radius);
    hi[j] = std::min(domain_.upper(j), center[j] + radius);
    if (!(hi[j] > lo[j])) return 0.0;
  }
  double total = 0.0;
  for (int i = 0; i < rank_; ++i) {
    double product = weights_[i];
    for (int j = 0; j < dim() && product != 0.0; ++j) {
      double integral = 0.0;
      for (int l = 0; l < bases(); ++l) {
        integral += alpha(i, j, l) * analytic_integral_1d(kinds_[l], shift(i, j, l), bandwidth(i, j, l), lo[j], hi[j]);
      }
      product *= integral;
    }
    total += product;
  }
  return total / z_;
}

template <class Real>
std::vector<std::uint8_t> TrbfnModel<Real>::parameter_groups() const {
  std::vector<std::uint8_t> groups(params_.size(), 0);
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      for (int l = 0; l < bases(); ++l) {
        groups[shift_index(i, j, l)] = 1;
        groups[log_bandwidth_index(i, j, l)] = 1;
      }
    }
  }
  return groups;
}

template class TrbfnModel<float>;
template class TrbfnModel<double>;

}  // namespace tnfp
