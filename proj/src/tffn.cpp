#include "tnfp/tffn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tnfp/errors.hpp"
#include "tnfp/rng.hpp"

namespace tnfp {

void MlpShape::validate() const {
  if (widths.size() < 3 || widths.front() != 1 || widths.back() != 1) {
    throw ConfigError("tffn: layer widths must look like [1, w, ..., w, 1]");
  }
  for (const int w : widths) {
    if (w < 1) {
      throw ConfigError("tffn: layer widths must be positive");
    }
  }
}

std::size_t MlpShape::parameter_count() const {
  std::size_t count = 0;
  for (int l = 1; l <= layers(); ++l) {
    count += static_cast<std::size_t>(widths[l]) * (widths[l - 1] + 1);
  }
  return count;
}

std::size_t MlpShape::weight_offset(int layer) const {
  std::size_t offset = 0;
  for (int l = 1; l < layer; ++l) {
    offset += static_cast<std::size_t>(widths[l]) * (widths[l - 1] + 1);
  }
  return offset;
}

std::size_t MlpShape::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(widths[layer]) * widths[layer - 1];
}

std::size_t MlpShape::unit_count() const {
  std::size_t count = 0;
  for (int l = 1; l <= layers(); ++l) count += widths[l];
  return count;
}

std::size_t MlpShape::unit_offset(int layer) const {
  std::size_t offset = 0;
  for (int l = 1; l < layer; ++l) offset += widths[l];
  return offset;
}

template <class Real>
void MlpTape<Real>::resize(const MlpShape& shape) {
  const std::size_t n = shape.unit_count();
  z.assign(n, Real(0));
  dz.assign(n, Real(0));
  ddz.assign(n, Real(0));
  a.assign(n, Real(0));
  da.assign(n, Real(0));
  dda.assign(n, Real(0));
}

namespace {

// Activation and its first three derivatives at z.
template <class Real>
struct Act3 {
  Real g, g1, g2, g3;
};

template <class Real>
Act3<Real> tanh3(Real z) {
  const Real t = std::tanh(z);
  const Real g1 = Real(1) - t * t;
  return {t, g1, Real(-2) * t * g1, Real(-2) * g1 * (Real(1) - Real(3) * t * t)};
}

template <class Real>
Act3<Real> softplus3(Real z) {
  const Real g = std::max(z, Real(0)) + std::log1p(std::exp(-std::abs(z)));
  const Real s = z >= Real(0) ? Real(1) / (Real(1) + std::exp(-z)) : std::exp(z) / (Real(1) + std::exp(z));
  const Real s1 = s * (Real(1) - s);
  return {g, s, s1, s1 * (Real(1) - Real(2) * s)};
}

template <class Real>
Act3<Real> activation(const MlpShape& shape, int layer, Real z) {
  return layer == shape.layers() ? softplus3(z) : tanh3(z);
}

}  // namespace

template <class Real>
Jet1<Real> mlp_forward2(const MlpShape& shape, std::span<const Real> params, Real x, MlpTape<Real>& tape) {
  if (tape.z.size() < shape.unit_count()) tape.resize(shape);
  tape.x = x;
  const int layers = shape.layers();
  for (int l = 1; l <= layers; ++l) {
    const int out = shape.widths[l];
    const int in = shape.widths[l - 1];
    const Real* w = params.data() + shape.weight_offset(l);
    const Real* b = params.data() + shape.bias_offset(l);
    const std::size_t cur = shape.unit_offset(l);
    for (int o = 0; o < out; ++o) {
      Real z = b[o];
      Real dz = Real(0);
      Real ddz = Real(0);
      if (l == 1) {
        z += w[o] * x;
        dz = w[o];
      } else {
        const std::size_t prev = shape.unit_offset(l - 1);
        const Real* row = w + static_cast<std::size_t>(o) * in;
        for (int p = 0; p < in; ++p) {
          z += row[p] * tape.a[prev + p];
          dz += row[p] * tape.da[prev + p];
          ddz += row[p] * tape.dda[prev + p];
        }
      }
      const Act3<Real> act = activation(shape, l, z);
      tape.z[cur + o] = z;
      tape.dz[cur + o] = dz;
      tape.ddz[cur + o] = ddz;
      tape.a[cur + o] = act.g;
      tape.da[cur + o] = act.g1 * dz;
      tape.dda[cur + o] = act.g2 * dz * dz + act.g1 * ddz;
    }
  }
  const std::size_t last = shape.unit_offset(layers);
  return {tape.a[last], tape.da[last], tape.dda[last]};
}

template <class Real>
Real mlp_forward(const MlpShape& shape, std::span<const Real> params, Real x, std::vector<Real>& scratch) {
  int max_width = 1;
  for (const int w : shape.widths) max_width = std::max(max_width, w);
  scratch.resize(2 * static_cast<std::size_t>(max_width));
  Real* prev = scratch.data();
  Real* cur = scratch.data() + max_width;
  prev[0] = x;
  const int layers = shape.layers();
  for (int l = 1; l <= layers; ++l) {
    const int out = shape.widths[l];
    const int in = shape.widths[l - 1];
    const Real* w = params.data() + shape.weight_offset(l);
    const Real* b = params.data() + shape.bias_offset(l);
    for (int o = 0; o < out; ++o) {
      Real z = b[o];
      const Real* row = w + static_cast<std::size_t>(o) * in;
      for (int p = 0; p < in; ++p) z += row[p] * prev[p];
      if (l == layers) {
        cur[o] = std::max(z, Real(0)) + std::log1p(std::exp(-std::abs(z)));
      } else {
        cur[o] = std::tanh(z);
      }
    }
    std::swap(prev, cur);
  }
  return prev[0];
}

template <class Real>
void mlp_backward2(const MlpShape& shape, std::span<const Real> params, const MlpTape<Real>& tape,
                   const Jet1<Real>& out_adj, std::span<Real> grad, std::vector<Real>& scratch) {
  int max_width = 1;
  for (const int w : shape.widths) max_width = std::max(max_width, w);
  scratch.resize(6 * static_cast<std::size_t>(max_width));
  // Adjoints of the current layer's activations (a, a', a'') and of the layer below.
  Real* bar = scratch.data();
  Real* bar1 = bar + max_width;
  Real* bar2 = bar1 + max_width;
  Real* below = bar2 + max_width;
  Real* below1 = below + max_width;
  Real* below2 = below1 + max_width;
  bar[0] = out_adj.v;
  bar1[0] = out_adj.d1;
  bar2[0] = out_adj.d2;
  for (int l = shape.layers(); l >= 1; --l) {
    const int out = shape.widths[l];
    const int in = shape.widths[l - 1];
    const Real* w = params.data() + shape.weight_offset(l);
    Real* gw = grad.data() + shape.weight_offset(l);
    Real* gb = grad.data() + shape.bias_offset(l);
    const std::size_t cur = shape.unit_offset(l);
    if (l > 1) {
      std::fill(below, below + in, Real(0));
      std::fill(below1, below1 + in, Real(0));
      std::fill(below2, below2 + in, Real(0));
    }
    for (int o = 0; o < out; ++o) {
      const Act3<Real> act = activation(shape, l, tape.z[cur + o]);
      const Real dz = tape.dz[cur + o];
      const Real ddz = tape.ddz[cur + o];
      const Real zbar2 = bar2[o] * act.g1;
      const Real zbar1 = bar1[o] * act.g1 + Real(2) * bar2[o] * act.g2 * dz;
      const Real zbar = bar[o] * act.g1 + bar1[o] * act.g2 * dz + bar2[o] * (act.g3 * dz * dz + act.g2 * ddz);
      gb[o] += zbar;
      Real* grow = gw + static_cast<std::size_t>(o) * in;
      if (l == 1) {
        // input jet (x, 1, 0)
        grow[0] += zbar * tape.x + zbar1;
      } else {
        const std::size_t prev = shape.unit_offset(l - 1);
        const Real* row = w + static_cast<std::size_t>(o) * in;
        for (int p = 0; p < in; ++p) {
          grow[p] += zbar * tape.a[prev + p] + zbar1 * tape.da[prev + p] + zbar2 * tape.dda[prev + p];
          below[p] += row[p] * zbar;
          below1[p] += row[p] * zbar1;
          below2[p] += row[p] * zbar2;
        }
      }
    }
    if (l > 1) {
      std::swap(bar, below);
      std::swap(bar1, below1);
      std::swap(bar2, below2);
    }
  }
}

Jet1<double> envelope_1d(double center, double half_width, double t) {
  const double u = (t - center) / half_width;
  const double w = 1.0 - u * u;
  if (w <= 0.0) {
    return {0.0, 0.0, 0.0};
  }
  return {w * w * w, -6.0 * u * w * w / half_width, -6.0 * w * (w - 4.0 * u * u) / (half_width * half_width)};
}

EnvelopeValue envelope(const Domain& domain, std::span<const double> x) {
  const int d = domain.dim();
  std::vector<Jet1<double>> factors(d);
  for (int j = 0; j < d; ++j) {
    factors[j] = envelope_1d(domain.center[j], domain.half_width[j], x[j]);
  }
  EnvelopeValue out;
  out.gradient.assign(d, 0.0);
  out.hessian.assign(static_cast<std::size_t>(d) * d, 0.0);
  TensorJetAssembler<double> assembler(d);
  assembler.add_rank(1.0, factors, out.value, out.gradient, out.hessian);
  return out;
}

namespace {

// Softplus and tanh with derivatives for a whole lane array.
template <class Real>
void activate(bool output, const Real* z, int n, Real* g, Real* g1, Real* g2, Real* g3) {
  if (output) {
    for (int k = 0; k < n; ++k) {
      const Act3<Real> act = softplus3(z[k]);
      g[k] = act.g;
      g1[k] = act.g1;
      g2[k] = act.g2;
      g3[k] = act.g3;
    }
    return;
  }
  for (int k = 0; k < n; ++k) {
    const Real t = std::tanh(z[k]);
    const Real s = Real(1) - t * t;
    g[k] = t;
    g1[k] = s;
    g2[k] = Real(-2) * t * s;
    g3[k] = Real(-2) * s * (Real(1) - Real(3) * t * t);
  }
}

}  // namespace

template <class Real>
TffnModel<Real>::Workspace::Workspace(const TffnModel& model) {
  const int d = model.dim();
  const std::size_t n = model.rank();
  const std::size_t units = model.shape().unit_count() * n;
  tapes.resize(d);
  for (Tape& t : tapes) {
    for (auto* v : {&t.a, &t.da, &t.dda, &t.dz, &t.ddz, &t.g1, &t.g2, &t.g3}) v->assign(units, Real(0));
  }
  ev.resize(d);
  ed1.resize(d);
  ed2.resize(d);
  for (auto* v : {&kv, &kd1, &kd2, &fv, &fd1, &fd2, &av, &ad1, &ad2}) v->assign(d * n, Real(0));
  point.resize(d);
  blocks.resize(d, model.rank(), d <= 4 ? 64 : 16);
}

template <class Real>
TffnModel<Real>::TffnModel(Domain domain, int rank, MlpShape shape, int quad_panels, int quad_points)
    : domain_(std::move(domain)), rank_(rank), shape_(std::move(shape)), panels_(quad_panels), points_(quad_points) {
  domain_.validate();
  shape_.validate();
  if (rank_ < 1) {
    throw ConfigError("tffn: rank must be positive");
  }
  if (panels_ < 1 || points_ < 1) {
    throw ConfigError("tffn: quadrature needs at least one panel and one point");
  }
  params_.assign(static_cast<std::size_t>(rank_) * dim() * shape_.parameter_count(), Real(0));
  ones_.assign(rank_, Real(1));
}

template <class Real>
TffnModel<Real> TffnModel<Real>::initialize(Domain domain, int rank, MlpShape shape, std::uint64_t seed,
                                            int quad_panels, int quad_points) {
  TffnModel model(std::move(domain), rank, std::move(shape), quad_panels, quad_points);
  Philox rng(seed, stream_id("init-tffn"));
  std::span<Real> raw = model.mutable_params();
  const MlpShape& s = model.shape();
  for (int i = 0; i < model.rank(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      const std::size_t base = model.factor_offset(i, j);
      for (int l = 1; l <= s.layers(); ++l) {
        const int out = s.widths[l];
        const int in = s.widths[l - 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (int k = 0; k < out * in; ++k) {
          raw[base + s.weight_offset(l) + k] = static_cast<Real>(rng.uniform(-limit, limit));
        }
      }
    }
  }
  model.refresh();
  return model;
}

template <class Real>
std::size_t TffnModel<Real>::max_width() const noexcept {
  return static_cast<std::size_t>(*std::max_element(shape_.widths.begin(), shape_.widths.end()));
}

template <class Real>
void TffnModel<Real>::forward_values(int j, Real t, Real* out, std::vector<Real>& scratch) const {
  const std::size_t n = rank_;
  const std::size_t width = max_width();
  scratch.resize(3 * width * n);
  Real* prev = scratch.data();
  Real* cur = prev + width * n;
  Real* z = cur + width * n;
  const int layers = shape_.layers();
  for (int l = 1; l <= layers; ++l) {
    const int out_w = shape_.widths[l];
    const int in_w = shape_.widths[l - 1];
    const Real* w = packed_.data() + packed(j, shape_.weight_offset(l));
    const Real* b = packed_.data() + packed(j, shape_.bias_offset(l));
    for (int o = 0; o < out_w; ++o) {
      Real* zo = z;
      const Real* bo = b + o * n;
      if (l == 1) {
        const Real* wo = w + o * n;
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) zo[k] = wo[k] * t + bo[k];
      } else {
        std::copy(bo, bo + n, zo);
        for (int p = 0; p < in_w; ++p) {
          const Real* wp = w + (static_cast<std::size_t>(o) * in_w + p) * n;
          const Real* ap = prev + p * n;
#pragma omp simd
          for (std::size_t k = 0; k < n; ++k) zo[k] += wp[k] * ap[k];
        }
      }
      Real* co = l == layers ? out : cur + o * n;
      if (l == layers) {
        for (std::size_t k = 0; k < n; ++k) co[k] = std::max(zo[k], Real(0)) + std::log1p(std::exp(-std::abs(zo[k])));
      } else {
        for (std::size_t k = 0; k < n; ++k) co[k] = std::tanh(zo[k]);
      }
    }
    std::swap(prev, cur);
  }
}

template <class Real>
void TffnModel<Real>::forward_jets(int j, Real t, typename Workspace::Tape& tape, Real* kv, Real* kd1,
                                   Real* kd2) const {
  const std::size_t n = rank_;
  const int layers = shape_.layers();
  tape.z.resize(n);
  std::vector<Real>& z = tape.z;
  for (int l = 1; l <= layers; ++l) {
    const int out_w = shape_.widths[l];
    const int in_w = shape_.widths[l - 1];
    const Real* w = packed_.data() + packed(j, shape_.weight_offset(l));
    const Real* b = packed_.data() + packed(j, shape_.bias_offset(l));
    const std::size_t cur = shape_.unit_offset(l) * n;
    const std::size_t prev = l > 1 ? shape_.unit_offset(l - 1) * n : 0;
    for (int o = 0; o < out_w; ++o) {
      const std::size_t u = cur + o * n;
      Real* dz = tape.dz.data() + u;
      Real* ddz = tape.ddz.data() + u;
      const Real* bo = b + o * n;
      if (l == 1) {
        const Real* wo = w + o * n;
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) {
          z[k] = wo[k] * t + bo[k];
          dz[k] = wo[k];
          ddz[k] = Real(0);
        }
      } else {
        std::copy(bo, bo + n, z.begin());
        std::fill(dz, dz + n, Real(0));
        std::fill(ddz, ddz + n, Real(0));
        for (int p = 0; p < in_w; ++p) {
          const Real* wp = w + (static_cast<std::size_t>(o) * in_w + p) * n;
          const Real* a = tape.a.data() + prev + p * n;
          const Real* da = tape.da.data() + prev + p * n;
          const Real* dda = tape.dda.data() + prev + p * n;
          Real* zk = z.data();
#pragma omp simd
          for (std::size_t k = 0; k < n; ++k) {
            zk[k] += wp[k] * a[k];
            dz[k] += wp[k] * da[k];
            ddz[k] += wp[k] * dda[k];
          }
        }
      }
      Real* g = tape.a.data() + u;
      Real* g1 = tape.g1.data() + u;
      Real* g2 = tape.g2.data() + u;
      Real* g3 = tape.g3.data() + u;
      activate(l == layers, z.data(), static_cast<int>(n), g, g1, g2, g3);
      Real* da = tape.da.data() + u;
      Real* dda = tape.dda.data() + u;
#pragma omp simd
      for (std::size_t k = 0; k < n; ++k) {
        da[k] = g1[k] * dz[k];
        dda[k] = g2[k] * dz[k] * dz[k] + g1[k] * ddz[k];
      }
    }
  }
  const std::size_t last = shape_.unit_offset(layers) * n;
  std::copy_n(tape.a.data() + last, n, kv);
  std::copy_n(tape.da.data() + last, n, kd1);
  std::copy_n(tape.dda.data() + last, n, kd2);
}

template <class Real>
void TffnModel<Real>::backward_jets(int j, Real t, const typename Workspace::Tape& tape, const Real* bv,
                                    const Real* b1, const Real* b2, std::span<Real> grad,
                                    std::vector<Real>& scratch) const {
  const std::size_t n = rank_;
  const std::size_t width = max_width();
  scratch.resize(9 * width * n);
  // Adjoints of (a, a', a'') for the current layer and the layer below, then (z, z', z'') of one unit.
  Real* bar = scratch.data();
  Real* bar1 = bar + width * n;
  Real* bar2 = bar1 + width * n;
  Real* below = bar2 + width * n;
  Real* below1 = below + width * n;
  Real* below2 = below1 + width * n;
  Real* zb = below2 + width * n;
  Real* zb1 = zb + width * n;
  Real* zb2 = zb1 + width * n;
  std::copy_n(bv, n, bar);
  std::copy_n(b1, n, bar1);
  std::copy_n(b2, n, bar2);
  for (int l = shape_.layers(); l >= 1; --l) {
    const int out_w = shape_.widths[l];
    const int in_w = shape_.widths[l - 1];
    const Real* w = packed_.data() + packed(j, shape_.weight_offset(l));
    Real* gw = grad.data() + packed(j, shape_.weight_offset(l));
    Real* gb = grad.data() + packed(j, shape_.bias_offset(l));
    const std::size_t cur = shape_.unit_offset(l) * n;
    const std::size_t prev = l > 1 ? shape_.unit_offset(l - 1) * n : 0;
    if (l > 1) {
      std::fill(below, below + in_w * n, Real(0));
      std::fill(below1, below1 + in_w * n, Real(0));
      std::fill(below2, below2 + in_w * n, Real(0));
    }
    for (int o = 0; o < out_w; ++o) {
      const std::size_t u = cur + o * n;
      const Real* g1 = tape.g1.data() + u;
      const Real* g2 = tape.g2.data() + u;
      const Real* g3 = tape.g3.data() + u;
      const Real* dz = tape.dz.data() + u;
      const Real* ddz = tape.ddz.data() + u;
      const Real* bo = bar + o * n;
      const Real* bo1 = bar1 + o * n;
      const Real* bo2 = bar2 + o * n;
      Real* gbo = gb + o * n;
#pragma omp simd
      for (std::size_t k = 0; k < n; ++k) {
        zb2[k] = bo2[k] * g1[k];
        zb1[k] = bo1[k] * g1[k] + Real(2) * bo2[k] * g2[k] * dz[k];
        zb[k] = bo[k] * g1[k] + bo1[k] * g2[k] * dz[k] + bo2[k] * (g3[k] * dz[k] * dz[k] + g2[k] * ddz[k]);
        gbo[k] += zb[k];
      }
      if (l == 1) {
        // input jet (t, 1, 0)
        Real* gwo = gw + o * n;
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) gwo[k] += zb[k] * t + zb1[k];
        continue;
      }
      for (int p = 0; p < in_w; ++p) {
        const std::size_t wo = (static_cast<std::size_t>(o) * in_w + p) * n;
        const Real* wp = w + wo;
        Real* gwp = gw + wo;
        const Real* a = tape.a.data() + prev + p * n;
        const Real* da = tape.da.data() + prev + p * n;
        const Real* dda = tape.dda.data() + prev + p * n;
        Real* lp = below + p * n;
        Real* lp1 = below1 + p * n;
        Real* lp2 = below2 + p * n;
#pragma omp simd
        for (std::size_t k = 0; k < n; ++k) {
          gwp[k] += zb[k] * a[k] + zb1[k] * da[k] + zb2[k] * dda[k];
          lp[k] += wp[k] * zb[k];
          lp1[k] += wp[k] * zb1[k];
          lp2[k] += wp[k] * zb2[k];
        }
      }
    }
    if (l > 1) {
      std::swap(bar, below);
      std::swap(bar1, below1);
      std::swap(bar2, below2);
    }
  }
}

template <class Real>
void TffnModel<Real>::integrate_factors(int j, double a, double b, int panels, int points,
                                        std::vector<double>& out) const {
  const CompositeRule rule = composite_rule(a, b, panels, points);
  out.assign(rank_, 0.0);
  std::vector<Real> values(rank_);
  std::vector<Real> scratch;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double env = envelope_1d(domain_.center[j], domain_.half_width[j], rule.nodes[q]).v;
    if (env == 0.0) continue;
    forward_values(j, static_cast<Real>(rule.nodes[q]), values.data(), scratch);
    const double weight = rule.weights[q] * env;
    for (int i = 0; i < rank_; ++i) out[i] += weight * values[i];
  }
}

template <class Real>
void TffnModel<Real>::refresh() {
  const int d = dim();
  const std::size_t count = shape_.parameter_count();
  packed_.resize(params_.size());
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < d; ++j) {
      const std::size_t base = factor_offset(i, j);
      for (std::size_t p = 0; p < count; ++p) packed_[packed(j, p) + i] = params_[base + p];
    }
  }
  factor_integrals_.assign(static_cast<std::size_t>(rank_) * d, 0.0);
  std::vector<double> integrals;
  for (int j = 0; j < d; ++j) {
    integrate_factors(j, domain_.lower(j), domain_.upper(j), panels_, points_, integrals);
    for (int i = 0; i < rank_; ++i) factor_integrals_[static_cast<std::size_t>(i) * d + j] = integrals[i];
  }
  double z = 0.0;
  for (int i = 0; i < rank_; ++i) {
    double product = 1.0;
    for (int j = 0; j < d; ++j) product *= factor_integrals_[static_cast<std::size_t>(i) * d + j];
    z += product;
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw ParameterError("tffn: degenerate normalization constant Z = " + std::to_string(z));
  }
  z_ = z;
  inv_z_ = static_cast<Real>(1.0 / z);
  fresh_ = true;
}

template <class Real>
void TffnModel<Real>::require_fresh() const {
  if (!fresh_) {
    throw std::logic_error("tffn: stale normalization cache, call refresh() after changing parameters");
  }
}

template <class Real>
double TffnModel<Real>::normalization() const {
  require_fresh();
  return z_;
}

template <class Real>
double TffnModel<Real>::normalization_with(int panels, int points) const {
  require_fresh();
  const int d = dim();
  std::vector<double> products(rank_, 1.0);
  std::vector<double> integrals;
  for (int j = 0; j < d; ++j) {
    integrate_factors(j, domain_.lower(j), domain_.upper(j), panels, points, integrals);
    for (int i = 0; i < rank_; ++i) products[i] *= integrals[i];
  }
  double z = 0.0;
  for (const double v : products) z += v;
  return z;
}

template <class Real>
Real TffnModel<Real>::density(std::span<const double> x, Workspace& ws) const {
  require_fresh();
  const int d = dim();
  const std::size_t n = rank_;
  Real env = Real(1);
  for (int j = 0; j < d; ++j) {
    env *= static_cast<Real>(envelope_1d(domain_.center[j], domain_.half_width[j], x[j]).v);
  }
  if (env == Real(0)) {
    return Real(0);
  }
  Real* product = ws.fv.data();
  std::fill(product, product + n, Real(1));
  for (int j = 0; j < d; ++j) {
    forward_values(j, static_cast<Real>(x[j]), ws.kv.data(), ws.scratch);
    for (std::size_t i = 0; i < n; ++i) product[i] *= ws.kv[i];
  }
  ws.cached = false;
  Real q = Real(0);
  for (std::size_t i = 0; i < n; ++i) q += product[i];
  return q * env * inv_z_;
}

template <class Real>
Real TffnModel<Real>::density(std::span<const double> x) const {
  Workspace ws(*this);
  return density(x, ws);
}

template <class Real>
void TffnModel<Real>::forward_point(std::span<const double> x, Workspace& ws) const {
  const int d = dim();
  const std::size_t n = rank_;
  ws.inside = true;
  for (int j = 0; j < d; ++j) {
    const Jet1<double> e = envelope_1d(domain_.center[j], domain_.half_width[j], x[j]);
    ws.ev[j] = static_cast<Real>(e.v);
    ws.ed1[j] = static_cast<Real>(e.d1);
    ws.ed2[j] = static_cast<Real>(e.d2);
    ws.inside = ws.inside && e.v > 0.0;
  }
  std::copy(x.begin(), x.end(), ws.point.begin());
  ws.cached = true;
  if (!ws.inside) {
    return;
  }
  for (int j = 0; j < d; ++j) {
    const std::size_t off = j * n;
    Real* kv = ws.kv.data() + off;
    Real* kd1 = ws.kd1.data() + off;
    Real* kd2 = ws.kd2.data() + off;
    forward_jets(j, static_cast<Real>(x[j]), ws.tapes[j], kv, kd1, kd2);
    const Real e0 = ws.ev[j];
    const Real e1 = ws.ed1[j];
    const Real e2 = ws.ed2[j];
    Real* fv = ws.fv.data() + off;
    Real* fd1 = ws.fd1.data() + off;
    Real* fd2 = ws.fd2.data() + off;
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      fv[i] = kv[i] * e0;
      fd1[i] = kd1[i] * e0 + kv[i] * e1;
      fd2[i] = kd2[i] * e0 + Real(2) * kd1[i] * e1 + kv[i] * e2;
    }
  }
}

template <class Real>
void TffnModel<Real>::eval_derivs(std::span<const double> x, Real& p, std::span<Real> grad, std::span<Real> hess,
                                  Workspace& ws) const {
  require_fresh();
  const int d = dim();
  forward_point(x, ws);
  std::vector<double> acc(1 + d + static_cast<std::size_t>(d) * d, 0.0);
  if (ws.inside) {
    detail::dispatch_dim(d, [&]<int D>() {
      detail::forward_rank_blocks<Real, D>(d, rank_, ws.fv.data(), ws.fd1.data(), ws.fd2.data(), ones_.data(),
                                           ws.blocks, acc);
    });
  }
  p = static_cast<Real>(acc[0]) * inv_z_;
  for (int a = 0; a < d; ++a) grad[a] = static_cast<Real>(acc[1 + a]) * inv_z_;
  for (int k = 0; k < d * d; ++k) hess[k] = static_cast<Real>(acc[1 + d + k]) * inv_z_;
}

template <class Real>
Real TffnModel<Real>::accumulate_point_gradient(std::span<const double> x, Real wp, std::span<const Real> wg,
                                                std::span<const Real> wh, std::span<Real> grad,
                                                Workspace& ws) const {
  require_fresh();
  if (!ws.cached || !std::equal(x.begin(), x.end(), ws.point.begin())) {
    forward_point(x, ws);
  }
  if (!ws.inside) {
    return Real(0);
  }
  const int d = dim();
  const std::size_t n = rank_;
  const Real contraction = detail::dispatch_dim(d, [&]<int D>() {
    return detail::reverse_rank_blocks<Real, D>(d, rank_, ws.fv.data(), ws.fd1.data(), ws.fd2.data(),
                                                ones_.data(), inv_z_, wp, wg, wh, ws.blocks, ws.av.data(),
                                                ws.ad1.data(), ws.ad2.data());
  });
  for (int j = 0; j < d; ++j) {
    const std::size_t off = j * n;
    const Real e0 = ws.ev[j];
    const Real e1 = ws.ed1[j];
    const Real e2 = ws.ed2[j];
    // Factor adjoints to network-output adjoints, in place.
    Real* gv = ws.av.data() + off;
    Real* g1 = ws.ad1.data() + off;
    Real* g2 = ws.ad2.data() + off;
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      const Real v = gv[i] * e0 + g1[i] * e1 + g2[i] * e2;
      const Real d1 = g1[i] * e0 + Real(2) * g2[i] * e1;
      gv[i] = v;
      g1[i] = d1;
      g2[i] = g2[i] * e0;
    }
    backward_jets(j, static_cast<Real>(x[j]), ws.tapes[j], gv, g1, g2, grad, ws.scratch);
  }
  return contraction * inv_z_;
}

template <class Real>
void TffnModel<Real>::accumulate_normalization_gradient(Real z_adjoint, std::span<Real> grad) const {
  require_fresh();
  const int d = dim();
  const std::size_t n = rank_;
  // bar_ij = z_adjoint * prod_{m != j} I_im
  std::vector<Real> bar(d * n);
  std::vector<double> integrals(d);
  std::vector<double> excl(d);
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < d; ++j) integrals[j] = factor_integral(i, j);
    exclusive_products<double>(integrals, excl);
    for (int j = 0; j < d; ++j) bar[j * n + i] = static_cast<Real>(static_cast<double>(z_adjoint) * excl[j]);
  }
  Workspace ws(*this);
  std::vector<Real> adjoint(n);
  const std::vector<Real> zeros(n, Real(0));
  for (int j = 0; j < d; ++j) {
    const CompositeRule rule = composite_rule(domain_.lower(j), domain_.upper(j), panels_, points_);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double env = envelope_1d(domain_.center[j], domain_.half_width[j], rule.nodes[q]).v;
      const Real weight = static_cast<Real>(rule.weights[q] * env);
      if (weight == Real(0)) continue;
      const Real t = static_cast<Real>(rule.nodes[q]);
      forward_jets(j, t, ws.tapes[j], ws.kv.data(), ws.kd1.data(), ws.kd2.data());
      for (std::size_t i = 0; i < n; ++i) adjoint[i] = bar[j * n + i] * weight;
      backward_jets(j, t, ws.tapes[j], adjoint.data(), zeros.data(), zeros.data(), grad, ws.scratch);
    }
  }
}

template <class Real>
void TffnModel<Real>::finalize_gradient(std::span<Real> grad) const {
  const std::vector<Real> acc(grad.begin(), grad.end());
  const std::size_t count = shape_.parameter_count();
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < dim(); ++j) {
      const std::size_t base = factor_offset(i, j);
      for (std::size_t p = 0; p < count; ++p) grad[base + p] = acc[packed(j, p) + i];
    }
  }
}

template <class Real>
double TffnModel<Real>::box_integral(std::span<const double> center, double radius) const {
  require_fresh();
  std::vector<double> products(rank_, 1.0);
  std::vector<double> integrals;
  for (int j = 0; j < dim(); ++j) {
    const double a = std::max(domain_.lower(j), center[j] - radius);
    const double b = std::min(domain_.upper(j), center[j] + radius);
    if (!(b > a)) {
      return 0.0;
    }
    integrate_factors(j, a, b, panels_, points_, integrals);
    for (int i = 0; i < rank_; ++i) products[i] *= integrals[i];
  }
  double total = 0.0;
  for (const double v : products) total += v;
  return total / z_;
}

template struct MlpTape<float>;
template struct MlpTape<double>;
template Jet1<float> mlp_forward2<float>(const MlpShape&, std::span<const float>, float, MlpTape<float>&);
template Jet1<double> mlp_forward2<double>(const MlpShape&, std::span<const double>, double, MlpTape<double>&);
template float mlp_forward<float>(const MlpShape&, std::span<const float>, float, std::vector<float>&);
template double mlp_forward<double>(const MlpShape&, std::span<const double>, double, std::vector<double>&);
template void mlp_backward2<float>(const MlpShape&, std::span<const float>, const MlpTape<float>&,
                                   const Jet1<float>&, std::span<float>, std::vector<float>&);
template void mlp_backward2<double>(const MlpShape&, std::span<const double>, const MlpTape<double>&,
                                    const Jet1<double>&, std::span<double>, std::vector<double>&);
template class TffnModel<float>;
template class TffnModel<double>;

}  // namespace tnfp
