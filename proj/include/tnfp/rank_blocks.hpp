#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace tnfp::detail {

// Second-order jets over d variables for a block of `n` ranks, stored
// component-major with the rank index fastest: component c of lane k lives
// at jet[c * lanes + k], components ordered (value, gradient, Hessian).
// D > 0 fixes the dimension at compile time, D = 0 uses `d`.
template <class Real, int D>
struct BlockJets {
  int d;
  int lanes;
  int n;

  int dim() const noexcept { return D > 0 ? D : d; }
  std::size_t stride() const noexcept { return 1 + dim() + static_cast<std::size_t>(dim()) * dim(); }

  void set_one(Real* out) const {
    const std::size_t s = stride();
    for (std::size_t c = 0; c < s; ++c) {
      Real* o = out + c * lanes;
      const Real value = c == 0 ? Real(1) : Real(0);
#pragma omp simd
      for (int k = 0; k < n; ++k) o[k] = value;
    }
  }

  // out = in * F with F = (v, d1, d2) a function of coordinate j only.
  void mul_factor(const Real* in, const Real* v, const Real* d1, const Real* d2, int j, Real* out) const {
    const int dd = dim();
    const std::size_t L = lanes;
    for (std::size_t c = 0; c < stride(); ++c) {
      const Real* i_c = in + c * L;
      Real* o_c = out + c * L;
#pragma omp simd
      for (int k = 0; k < n; ++k) o_c[k] = i_c[k] * v[k];
    }
    Real* og = out + (1 + j) * L;
#pragma omp simd
    for (int k = 0; k < n; ++k) og[k] += in[k] * d1[k];
    for (int a = 0; a < dd; ++a) {
      const Real* ig = in + (1 + a) * L;
      Real* oh1 = out + (1 + dd + a * dd + j) * L;
      Real* oh2 = out + (1 + dd + j * dd + a) * L;
#pragma omp simd
      for (int k = 0; k < n; ++k) {
        const Real cross = ig[k] * d1[k];
        oh1[k] += cross;
        oh2[k] += cross;
      }
    }
    Real* ojj = out + (1 + dd + j * dd + j) * L;
#pragma omp simd
    for (int k = 0; k < n; ++k) ojj[k] += in[k] * d2[k];
  }

  // Truncated product of two jets.
  void multiply(const Real* a, const Real* b, Real* out) const {
    const int dd = dim();
    const std::size_t L = lanes;
#pragma omp simd
    for (int k = 0; k < n; ++k) out[k] = a[k] * b[k];
    for (int i = 0; i < dd; ++i) {
      const Real* ag = a + (1 + i) * L;
      const Real* bg = b + (1 + i) * L;
      Real* o = out + (1 + i) * L;
#pragma omp simd
      for (int k = 0; k < n; ++k) o[k] = a[k] * bg[k] + b[k] * ag[k];
    }
    for (int i = 0; i < dd; ++i) {
      const Real* agi = a + (1 + i) * L;
      const Real* bgi = b + (1 + i) * L;
      for (int m = 0; m < dd; ++m) {
        const std::size_t h = 1 + dd + i * dd + m;
        const Real* ah = a + h * L;
        const Real* bh = b + h * L;
        const Real* agm = a + (1 + m) * L;
        const Real* bgm = b + (1 + m) * L;
        Real* o = out + h * L;
#pragma omp simd
        for (int k = 0; k < n; ++k) o[k] = a[k] * bh[k] + b[k] * ah[k] + agi[k] * bgm[k] + bgi[k] * agm[k];
      }
    }
  }

  // dst[k] = wp e_0 + wg . e_g + wh : e_h per lane.
  void contract(const Real* e, Real wp, std::span<const Real> wg, std::span<const Real> wh, Real* dst) const {
    const int dd = dim();
    const std::size_t L = lanes;
#pragma omp simd
    for (int k = 0; k < n; ++k) dst[k] = wp * e[k];
    for (int a = 0; a < dd; ++a) {
      const Real w = wg[a];
      const Real* ea = e + (1 + a) * L;
#pragma omp simd
      for (int k = 0; k < n; ++k) dst[k] += w * ea[k];
    }
    for (int h = 0; h < dd * dd; ++h) {
      const Real w = wh[h];
      if (w == Real(0)) continue;
      const Real* eh = e + (1 + dd + h) * L;
#pragma omp simd
      for (int k = 0; k < n; ++k) dst[k] += w * eh[k];
    }
  }
};

// Scratch for the blocked rank sums over `rank` ranks of d factors.
template <class Real>
struct RankBlockScratch {
  int lanes = 0;
  std::vector<Real> prefix, suffix, excl;
  std::vector<Real> rank_term;  // per rank

  void resize(int d, int rank, int max_lanes) {
    lanes = std::max(1, std::min(max_lanes, rank));
    const std::size_t stride = 1 + d + static_cast<std::size_t>(d) * d;
    prefix.assign((d + 1) * stride * lanes, Real(0));
    suffix.assign((d + 1) * stride * lanes, Real(0));
    excl.assign(stride * lanes, Real(0));
    rank_term.assign(rank, Real(0));
  }
};

// Adds sum_i c_i prod_j F_ij into acc (value, gradient, Hessian; length
// 1 + d + d^2). Factor jets are stored fv[j * rank + i].
template <class Real, int D>
void forward_rank_blocks(int d, int rank, const Real* fv, const Real* fd1, const Real* fd2, const Real* c,
                         RankBlockScratch<Real>& s, std::span<double> acc) {
  BlockJets<Real, D> jets{d, s.lanes, 0};
  const std::size_t stride = jets.stride();
  const std::size_t L = s.lanes;
  for (int i0 = 0; i0 < rank; i0 += s.lanes) {
    jets.n = std::min(s.lanes, rank - i0);
    Real* pre = s.prefix.data();
    jets.set_one(pre);
    for (int j = 0; j < d; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * rank + i0;
      jets.mul_factor(pre + j * stride * L, fv + off, fd1 + off, fd2 + off, j, pre + (j + 1) * stride * L);
    }
    const Real* full = pre + d * stride * L;
    const Real* ci = c + i0;
    for (std::size_t comp = 0; comp < stride; ++comp) {
      const Real* e = full + comp * L;
      Real sum = Real(0);
#pragma omp simd reduction(+ : sum)
      for (int k = 0; k < jets.n; ++k) sum += ci[k] * e[k];
      acc[comp] += sum;
    }
  }
}

// Reverse pass of the contraction wp q + wg . grad q + wh : hess q with
// q = sum_i c_i prod_j F_ij. Writes the factor adjoints scaled by c_i * scale
// into av/ad1/ad2 (layout of fv) and the unscaled per-rank contraction into
// s.rank_term; returns sum_i c_i rank_term_i.
template <class Real, int D>
Real reverse_rank_blocks(int d, int rank, const Real* fv, const Real* fd1, const Real* fd2, const Real* c, Real scale,
                         Real wp, std::span<const Real> wg, std::span<const Real> wh, RankBlockScratch<Real>& s,
                         Real* av, Real* ad1, Real* ad2) {
  BlockJets<Real, D> jets{d, s.lanes, 0};
  const std::size_t stride = jets.stride();
  const std::size_t L = s.lanes;
  Real total = Real(0);
  for (int i0 = 0; i0 < rank; i0 += s.lanes) {
    const int n = std::min(s.lanes, rank - i0);
    jets.n = n;
    Real* pre = s.prefix.data();
    Real* suf = s.suffix.data();
    jets.set_one(pre);
    jets.set_one(suf + d * stride * L);
    for (int j = 0; j < d; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * rank + i0;
      jets.mul_factor(pre + j * stride * L, fv + off, fd1 + off, fd2 + off, j, pre + (j + 1) * stride * L);
    }
    for (int j = d - 1; j >= 0; --j) {
      const std::size_t off = static_cast<std::size_t>(j) * rank + i0;
      jets.mul_factor(suf + (j + 1) * stride * L, fv + off, fd1 + off, fd2 + off, j, suf + j * stride * L);
    }
    const Real* ci = c + i0;
    for (int j = 0; j < d; ++j) {
      jets.multiply(pre + j * stride * L, suf + (j + 1) * stride * L, s.excl.data());
      const Real* e = s.excl.data();
      const std::size_t off = static_cast<std::size_t>(j) * rank + i0;
      Real* bv = av + off;
      Real* b1 = ad1 + off;
      Real* b2 = ad2 + off;
      jets.contract(e, wp, wg, wh, bv);
      const Real wgj = wg[j];
      const Real whjj = wh[j * d + j];
#pragma omp simd
      for (int k = 0; k < n; ++k) {
        b1[k] = wgj * e[k];
        b2[k] = whjj * e[k];
      }
      for (int b = 0; b < d; ++b) {
        const Real w = wh[j * d + b] + wh[b * d + j];
        if (w == Real(0)) continue;
        const Real* eb = e + (1 + b) * L;
#pragma omp simd
        for (int k = 0; k < n; ++k) b1[k] += w * eb[k];
      }
#pragma omp simd
      for (int k = 0; k < n; ++k) {
        const Real w = ci[k] * scale;
        bv[k] *= w;
        b1[k] *= w;
        b2[k] *= w;
      }
    }
    Real* rt = s.rank_term.data() + i0;
    jets.contract(pre + d * stride * L, wp, wg, wh, rt);
    Real block_total = Real(0);
#pragma omp simd reduction(+ : block_total)
    for (int k = 0; k < n; ++k) block_total += ci[k] * rt[k];
    total += block_total;
  }
  return total;
}

// Calls f.template operator()<D>() with D the compile-time dimension when one
// of the common sizes applies, 0 otherwise.
template <class F>
decltype(auto) dispatch_dim(int d, F&& f) {
  switch (d) {
    case 1: return f.template operator()<1>();
    case 2: return f.template operator()<2>();
    case 4: return f.template operator()<4>();
    case 6: return f.template operator()<6>();
    case 10: return f.template operator()<10>();
    default: return f.template operator()<0>();
  }
}

}  // namespace tnfp::detail
