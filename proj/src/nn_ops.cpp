#include "didnet/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace didnet {

namespace {

inline void axpy(Real* __restrict y, const Real* __restrict x, Real a,
                 int64_t n) {
#pragma omp simd
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline Real dot(const Real* __restrict a, const Real* __restrict b,
                int64_t n) {
  Real s = 0;
#pragma omp simd reduction(+ : s)
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline Real vsum(const Real* __restrict a, int64_t n) {
  Real s = 0;
#pragma omp simd reduction(+ : s)
  for (int64_t i = 0; i < n; ++i) s += a[i];
  return s;
}

struct ConvDims {
  int64_t C, H, W, n, kh, kw;
  int64_t stride, pad_y, pad_x, OH, OW;
};

ConvDims conv_dims(int64_t C, int64_t H, int64_t W, const ConvKernel& k,
                   int64_t stride, Padding padding) {
  if (k.in_channels() != C)
    throw ShapeError("conv2d: kernel expects " +
                     std::to_string(k.in_channels()) + " channels, input has " +
                     std::to_string(C));
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  ConvDims d;
  d.C = C;
  d.H = H;
  d.W = W;
  d.n = k.out_channels();
  d.kh = k.kh();
  d.kw = k.kw();
  d.stride = stride;
  if (padding == Padding::kSame) {
    d.OH = (H - 1) / stride + 1;
    d.OW = (W - 1) / stride + 1;
    d.pad_y = std::max<int64_t>(0, ((d.OH - 1) * stride + d.kh - H) / 2);
    d.pad_x = std::max<int64_t>(0, ((d.OW - 1) * stride + d.kw - W) / 2);
  } else {
    if (H < d.kh || W < d.kw)
      throw ShapeError("conv2d: input smaller than kernel (valid padding)");
    d.OH = (H - d.kh) / stride + 1;
    d.OW = (W - d.kw) / stride + 1;
    d.pad_y = 0;
    d.pad_x = 0;
  }
  return d;
}

// Output-row range [begin,end) for which iy = oy*stride + ky - pad stays in
// [0, limit).
inline void out_range(int64_t k, int64_t pad, int64_t stride, int64_t limit,
                      int64_t out_limit, int64_t& begin, int64_t& end) {
  const int64_t lo = pad - k;  // need oy*stride >= lo
  begin = lo <= 0 ? 0 : (lo + stride - 1) / stride;
  const int64_t hi = limit - 1 - k + pad;  // need oy*stride <= hi
  end = hi < 0 ? 0 : std::min(out_limit, hi / stride + 1);
  if (begin > end) begin = end;
}

void conv2d_fwd_plane(const Real* __restrict x, const Real* __restrict w,
                      const Real* __restrict b, Real* __restrict y,
                      const ConvDims& d) {
  for (int64_t oc = 0; oc < d.n; ++oc)
    std::fill(y + oc * d.OH * d.OW, y + (oc + 1) * d.OH * d.OW, b[oc]);
  for (int64_t oc = 0; oc < d.n; ++oc) {
    for (int64_t ic = 0; ic < d.C; ++ic) {
      const Real* wk = w + ((oc * d.C + ic) * d.kh) * d.kw;
      const Real* xp = x + ic * d.H * d.W;
      for (int64_t ky = 0; ky < d.kh; ++ky) {
        int64_t oy0, oy1;
        out_range(ky, d.pad_y, d.stride, d.H, d.OH, oy0, oy1);
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const Real* xrow = xp + (oy * d.stride + ky - d.pad_y) * d.W;
          Real* yrow = y + (oc * d.OH + oy) * d.OW;
          for (int64_t kx = 0; kx < d.kw; ++kx) {
            const Real wv = wk[ky * d.kw + kx];
            if (wv == 0) continue;
            int64_t ox0, ox1;
            out_range(kx, d.pad_x, d.stride, d.W, d.OW, ox0, ox1);
            if (d.stride == 1) {
              axpy(yrow + ox0, xrow + ox0 + kx - d.pad_x, wv, ox1 - ox0);
            } else {
              for (int64_t ox = ox0; ox < ox1; ++ox)
                yrow[ox] += wv * xrow[ox * d.stride + kx - d.pad_x];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_plane(const Real* __restrict x, const Real* __restrict w,
                      const Real* __restrict g, Real* __restrict dx,
                      Real* __restrict dw, Real* __restrict db,
                      const ConvDims& d) {
  if (db != nullptr) {
    for (int64_t oc = 0; oc < d.n; ++oc)
      db[oc] += vsum(g + oc * d.OH * d.OW, d.OH * d.OW);
  }
  for (int64_t oc = 0; oc < d.n; ++oc) {
    for (int64_t ic = 0; ic < d.C; ++ic) {
      const Real* wk = w + ((oc * d.C + ic) * d.kh) * d.kw;
      Real* dwk = dw ? dw + ((oc * d.C + ic) * d.kh) * d.kw : nullptr;
      const Real* xp = x + ic * d.H * d.W;
      Real* dxp = dx ? dx + ic * d.H * d.W : nullptr;
      for (int64_t ky = 0; ky < d.kh; ++ky) {
        int64_t oy0, oy1;
        out_range(ky, d.pad_y, d.stride, d.H, d.OH, oy0, oy1);
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const int64_t iy = oy * d.stride + ky - d.pad_y;
          const Real* xrow = xp + iy * d.W;
          Real* dxrow = dxp ? dxp + iy * d.W : nullptr;
          const Real* grow = g + (oc * d.OH + oy) * d.OW;
          for (int64_t kx = 0; kx < d.kw; ++kx) {
            int64_t ox0, ox1;
            out_range(kx, d.pad_x, d.stride, d.W, d.OW, ox0, ox1);
            if (ox1 <= ox0) continue;
            if (dwk != nullptr) {
              Real acc = 0;
              if (d.stride == 1) {
                acc = dot(grow + ox0, xrow + ox0 + kx - d.pad_x, ox1 - ox0);
              } else {
                for (int64_t ox = ox0; ox < ox1; ++ox)
                  acc += grow[ox] * xrow[ox * d.stride + kx - d.pad_x];
              }
              dwk[ky * d.kw + kx] += acc;
            }
            if (dxrow != nullptr) {
              const Real wv = wk[ky * d.kw + kx];
              if (wv == 0) continue;
              if (d.stride == 1) {
                axpy(dxrow + ox0 + kx - d.pad_x, grow + ox0, wv, ox1 - ox0);
              } else {
                for (int64_t ox = ox0; ox < ox1; ++ox)
                  dxrow[ox * d.stride + kx - d.pad_x] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
  }
}

// Bilinear sampling geometry at one fractional position.
struct SampleGeom {
  int64_t i00, i01, i10, i11;  // flat plane indices (clamped when masked out)
  Real m00, m01, m10, m11;     // 0/1 validity masks
  Real ay, ax;                 // fractional parts
};

inline SampleGeom sample_geom(Real py, Real px, int64_t H, int64_t W) {
  SampleGeom s;
  const Real fy = std::floor(py);
  const Real fx = std::floor(px);
  const int64_t y0 = int64_t(fy);
  const int64_t x0 = int64_t(fx);
  s.ay = py - fy;
  s.ax = px - fx;
  const bool y0v = y0 >= 0 && y0 < H;
  const bool y1v = y0 + 1 >= 0 && y0 + 1 < H;
  const bool x0v = x0 >= 0 && x0 < W;
  const bool x1v = x0 + 1 >= 0 && x0 + 1 < W;
  const int64_t cy0 = y0v ? y0 : 0;
  const int64_t cy1 = y1v ? y0 + 1 : 0;
  const int64_t cx0 = x0v ? x0 : 0;
  const int64_t cx1 = x1v ? x0 + 1 : 0;
  s.i00 = cy0 * W + cx0;
  s.i01 = cy0 * W + cx1;
  s.i10 = cy1 * W + cx0;
  s.i11 = cy1 * W + cx1;
  s.m00 = (y0v && x0v) ? 1.0 : 0.0;
  s.m01 = (y0v && x1v) ? 1.0 : 0.0;
  s.m10 = (y1v && x0v) ? 1.0 : 0.0;
  s.m11 = (y1v && x1v) ? 1.0 : 0.0;
  return s;
}

inline Real sample_value(const SampleGeom& s, const Real* plane) {
  const Real w00 = s.m00 * (1 - s.ay) * (1 - s.ax);
  const Real w01 = s.m01 * (1 - s.ay) * s.ax;
  const Real w10 = s.m10 * s.ay * (1 - s.ax);
  const Real w11 = s.m11 * s.ay * s.ax;
  return w00 * plane[s.i00] + w01 * plane[s.i01] + w10 * plane[s.i10] +
         w11 * plane[s.i11];
}

void require_3d(const Tensor& x, const char* op) {
  if (x.rank() != 3)
    throw ShapeError(std::string(op) + ": expected a [C,H,W] tensor");
}

}  // namespace

ConvKernel::ConvKernel(Tensor w, Tensor b) : weights(std::move(w)), bias(std::move(b)) {
  if (weights.rank() != 4)
    throw ShapeError("ConvKernel: weights must be [out,in,kh,kw]");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
    throw ShapeError("ConvKernel: bias must be [out]");
  if (weights.dim(2) % 2 == 0 || weights.dim(3) % 2 == 0)
    throw ShapeError("ConvKernel: kernel dims must be odd");
  check_finite(weights, "ConvKernel.weights");
  check_finite(bias, "ConvKernel.bias");
}

ConvKernel ConvKernel::he_init(int64_t out_ch, int64_t in_ch, int64_t kh,
                               int64_t kw, Rng& rng) {
  const Real fan_in = Real(in_ch * kh * kw);
  const Real limit = std::sqrt(6.0 / fan_in);
  Tensor w = Tensor::uniform({out_ch, in_ch, kh, kw}, -limit, limit, rng);
  Tensor b = Tensor::zeros({out_ch});
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  return ConvKernel(std::move(w), std::move(b));
}

OffsetField::OffsetField(Tensor f) : field(std::move(f)) {
  if (field.rank() != 3 || field.dim(0) % 2 != 0)
    throw ShapeError("OffsetField: expected [2*taps,H,W]");
}

Tensor conv2d(const Tensor& x, const ConvKernel& k, int64_t stride,
              Padding padding) {
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3)
    throw ShapeError("conv2d: input must be [C,H,W] or [N,C,H,W]");
  const int64_t N = batched ? x.dim(0) : 1;
  const int64_t C = x.dim(batched ? 1 : 0);
  const int64_t H = x.dim(batched ? 2 : 1);
  const int64_t W = x.dim(batched ? 3 : 2);
  const ConvDims d = conv_dims(C, H, W, k, stride, padding);

  Tensor out = batched ? make_tensor({N, d.n, d.OH, d.OW})
                       : make_tensor({d.n, d.OH, d.OW});
  const int64_t in_plane = C * H * W;
  const int64_t out_plane = d.n * d.OH * d.OW;
  for (int64_t b = 0; b < N; ++b)
    conv2d_fwd_plane(x.data() + b * in_plane, k.weights.data(), k.bias.data(),
                     out.data() + b * out_plane, d);
  check_finite(out, "conv2d");

  if (should_record({&x, &k.weights, &k.bias})) {
    out.set_requires_grad(true);
    Tensor xv = x, wv = k.weights, bv = k.bias, ov = out;
    Tape::active()->record([xv, wv, bv, ov, d, N, in_plane,
                            out_plane]() mutable {
      if (!ov.has_grad()) return;
      Real* dx = nullptr;
      Real* dw = nullptr;
      Real* db = nullptr;
      if (xv.requires_grad()) {
        xv.ensure_grad();
        dx = xv.grad();
      }
      if (wv.requires_grad()) {
        wv.ensure_grad();
        dw = wv.grad();
      }
      if (bv.requires_grad()) {
        bv.ensure_grad();
        db = bv.grad();
      }
      for (int64_t b = 0; b < N; ++b)
        conv2d_bwd_plane(xv.data() + b * in_plane, wv.data(),
                         ov.grad() + b * out_plane,
                         dx ? dx + b * in_plane : nullptr, dw, db, d);
    });
  }
  return out;
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_3d(x, "conv1x1");
  if (w.rank() != 2) throw ShapeError("conv1x1: weight must be [n,m]");
  const int64_t m = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t n = w.dim(0);
  if (w.dim(1) != m) throw ShapeError("conv1x1: weight in-dim mismatch");
  if (b.rank() != 1 || b.dim(0) != n) throw ShapeError("conv1x1: bias dim");
  const int64_t hw = H * W;

  Tensor out = make_tensor({n, H, W});
  Real* po = out.data();
  const Real* px = x.data();
  const Real* pw = w.data();
  const Real* pb = b.data();
  for (int64_t i = 0; i < n; ++i) {
    Real* yp = po + i * hw;
    std::fill(yp, yp + hw, pb[i]);
    for (int64_t j = 0; j < m; ++j) axpy(yp, px + j * hw, pw[i * m + j], hw);
  }
  check_finite(out, "conv1x1");

  if (should_record({&x, &w, &b})) {
    out.set_requires_grad(true);
    Tensor xv = x, wv = w, bv = b, ov = out;
    Tape::active()->record([xv, wv, bv, ov, n, m, hw]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      const Real* px2 = xv.data();
      const Real* pw2 = wv.data();
      if (bv.requires_grad()) {
        bv.ensure_grad();
        Real* db = bv.grad();
        for (int64_t i = 0; i < n; ++i) db[i] += vsum(g + i * hw, hw);
      }
      if (wv.requires_grad()) {
        wv.ensure_grad();
        Real* dw = wv.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j)
            dw[i * m + j] += dot(g + i * hw, px2 + j * hw, hw);
      }
      if (xv.requires_grad()) {
        xv.ensure_grad();
        Real* dx = xv.grad();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j)
            axpy(dx + j * hw, g + i * hw, pw2[i * m + j], hw);
      }
    });
  }
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& v, const Tensor& b) {
  if (w.rank() != 2 || v.rank() != 1 || b.rank() != 1)
    throw ShapeError("matvec: expected W [n,m], v [m], b [n]");
  const int64_t n = w.dim(0), m = w.dim(1);
  if (v.dim(0) != m || b.dim(0) != n) throw ShapeError("matvec: dim mismatch");
  Tensor out = make_tensor({n});
  const Real* pw = w.data();
  const Real* pv = v.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pb[i] + dot(pw + i * m, pv, m);
  check_finite(out, "matvec");
  if (should_record({&w, &v, &b})) {
    out.set_requires_grad(true);
    Tensor wv = w, vv = v, bv = b, ov = out;
    Tape::active()->record([wv, vv, bv, ov, n, m]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      if (bv.requires_grad()) {
        bv.ensure_grad();
        for (int64_t i = 0; i < n; ++i) bv.grad()[i] += g[i];
      }
      if (wv.requires_grad()) {
        wv.ensure_grad();
        Real* dw = wv.grad();
        const Real* pv2 = vv.data();
        for (int64_t i = 0; i < n; ++i) axpy(dw + i * m, pv2, g[i], m);
      }
      if (vv.requires_grad()) {
        vv.ensure_grad();
        Real* dv = vv.grad();
        const Real* pw2 = wv.data();
        for (int64_t i = 0; i < n; ++i) axpy(dv, pw2 + i * m, g[i], m);
      }
    });
  }
  return out;
}

Tensor bilinear_sample(const Tensor& x, Real py, Real px) {
  require_3d(x, "bilinear_sample");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const SampleGeom s = sample_geom(py, px, H, W);
  Tensor out = make_tensor({C});
  for (int64_t c = 0; c < C; ++c)
    out.data()[c] = sample_value(s, x.data() + c * H * W);
  return out;
}

Tensor deform_conv2d(const Tensor& x, const ConvKernel& k,
                     const OffsetField& offsets) {
  require_3d(x, "deform_conv2d");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (k.in_channels() != C) throw ShapeError("deform_conv2d: channel mismatch");
  const int64_t kh = k.kh(), kw = k.kw(), taps = kh * kw;
  const Tensor& of = offsets.field;
  if (of.rank() != 3 || of.dim(0) != 2 * taps || of.dim(1) != H ||
      of.dim(2) != W)
    throw ShapeError("deform_conv2d: offset field must be [2*kh*kw,H,W]");
  const int64_t n = k.out_channels();
  const int64_t hw = H * W;
  const int64_t cy = (kh - 1) / 2, cx = (kw - 1) / 2;

  // Sampled patches S[ic*taps+t][site]; cached for the backward pass.
  // Corner indices and weights are shared across input channels, so they
  // are expanded once per row into flat arrays.
  auto S = std::make_shared<std::vector<Real>>(size_t(C * taps * hw));
  {
    std::vector<int64_t> ci(size_t(4 * taps * W));
    std::vector<Real> cw(size_t(4 * taps * W));
    const Real* po = of.data();
    const Real* px = x.data();
    Real* ps = S->data();
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t t = 0; t < taps; ++t) {
        const int64_t ky = t / kw, kx = t % kw;
        const Real* dyrow = po + (2 * t) * hw + oy * W;
        const Real* dxrow = po + (2 * t + 1) * hw + oy * W;
        int64_t* cit = ci.data() + 4 * t * W;
        Real* cwt = cw.data() + 4 * t * W;
        for (int64_t ox = 0; ox < W; ++ox) {
          const SampleGeom s =
              sample_geom(Real(oy + ky - cy) + dyrow[ox],
                          Real(ox + kx - cx) + dxrow[ox], H, W);
          cit[4 * ox + 0] = s.i00;
          cit[4 * ox + 1] = s.i01;
          cit[4 * ox + 2] = s.i10;
          cit[4 * ox + 3] = s.i11;
          cwt[4 * ox + 0] = s.m00 * (1 - s.ay) * (1 - s.ax);
          cwt[4 * ox + 1] = s.m01 * (1 - s.ay) * s.ax;
          cwt[4 * ox + 2] = s.m10 * s.ay * (1 - s.ax);
          cwt[4 * ox + 3] = s.m11 * s.ay * s.ax;
        }
      }
      for (int64_t ic = 0; ic < C; ++ic) {
        const Real* plane = px + ic * hw;
        for (int64_t t = 0; t < taps; ++t) {
          Real* srow = ps + (ic * taps + t) * hw + oy * W;
          const int64_t* cit = ci.data() + 4 * t * W;
          const Real* cwt = cw.data() + 4 * t * W;
          for (int64_t ox = 0; ox < W; ++ox)
            srow[ox] = cwt[4 * ox + 0] * plane[cit[4 * ox + 0]] +
                       cwt[4 * ox + 1] * plane[cit[4 * ox + 1]] +
                       cwt[4 * ox + 2] * plane[cit[4 * ox + 2]] +
                       cwt[4 * ox + 3] * plane[cit[4 * ox + 3]];
        }
      }
    }
  }

  Tensor out = make_tensor({n, H, W});
  {
    Real* py2 = out.data();
    const Real* pw = k.weights.data();
    const Real* pb = k.bias.data();
    const Real* ps = S->data();
    const int64_t kdim = C * taps;
    for (int64_t oc = 0; oc < n; ++oc) {
      Real* yp = py2 + oc * hw;
      std::fill(yp, yp + hw, pb[oc]);
      for (int64_t kk = 0; kk < kdim; ++kk)
        axpy(yp, ps + kk * hw, pw[oc * kdim + kk], hw);
    }
  }
  check_finite(out, "deform_conv2d");

  if (should_record({&x, &k.weights, &k.bias, &offsets.field})) {
    out.set_requires_grad(true);
    Tensor xv = x, wv = k.weights, bv = k.bias, fv = of, ov = out;
    Tape::active()->record([xv, wv, bv, fv, ov, S, C, H, W, kh, kw, taps, n,
                            hw, cy, cx]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      const Real* pw = wv.data();
      const Real* ps = S->data();
      const int64_t kdim = C * taps;

      if (bv.requires_grad()) {
        bv.ensure_grad();
        for (int64_t oc = 0; oc < n; ++oc)
          bv.grad()[oc] += vsum(g + oc * hw, hw);
      }
      if (wv.requires_grad()) {
        wv.ensure_grad();
        Real* dw = wv.grad();
        for (int64_t oc = 0; oc < n; ++oc)
          for (int64_t kk = 0; kk < kdim; ++kk)
            dw[oc * kdim + kk] += dot(g + oc * hw, ps + kk * hw, hw);
      }
      const bool need_dx = xv.requires_grad();
      const bool need_doff = fv.requires_grad();
      if (!need_dx && !need_doff) return;

      // dS = W^T G
      std::vector<Real> dS(size_t(kdim * hw), Real(0));
      for (int64_t oc = 0; oc < n; ++oc)
        for (int64_t kk = 0; kk < kdim; ++kk)
          axpy(dS.data() + kk * hw, g + oc * hw, pw[oc * kdim + kk], hw);

      if (need_dx) xv.ensure_grad();
      if (need_doff) fv.ensure_grad();
      Real* dx = need_dx ? xv.grad() : nullptr;
      Real* doff = need_doff ? fv.grad() : nullptr;
      const Real* px = xv.data();
      const Real* po = fv.data();

      std::vector<SampleGeom> geo(size_t(taps * W));
      std::vector<Real> acc_y(static_cast<size_t>(W));
      std::vector<Real> acc_x(static_cast<size_t>(W));
      for (int64_t oy = 0; oy < H; ++oy) {
        for (int64_t t = 0; t < taps; ++t) {
          const int64_t ky = t / kw, kx = t % kw;
          const Real* dyrow = po + (2 * t) * hw + oy * W;
          const Real* dxrow = po + (2 * t + 1) * hw + oy * W;
          for (int64_t ox = 0; ox < W; ++ox)
            geo[size_t(t * W + ox)] =
                sample_geom(Real(oy + ky - cy) + dyrow[ox],
                            Real(ox + kx - cx) + dxrow[ox], H, W);
        }
        // (t, ic, ox) order keeps the dS rows contiguous
        for (int64_t t = 0; t < taps; ++t) {
          const SampleGeom* grow = geo.data() + t * W;
          std::fill(acc_y.begin(), acc_y.end(), Real(0));
          std::fill(acc_x.begin(), acc_x.end(), Real(0));
          for (int64_t ic = 0; ic < C; ++ic) {
            const Real* dSrow = dS.data() + (ic * taps + t) * hw + oy * W;
            const Real* plane = px + ic * hw;
            Real* dplane = dx ? dx + ic * hw : nullptr;
            for (int64_t ox = 0; ox < W; ++ox) {
              const Real v = dSrow[ox];
              if (v == 0) continue;
              const SampleGeom& sg = grow[ox];
              const Real w00 = sg.m00 * (1 - sg.ay) * (1 - sg.ax);
              const Real w01 = sg.m01 * (1 - sg.ay) * sg.ax;
              const Real w10 = sg.m10 * sg.ay * (1 - sg.ax);
              const Real w11 = sg.m11 * sg.ay * sg.ax;
              if (dplane != nullptr) {
                dplane[sg.i00] += v * w00;
                dplane[sg.i01] += v * w01;
                dplane[sg.i10] += v * w10;
                dplane[sg.i11] += v * w11;
              }
              if (doff != nullptr) {
                const Real v00 = sg.m00 * plane[sg.i00];
                const Real v01 = sg.m01 * plane[sg.i01];
                const Real v10 = sg.m10 * plane[sg.i10];
                const Real v11 = sg.m11 * plane[sg.i11];
                acc_y[size_t(ox)] +=
                    v * ((v10 - v00) * (1 - sg.ax) + (v11 - v01) * sg.ax);
                acc_x[size_t(ox)] +=
                    v * ((v01 - v00) * (1 - sg.ay) + (v11 - v10) * sg.ay);
              }
            }
          }
          if (doff != nullptr) {
            Real* doffy = doff + (2 * t) * hw + oy * W;
            Real* doffx = doff + (2 * t + 1) * hw + oy * W;
            for (int64_t ox = 0; ox < W; ++ox) {
              doffy[ox] += acc_y[size_t(ox)];
              doffx[ox] += acc_x[size_t(ox)];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  Tensor out = make_tensor(x.shape());
  const Real* px = x.data();
  Real* po = out.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i)
    po[i] = px[i] >= 0 ? px[i] : slope * px[i];
  check_finite(out, "leaky_relu");
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, slope]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      const Real* px2 = xv.data();
      Real* dx = xv.grad();
      const int64_t m = xv.size();
      for (int64_t i = 0; i < m; ++i)
        dx[i] += px2[i] >= 0 ? g[i] : slope * g[i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = make_tensor(x.shape());
  const Real* px = x.data();
  Real* po = out.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-px[i]));
  check_finite(out, "sigmoid");
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      const Real* s = ov.data();
      Real* dx = xv.grad();
      const int64_t m = xv.size();
      for (int64_t i = 0; i < m; ++i) dx[i] += g[i] * s[i] * (1 - s[i]);
    });
  }
  return out;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     Real eps) {
  require_3d(x, "instance_norm");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t hw = H * W;
  if (hw < 2)
    throw ContractError("instance_norm: spatial extent must have >= 2 elements");
  if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 ||
      beta.dim(0) != C)
    throw ShapeError("instance_norm: gamma/beta must be [C]");

  auto mu = std::make_shared<std::vector<Real>>(size_t(C));
  auto inv = std::make_shared<std::vector<Real>>(size_t(C));
  Tensor out = make_tensor(x.shape());
  const Real* px = x.data();
  const Real* pg = gamma.data();
  const Real* pbt = beta.data();
  Real* po = out.data();
  for (int64_t c = 0; c < C; ++c) {
    const Real* xp = px + c * hw;
    const Real m = vsum(xp, hw) / Real(hw);
    Real var = 0;
    for (int64_t i = 0; i < hw; ++i) {
      const Real d = xp[i] - m;
      var += d * d;
    }
    var /= Real(hw);
    const Real iv = 1.0 / std::sqrt(var + eps);
    (*mu)[size_t(c)] = m;
    (*inv)[size_t(c)] = iv;
    Real* op = po + c * hw;
    for (int64_t i = 0; i < hw; ++i)
      op[i] = pg[c] * ((xp[i] - m) * iv) + pbt[c];
  }
  check_finite(out, "instance_norm");

  if (should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    Tensor xv = x, gv = gamma, bv = beta, ov = out;
    Tape::active()->record([xv, gv, bv, ov, mu, inv, C, hw]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      const Real* px2 = xv.data();
      const Real* pg2 = gv.data();
      Real* dx = nullptr;
      Real* dg = nullptr;
      Real* db = nullptr;
      if (xv.requires_grad()) {
        xv.ensure_grad();
        dx = xv.grad();
      }
      if (gv.requires_grad()) {
        gv.ensure_grad();
        dg = gv.grad();
      }
      if (bv.requires_grad()) {
        bv.ensure_grad();
        db = bv.grad();
      }
      for (int64_t c = 0; c < C; ++c) {
        const Real m = (*mu)[size_t(c)];
        const Real iv = (*inv)[size_t(c)];
        const Real* xp = px2 + c * hw;
        const Real* gp = g + c * hw;
        Real sum_g = 0, sum_gx = 0;
        for (int64_t i = 0; i < hw; ++i) {
          const Real xhat = (xp[i] - m) * iv;
          sum_g += gp[i];
          sum_gx += gp[i] * xhat;
        }
        if (db != nullptr) db[c] += sum_g;
        if (dg != nullptr) dg[c] += sum_gx;
        if (dx != nullptr) {
          const Real mean_g = sum_g / Real(hw);
          const Real mean_gx = sum_gx / Real(hw);
          Real* dxp = dx + c * hw;
          const Real scale = pg2[c] * iv;
          for (int64_t i = 0; i < hw; ++i) {
            const Real xhat = (xp[i] - m) * iv;
            dxp[i] += scale * (gp[i] - mean_g - xhat * mean_gx);
          }
        }
      }
    });
  }
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  require_3d(x, "avg_pool2");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 != 0 || W % 2 != 0)
    throw ShapeError("avg_pool2: spatial dims must be even");
  const int64_t OH = H / 2, OW = W / 2;
  Tensor out = make_tensor({C, OH, OW});
  const Real* px = x.data();
  Real* po = out.data();
  for (int64_t c = 0; c < C; ++c) {
    const Real* xp = px + c * H * W;
    Real* op = po + c * OH * OW;
    for (int64_t i = 0; i < OH; ++i)
      for (int64_t j = 0; j < OW; ++j)
        op[i * OW + j] = 0.25 * (xp[2 * i * W + 2 * j] +
                                 xp[2 * i * W + 2 * j + 1] +
                                 xp[(2 * i + 1) * W + 2 * j] +
                                 xp[(2 * i + 1) * W + 2 * j + 1]);
  }
  check_finite(out, "avg_pool2");
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, C, H, W, OH, OW]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      Real* dx = xv.grad();
      for (int64_t c = 0; c < C; ++c) {
        const Real* gp = g + c * OH * OW;
        Real* dxp = dx + c * H * W;
        for (int64_t i = 0; i < OH; ++i)
          for (int64_t j = 0; j < OW; ++j) {
            const Real v = 0.25 * gp[i * OW + j];
            dxp[2 * i * W + 2 * j] += v;
            dxp[2 * i * W + 2 * j + 1] += v;
            dxp[(2 * i + 1) * W + 2 * j] += v;
            dxp[(2 * i + 1) * W + 2 * j + 1] += v;
          }
      }
    });
  }
  return out;
}

Tensor upsample_nearest2(const Tensor& x) {
  require_3d(x, "upsample_nearest2");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out = make_tensor({C, 2 * H, 2 * W});
  const Real* px = x.data();
  Real* po = out.data();
  for (int64_t c = 0; c < C; ++c) {
    const Real* xp = px + c * H * W;
    Real* op = po + c * 4 * H * W;
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j) {
        const Real v = xp[i * W + j];
        op[(2 * i) * 2 * W + 2 * j] = v;
        op[(2 * i) * 2 * W + 2 * j + 1] = v;
        op[(2 * i + 1) * 2 * W + 2 * j] = v;
        op[(2 * i + 1) * 2 * W + 2 * j + 1] = v;
      }
  }
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, C, H, W]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      Real* dx = xv.grad();
      for (int64_t c = 0; c < C; ++c) {
        const Real* gp = g + c * 4 * H * W;
        Real* dxp = dx + c * H * W;
        for (int64_t i = 0; i < H; ++i)
          for (int64_t j = 0; j < W; ++j)
            dxp[i * W + j] += gp[(2 * i) * 2 * W + 2 * j] +
                              gp[(2 * i) * 2 * W + 2 * j + 1] +
                              gp[(2 * i + 1) * 2 * W + 2 * j] +
                              gp[(2 * i + 1) * 2 * W + 2 * j + 1];
      }
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_3d(x, "global_avg_pool");
  const int64_t C = x.dim(0), hw = x.dim(1) * x.dim(2);
  Tensor out = make_tensor({C});
  for (int64_t c = 0; c < C; ++c)
    out.data()[c] = vsum(x.data() + c * hw, hw) / Real(hw);
  check_finite(out, "global_avg_pool");
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, C, hw]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      Real* dx = xv.grad();
      for (int64_t c = 0; c < C; ++c) {
        const Real v = g[c] / Real(hw);
        Real* dxp = dx + c * hw;
        for (int64_t i = 0; i < hw; ++i) dxp[i] += v;
      }
    });
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  const int64_t H = xs[0].dim(1), W = xs[0].dim(2);
  int64_t C = 0;
  for (const Tensor& t : xs) {
    require_3d(t, "concat_channels");
    if (t.dim(1) != H || t.dim(2) != W)
      throw ShapeError("concat_channels: spatial dims differ");
    C += t.dim(0);
  }
  Tensor out = make_tensor({C, H, W});
  Real* po = out.data();
  int64_t off = 0;
  for (const Tensor& t : xs) {
    std::memcpy(po + off, t.data(), size_t(t.size()) * sizeof(Real));
    off += t.size();
  }
  bool rec = false;
  for (const Tensor& t : xs)
    if (t.requires_grad()) rec = true;
  if (rec && Tape::active() != nullptr) {
    out.set_requires_grad(true);
    std::vector<Tensor> ins = xs;
    Tensor ov = out;
    Tape::active()->record([ins, ov]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      int64_t off2 = 0;
      for (Tensor& t : ins) {
        if (t.requires_grad()) {
          t.ensure_grad();
          Real* dt = t.grad();
          const int64_t n = t.size();
          for (int64_t i = 0; i < n; ++i) dt[i] += g[off2 + i];
        }
        off2 += t.size();
      }
    });
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end) {
  require_3d(x, "slice_channels");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (begin < 0 || end > C || begin >= end)
    throw ShapeError("slice_channels: bad channel range");
  const int64_t hw = H * W;
  Tensor out = make_tensor({end - begin, H, W});
  std::memcpy(out.data(), x.data() + begin * hw,
              size_t(out.size()) * sizeof(Real));
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, begin, hw]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      Real* dx = xv.grad() + begin * hw;
      const int64_t n = ov.size();
      for (int64_t i = 0; i < n; ++i) dx[i] += g[i];
    });
  }
  return out;
}

Tensor crop_spatial(const Tensor& x, int64_t y0, int64_t x0, int64_t h,
                    int64_t w) {
  require_3d(x, "crop_spatial");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > H || x0 + w > W)
    throw ShapeError("crop_spatial: window out of range");
  Tensor out = make_tensor({C, h, w});
  const Real* px = x.data();
  Real* po = out.data();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < h; ++i)
      std::memcpy(po + (c * h + i) * w, px + (c * H + y0 + i) * W + x0,
                  size_t(w) * sizeof(Real));
  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tensor xv = x, ov = out;
    Tape::active()->record([xv, ov, C, H, W, y0, x0, h, w]() mutable {
      if (!ov.has_grad()) return;
      xv.ensure_grad();
      const Real* g = ov.grad();
      Real* dx = xv.grad();
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w; ++j)
            dx[(c * H + y0 + i) * W + x0 + j] += g[(c * h + i) * w + j];
    });
  }
  return out;
}

Tensor residual_block(const Tensor& x, const ConvKernel& k1,
                      const ConvKernel& k2, Real slope) {
  Tensor h = conv2d(x, k1, 1, Padding::kSame);
  h = leaky_relu(h, slope);
  h = conv2d(h, k2, 1, Padding::kSame);
  return add(x, h);
}

}  // namespace didnet
