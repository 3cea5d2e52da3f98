#include "didnet/wavelet.hpp"

#include <cmath>

namespace didnet {

namespace {

void require_even_3d(const Tensor& x, const char* op) {
  if (x.rank() != 3)
    throw ShapeError(std::string(op) + ": expected [C,H,W]");
  if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0)
    throw ShapeError(std::string(op) + ": spatial dims must be even");
}

}  // namespace

WaveletCoeffs dwt2_haar(const Tensor& x) {
  require_even_3d(x, "dwt2_haar");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t OH = H / 2, OW = W / 2;
  WaveletCoeffs c;
  c.ll = make_tensor({C, OH, OW});
  c.lh = make_tensor({C, OH, OW});
  c.hl = make_tensor({C, OH, OW});
  c.hh = make_tensor({C, OH, OW});
  const Real* px = x.data();
  Real* pll = c.ll.data();
  Real* plh = c.lh.data();
  Real* phl = c.hl.data();
  Real* phh = c.hh.data();
  for (int64_t ch = 0; ch < C; ++ch) {
    const Real* xp = px + ch * H * W;
    const int64_t base = ch * OH * OW;
    for (int64_t i = 0; i < OH; ++i) {
      const Real* r0 = xp + 2 * i * W;
      const Real* r1 = r0 + W;
      for (int64_t j = 0; j < OW; ++j) {
        const Real a = r0[2 * j], b = r0[2 * j + 1];
        const Real cc = r1[2 * j], d = r1[2 * j + 1];
        const int64_t o = base + i * OW + j;
        pll[o] = 0.5 * (a + b + cc + d);
        plh[o] = 0.5 * (a + b - cc - d);
        phl[o] = 0.5 * (a - b + cc - d);
        phh[o] = 0.5 * (a - b - cc + d);
      }
    }
  }
  if (should_record({&x})) {
    c.ll.set_requires_grad(true);
    c.lh.set_requires_grad(true);
    c.hl.set_requires_grad(true);
    c.hh.set_requires_grad(true);
    Tensor xv = x;
    WaveletCoeffs cv = c;
    Tape::active()->record([xv, cv, C, H, W, OH, OW]() mutable {
      const bool gll = cv.ll.has_grad(), glh = cv.lh.has_grad();
      const bool ghl = cv.hl.has_grad(), ghh = cv.hh.has_grad();
      if (!(gll || glh || ghl || ghh)) return;
      xv.ensure_grad();
      Real* dx = xv.grad();
      for (int64_t ch = 0; ch < C; ++ch) {
        Real* dxp = dx + ch * H * W;
        const int64_t base = ch * OH * OW;
        for (int64_t i = 0; i < OH; ++i) {
          Real* r0 = dxp + 2 * i * W;
          Real* r1 = r0 + W;
          for (int64_t j = 0; j < OW; ++j) {
            const int64_t o = base + i * OW + j;
            const Real vll = gll ? cv.ll.grad()[o] : 0;
            const Real vlh = glh ? cv.lh.grad()[o] : 0;
            const Real vhl = ghl ? cv.hl.grad()[o] : 0;
            const Real vhh = ghh ? cv.hh.grad()[o] : 0;
            r0[2 * j] += 0.5 * (vll + vlh + vhl + vhh);
            r0[2 * j + 1] += 0.5 * (vll + vlh - vhl - vhh);
            r1[2 * j] += 0.5 * (vll - vlh + vhl - vhh);
            r1[2 * j + 1] += 0.5 * (vll - vlh - vhl + vhh);
          }
        }
      }
    });
  }
  return c;
}

Tensor idwt2_haar(const WaveletCoeffs& c) {
  const auto& s = c.ll.shape();
  if (c.lh.shape() != s || c.hl.shape() != s || c.hh.shape() != s)
    throw ShapeError("idwt2_haar: subband shapes differ");
  if (c.ll.rank() != 3) throw ShapeError("idwt2_haar: expected [C,H/2,W/2]");
  const int64_t C = s[0], OH = s[1], OW = s[2];
  const int64_t H = 2 * OH, W = 2 * OW;
  Tensor x = make_tensor({C, H, W});
  const Real* pll = c.ll.data();
  const Real* plh = c.lh.data();
  const Real* phl = c.hl.data();
  const Real* phh = c.hh.data();
  Real* px = x.data();
  for (int64_t ch = 0; ch < C; ++ch) {
    Real* xp = px + ch * H * W;
    const int64_t base = ch * OH * OW;
    for (int64_t i = 0; i < OH; ++i) {
      Real* r0 = xp + 2 * i * W;
      Real* r1 = r0 + W;
      for (int64_t j = 0; j < OW; ++j) {
        const int64_t o = base + i * OW + j;
        const Real vll = pll[o], vlh = plh[o], vhl = phl[o], vhh = phh[o];
        r0[2 * j] = 0.5 * (vll + vlh + vhl + vhh);
        r0[2 * j + 1] = 0.5 * (vll + vlh - vhl - vhh);
        r1[2 * j] = 0.5 * (vll - vlh + vhl - vhh);
        r1[2 * j + 1] = 0.5 * (vll - vlh - vhl + vhh);
      }
    }
  }
  if (should_record({&c.ll, &c.lh, &c.hl, &c.hh})) {
    x.set_requires_grad(true);
    WaveletCoeffs cv = c;
    Tensor xv = x;
    Tape::active()->record([cv, xv, C, H, W, OH, OW]() mutable {
      if (!xv.has_grad()) return;
      const Real* g = xv.grad();
      Real* dll = cv.ll.requires_grad() ? (cv.ll.ensure_grad(), cv.ll.grad())
                                        : nullptr;
      Real* dlh = cv.lh.requires_grad() ? (cv.lh.ensure_grad(), cv.lh.grad())
                                        : nullptr;
      Real* dhl = cv.hl.requires_grad() ? (cv.hl.ensure_grad(), cv.hl.grad())
                                        : nullptr;
      Real* dhh = cv.hh.requires_grad() ? (cv.hh.ensure_grad(), cv.hh.grad())
                                        : nullptr;
      for (int64_t ch = 0; ch < C; ++ch) {
        const Real* gp = g + ch * H * W;
        const int64_t base = ch * OH * OW;
        for (int64_t i = 0; i < OH; ++i) {
          const Real* r0 = gp + 2 * i * W;
          const Real* r1 = r0 + W;
          for (int64_t j = 0; j < OW; ++j) {
            const int64_t o = base + i * OW + j;
            const Real a = r0[2 * j], b = r0[2 * j + 1];
            const Real cc = r1[2 * j], d = r1[2 * j + 1];
            if (dll) dll[o] += 0.5 * (a + b + cc + d);
            if (dlh) dlh[o] += 0.5 * (a + b - cc - d);
            if (dhl) dhl[o] += 0.5 * (a - b + cc - d);
            if (dhh) dhh[o] += 0.5 * (a - b - cc + d);
          }
        }
      }
    });
  }
  return x;
}

WAParams WAParams::init(int64_t channels, int64_t reduced, Rng& rng) {
  WAParams p;
  const Real lim_r = std::sqrt(6.0 / Real(4 * channels));
  const Real lim_g = std::sqrt(6.0 / Real(reduced));
  p.reduce_w = Tensor::uniform({reduced, 4 * channels}, -lim_r, lim_r, rng);
  p.reduce_b = Tensor::zeros({reduced});
  p.gate_w = Tensor::uniform({reduced, reduced}, -lim_g, lim_g, rng);
  p.gate_b = Tensor::zeros({reduced});
  p.expand_w = Tensor::uniform({4 * channels, reduced}, -lim_g, lim_g, rng);
  p.expand_b = Tensor::zeros({4 * channels});
  for (Tensor* t : {&p.reduce_w, &p.reduce_b, &p.gate_w, &p.gate_b,
                    &p.expand_w, &p.expand_b})
    t->set_requires_grad(true);
  return p;
}

Tensor wavelet_attention(const Tensor& x, const WAParams& p) {
  require_even_3d(x, "wavelet_attention");
  const int64_t C = x.dim(0);
  WaveletCoeffs coeffs = dwt2_haar(x);
  Tensor z = conv1x1(concat_channels({coeffs.ll, coeffs.lh, coeffs.hl,
                                      coeffs.hh}),
                     p.reduce_w, p.reduce_b);
  Tensor s = sigmoid(matvec(p.gate_w, global_avg_pool(z), p.gate_b));
  Tensor gated = mul(z, reshape(s, {s.dim(0), 1, 1}));
  Tensor z_o = conv1x1(gated, p.expand_w, p.expand_b);
  WaveletCoeffs out_coeffs;
  out_coeffs.ll = add(slice_channels(z_o, 0, C), coeffs.ll);
  out_coeffs.lh = add(slice_channels(z_o, C, 2 * C), coeffs.lh);
  out_coeffs.hl = add(slice_channels(z_o, 2 * C, 3 * C), coeffs.hl);
  out_coeffs.hh = add(slice_channels(z_o, 3 * C, 4 * C), coeffs.hh);
  return idwt2_haar(out_coeffs);
}

Real hf_psnr(const Tensor& pred, const Tensor& ref) {
  if (pred.shape() != ref.shape()) throw ShapeError("hf_psnr: shape mismatch");
  NoTape off;
  WaveletCoeffs cp = dwt2_haar(pred);
  WaveletCoeffs cr = dwt2_haar(ref);
  Real se = 0;
  int64_t n = 0;
  for (auto [a, b] : {std::pair{&cp.lh, &cr.lh}, std::pair{&cp.hl, &cr.hl},
                      std::pair{&cp.hh, &cr.hh}}) {
    const Real* pa = a->data();
    const Real* pb = b->data();
    const int64_t m = a->size();
    for (int64_t i = 0; i < m; ++i) {
      const Real d = pa[i] - pb[i];
      se += d * d;
    }
    n += m;
  }
  const Real mse = se / Real(n);
  if (mse <= 0) return 99.0;
  return std::min(Real(99), 10.0 * std::log10(1.0 / mse));
}

Real hf_psnr(const Frame& pred, const Frame& ref) {
  return hf_psnr(pred.pixels, ref.pixels);
}

}  // namespace didnet
