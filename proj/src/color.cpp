#include "didnet/color.hpp"

#include <cmath>

namespace didnet {

namespace {

// SMPTE ST 2084 constants
constexpr Real kPqM1 = 1305.0 / 8192.0;
constexpr Real kPqM2 = 2523.0 / 32.0;
constexpr Real kPqC1 = 107.0 / 128.0;
constexpr Real kPqC2 = 2413.0 / 128.0;
constexpr Real kPqC3 = 2392.0 / 128.0;
constexpr Real kPqPeakNits = 10000.0;

// BT.709 / BT.2020 OETF constants (continuous form)
constexpr Real kBt709Beta = 0.018053968510807;
constexpr Real kBt709Alpha = 1.0 + 5.5 * kBt709Beta;

// BT.2087 BT.709 -> BT.2020 linear RGB matrix; rows sum to exactly 1.
constexpr Real k709To2020[3][3] = {
    {0.6274, 0.3293, 0.0433},
    {0.0691, 0.9195, 0.0114},
    {0.0164, 0.0880, 0.8956},
};

struct Mat3 {
  Real m[3][3];
};

Mat3 invert3(const Real a[3][3]) {
  const Real det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                   a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                   a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  Mat3 r;
  r.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  r.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  r.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  r.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  r.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  r.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  r.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  r.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  r.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return r;
}

const Mat3 k2020To709 = invert3(k709To2020);

// BT.2100 ICtCp: RGB(2020, linear) -> LMS, then PQ-encoded L'M'S' -> ICtCp.
constexpr Real kRgbToLms[3][3] = {
    {1688.0 / 4096.0, 2146.0 / 4096.0, 262.0 / 4096.0},
    {683.0 / 4096.0, 2951.0 / 4096.0, 462.0 / 4096.0},
    {99.0 / 4096.0, 309.0 / 4096.0, 3688.0 / 4096.0},
};
constexpr Real kLmsToICtCp[3][3] = {
    {0.5, 0.5, 0.0},
    {6610.0 / 4096.0, -13613.0 / 4096.0, 7003.0 / 4096.0},
    {17933.0 / 4096.0, -17390.0 / 4096.0, -543.0 / 4096.0},
};

constexpr Real kReinhardWhiteNits = 100.0;

void require_rgb(const Tensor& t, const char* op) {
  if (t.rank() != 3 || t.dim(0) != 3)
    throw ShapeError(std::string(op) + ": expected [3,H,W] tensor");
}

template <class F>
Tensor map_elements(const Tensor& x, F f) {
  Tensor out = make_tensor(x.shape());
  const Real* p = x.data();
  Real* q = out.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) q[i] = f(p[i]);
  return out;
}

}  // namespace

Frame make_frame(Tensor pixels, ColorSpace space, BitDepth depth) {
  require_rgb(pixels, "make_frame");
  Frame f;
  f.pixels = std::move(pixels);
  f.space = space;
  f.depth = depth;
  return f;
}

Real pq_oetf(Real nits) {
  if (nits < 0) throw DomainError("pq_oetf: negative luminance");
  if (nits >= kPqPeakNits) return 1.0;
  const Real y = nits / kPqPeakNits;
  const Real p = std::pow(y, kPqM1);
  return std::pow((kPqC1 + kPqC2 * p) / (1.0 + kPqC3 * p), kPqM2);
}

Real pq_eotf(Real code) {
  if (code < 0) throw DomainError("pq_eotf: negative code");
  if (code > 1) code = 1;
  const Real p = std::pow(code, 1.0 / kPqM2);
  const Real num = std::max(p - kPqC1, Real(0));
  const Real den = kPqC2 - kPqC3 * p;
  return kPqPeakNits * std::pow(num / den, 1.0 / kPqM1);
}

Tensor pq_oetf(const Tensor& nits) {
  return map_elements(nits, [](Real v) { return pq_oetf(v); });
}

Tensor pq_eotf(const Tensor& code) {
  return map_elements(code, [](Real v) { return pq_eotf(v); });
}

Real bt709_oetf(Real lum) {
  if (lum < 0) throw DomainError("bt709_oetf: negative luminance");
  if (lum > 1) lum = 1;
  if (lum < kBt709Beta) return 4.5 * lum;
  return kBt709Alpha * std::pow(lum, 0.45) - (kBt709Alpha - 1.0);
}

Real bt709_eotf(Real code) {
  if (code < 0) throw DomainError("bt709_eotf: negative code");
  const Real knee = 4.5 * kBt709Beta;
  if (code < knee) return code / 4.5;
  return std::pow((code + (kBt709Alpha - 1.0)) / kBt709Alpha, 1.0 / 0.45);
}

Tensor bt709_oetf(const Tensor& lum) {
  return map_elements(lum, [](Real v) { return bt709_oetf(v); });
}

Tensor bt709_eotf(const Tensor& code) {
  return map_elements(code, [](Real v) { return bt709_eotf(v); });
}

Tensor gamut_convert(const Tensor& rgb_linear, GamutDirection dir) {
  require_rgb(rgb_linear, "gamut_convert");
  const int64_t hw = rgb_linear.dim(1) * rgb_linear.dim(2);
  Tensor out = make_tensor(rgb_linear.shape());
  const Real* r = rgb_linear.data();
  const Real* g = r + hw;
  const Real* b = g + hw;
  Real* ro = out.data();
  Real* go = ro + hw;
  Real* bo = go + hw;
  const Real(*m)[3] =
      dir == GamutDirection::k709To2020 ? k709To2020 : k2020To709.m;
  for (int64_t i = 0; i < hw; ++i) {
    const Real x = r[i], y = g[i], z = b[i];
    ro[i] = m[0][0] * x + m[0][1] * y + m[0][2] * z;
    go[i] = m[1][0] * x + m[1][1] * y + m[1][2] * z;
    bo[i] = m[2][0] * x + m[2][1] * y + m[2][2] * z;
  }
  return out;
}

Tensor rgb_to_itp(const Frame& f) {
  require_rgb(f.pixels, "rgb_to_itp");
  const int64_t hw = f.height() * f.width();
  // to linear BT.2020 nits
  Tensor linear;
  if (f.space == ColorSpace::kHdrBt2020Pq) {
    linear = pq_eotf(f.pixels);
  } else {
    Tensor rel = bt709_eotf(f.pixels);
    Tensor rgb2020 = gamut_convert(rel, GamutDirection::k709To2020);
    linear = map_elements(rgb2020, [](Real v) {
      return std::max(v, Real(0)) * kReinhardWhiteNits;
    });
  }
  Tensor out = make_tensor(f.pixels.shape());
  const Real* r = linear.data();
  const Real* g = r + hw;
  const Real* b = g + hw;
  Real* io = out.data();
  Real* to = io + hw;
  Real* po = to + hw;
  for (int64_t i = 0; i < hw; ++i) {
    const Real l = kRgbToLms[0][0] * r[i] + kRgbToLms[0][1] * g[i] +
                   kRgbToLms[0][2] * b[i];
    const Real m = kRgbToLms[1][0] * r[i] + kRgbToLms[1][1] * g[i] +
                   kRgbToLms[1][2] * b[i];
    const Real s = kRgbToLms[2][0] * r[i] + kRgbToLms[2][1] * g[i] +
                   kRgbToLms[2][2] * b[i];
    const Real lp = pq_oetf(std::max(l, Real(0)));
    const Real mp = pq_oetf(std::max(m, Real(0)));
    const Real sp = pq_oetf(std::max(s, Real(0)));
    const Real ii = kLmsToICtCp[0][0] * lp + kLmsToICtCp[0][1] * mp;
    const Real ct = kLmsToICtCp[1][0] * lp + kLmsToICtCp[1][1] * mp +
                    kLmsToICtCp[1][2] * sp;
    const Real cp = kLmsToICtCp[2][0] * lp + kLmsToICtCp[2][1] * mp +
                    kLmsToICtCp[2][2] * sp;
    io[i] = ii;
    to[i] = 0.5 * ct;  // ITP halves the tritan axis
    po[i] = cp;
  }
  return out;
}

Frame reference_tonemap(const Frame& hdr) {
  if (hdr.space != ColorSpace::kHdrBt2020Pq)
    throw ContractError("reference_tonemap: expected an HDR BT.2020 PQ frame");
  Tensor nits2020 = pq_eotf(hdr.pixels);
  Tensor nits709 = gamut_convert(nits2020, GamutDirection::k2020To709);
  Tensor sdr = map_elements(nits709, [](Real v) {
    const Real nits = std::max(v, Real(0));
    const Real rel = nits / (kReinhardWhiteNits + nits);
    return bt709_oetf(rel);
  });
  return make_frame(std::move(sdr), ColorSpace::kSdrBt709, BitDepth::kFloat);
}

Frame reference_tonemap_inverse(const Frame& sdr) {
  if (sdr.space != ColorSpace::kSdrBt709)
    throw ContractError(
        "reference_tonemap_inverse: expected an SDR BT.709 frame");
  Tensor nits709 = map_elements(sdr.pixels, [](Real code) {
    const Real rel = std::min(bt709_eotf(std::max(code, Real(0))), Real(1));
    // invert rel = L/(100+L); rel -> 1 saturates at the PQ peak
    const Real denom = std::max(1.0 - rel, Real(1e-9));
    return std::min(kReinhardWhiteNits * rel / denom, kPqPeakNits);
  });
  Tensor nits2020 = gamut_convert(nits709, GamutDirection::k709To2020);
  Tensor code = map_elements(
      nits2020, [](Real v) { return pq_oetf(std::max(v, Real(0))); });
  return make_frame(std::move(code), ColorSpace::kHdrBt2020Pq,
                    BitDepth::kFloat);
}

}  // namespace didnet
