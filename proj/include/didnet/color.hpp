#pragma once

#include "didnet/tensor.hpp"

namespace didnet {

enum class ColorSpace { kSdrBt709, kHdrBt2020Pq };
enum class BitDepth { k8, k10, kFloat };

/// One image: [3,H,W] pixel tensor with values in [0,1] plus a signal tag.
/// SDR frames hold BT.709 gamma-encoded codes; HDR frames hold BT.2020 PQ
/// codes (SMPTE ST 2084, 10000 nit peak).
struct Frame {
  Tensor pixels;  // [3,H,W]
  ColorSpace space = ColorSpace::kSdrBt709;
  BitDepth depth = BitDepth::kFloat;

  int64_t height() const { return pixels.dim(1); }
  int64_t width() const { return pixels.dim(2); }
};

Frame make_frame(Tensor pixels, ColorSpace space,
                 BitDepth depth = BitDepth::kFloat);

// ---- transfer functions ----

// SMPTE ST 2084 perceptual quantizer, absolute luminance in nits.
// oetf maps [0,10000] nits to a code in [0,1]; eotf inverts it.
// Negative nits throw DomainError; nits above 10000 clamp to code 1.
Real pq_oetf(Real nits);
Real pq_eotf(Real code);
Tensor pq_oetf(const Tensor& nits);
Tensor pq_eotf(const Tensor& code);

// BT.709 OETF over relative luminance [0,1], with the exact-continuity
// constants (alpha = 1 + 5.5*beta, beta = 0.018053968510807).
Real bt709_oetf(Real lum);
Real bt709_eotf(Real code);
Tensor bt709_oetf(const Tensor& lum);
Tensor bt709_eotf(const Tensor& code);

// ---- gamut ----

enum class GamutDirection { k709To2020, k2020To709 };

/// Linear-light RGB gamut conversion (BT.2087 primaries matrix). The
/// 2020->709 matrix is the exact numeric inverse, so round trips cancel
/// to machine precision. No gamut mapping: out-of-gamut components are
/// left as-is (callers clip when required).
Tensor gamut_convert(const Tensor& rgb_linear, GamutDirection dir);

// ---- ICtCp / ITP ----

/// Per-pixel ITP coordinates (I, T = 0.5*Ct, P) of a frame. HDR frames are
/// PQ-decoded at 10000 nit peak; SDR frames are BT.709-decoded, scaled to
/// the 100 nit reference white and converted to BT.2020 first.
Tensor rgb_to_itp(const Frame& f);

// ---- reference HDR -> SDR tone map (data synthesis) ----

/// Deterministic chain: PQ decode, 2020->709 gamut (negatives clipped),
/// per-channel Reinhard L/(1+L/100), BT.709 OETF. Monotone in luminance
/// and invertible on its range.
Frame reference_tonemap(const Frame& hdr);

/// Exact inverse of reference_tonemap on its range; SDR code 1.0 maps to
/// the 10000 nit clamp. Used as the no-learning conversion baseline.
Frame reference_tonemap_inverse(const Frame& sdr);

}  // namespace didnet
