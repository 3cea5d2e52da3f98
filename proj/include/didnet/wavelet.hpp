#pragma once

#include "didnet/color.hpp"
#include "didnet/nn_ops.hpp"
#include "didnet/tensor.hpp"

namespace didnet {

/// Single-level orthonormal 2-D Haar subbands, each [C, H/2, W/2].
struct WaveletCoeffs {
  Tensor ll, lh, hl, hh;
};

/// Orthonormal analysis: for each 2x2 block [[a,b],[c,d]]
///   ll = (a+b+c+d)/2, lh = (a+b-c-d)/2, hl = (a-b+c-d)/2, hh = (a-b-c+d)/2.
/// Energy preserving; requires even H,W.
WaveletCoeffs dwt2_haar(const Tensor& x);

/// Exact inverse of dwt2_haar.
Tensor idwt2_haar(const WaveletCoeffs& c);

/// Wavelet channel attention parameters: 1x1 reduce (4C -> Cz), gate matvec
/// on the pooled vector (Cz -> Cz), 1x1 expand (Cz -> 4C).
struct WAParams {
  Tensor reduce_w, reduce_b;
  Tensor expand_w, expand_b;
  Tensor gate_w, gate_b;

  static WAParams init(int64_t channels, int64_t reduced, Rng& rng);
};

/// coeffs = DWT(x); z = reduce(concat(coeffs)); s = sigmoid(gate(gap(z)));
/// z_o = expand(z * s); out = IDWT(unconcat(z_o) + coeffs).
/// Subband concatenation order is (ll, lh, hl, hh). Zeroed branch weights
/// make this the identity map.
Tensor wavelet_attention(const Tensor& x, const WAParams& p);

/// PSNR over the concatenated (lh,hl,hh) detail subbands of both frames
/// (ll excluded), peak 1.0, capped at 99 dB.
Real hf_psnr(const Frame& pred, const Frame& ref);
Real hf_psnr(const Tensor& pred, const Tensor& ref);

}  // namespace didnet
