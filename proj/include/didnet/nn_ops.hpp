#pragma once

#include <vector>

#include "didnet/tensor.hpp"

namespace didnet {

/// Convolution parameters. weights [out_ch, in_ch, kh, kw] with odd kh,kw
/// (same-padding assumption), bias [out_ch].
struct ConvKernel {
  Tensor weights;
  Tensor bias;

  ConvKernel() = default;
  ConvKernel(Tensor w, Tensor b);

  int64_t out_channels() const { return weights.dim(0); }
  int64_t in_channels() const { return weights.dim(1); }
  int64_t kh() const { return weights.dim(2); }
  int64_t kw() const { return weights.dim(3); }

  /// He-uniform init, bias zero. Marks both tensors trainable.
  static ConvKernel he_init(int64_t out_ch, int64_t in_ch, int64_t kh,
                            int64_t kw, Rng& rng);
};

/// Per-tap sampling offsets for deformable convolution:
/// [2*kh*kw, H, W], channel 2t = dy and 2t+1 = dx of tap t (pixels).
struct OffsetField {
  Tensor field;

  OffsetField() = default;
  explicit OffsetField(Tensor f);
  int64_t taps() const { return field.dim(0) / 2; }
};

enum class Padding { kSame, kValid };

Tensor conv2d(const Tensor& x, const ConvKernel& k, int64_t stride = 1,
              Padding padding = Padding::kSame);

// y[:,u,v] = W x[:,u,v] + b with W [n,m], b [n]; equals conv2d with a 1x1
// kernel but takes the flat matrix directly.
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b);

// y = W v + b with W [n,m], v [m], b [n].
Tensor matvec(const Tensor& w, const Tensor& v, const Tensor& b);

/// Bilinear interpolation of the 4 integer neighbours of (py,px); neighbours
/// outside the image contribute zero. Returns a [C] tensor. Not recorded on
/// the tape (deform_conv2d handles sampling gradients internally).
Tensor bilinear_sample(const Tensor& x, Real py, Real px);

/// y(p0) = sum_n k(p_n) x(p0 + p_n + dp_n) + bias, stride 1, same padding,
/// fractional positions sampled bilinearly with zero outside the image.
/// Zero offsets reproduce conv2d(x, k, 1, same) exactly.
Tensor deform_conv2d(const Tensor& x, const ConvKernel& k,
                     const OffsetField& offsets);

Tensor leaky_relu(const Tensor& x, Real slope = 0.1);
Tensor sigmoid(const Tensor& x);

/// Per-channel spatial standardization (mean 0, var 1) followed by the
/// affine gamma*xhat + beta. Requires >= 2 spatial elements per channel.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     Real eps = 1e-5);

Tensor avg_pool2(const Tensor& x);          // 2x2 mean, stride 2
Tensor upsample_nearest2(const Tensor& x);  // 2x nearest
Tensor global_avg_pool(const Tensor& x);    // [C,H,W] -> [C]

Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor slice_channels(const Tensor& x, int64_t begin, int64_t end);
Tensor crop_spatial(const Tensor& x, int64_t y0, int64_t x0, int64_t h,
                    int64_t w);

// x + conv2(act(conv1(x))), shape preserving.
Tensor residual_block(const Tensor& x, const ConvKernel& k1,
                      const ConvKernel& k2, Real slope = 0.1);

}  // namespace didnet
