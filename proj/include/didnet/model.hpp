#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "didnet/degradation.hpp"
#include "didnet/modulation.hpp"
#include "didnet/nn_ops.hpp"
#include "didnet/tensor.hpp"
#include "didnet/wavelet.hpp"

namespace didnet {

struct DidnetConfig {
  int64_t channels = 16;       // feature width C_f
  int residual_blocks = 2;     // fusion refinement depth R
  int dmc_layers = 3;          // modulated tone-mapping depth D
  int color_blocks = 6;        // condition-net depth (each halves H,W)
  int64_t offset_channels = 16;
  Real leaky_slope = 0.1;
  bool wa_enabled = true;      // frequency-attention branch
  bool prior_enabled = true;   // condition net (false = neutral modulation)

  static DidnetConfig tiny() { return DidnetConfig{}; }
};

struct ColorBlockParams {
  Tensor w, b;                  // 1x1 conv
  Tensor norm_gamma, norm_beta; // instance-norm affine
};

/// All learned weights. Frames enter as 7 x [3,H,W]; the clip stack is
/// 21 channels.
struct NetworkParams {
  DidnetConfig cfg;

  ConvKernel shallow;                       // 3 -> C, 3x3
  ConvKernel off_enc1, off_enc2;            // strided encoder (21 -> Co -> Co)
  ConvKernel off_dec1, off_dec2;            // upsample decoder with skip
  Tensor off_head_w, off_head_b;            // 1x1 -> 6 frames * 18 offsets
  ConvKernel align;                         // C -> C, 3x3 (deformable)
  Tensor fuse_w, fuse_b;                    // 1x1, 7C -> C
  std::vector<ConvKernel> res_convs;        // 2 per residual block
  ConvKernel aux_head;                      // C -> 3
  WAParams wa;
  std::vector<ColorBlockParams> cblocks;
  Tensor prior_w, prior_b;                  // head -> (alpha,beta,gamma) per DMC
  std::vector<std::pair<Tensor, Tensor>> dmc_kernels;  // D x ([C,C],[C])
  ConvKernel hdr_head;                      // C -> 3

  static NetworkParams init(const DidnetConfig& cfg, uint64_t seed);

  /// Stable-order enumeration of named parameters.
  void visit(const std::function<void(const std::string&, Tensor&)>& fn);
  int64_t param_count();
  std::vector<Tensor> parameters();

  void save_checkpoint(const std::string& dir);
  static NetworkParams load_checkpoint(const std::string& dir);
};

using PriorVec = std::vector<ModulationVectors>;  // one triplet per DMC layer

// conv1x1 -> avg_pool2 -> leaky_relu -> instance_norm (norm skipped at 1x1).
Tensor color_block(const Tensor& x, const ColorBlockParams& p, Real slope);

/// Clip color prior: stack 21 channels, run the color blocks, global
/// average, linear head emitting (alpha, beta, gamma) per DMC layer.
/// Crops centrally to a multiple of 2^color_blocks first. Disabled prior
/// yields the neutral triplets.
PriorVec condition_3dcn(const std::vector<Tensor>& clip_frames,
                        const NetworkParams& params);

/// Temporal-spatial aligned fusion: shared shallow features per frame, a
/// 2-level strided encoder / nearest-upsample decoder predicting per-frame
/// sampling offsets, deformable alignment of every non-center frame to the
/// center, 1x1 fusion and residual refinement. Returns [C,H,W].
Tensor tsaf(const std::vector<Tensor>& clip_frames,
            const NetworkParams& params);

/// Predicted sampling offsets for the six non-center frames,
/// [6*2*taps, H, W] in frame order (center slot skipped).
Tensor tsaf_offsets(const std::vector<Tensor>& clip_frames,
                    const NetworkParams& params);

Tensor apply_aux_head(const Tensor& fusion, const NetworkParams& params);
Tensor ffe(const Tensor& fusion, const NetworkParams& params);
Tensor dmitm(const Tensor& x, const PriorVec& prior,
             const NetworkParams& params);

struct DidnetOutputs {
  Tensor hdr;  // predicted HDR middle frame, [3,H,W] PQ-coded
  Tensor sdr;  // restored SDR middle frame, [3,H,W]
};

DidnetOutputs didnet_forward(const std::vector<Tensor>& clip_frames,
                             const NetworkParams& params);

Tensor loss_dual(const Tensor& hdr_pred, const Tensor& hdr_ref,
                 const Tensor& sdr_pred, const Tensor& sdr_ref,
                 Real main_weight = 0.8, Real aux_weight = 0.2);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
/// Parameters without a materialized gradient are left untouched.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, Real beta1 = 0.9,
                Real beta2 = 0.999, Real eps = 1e-8);
  void step(Real lr);
  void zero_grad();

 private:
  struct Slot {
    Tensor param;
    std::vector<Real> m, v;
  };
  std::vector<Slot> slots_;
  Real beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct TrainSample {
  std::vector<Tensor> lq;  // 7 x [3,H,W]
  Tensor hq_sdr, hq_hdr;
};
TrainSample to_train_sample(const ClipPair& pair);

struct TrainConfig {
  int64_t steps = 3000;
  Real lr = 5e-4;
  int64_t lr_warm_steps = 1000;   // then halve every lr_halve_every
  int64_t lr_halve_every = 500;
  Real main_weight = 0.8;
  Real aux_weight = 0.2;
  uint64_t seed = 1;
  int64_t checkpoint_every = 1000;
  std::string out_dir;  // empty: no checkpoints / no trainlog.csv
};

Real lr_at_step(const TrainConfig& cfg, int64_t step);

struct TrainResult {
  std::vector<Real> losses;  // one entry per step
};

/// Seeded shuffled-epoch training; aborts with NumericError on NaN loss.
/// Writes trainlog.csv (step,loss,lr) and DTEN checkpoint bundles under
/// out_dir when set.
TrainResult train(NetworkParams& params, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg);

/// Sliding-window conversion of a 7-frame SDR clip; window t is the clip
/// replicate-padded around frame t. per_frame=true instead feeds 7 copies
/// of frame t (single-frame mode, no temporal fusion).
std::vector<Frame> convert_clip(const std::vector<Frame>& lq_sdr,
                                NetworkParams& params, bool per_frame = false);

}  // namespace didnet
