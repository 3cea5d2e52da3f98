#pragma once

#include <string>
#include <vector>

#include "didnet/color.hpp"
#include "didnet/tensor.hpp"

namespace didnet {

/// One training/eval sample: 7 degraded SDR frames plus the clean SDR and
/// HDR middle frame (index 3).
struct ClipPair {
  std::vector<Frame> lq_sdr;  // 7 frames, 8-bit quantized + codec artifacts
  Frame hq_sdr_mid;           // float SDR
  Frame hq_hdr_mid;           // BT.2020 PQ
  int qp_label = 37;
  uint64_t seed = 0;

  static constexpr int kFrames = 7;
  static constexpr int kMiddle = 3;
};

/// round(x * (2^bits - 1)) / (2^bits - 1); bits must be 8 or 10. Idempotent.
Frame quantize(const Frame& x, int bits);

/// Underlying block quantizer: per 8x8 block, 2-D orthonormal DCT-II,
/// every coefficient rounded to a multiple of `step`, inverse DCT, clamp
/// to [0,1]. step -> 0 recovers the input. H and W must be multiples of 8.
Frame dct_quantize(const Frame& x, Real step);

/// Blocking/banding stand-in for codec compression: dct_quantize with step
/// {4,8,16,32}/255 for labels {27,32,37,42}. Deterministic; severity grows
/// with the label.
Frame codec_artifact_sim(const Frame& x, int qp_label);

/// Builds a ClipPair from 7 HDR frames: hq_sdr = reference_tonemap(frame),
/// lq_sdr = codec_artifact_sim(quantize(hq_sdr, 8), qp). Deterministic.
ClipPair synth_clip_pair(const std::vector<Frame>& hdr_frames, int qp_label,
                         uint64_t seed);

/// Procedural HDR source clips: a smooth luminance gradient plus moving
/// soft-edged shapes with highlights up to a few thousand nits, light
/// per-frame grain, PQ-encoded and 10-bit quantized. Fully seeded.
struct SourceClipParams {
  int64_t height = 64;
  int64_t width = 64;
  int frames = 7;
  Real motion = 1.0;     // shape velocity scale, pixels/frame
  Real grain = 0.0035;   // linear-light noise amplitude, fraction of 100 nits
};

std::vector<Frame> synth_source_clip(uint64_t seed,
                                     const SourceClipParams& p = {});

// ---- dataset manifest: `clip_id qp seed path_lq/ path_hqsdr path_hqhdr` ----

struct ManifestEntry {
  std::string clip_id;
  int qp = 37;
  uint64_t seed = 0;
  std::string lq_dir;       // directory holding frame_0..frame_6
  std::string hqsdr_path;
  std::string hqhdr_path;
};

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace didnet
