#include "didnet/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace didnet {

namespace {

constexpr int kBlock = 8;

struct DctBasis {
  Real d[kBlock][kBlock];  // d[u][n] = c(u) cos((2n+1) u pi / 16)
  DctBasis() {
    const Real pi = std::acos(Real(-1));
    for (int u = 0; u < kBlock; ++u) {
      const Real c = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int n = 0; n < kBlock; ++n)
        d[u][n] = c * std::cos((2 * n + 1) * u * pi / (2 * kBlock));
    }
  }
};

const DctBasis kDct;

Real qp_step(int qp_label) {
  switch (qp_label) {
    case 27: return 4.0 / 255.0;
    case 32: return 8.0 / 255.0;
    case 37: return 16.0 / 255.0;
    case 42: return 32.0 / 255.0;
    default:
      throw ContractError("codec_artifact_sim: qp label must be 27/32/37/42");
  }
}

}  // namespace

Frame quantize(const Frame& x, int bits) {
  if (bits != 8 && bits != 10)
    throw ContractError("quantize: bits must be 8 or 10");
  const Real levels = Real((1 << bits) - 1);
  Tensor out = make_tensor(x.pixels.shape());
  const Real* p = x.pixels.data();
  Real* q = out.data();
  const int64_t n = x.pixels.size();
  for (int64_t i = 0; i < n; ++i) {
    const Real v = std::clamp(p[i], Real(0), Real(1));
    q[i] = std::round(v * levels) / levels;
  }
  Frame f = make_frame(std::move(out), x.space,
                       bits == 8 ? BitDepth::k8 : BitDepth::k10);
  return f;
}

Frame dct_quantize(const Frame& x, Real step) {
  if (x.space != ColorSpace::kSdrBt709)
    throw ContractError("dct_quantize: expected an SDR frame");
  if (!(step > 0)) throw ContractError("dct_quantize: step must be positive");
  const int64_t H = x.height(), W = x.width();
  if (H % kBlock != 0 || W % kBlock != 0)
    throw ShapeError("codec_artifact_sim: dims must be multiples of 8");

  Tensor out = make_tensor(x.pixels.shape());
  const Real* px = x.pixels.data();
  Real* po = out.data();
  Real blk[kBlock][kBlock], tmp[kBlock][kBlock];
  for (int64_t c = 0; c < 3; ++c) {
    const Real* xp = px + c * H * W;
    Real* op = po + c * H * W;
    for (int64_t by = 0; by < H; by += kBlock) {
      for (int64_t bx = 0; bx < W; bx += kBlock) {
        // forward 2-D DCT: tmp = D * block, blk = tmp * D^T
        for (int u = 0; u < kBlock; ++u)
          for (int n = 0; n < kBlock; ++n) {
            Real acc = 0;
            for (int m = 0; m < kBlock; ++m)
              acc += kDct.d[u][m] * xp[(by + m) * W + bx + n];
            tmp[u][n] = acc;
          }
        for (int u = 0; u < kBlock; ++u)
          for (int v = 0; v < kBlock; ++v) {
            Real acc = 0;
            for (int n = 0; n < kBlock; ++n) acc += tmp[u][n] * kDct.d[v][n];
            blk[u][v] = std::round(acc / step) * step;
          }
        // inverse: tmp = D^T * blk, out = tmp * D
        for (int m = 0; m < kBlock; ++m)
          for (int v = 0; v < kBlock; ++v) {
            Real acc = 0;
            for (int u = 0; u < kBlock; ++u) acc += kDct.d[u][m] * blk[u][v];
            tmp[m][v] = acc;
          }
        for (int m = 0; m < kBlock; ++m)
          for (int n = 0; n < kBlock; ++n) {
            Real acc = 0;
            for (int v = 0; v < kBlock; ++v) acc += tmp[m][v] * kDct.d[v][n];
            op[(by + m) * W + bx + n] = std::clamp(acc, Real(0), Real(1));
          }
      }
    }
  }
  return make_frame(std::move(out), ColorSpace::kSdrBt709, x.depth);
}

Frame codec_artifact_sim(const Frame& x, int qp_label) {
  return dct_quantize(x, qp_step(qp_label));
}

ClipPair synth_clip_pair(const std::vector<Frame>& hdr_frames, int qp_label,
                         uint64_t seed) {
  if (int(hdr_frames.size()) != ClipPair::kFrames)
    throw ContractError("synth_clip_pair: expected exactly 7 frames");
  qp_step(qp_label);  // validate label
  const auto& shape = hdr_frames[0].pixels.shape();
  for (const Frame& f : hdr_frames) {
    if (f.space != ColorSpace::kHdrBt2020Pq)
      throw ContractError("synth_clip_pair: frames must be HDR BT.2020 PQ");
    if (f.pixels.shape() != shape)
      throw ShapeError("synth_clip_pair: frame shapes differ");
  }
  if (shape[1] % kBlock != 0 || shape[2] % kBlock != 0)
    throw ShapeError("synth_clip_pair: dims must be multiples of 8");

  ClipPair pair;
  pair.qp_label = qp_label;
  pair.seed = seed;
  std::vector<Frame> hq_sdr;
  hq_sdr.reserve(hdr_frames.size());
  for (const Frame& f : hdr_frames) hq_sdr.push_back(reference_tonemap(f));
  for (const Frame& f : hq_sdr)
    pair.lq_sdr.push_back(codec_artifact_sim(quantize(f, 8), qp_label));
  pair.hq_sdr_mid = hq_sdr[ClipPair::kMiddle];
  pair.hq_hdr_mid = hdr_frames[ClipPair::kMiddle];
  return pair;
}

std::vector<Frame> synth_source_clip(uint64_t seed, const SourceClipParams& p) {
  if (p.height % kBlock != 0 || p.width % kBlock != 0 || p.height < 16 ||
      p.width < 16)
    throw ShapeError("synth_source_clip: dims must be multiples of 8, >= 16");
  if (p.frames < 1) throw ContractError("synth_source_clip: frames >= 1");

  Rng rng(seed);
  const int64_t H = p.height, W = p.width;
  const Real pi2 = 2.0 * std::acos(Real(-1));

  // Background: smooth bilinear luminance field in nits, mildly chromatic,
  // overlaid with drifting mid-frequency sinusoidal texture.
  const Real base = rng.uniform(40.0, 220.0);
  Real corner[4];
  for (Real& v : corner) v = rng.uniform(0.3, 1.6);
  Real tint[3];
  for (Real& v : tint) v = rng.uniform(0.7, 1.3);
  const Real drift_y = rng.uniform(-1.0, 1.0) * p.motion;
  const Real drift_x = rng.uniform(-1.0, 1.0) * p.motion;

  struct Wave {
    Real fy, fx, phase, amp, chroma;
  };
  Wave waves[3];
  for (Wave& wv : waves) {
    wv.fy = rng.uniform(-0.22, 0.22);
    wv.fx = rng.uniform(-0.22, 0.22);
    wv.phase = rng.uniform(0.0, pi2);
    wv.amp = rng.uniform(0.05, 0.16);
    wv.chroma = rng.uniform(0.0, 1.2);
  }

  struct Shape {
    Real cy, cx, ry, rx, vy, vx;
    Real nits[3];
    bool ellipse;
  };
  const int n_shapes = 3 + int(rng.raw() % 4);
  std::vector<Shape> shapes(static_cast<size_t>(n_shapes));
  for (Shape& s : shapes) {
    s.cy = rng.uniform(0.1, 0.9) * Real(H);
    s.cx = rng.uniform(0.1, 0.9) * Real(W);
    s.ry = rng.uniform(0.05, 0.28) * Real(H);
    s.rx = rng.uniform(0.05, 0.28) * Real(W);
    s.vy = rng.uniform(-1.2, 1.2) * p.motion;
    s.vx = rng.uniform(-1.2, 1.2) * p.motion;
    const Real peak = rng.uniform(150.0, 3500.0);
    for (Real& v : s.nits) v = peak * rng.uniform(0.45, 1.0);
    s.ellipse = (rng.raw() & 1) != 0;
  }

  std::vector<Frame> clip;
  clip.reserve(size_t(p.frames));
  for (int t = 0; t < p.frames; ++t) {
    Tensor nits = make_tensor({3, H, W});
    Real* pr = nits.data();
    Real* pg = pr + H * W;
    Real* pb = pg + H * W;
    for (int64_t y = 0; y < H; ++y) {
      const Real fy = Real(y) / Real(H - 1);
      const Real ty = Real(y) - drift_y * t;
      for (int64_t x = 0; x < W; ++x) {
        const Real fx = Real(x) / Real(W - 1);
        const Real tx = Real(x) - drift_x * t;
        const Real g = corner[0] * (1 - fy) * (1 - fx) +
                       corner[1] * (1 - fy) * fx + corner[2] * fy * (1 - fx) +
                       corner[3] * fy * fx;
        Real tex[3] = {1.0, 1.0, 1.0};
        for (int k = 0; k < 3; ++k) {
          const Wave& wv = waves[k];
          const Real s = std::sin(pi2 * (wv.fy * ty + wv.fx * tx) + wv.phase);
          tex[0] += wv.amp * s;
          tex[1] += wv.amp * std::sin(pi2 * (wv.fy * ty + wv.fx * tx) +
                                      wv.phase + wv.chroma);
          tex[2] += wv.amp * std::sin(pi2 * (wv.fy * ty + wv.fx * tx) +
                                      wv.phase - wv.chroma);
        }
        Real r = std::max(base * g * tint[0] * tex[0], Real(0.5));
        Real gg = std::max(base * g * tint[1] * tex[1], Real(0.5));
        Real b = std::max(base * g * tint[2] * tex[2], Real(0.5));
        for (const Shape& s : shapes) {
          const Real dy = (Real(y) - (s.cy + s.vy * t)) / s.ry;
          const Real dx = (Real(x) - (s.cx + s.vx * t)) / s.rx;
          const Real d = s.ellipse ? std::sqrt(dy * dy + dx * dx)
                                   : std::max(std::abs(dy), std::abs(dx));
        // soft edge over roughly one pixel
          const Real edge = 1.0 / std::min(s.ry, s.rx);
          const Real cover =
              std::clamp((1.0 - d) / edge + 0.5, Real(0), Real(1));
          if (cover > 0) {
            r = r + cover * (s.nits[0] - r);
            gg = gg + cover * (s.nits[1] - gg);
            b = b + cover * (s.nits[2] - b);
          }
        }
        pr[y * W + x] = r;
        pg[y * W + x] = gg;
        pb[y * W + x] = b;
      }
    }
    // Seeded per-frame grain in linear light.
    if (p.grain > 0) {
      Rng grain_rng(seed ^ (0xA5A5A5A5ull + uint64_t(t) * 0x9E3779B97F4A7C15ull));
      const Real amp = p.grain * 100.0;
      const int64_t n = nits.size();
      Real* q = nits.data();
      for (int64_t i = 0; i < n; ++i)
        q[i] = std::max(q[i] + grain_rng.uniform(-amp, amp), Real(0));
    }
    Frame hdr = make_frame(pq_oetf(nits), ColorSpace::kHdrBt2020Pq,
                           BitDepth::kFloat);
    clip.push_back(quantize(hdr, 10));
  }
  return clip;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_manifest: cannot open " + path);
  for (const ManifestEntry& e : entries)
    f << e.clip_id << ' ' << e.qp << ' ' << e.seed << ' ' << e.lq_dir << ' '
      << e.hqsdr_path << ' ' << e.hqhdr_path << '\n';
  if (!f) throw IoError("write_manifest: write failed");
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_manifest: cannot open " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.clip_id >> e.qp >> e.seed >> e.lq_dir >> e.hqsdr_path >>
          e.hqhdr_path))
      throw IoError("read_manifest: malformed line: " + line);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace didnet
