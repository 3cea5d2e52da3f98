#include "didnet/model.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace didnet {

namespace {

constexpr int kAlignTaps = 9;  // 3x3 alignment kernel

Tensor he_matrix(int64_t rows, int64_t cols, Rng& rng) {
  const Real limit = std::sqrt(6.0 / Real(cols));
  Tensor w = Tensor::uniform({rows, cols}, -limit, limit, rng);
  w.set_requires_grad(true);
  return w;
}

Tensor trainable_zeros(const std::vector<int64_t>& shape) {
  Tensor t = Tensor::zeros(shape);
  t.set_requires_grad(true);
  return t;
}

Tensor trainable_full(const std::vector<int64_t>& shape, Real v) {
  Tensor t = Tensor::full(shape, v);
  t.set_requires_grad(true);
  return t;
}

void validate_clip(const std::vector<Tensor>& clip, const char* op) {
  if (clip.size() != ClipPair::kFrames)
    throw ContractError(std::string(op) + ": expected exactly 7 frames");
  const auto& s = clip[0].shape();
  if (clip[0].rank() != 3 || s[0] != 3)
    throw ShapeError(std::string(op) + ": frames must be [3,H,W]");
  for (const Tensor& f : clip)
    if (f.shape() != s) throw ShapeError(std::string(op) + ": frame shapes differ");
  if (s[1] % 4 != 0 || s[2] % 4 != 0)
    throw ShapeError(std::string(op) + ": H,W must be multiples of 4");
}

}  // namespace

NetworkParams NetworkParams::init(const DidnetConfig& cfg, uint64_t seed) {
  Rng rng(seed ^ 0x8C55AB1E0D1DCE1Bull);
  NetworkParams p;
  p.cfg = cfg;
  const int64_t C = cfg.channels;
  const int64_t Co = cfg.offset_channels;

  // Identity-biased start: the first three feature channels carry each
  // frame's RGB untouched, alignment starts as a delta kernel, fusion
  // selects the center frame, and both heads read channels 0..2 — the
  // untrained network is a center-frame pass-through.
  p.shallow = ConvKernel::he_init(C, 3, 3, 3, rng);
  for (int64_t c = 0; c < std::min<int64_t>(3, C); ++c) {
    Real* w = p.shallow.weights.data() + c * 3 * 9;
    std::fill(w, w + 3 * 9, Real(0));
    w[c * 9 + 4] = 1.0;  // center tap of the matching input channel
  }

  p.off_enc1 = ConvKernel::he_init(Co, 21, 3, 3, rng);
  p.off_enc2 = ConvKernel::he_init(Co, Co, 3, 3, rng);
  p.off_dec1 = ConvKernel::he_init(Co, Co, 3, 3, rng);
  p.off_dec2 = ConvKernel::he_init(Co, Co, 3, 3, rng);
  // zero head: initial offsets are zero and alignment equals plain conv
  p.off_head_w = trainable_zeros({6 * 2 * kAlignTaps, Co});
  p.off_head_b = trainable_zeros({6 * 2 * kAlignTaps});

  p.align = ConvKernel(trainable_zeros({C, C, 3, 3}), trainable_zeros({C}));
  for (int64_t c = 0; c < C; ++c)
    p.align.weights.data()[(c * C + c) * 9 + 4] = 1.0;

  p.fuse_w = trainable_zeros({C, 7 * C});
  for (int64_t c = 0; c < C; ++c)
    p.fuse_w.data()[c * 7 * C + 3 * C + c] = 1.0;  // center frame slot
  p.fuse_b = trainable_zeros({C});

  for (int r = 0; r < cfg.residual_blocks; ++r) {
    p.res_convs.push_back(ConvKernel::he_init(C, C, 3, 3, rng));
    // zero second conv: each block starts as the identity
    p.res_convs.emplace_back(trainable_zeros({C, C, 3, 3}),
                             trainable_zeros({C}));
  }

  p.aux_head = ConvKernel(trainable_zeros({3, C, 3, 3}), trainable_zeros({3}));
  for (int64_t c = 0; c < std::min<int64_t>(3, C); ++c)
    p.aux_head.weights.data()[(c * C + c) * 9 + 4] = 1.0;

  p.wa = WAParams::init(C, C, rng);
  // zero expansion: the attention branch starts as the identity map
  p.wa.expand_w = trainable_zeros({4 * C, C});
  p.wa.expand_b = trainable_zeros({4 * C});

  int64_t in_ch = 21;
  for (int b = 0; b < cfg.color_blocks; ++b) {
    ColorBlockParams cb;
    cb.w = he_matrix(C, in_ch, rng);
    cb.b = trainable_zeros({C});
    cb.norm_gamma = trainable_full({C}, 1.0);
    cb.norm_beta = trainable_zeros({C});
    p.cblocks.push_back(std::move(cb));
    in_ch = C;
  }
  const int64_t prior_dim = 3 * cfg.dmc_layers * C;
  p.prior_w = trainable_zeros({prior_dim, C});
  p.prior_b = trainable_zeros({prior_dim});
  // neutral start: alpha=1, beta=0, gamma=1 per layer
  for (int d = 0; d < cfg.dmc_layers; ++d) {
    Real* b = p.prior_b.data() + d * 3 * C;
    for (int64_t i = 0; i < C; ++i) b[i] = 1.0;
    for (int64_t i = 0; i < C; ++i) b[2 * C + i] = 1.0;
  }

  // tone-mapping stack: identity plus mild He noise
  for (int d = 0; d < cfg.dmc_layers; ++d) {
    Tensor w = he_matrix(C, C, rng);
    for (int64_t i = 0; i < C * C; ++i) w.data()[i] *= 0.1;
    for (int64_t c = 0; c < C; ++c) w.data()[c * C + c] += 1.0;
    p.dmc_kernels.emplace_back(std::move(w), trainable_zeros({C}));
  }

  p.hdr_head = ConvKernel(trainable_zeros({3, C, 3, 3}), trainable_zeros({3}));
  for (int64_t c = 0; c < std::min<int64_t>(3, C); ++c)
    p.hdr_head.weights.data()[(c * C + c) * 9 + 4] = 1.0;
  return p;
}

void NetworkParams::visit(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("tsaf.shallow.w", shallow.weights);
  fn("tsaf.shallow.b", shallow.bias);
  fn("tsaf.offset.enc1.w", off_enc1.weights);
  fn("tsaf.offset.enc1.b", off_enc1.bias);
  fn("tsaf.offset.enc2.w", off_enc2.weights);
  fn("tsaf.offset.enc2.b", off_enc2.bias);
  fn("tsaf.offset.dec1.w", off_dec1.weights);
  fn("tsaf.offset.dec1.b", off_dec1.bias);
  fn("tsaf.offset.dec2.w", off_dec2.weights);
  fn("tsaf.offset.dec2.b", off_dec2.bias);
  fn("tsaf.offset.head.w", off_head_w);
  fn("tsaf.offset.head.b", off_head_b);
  fn("tsaf.align.w", align.weights);
  fn("tsaf.align.b", align.bias);
  fn("tsaf.fuse.w", fuse_w);
  fn("tsaf.fuse.b", fuse_b);
  for (size_t i = 0; i < res_convs.size(); ++i) {
    const std::string base = "tsaf.res" + std::to_string(i / 2) + ".conv" +
                             std::to_string(i % 2 + 1);
    fn(base + ".w", res_convs[i].weights);
    fn(base + ".b", res_convs[i].bias);
  }
  fn("aux_head.w", aux_head.weights);
  fn("aux_head.b", aux_head.bias);
  fn("ffe.wa.reduce.w", wa.reduce_w);
  fn("ffe.wa.reduce.b", wa.reduce_b);
  fn("ffe.wa.gate.w", wa.gate_w);
  fn("ffe.wa.gate.b", wa.gate_b);
  fn("ffe.wa.expand.w", wa.expand_w);
  fn("ffe.wa.expand.b", wa.expand_b);
  for (size_t i = 0; i < cblocks.size(); ++i) {
    const std::string base = "cn3d.block" + std::to_string(i);
    fn(base + ".w", cblocks[i].w);
    fn(base + ".b", cblocks[i].b);
    fn(base + ".norm_g", cblocks[i].norm_gamma);
    fn(base + ".norm_b", cblocks[i].norm_beta);
  }
  fn("cn3d.head.w", prior_w);
  fn("cn3d.head.b", prior_b);
  for (size_t i = 0; i < dmc_kernels.size(); ++i) {
    const std::string base = "dmitm.dmc" + std::to_string(i);
    fn(base + ".w", dmc_kernels[i].first);
    fn(base + ".b", dmc_kernels[i].second);
  }
  fn("hdr_head.w", hdr_head.weights);
  fn("hdr_head.b", hdr_head.bias);
}

int64_t NetworkParams::param_count() {
  int64_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

std::vector<Tensor> NetworkParams::parameters() {
  std::vector<Tensor> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

Tensor color_block(const Tensor& x, const ColorBlockParams& p, Real slope) {
  Tensor h = conv1x1(x, p.w, p.b);
  h = avg_pool2(h);
  h = leaky_relu(h, slope);
  if (h.dim(1) * h.dim(2) >= 2)
    h = instance_norm(h, p.norm_gamma, p.norm_beta);
  return h;
}

PriorVec condition_3dcn(const std::vector<Tensor>& clip_frames,
                        const NetworkParams& params) {
  const DidnetConfig& cfg = params.cfg;
  const int64_t C = cfg.channels;
  if (!cfg.prior_enabled) {
    PriorVec neutral;
    for (int d = 0; d < cfg.dmc_layers; ++d)
      neutral.push_back(ModulationVectors::neutral(C, C));
    return neutral;
  }
  validate_clip(clip_frames, "condition_3dcn");
  Tensor stack = concat_channels(clip_frames);
  const int64_t H = stack.dim(1), W = stack.dim(2);
  const int64_t unit = int64_t(1) << cfg.color_blocks;
  if (H < unit || W < unit)
    throw ShapeError("condition_3dcn: input smaller than pooling pyramid");
  const int64_t ch = (H / unit) * unit;
  const int64_t cw = (W / unit) * unit;
  if (ch != H || cw != W)
    stack = crop_spatial(stack, (H - ch) / 2, (W - cw) / 2, ch, cw);

  Tensor h = stack;
  for (const ColorBlockParams& cb : params.cblocks)
    h = color_block(h, cb, cfg.leaky_slope);
  Tensor pooled = global_avg_pool(h);
  Tensor head = matvec(params.prior_w, pooled, params.prior_b);
  Tensor head3 = reshape(head, {head.dim(0), 1, 1});

  PriorVec prior;
  for (int d = 0; d < cfg.dmc_layers; ++d) {
    const int64_t base = int64_t(d) * 3 * C;
    ModulationVectors mv;
    mv.alpha = reshape(slice_channels(head3, base, base + C), {C});
    mv.beta = reshape(slice_channels(head3, base + C, base + 2 * C), {C});
    mv.gamma = reshape(slice_channels(head3, base + 2 * C, base + 3 * C), {C});
    prior.push_back(std::move(mv));
  }
  return prior;
}

Tensor tsaf_offsets(const std::vector<Tensor>& clip_frames,
                    const NetworkParams& params) {
  validate_clip(clip_frames, "tsaf");
  const Real slope = params.cfg.leaky_slope;
  // offset prediction from the raw 21-channel stack
  Tensor stack = concat_channels(clip_frames);
  Tensor e1 = leaky_relu(conv2d(stack, params.off_enc1, 2), slope);
  Tensor e2 = leaky_relu(conv2d(e1, params.off_enc2, 2), slope);
  Tensor d1 = leaky_relu(conv2d(upsample_nearest2(e2), params.off_dec1), slope);
  d1 = add(d1, e1);
  Tensor d2 = leaky_relu(conv2d(upsample_nearest2(d1), params.off_dec2), slope);
  return conv1x1(d2, params.off_head_w, params.off_head_b);
}

Tensor tsaf(const std::vector<Tensor>& clip_frames,
            const NetworkParams& params) {
  validate_clip(clip_frames, "tsaf");
  const Real slope = params.cfg.leaky_slope;

  std::vector<Tensor> feats;
  feats.reserve(clip_frames.size());
  for (const Tensor& f : clip_frames)
    feats.push_back(conv2d(f, params.shallow));

  Tensor offmap = tsaf_offsets(clip_frames, params);

  std::vector<Tensor> aligned;
  aligned.reserve(feats.size());
  int slot = 0;
  for (int f = 0; f < int(feats.size()); ++f) {
    if (f == ClipPair::kMiddle) {
      aligned.push_back(conv2d(feats[size_t(f)], params.align));
      continue;
    }
    Tensor off = slice_channels(offmap, int64_t(slot) * 2 * kAlignTaps,
                                int64_t(slot + 1) * 2 * kAlignTaps);
    aligned.push_back(
        deform_conv2d(feats[size_t(f)], params.align, OffsetField(off)));
    ++slot;
  }

  Tensor fused =
      leaky_relu(conv1x1(concat_channels(aligned), params.fuse_w,
                         params.fuse_b),
                 slope);
  for (size_t r = 0; r + 1 < params.res_convs.size(); r += 2)
    fused = residual_block(fused, params.res_convs[r], params.res_convs[r + 1],
                           slope);
  return fused;
}

Tensor apply_aux_head(const Tensor& fusion, const NetworkParams& params) {
  return conv2d(fusion, params.aux_head);
}

Tensor ffe(const Tensor& fusion, const NetworkParams& params) {
  if (!params.cfg.wa_enabled) return fusion;
  return wavelet_attention(fusion, params.wa);
}

Tensor dmitm(const Tensor& x, const PriorVec& prior,
             const NetworkParams& params) {
  if (int(prior.size()) != params.cfg.dmc_layers)
    throw ShapeError("dmitm: prior layer count mismatch");
  Tensor h = x;
  for (int d = 0; d < params.cfg.dmc_layers; ++d) {
    h = dmc(h, params.dmc_kernels[size_t(d)].first,
            params.dmc_kernels[size_t(d)].second, prior[size_t(d)]);
    if (d + 1 < params.cfg.dmc_layers) h = leaky_relu(h, params.cfg.leaky_slope);
  }
  return h;
}

DidnetOutputs didnet_forward(const std::vector<Tensor>& clip_frames,
                             const NetworkParams& params) {
  Tensor fusion = tsaf(clip_frames, params);
  DidnetOutputs out;
  out.sdr = apply_aux_head(fusion, params);
  Tensor fe = ffe(fusion, params);
  PriorVec prior = condition_3dcn(clip_frames, params);
  Tensor modulated = dmitm(fe, prior, params);
  out.hdr = conv2d(modulated, params.hdr_head);
  return out;
}

Tensor loss_dual(const Tensor& hdr_pred, const Tensor& hdr_ref,
                 const Tensor& sdr_pred, const Tensor& sdr_ref,
                 Real main_weight, Real aux_weight) {
  Tensor main_term = mul_scalar(l1_loss(hdr_pred, hdr_ref), main_weight);
  Tensor aux_term = mul_scalar(l1_loss(sdr_pred, sdr_ref), aux_weight);
  return add(main_term, aux_term);
}

Adam::Adam(std::vector<Tensor> params, Real beta1, Real beta2, Real eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Tensor& t : params) {
    Slot s;
    s.param = t;
    s.m.assign(size_t(t.size()), Real(0));
    s.v.assign(size_t(t.size()), Real(0));
    slots_.push_back(std::move(s));
  }
}

void Adam::step(Real lr) {
  ++t_;
  const Real bc1 = 1.0 - std::pow(beta1_, Real(t_));
  const Real bc2 = 1.0 - std::pow(beta2_, Real(t_));
  for (Slot& s : slots_) {
    if (!s.param.has_grad()) continue;
    const Real* g = s.param.grad();
    Real* w = s.param.data();
    Real* m = s.m.data();
    Real* v = s.v.data();
    const int64_t n = s.param.size();
    for (int64_t i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
      const Real mhat = m[i] / bc1;
      const Real vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

TrainSample to_train_sample(const ClipPair& pair) {
  TrainSample s;
  for (const Frame& f : pair.lq_sdr) s.lq.push_back(f.pixels);
  s.hq_sdr = pair.hq_sdr_mid.pixels;
  s.hq_hdr = pair.hq_hdr_mid.pixels;
  return s;
}

Real lr_at_step(const TrainConfig& cfg, int64_t step) {
  if (step < cfg.lr_warm_steps) return cfg.lr;
  const int64_t halvings =
      (step - cfg.lr_warm_steps) / cfg.lr_halve_every + 1;
  return cfg.lr * std::pow(0.5, Real(halvings));
}

namespace {

// The step loop allocates and frees ~100 MB of activation/gradient buffers
// per iteration; they must stay on the heap free lists rather than go
// through mmap/munmap.
void tune_allocator_once() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

TrainResult train(NetworkParams& params, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("train: dataset is empty");
  tune_allocator_once();
  Adam opt(params.parameters());
  Rng order_rng(cfg.seed ^ 0xD1B54A32D192ED03ull);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t(0));

  std::ofstream log;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    log.open(cfg.out_dir + "/trainlog.csv", std::ios::trunc);
    if (!log) throw IoError("train: cannot open trainlog.csv");
    log << "step,loss,lr\n";
  }

  TrainResult result;
  result.losses.reserve(size_t(cfg.steps));
  Tape tape;
  for (int64_t step = 0; step < cfg.steps; ++step) {
    if (step % int64_t(data.size()) == 0) {
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(order_rng.raw() % i)]);
    }
    const TrainSample& sample = data[order[size_t(step % int64_t(data.size()))]];

    tape.clear();
    opt.zero_grad();
    Real loss_value;
    try {
      DidnetOutputs out = didnet_forward(sample.lq, params);
      Tensor loss = loss_dual(out.hdr, sample.hq_hdr, out.sdr, sample.hq_sdr,
                              cfg.main_weight, cfg.aux_weight);
      loss_value = loss.item();
      backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("train: aborted at step " + std::to_string(step) +
                         ": " + e.what());
    }
    const Real lr = lr_at_step(cfg, step);
    opt.step(lr);
    result.losses.push_back(loss_value);
    if (log.is_open())
      log << step << ',' << loss_value << ',' << lr << '\n';

    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0)
      params.save_checkpoint(cfg.out_dir + "/step_" + std::to_string(step + 1));
  }
  tape.clear();
  if (!cfg.out_dir.empty()) params.save_checkpoint(cfg.out_dir + "/final");
  return result;
}

std::vector<Frame> convert_clip(const std::vector<Frame>& lq_sdr,
                                NetworkParams& params, bool per_frame) {
  if (lq_sdr.size() != ClipPair::kFrames)
    throw ContractError("convert_clip: expected exactly 7 frames");
  for (const Frame& f : lq_sdr)
    if (f.space != ColorSpace::kSdrBt709)
      throw ContractError("convert_clip: frames must be SDR BT.709");
  NoTape off;
  const int n = int(lq_sdr.size());
  std::vector<Frame> out;
  out.reserve(size_t(n));
  for (int t = 0; t < n; ++t) {
    std::vector<Tensor> window;
    window.reserve(ClipPair::kFrames);
    for (int k = -ClipPair::kMiddle; k <= ClipPair::kMiddle; ++k) {
      const int idx = per_frame ? t : std::clamp(t + k, 0, n - 1);
      window.push_back(lq_sdr[size_t(idx)].pixels);
    }
    DidnetOutputs o = didnet_forward(window, params);
    Tensor hdr = make_tensor(o.hdr.shape());
    const Real* p = o.hdr.data();
    Real* q = hdr.data();
    for (int64_t i = 0; i < hdr.size(); ++i)
      q[i] = std::clamp(p[i], Real(0), Real(1));
    out.push_back(make_frame(std::move(hdr), ColorSpace::kHdrBt2020Pq,
                             BitDepth::kFloat));
  }
  return out;
}

// ---- checkpoints ----

namespace {

std::string param_filename(std::string name) {
  for (char& c : name)
    if (c == '.') c = '_';
  return name + ".dten";
}

}  // namespace

void NetworkParams::save_checkpoint(const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("save_checkpoint: cannot open manifest");
  manifest << "cfg channels " << cfg.channels << '\n';
  manifest << "cfg residual_blocks " << cfg.residual_blocks << '\n';
  manifest << "cfg dmc_layers " << cfg.dmc_layers << '\n';
  manifest << "cfg color_blocks " << cfg.color_blocks << '\n';
  manifest << "cfg offset_channels " << cfg.offset_channels << '\n';
  manifest << "cfg leaky_slope " << cfg.leaky_slope << '\n';
  manifest << "cfg wa_enabled " << (cfg.wa_enabled ? 1 : 0) << '\n';
  manifest << "cfg prior_enabled " << (cfg.prior_enabled ? 1 : 0) << '\n';
  visit([&](const std::string& name, Tensor& t) {
    const std::string file = param_filename(name);
    dten_save(dir + "/" + file, t, DtenType::kF64);
    manifest << "param " << name << ' ' << file << '\n';
  });
  if (!manifest) throw IoError("save_checkpoint: manifest write failed");
}

NetworkParams NetworkParams::load_checkpoint(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw IoError("load_checkpoint: cannot open " + dir);
  DidnetConfig cfg;
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "cfg") {
      std::string key;
      ss >> key;
      if (key == "channels") ss >> cfg.channels;
      else if (key == "residual_blocks") ss >> cfg.residual_blocks;
      else if (key == "dmc_layers") ss >> cfg.dmc_layers;
      else if (key == "color_blocks") ss >> cfg.color_blocks;
      else if (key == "offset_channels") ss >> cfg.offset_channels;
      else if (key == "leaky_slope") ss >> cfg.leaky_slope;
      else if (key == "wa_enabled") { int v; ss >> v; cfg.wa_enabled = v != 0; }
      else if (key == "prior_enabled") { int v; ss >> v; cfg.prior_enabled = v != 0; }
      else throw IoError("load_checkpoint: unknown cfg key " + key);
    } else if (kind == "param") {
      std::string name, file;
      ss >> name >> file;
      entries.emplace_back(name, file);
    } else {
      throw IoError("load_checkpoint: malformed manifest line: " + line);
    }
  }
  NetworkParams params = init(cfg, 0);
  std::vector<std::pair<std::string, Tensor*>> slots;
  params.visit([&](const std::string& name, Tensor& t) {
    slots.emplace_back(name, &t);
  });
  for (const auto& [name, file] : entries) {
    Tensor loaded = dten_load(dir + "/" + file);
    bool found = false;
    for (auto& [sname, tensor] : slots) {
      if (sname != name) continue;
      if (tensor->shape() != loaded.shape())
        throw IoError("load_checkpoint: shape mismatch for " + name);
      std::copy(loaded.data(), loaded.data() + loaded.size(), tensor->data());
      found = true;
      break;
    }
    if (!found) throw IoError("load_checkpoint: unknown parameter " + name);
  }
  return params;
}

}  // namespace didnet
