#include "didnet/prove.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "didnet/degradation.hpp"
#include "didnet/metrics.hpp"
#include "didnet/model.hpp"
#include "didnet/modulation.hpp"
#include "didnet/nn_ops.hpp"
#include "didnet/tensor.hpp"
#include "didnet/wavelet.hpp"

namespace didnet {

namespace {

Real max_abs_diff(const Tensor& a, const Tensor& b) {
  Real m = 0;
  const Real* pa = a.data();
  const Real* pb = b.data();
  for (int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(pa[i] - pb[i]));
  return m;
}

std::string sci(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool report(std::ostream& out, int criterion, bool pass,
            const std::string& detail) {
  out << "criterion " << criterion << (pass ? " PASS " : " FAIL ") << detail
      << '\n';
  return pass;
}

}  // namespace

bool prove_modulation_equivalence(std::ostream& out) {
  Rng rng(11);
  Real worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t m = 1 + int64_t(rng.raw() % 8);
    const int64_t n = 1 + int64_t(rng.raw() % 8);
    const int64_t h = 1 + int64_t(rng.raw() % 6);
    const int64_t w = 1 + int64_t(rng.raw() % 6);
    Tensor x = Tensor::uniform({m, h, w}, -2, 2, rng);
    Tensor wm = Tensor::uniform({n, m}, -2, 2, rng);
    Tensor b = Tensor::uniform({n}, -2, 2, rng);
    ModulationVectors mv;
    mv.alpha = Tensor::uniform({n}, -2, 2, rng);
    mv.beta = Tensor::uniform({n}, -2, 2, rng);
    mv.gamma = Tensor::full({m}, 1.0);
    Tensor lhs = gfm(x, wm, b, mv);
    FoldedKernel fk = fold_modulation(wm, b, mv);
    Tensor rhs = conv1x1(x, fk.weights, fk.bias_term);
    worst = std::max(worst, max_abs_diff(lhs, rhs));
  }
  return report(out, 1, worst <= 1e-10,
                "feature vs kernel modulation over 1000 trials: max |gfm - "
                "folded conv| = " +
                    sci(worst) + " (tol 1e-10)");
}

bool prove_dmc_fold(std::ostream& out) {
  Rng rng(22);
  Real worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t m = 1 + int64_t(rng.raw() % 8);
    const int64_t n = 1 + int64_t(rng.raw() % 8);
    const int64_t h = 1 + int64_t(rng.raw() % 6);
    const int64_t w = 1 + int64_t(rng.raw() % 6);
    Tensor x = Tensor::uniform({m, h, w}, -2, 2, rng);
    Tensor wm = Tensor::uniform({n, m}, -2, 2, rng);
    Tensor b = Tensor::uniform({n}, -2, 2, rng);
    ModulationVectors mv;
    mv.alpha = Tensor::uniform({n}, -1.5, 1.5, rng);
    mv.beta = Tensor::uniform({n}, -1.5, 1.5, rng);
    mv.gamma = Tensor::uniform({m}, -1.5, 1.5, rng);
    // force exact zeros and negatives into the modulation entries
    if (trial % 3 == 0) mv.alpha.data()[rng.raw() % uint64_t(n)] = 0;
    if (trial % 4 == 0) mv.gamma.data()[rng.raw() % uint64_t(m)] = 0;
    if (trial % 5 == 0) mv.beta.data()[rng.raw() % uint64_t(n)] = -1;
    Tensor folded = dmc(x, wm, b, mv);
    Tensor unfolded = dmc_unfolded(x, wm, b, mv);
    worst = std::max(worst, max_abs_diff(folded, unfolded));
  }
  return report(out, 2, worst <= 1e-10,
                "dual-modulation fold vs unfolded route over 1000 trials: max "
                "diff = " +
                    sci(worst) + " (tol 1e-10)");
}

bool prove_cost_table(std::ostream& out) {
  const auto r720 = modulation_cost(720, 480, 64, 64);
  const auto r1080 = modulation_cost(1080, 1920, 64, 64);
  const auto r2160 = modulation_cost(2160, 3840, 64, 64);
  const bool values = r720.first == 44236800ull && r720.second == 4224ull &&
                      r1080.first == 265420800ull && r1080.second == 4224ull &&
                      r2160.first == 1061683200ull && r2160.second == 4224ull;
  const Real ratio = Real(r1080.first) / Real(r1080.second);
  const bool pass = values && ratio > 6e4;
  return report(out, 3, pass,
                "modulation cost table exact (44.2M/265.4M/1061.7M vs 4.22K), "
                "1080p ratio = " +
                    sci(ratio) + " (> 6e4)");
}

bool prove_wavelet(std::ostream& out) {
  Rng rng(33);
  Real worst_pr = 0, worst_parseval = 0;
  const int64_t sizes[] = {2, 4, 6, 8, 12};
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t C = 1 + int64_t(rng.raw() % 3);
    const int64_t H = sizes[rng.raw() % 5];
    const int64_t W = sizes[rng.raw() % 5];
    Tensor x = Tensor::uniform({C, H, W}, -3, 3, rng);
    WaveletCoeffs c = dwt2_haar(x);
    worst_pr = std::max(worst_pr, max_abs_diff(idwt2_haar(c), x));
    Real ex = 0, ec = 0;
    for (int64_t i = 0; i < x.size(); ++i) ex += x.data()[i] * x.data()[i];
    for (const Tensor* t : {&c.ll, &c.lh, &c.hl, &c.hh})
      for (int64_t i = 0; i < t->size(); ++i) ec += t->data()[i] * t->data()[i];
    worst_parseval = std::max(worst_parseval, std::abs(ex - ec) / ex);
  }

  // zeroed attention branch is the identity map
  Rng prng(34);
  WAParams p = WAParams::init(4, 4, prng);
  std::fill(p.expand_w.data(), p.expand_w.data() + p.expand_w.size(), 0.0);
  std::fill(p.expand_b.data(), p.expand_b.data() + p.expand_b.size(), 0.0);
  Tensor x = Tensor::uniform({4, 8, 8}, -1, 1, prng);
  const Real wa_diff = max_abs_diff(wavelet_attention(x, p), x);

  const bool pass = worst_pr <= 1e-12 && worst_parseval <= 1e-12 &&
                    wa_diff <= 1e-12;
  return report(out, 4, pass,
                "wavelet reconstruction max err = " + sci(worst_pr) +
                    ", Parseval rel err = " + sci(worst_parseval) +
                    ", zero-branch attention identity err = " +
                    sci(wa_diff) + " (tol 1e-12)");
}

bool prove_deform(std::ostream& out) {
  Rng rng(44);
  Real worst_zero = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t C = 1 + int64_t(rng.raw() % 3);
    const int64_t n = 1 + int64_t(rng.raw() % 3);
    const int64_t H = 4 + int64_t(rng.raw() % 5);
    const int64_t W = 4 + int64_t(rng.raw() % 5);
    Tensor x = Tensor::uniform({C, H, W}, -2, 2, rng);
    ConvKernel k(Tensor::uniform({n, C, 3, 3}, -1, 1, rng),
                 Tensor::uniform({n}, -1, 1, rng));
    OffsetField zero(Tensor::zeros({18, H, W}));
    worst_zero = std::max(
        worst_zero, max_abs_diff(deform_conv2d(x, k, zero), conv2d(x, k)));
  }

  // shift compensation: sampling one pixel to the right of a right-shifted
  // image reproduces the unshifted convolution on interior pixels
  Rng srng(45);
  const int64_t H = 12, W = 12;
  Tensor a = Tensor::uniform({2, H, W}, -1, 1, srng);
  Tensor shifted = Tensor::zeros({2, H, W});
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x2 = 1; x2 < W; ++x2)
        shifted.data()[(c * H + y) * W + x2] =
            a.data()[(c * H + y) * W + x2 - 1];
  ConvKernel k(Tensor::uniform({2, 2, 3, 3}, -1, 1, srng),
               Tensor::uniform({2}, -1, 1, srng));
  Tensor offs = Tensor::zeros({18, H, W});
  for (int64_t t = 0; t < 9; ++t)
    for (int64_t i = 0; i < H * W; ++i)
      offs.data()[(2 * t + 1) * H * W + i] = 1.0;  // dx = +1
  Tensor via_shift = deform_conv2d(shifted, k, OffsetField(offs));
  Tensor direct = conv2d(a, k);
  Real worst_shift = 0;
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t y = 2; y < H - 2; ++y)
      for (int64_t x2 = 2; x2 < W - 2; ++x2)
        worst_shift = std::max(
            worst_shift,
            std::abs(via_shift.data()[(c * H + y) * W + x2] -
                     direct.data()[(c * H + y) * W + x2]));

  const bool pass = worst_zero <= 1e-12 && worst_shift <= 1e-10;
  return report(out, 5, pass,
                "zero-offset deformable == conv2d, max err = " +
                    sci(worst_zero) +
                    " (tol 1e-12); shift-compensation interior err = " +
                    sci(worst_shift));
}

bool prove_grad_checks(std::ostream& out) {
  Real worst_ops = 0;
  std::string worst_name = "-";
  auto run = [&](const char* name, const std::function<Tensor(const Tensor&)>& fn,
                 const Tensor& x0, Real eps = 1e-5) {
    const Real e = grad_check(fn, x0, eps);
    if (e > worst_ops) {
      worst_ops = e;
      worst_name = name;
    }
  };
  Rng rng(55);

  // elementwise and reductions
  Tensor x44 = Tensor::uniform({4, 4}, 0.3, 1.5, rng);
  run("sum_sq", [](const Tensor& t) { return sum(mul(t, t)); }, x44);
  run("mean", [](const Tensor& t) { return mean(mul(t, t)); }, x44);
  Tensor other = Tensor::uniform({4, 4}, -1, 1, rng);
  run("l1", [&](const Tensor& t) { return l1_loss(t, other); }, x44);
  Tensor bvec = Tensor::uniform({4}, 0.5, 1.5, rng);
  run("broadcast_mul",
      [&](const Tensor& t) { return sum(mul(t, bvec)); }, x44);
  run("sub_scalar",
      [](const Tensor& t) { return sum(mul_scalar(add_scalar(t, -0.3), 2.0)); },
      x44);

  // activations (inputs kept away from the kink)
  Tensor xact = Tensor::uniform({3, 5}, 0.2, 2.0, rng);
  Tensor xneg = Tensor::uniform({3, 5}, -2.0, -0.2, rng);
  run("leaky_pos", [](const Tensor& t) { return sum(leaky_relu(t, 0.1)); },
      xact);
  run("leaky_neg", [](const Tensor& t) { return sum(leaky_relu(t, 0.1)); },
      xneg);
  run("sigmoid", [](const Tensor& t) { return sum(mul(sigmoid(t), sigmoid(t))); },
      xact);

  // convolution family
  Tensor x166 = Tensor::uniform({1, 6, 6}, -1, 1, rng);
  ConvKernel k13(Tensor::uniform({2, 1, 3, 3}, -1, 1, rng),
                 Tensor::uniform({2}, -0.5, 0.5, rng));
  run("conv2d_x",
      [&](const Tensor& t) { return sum(mul(conv2d(t, k13), conv2d(t, k13))); },
      x166);
  Tensor w0 = k13.weights.clone();
  run("conv2d_w",
      [&](const Tensor& t) {
        ConvKernel k(t, k13.bias);
        return sum(mul(conv2d(x166, k), conv2d(x166, k)));
      },
      w0);
  run("conv2d_b",
      [&](const Tensor& t) {
        ConvKernel k(k13.weights, t);
        return sum(mul(conv2d(x166, k), conv2d(x166, k)));
      },
      k13.bias.clone());
  run("conv2d_stride2",
      [&](const Tensor& t) { return sum(conv2d(t, k13, 2)); }, x166);
  run("conv2d_valid",
      [&](const Tensor& t) { return sum(conv2d(t, k13, 1, Padding::kValid)); },
      x166);

  Tensor x266 = Tensor::uniform({2, 6, 6}, -1, 1, rng);
  Tensor w1x1 = Tensor::uniform({3, 2}, -1, 1, rng);
  Tensor b1x1 = Tensor::uniform({3}, -0.5, 0.5, rng);
  run("conv1x1_x",
      [&](const Tensor& t) {
        Tensor y = conv1x1(t, w1x1, b1x1);
        return sum(mul(y, y));
      },
      x266);
  run("conv1x1_w",
      [&](const Tensor& t) {
        Tensor y = conv1x1(x266, t, b1x1);
        return sum(mul(y, y));
      },
      w1x1.clone());
  run("matvec",
      [&](const Tensor& t) {
        Tensor y = matvec(w1x1, reshape(t, {2}), b1x1);
        return sum(mul(y, y));
      },
      Tensor::uniform({2}, -1, 1, rng));

  // deformable conv: x, weights, offsets (offsets away from integers)
  Tensor xd = Tensor::uniform({2, 5, 5}, -1, 1, rng);
  ConvKernel kd(Tensor::uniform({2, 2, 3, 3}, -1, 1, rng),
                Tensor::uniform({2}, -0.5, 0.5, rng));
  Tensor offd = Tensor::uniform({18, 5, 5}, 0.15, 0.45, rng);
  run("deform_x",
      [&](const Tensor& t) {
        Tensor y = deform_conv2d(t, kd, OffsetField(offd));
        return sum(mul(y, y));
      },
      xd);
  run("deform_w",
      [&](const Tensor& t) {
        ConvKernel k(t, kd.bias);
        Tensor y = deform_conv2d(xd, k, OffsetField(offd));
        return sum(mul(y, y));
      },
      kd.weights.clone());
  run("deform_off",
      [&](const Tensor& t) {
        Tensor y = deform_conv2d(xd, kd, OffsetField(t));
        return sum(mul(y, y));
      },
      offd.clone(), 1e-4);

  // normalization / pooling / shape ops
  Tensor xin = Tensor::uniform({2, 4, 4}, -1, 1, rng);
  Tensor gin = Tensor::uniform({2}, 0.5, 1.5, rng);
  Tensor bin = Tensor::uniform({2}, -0.5, 0.5, rng);
  run("instance_norm_x",
      [&](const Tensor& t) {
        Tensor y = instance_norm(t, gin, bin);
        return sum(mul(y, y));
      },
      xin);
  run("instance_norm_g",
      [&](const Tensor& t) {
        Tensor y = instance_norm(xin, t, bin);
        return sum(mul(y, y));
      },
      gin.clone());
  run("avg_pool2", [](const Tensor& t) { return sum(mul(avg_pool2(t), avg_pool2(t))); },
      xin);
  run("upsample", [](const Tensor& t) {
        Tensor y = upsample_nearest2(t);
        return sum(mul(y, y));
      },
      xin);
  run("gap", [](const Tensor& t) {
        Tensor y = global_avg_pool(t);
        return sum(mul(y, y));
      },
      xin);
  run("crop", [](const Tensor& t) {
        Tensor y = crop_spatial(t, 1, 1, 2, 2);
        return sum(mul(y, y));
      },
      xin);
  run("slice_concat",
      [](const Tensor& t) {
        Tensor a = slice_channels(t, 0, 1);
        Tensor b = slice_channels(t, 1, 2);
        Tensor y = concat_channels({b, a});
        return sum(mul(y, y));
      },
      xin);

  // wavelet
  run("dwt_ll", [](const Tensor& t) { return sum(dwt2_haar(t).ll); },
      Tensor::uniform({1, 4, 4}, -1, 1, rng));
  run("dwt_detail",
      [](const Tensor& t) {
        WaveletCoeffs c = dwt2_haar(t);
        return sum(add(mul(c.lh, c.lh), add(mul(c.hl, c.hl), mul(c.hh, c.hh))));
      },
      Tensor::uniform({1, 6, 6}, -1, 1, rng));
  Rng wrng(56);
  WAParams wap = WAParams::init(2, 2, wrng);
  Tensor xwa = Tensor::uniform({2, 4, 4}, -1, 1, wrng);
  run("wavelet_attention_x",
      [&](const Tensor& t) {
        Tensor y = wavelet_attention(t, wap);
        return sum(mul(y, y));
      },
      Tensor::uniform({2, 4, 4}, -1, 1, rng));
  run("wavelet_attention_gate",
      [&](const Tensor& t) {
        WAParams p2 = wap;
        p2.gate_w = t;
        Tensor y = wavelet_attention(xwa, p2);
        return sum(mul(y, y));
      },
      wap.gate_w.clone());

  // modulation
  ModulationVectors mv;
  mv.alpha = Tensor::uniform({3}, 0.5, 1.5, rng);
  mv.beta = Tensor::uniform({3}, -0.5, 0.5, rng);
  mv.gamma = Tensor::uniform({2}, 0.5, 1.5, rng);
  run("gfm_x", [&](const Tensor& t) {
        Tensor y = gfm(t, w1x1, b1x1, mv);
        return sum(mul(y, y));
      },
      x266);
  run("dmc_alpha",
      [&](const Tensor& t) {
        ModulationVectors m2 = mv;
        m2.alpha = t;
        Tensor y = dmc(x266, w1x1, b1x1, m2);
        return sum(mul(y, y));
      },
      mv.alpha.clone());
  run("dmc_gamma",
      [&](const Tensor& t) {
        ModulationVectors m2 = mv;
        m2.gamma = t;
        Tensor y = dmc(x266, w1x1, b1x1, m2);
        return sum(mul(y, y));
      },
      mv.gamma.clone());

  ConvKernel kr1(Tensor::uniform({2, 2, 3, 3}, -0.5, 0.5, rng),
                 Tensor::uniform({2}, -0.2, 0.2, rng));
  ConvKernel kr2(Tensor::uniform({2, 2, 3, 3}, -0.5, 0.5, rng),
                 Tensor::uniform({2}, -0.2, 0.2, rng));
  run("residual_block",
      [&](const Tensor& t) {
        Tensor y = residual_block(t, kr1, kr2);
        return sum(mul(y, y));
      },
      Tensor::uniform({2, 4, 4}, 0.3, 1.0, rng));

  // end-to-end: tiny net on a 16x16 clip, 20 random parameter coordinates
  DidnetConfig cfg = DidnetConfig::tiny();
  cfg.color_blocks = 4;
  NetworkParams params = NetworkParams::init(cfg, 7);
  Rng drng(57);
  std::vector<Tensor> clip;
  for (int f = 0; f < 7; ++f)
    clip.push_back(Tensor::uniform({3, 16, 16}, 0.1, 0.9, drng));
  Tensor hdr_ref = Tensor::uniform({3, 16, 16}, 0.1, 0.9, drng);
  Tensor sdr_ref = Tensor::uniform({3, 16, 16}, 0.1, 0.9, drng);
  auto loss_fn = [&]() {
    DidnetOutputs o = didnet_forward(clip, params);
    return loss_dual(o.hdr, hdr_ref, o.sdr, sdr_ref);
  };
  std::vector<Tensor> plist = params.parameters();
  {
    Tape tape;
    Tensor loss = loss_fn();
    backward(loss);
  }
  Real worst_e2e = 0;
  Rng pick(58);
  const Real eps = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor& t = plist[pick.raw() % plist.size()];
    const int64_t idx = int64_t(pick.raw() % uint64_t(t.size()));
    const Real analytic = t.has_grad() ? t.grad()[idx] : 0.0;
    NoTape off;
    const Real saved = t.data()[idx];
    t.data()[idx] = saved + eps;
    const Real fp = loss_fn().item();
    t.data()[idx] = saved - eps;
    const Real fm = loss_fn().item();
    t.data()[idx] = saved;
    const Real numeric = (fp - fm) / (2 * eps);
    const Real denom =
        std::max({Real(1), std::abs(analytic), std::abs(numeric)});
    worst_e2e = std::max(worst_e2e, std::abs(analytic - numeric) / denom);
  }
  for (Tensor& t : plist) t.zero_grad();

  const bool pass = worst_ops <= 1e-4 && worst_e2e <= 1e-3;
  return report(out, 6,
                pass,
                "op gradients: worst rel err = " + sci(worst_ops) +
                    " (" + worst_name +
                    ", tol 1e-4); end-to-end 16x16: worst rel err = " +
                    sci(worst_e2e) + " (tol 1e-3)");
}

bool prove_color(std::ostream& out) {
  Real worst_pq = 0, worst_709 = 0, worst_gamut = 0, worst_itp = 0;
  for (int i = 0; i <= 10000; ++i) {
    const Real nits = Real(i);
    const Real rt = pq_eotf(pq_oetf(nits));
    worst_pq = std::max(worst_pq, std::abs(rt - nits) / std::max(nits, 1e-6));
  }
  for (int i = 0; i <= 10000; ++i) {
    const Real lum = Real(i) / 10000.0;
    const Real rt = bt709_eotf(bt709_oetf(lum));
    worst_709 =
        std::max(worst_709, std::abs(rt - lum) / std::max(lum, Real(1e-6)));
  }
  Rng rng(66);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor rgb = Tensor::uniform({3, 1, 1}, 0, 1, rng);
    Tensor rt = gamut_convert(gamut_convert(rgb, GamutDirection::k709To2020),
                              GamutDirection::k2020To709);
    worst_gamut = std::max(worst_gamut, max_abs_diff(rgb, rt));
  }
  // achromatic ramp: T = P = 0
  {
    Tensor gray = make_tensor({3, 1, 16});
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 16; ++i)
        gray.data()[c * 16 + i] = Real(i) / 15.0;
    Frame f = make_frame(gray, ColorSpace::kHdrBt2020Pq);
    Tensor itp = rgb_to_itp(f);
    for (int64_t i = 16; i < 48; ++i)
      worst_itp = std::max(worst_itp, std::abs(itp.data()[i]));
  }
  const bool pass = worst_pq <= 1e-6 && worst_709 <= 1e-6 &&
                    worst_gamut <= 1e-9 && worst_itp <= 1e-9;
  return report(out, 7, pass,
                "PQ round trip rel err = " + sci(worst_pq) +
                    ", BT.709 rel err = " + sci(worst_709) +
                    " (tol 1e-6); gamut round trip = " +
                    sci(worst_gamut) +
                    " (tol 1e-9); achromatic |T|,|P| = " +
                    sci(worst_itp));
}

bool prove_degradation(std::ostream& out) {
  const int qps[4] = {27, 32, 37, 42};
  Real mse[4] = {0, 0, 0, 0};
  Real ps[4] = {0, 0, 0, 0};
  const int n_clips = 6;
  for (int c = 0; c < n_clips; ++c) {
    std::vector<Frame> hdr = synth_source_clip(900 + uint64_t(c));
    for (int q = 0; q < 4; ++q) {
      ClipPair pair = synth_clip_pair(hdr, qps[q], 1);
      const Frame& lq = pair.lq_sdr[ClipPair::kMiddle];
      const Frame& hq = pair.hq_sdr_mid;
      Real se = 0;
      for (int64_t i = 0; i < lq.pixels.size(); ++i) {
        const Real d = lq.pixels.data()[i] - hq.pixels.data()[i];
        se += d * d;
      }
      mse[q] += se / Real(lq.pixels.size()) / Real(n_clips);
      ps[q] += psnr(lq, hq) / Real(n_clips);
    }
  }
  const bool mono = mse[0] < mse[1] && mse[1] < mse[2] && mse[2] < mse[3] &&
                    ps[0] > ps[1] && ps[1] > ps[2] && ps[2] > ps[3];
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "corpus mean MSE %.2e < %.2e < %.2e < %.2e across qp 27..42; "
                "PSNR %.2f > %.2f > %.2f > %.2f",
                mse[0], mse[1], mse[2], mse[3], ps[0], ps[1], ps[2], ps[3]);
  return report(out, 8, mono, buf);
}

bool prove_metric_sanity(std::ostream& out) {
  bool pass = true;
  std::string fail;
  auto expect = [&](bool cond, const char* what) {
    if (!cond) {
      pass = false;
      fail += std::string(" [") + what + "]";
    }
  };

  Rng rng(77);
  Tensor img = Tensor::uniform({3, 16, 16}, 0, 1, rng);
  Frame a = make_frame(img, ColorSpace::kHdrBt2020Pq);
  expect(psnr(a, a) == 99.0, "psnr identity cap");
  Tensor uni = Tensor::full({3, 16, 16}, 0.5);
  Tensor uni_off = Tensor::full({3, 16, 16}, 0.6);
  expect(std::abs(psnr(uni, uni_off) - 20.0) < 1e-9, "psnr 0.1 -> 20 dB");
  Tensor checker = Tensor::zeros({1, 16, 16});
  for (int64_t i = 0; i < 256; ++i) checker.data()[i] = Real(i % 2);
  expect(std::abs(psnr(checker, Tensor::zeros({1, 16, 16})) -
                  10.0 * std::log10(2.0)) < 1e-9,
         "psnr checker");

  Frame sa = make_frame(Tensor::uniform({3, 16, 16}, 0, 1, rng),
                        ColorSpace::kSdrBt709);
  expect(ssim(sa, sa) == 1.0, "ssim identity");
  Frame ca = make_frame(Tensor::full({3, 16, 16}, 0.4), ColorSpace::kSdrBt709);
  Frame cb = make_frame(Tensor::full({3, 16, 16}, 0.5), ColorSpace::kSdrBt709);
  const Real c1 = 0.01 * 0.01;
  const Real expected =
      (2 * 0.4 * 0.5 + c1) / (0.4 * 0.4 + 0.5 * 0.5 + c1);
  expect(std::abs(ssim(ca, cb) - expected) < 1e-12, "ssim constant closed form");
  expect(std::abs(ssim(ca, cb) - ssim(cb, ca)) < 1e-15, "ssim symmetry");

  Frame g1 = make_frame(Tensor::full({3, 4, 4}, 0.5), ColorSpace::kHdrBt2020Pq);
  expect(delta_e_itp(g1, g1) == 0.0, "delta_e identity");
  Frame g2 = make_frame(Tensor::full({3, 4, 4}, 0.5 + 10.0 / 720.0),
                        ColorSpace::kHdrBt2020Pq);
  expect(std::abs(delta_e_itp(g1, g2) - 10.0) < 1e-6, "delta_e I-shift");
  expect(std::abs(delta_e_itp(g1, g2) - delta_e_itp(g2, g1)) < 1e-12,
         "delta_e symmetry");

  // temporal std of constructed per-frame values {10, 14} -> 2.0
  Frame g3 = make_frame(Tensor::full({3, 4, 4}, 0.5 + 14.0 / 720.0),
                        ColorSpace::kHdrBt2020Pq);
  const Real tstd = temporal_std_delta_e({g2, g3}, {g1, g1});
  expect(std::abs(tstd - 2.0) < 1e-6, "temporal std {10,14} -> 2");
  expect(temporal_std_delta_e({g1, g1}, {g1, g1}) == 0.0, "temporal std zeros");

  // noise monotonicity: PSNR down, MS-SSIM down, delta_e up
  Tensor ramp = make_tensor({3, 192, 192});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < 192; ++y)
      for (int64_t x = 0; x < 192; ++x)
        ramp.data()[(c * 192 + y) * 192 + x] =
            0.15 + 0.7 * Real(y + x) / 382.0;
  Frame ref = make_frame(ramp, ColorSpace::kHdrBt2020Pq);
  Real prev_psnr = 1e9, prev_ms = 2.0, prev_de = -1;
  bool mono = true;
  for (int level = 1; level <= 3; ++level) {
    Rng nrng(100 + uint64_t(level));
    Tensor noisy = ramp.clone();
    const Real amp = 0.01 * Real(level) * Real(level);
    for (int64_t i = 0; i < noisy.size(); ++i)
      noisy.data()[i] = std::clamp(noisy.data()[i] + nrng.uniform(-amp, amp),
                                   Real(0), Real(1));
    Frame nf = make_frame(noisy, ColorSpace::kHdrBt2020Pq);
    const Real p = psnr(ref, nf);
    const Real m = ms_ssim(ref, nf);
    const Real d = delta_e_itp(ref, nf);
    mono = mono && p < prev_psnr && m < prev_ms && d > prev_de;
    prev_psnr = p;
    prev_ms = m;
    prev_de = d;
  }
  expect(mono, "noise monotonicity");

  return report(out, 11, pass,
                pass ? "metric identity, symmetry, closed-form and "
                       "monotonicity checks"
                     : "failed:" + fail);
}

bool prove_all(std::ostream& out) {
  bool ok = true;
  ok &= prove_modulation_equivalence(out);
  ok &= prove_dmc_fold(out);
  ok &= prove_cost_table(out);
  ok &= prove_wavelet(out);
  ok &= prove_deform(out);
  ok &= prove_grad_checks(out);
  ok &= prove_color(out);
  ok &= prove_degradation(out);
  ok &= prove_metric_sanity(out);
  return ok;
}

}  // namespace didnet
