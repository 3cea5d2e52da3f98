// Acceptance suite: runs every verifiable claim end to end and prints one
// PASS/FAIL line per criterion. Exit code 0 only when all criteria hold.
//
// Criteria 1-8 and 11 are the fast property suites. Criteria 9, 10 and 12
// train four network variants (full, no-aux-loss, no-condition-net, no
// wavelet-attention) plus a single-clip overfit run on a seeded synthetic
// corpus and compare held-out quality directionally.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "didnet/degradation.hpp"
#include "didnet/metrics.hpp"
#include "didnet/model.hpp"
#include "didnet/prove.hpp"
#include "didnet/wavelet.hpp"

using namespace didnet;

namespace {

constexpr int kTrainClips = 32;
constexpr int kTestClips = 8;
constexpr int kQp = 37;
constexpr int64_t kSteps = 3000;
constexpr uint64_t kInitSeed = 7;
constexpr uint64_t kOrderSeed = 11;

struct Corpus {
  std::vector<TrainSample> train;
  std::vector<ClipPair> test;
};

Corpus build_corpus() {
  Corpus c;
  for (int i = 0; i < kTrainClips; ++i) {
    std::vector<Frame> hdr = synth_source_clip(1000 + uint64_t(i));
    c.train.push_back(to_train_sample(synth_clip_pair(hdr, kQp, uint64_t(i))));
  }
  for (int i = 0; i < kTestClips; ++i) {
    std::vector<Frame> hdr = synth_source_clip(2000 + uint64_t(i));
    c.test.push_back(synth_clip_pair(hdr, kQp, uint64_t(i)));
  }
  return c;
}

NetworkParams train_variant(const Corpus& corpus, bool aux, bool prior,
                            bool wa) {
  DidnetConfig cfg = DidnetConfig::tiny();
  cfg.prior_enabled = prior;
  cfg.wa_enabled = wa;
  NetworkParams params = NetworkParams::init(cfg, kInitSeed);
  TrainConfig tc;
  tc.steps = kSteps;
  tc.seed = kOrderSeed;
  tc.aux_weight = aux ? 0.2 : 0.0;
  tc.main_weight = 0.8;
  tc.out_dir.clear();
  train(params, corpus.train, tc);
  return params;
}

Frame predict_middle(const ClipPair& pair, NetworkParams& params) {
  NoTape off;
  std::vector<Tensor> window;
  for (const Frame& f : pair.lq_sdr) window.push_back(f.pixels);
  DidnetOutputs o = didnet_forward(window, params);
  Tensor clamped = make_tensor(o.hdr.shape());
  for (int64_t i = 0; i < o.hdr.size(); ++i)
    clamped.data()[i] = std::clamp(o.hdr[i], Real(0), Real(1));
  return make_frame(std::move(clamped), ColorSpace::kHdrBt2020Pq,
                    BitDepth::kFloat);
}

struct TestStats {
  Real psnr_mean = 0;
  Real hf_psnr_mean = 0;
  Real sdr_restore_psnr = 0;  // aux branch vs clean SDR
  Real sdr_input_psnr = 0;    // degraded input vs clean SDR
};

TestStats eval_model(const Corpus& corpus, NetworkParams& params) {
  TestStats s;
  for (const ClipPair& pair : corpus.test) {
    Frame pred = predict_middle(pair, params);
    s.psnr_mean += psnr(pred, pair.hq_hdr_mid) / Real(kTestClips);
    s.hf_psnr_mean += hf_psnr(pred, pair.hq_hdr_mid) / Real(kTestClips);
    {
      NoTape off;
      std::vector<Tensor> window;
      for (const Frame& f : pair.lq_sdr) window.push_back(f.pixels);
      DidnetOutputs o = didnet_forward(window, params);
      Tensor cl = make_tensor(o.sdr.shape());
      for (int64_t i = 0; i < o.sdr.size(); ++i)
        cl.data()[i] = std::clamp(o.sdr[i], Real(0), Real(1));
      s.sdr_restore_psnr +=
          psnr(cl, pair.hq_sdr_mid.pixels) / Real(kTestClips);
      s.sdr_input_psnr +=
          psnr(pair.lq_sdr[ClipPair::kMiddle].pixels, pair.hq_sdr_mid.pixels) /
          Real(kTestClips);
    }
  }
  return s;
}

TestStats eval_baseline(const Corpus& corpus) {
  TestStats s;
  for (const ClipPair& pair : corpus.test) {
    Frame pred = reference_tonemap_inverse(pair.lq_sdr[ClipPair::kMiddle]);
    s.psnr_mean += psnr(pred, pair.hq_hdr_mid) / Real(kTestClips);
    s.hf_psnr_mean += hf_psnr(pred, pair.hq_hdr_mid) / Real(kTestClips);
  }
  return s;
}

bool report(int criterion, bool pass, const std::string& detail) {
  std::cout << "criterion " << criterion << (pass ? " PASS " : " FAIL ")
            << detail << '\n'
            << std::flush;
  return pass;
}

std::string fmt(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

int main() {
  bool ok = true;

  ok &= prove_modulation_equivalence(std::cout);
  ok &= prove_dmc_fold(std::cout);
  ok &= prove_cost_table(std::cout);
  ok &= prove_wavelet(std::cout);
  ok &= prove_deform(std::cout);
  {
    const auto t0 = std::chrono::steady_clock::now();
    ok &= prove_grad_checks(std::cout);
    const Real secs = std::chrono::duration<Real>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    std::cout << "  (gradient checks took " << fmt(secs) << " s, budget 60)\n";
    ok &= secs < 60.0;
  }
  ok &= prove_color(std::cout);
  ok &= prove_degradation(std::cout);
  ok &= prove_metric_sanity(std::cout);

  // ---- training-based criteria ----
  std::cout << "building corpus: " << kTrainClips << " train / " << kTestClips
            << " test clips, 64x64, qp=" << kQp << "\n"
            << std::flush;
  Corpus corpus = build_corpus();

  std::cout << "training 4 variants x " << kSteps
            << " steps plus a single-clip overfit run (concurrent)\n"
            << std::flush;
  const auto t0 = std::chrono::steady_clock::now();
  auto fut_full = std::async(std::launch::async, [&] {
    return train_variant(corpus, true, true, true);
  });
  auto fut_noaux = std::async(std::launch::async, [&] {
    return train_variant(corpus, false, true, true);
  });
  auto fut_noprior = std::async(std::launch::async, [&] {
    return train_variant(corpus, true, false, true);
  });
  auto fut_nowa = std::async(std::launch::async, [&] {
    return train_variant(corpus, true, true, false);
  });
  // single-clip memorization: train loss must fall below 0.01 in 2000 steps
  auto fut_overfit = std::async(std::launch::async, [&] {
    std::vector<Frame> hdr = synth_source_clip(3000);
    std::vector<TrainSample> one = {
        to_train_sample(synth_clip_pair(hdr, kQp, 3000))};
    DidnetConfig cfg = DidnetConfig::tiny();
    NetworkParams params = NetworkParams::init(cfg, kInitSeed);
    TrainConfig tc;
    tc.steps = 2000;
    tc.seed = kOrderSeed;
    tc.out_dir.clear();
    TrainResult res = train(params, one, tc);
    return res.losses.back();
  });

  NetworkParams full = fut_full.get();
  NetworkParams noaux = fut_noaux.get();
  NetworkParams noprior = fut_noprior.get();
  const Real train_minutes =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0)
          .count() /
      60.0;
  NetworkParams nowa = fut_nowa.get();
  const Real overfit_loss = fut_overfit.get();
  const Real wall_minutes =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0)
          .count() /
      60.0;

  TestStats base = eval_baseline(corpus);
  TestStats s_full = eval_model(corpus, full);
  TestStats s_noaux = eval_model(corpus, noaux);
  TestStats s_noprior = eval_model(corpus, noprior);
  TestStats s_nowa = eval_model(corpus, nowa);

  {
    const bool a = s_full.psnr_mean >= base.psnr_mean + 1.0;
    const bool b = s_noaux.psnr_mean <= s_full.psnr_mean;
    const bool c = s_noprior.psnr_mean <= s_full.psnr_mean;
    const bool time_ok = train_minutes <= 30.0;
    ok &= report(
        9, a && b && c && time_ok,
        "held-out HDR PSNR: baseline " + fmt(base.psnr_mean) + " dB, full " +
            fmt(s_full.psnr_mean) + " dB (needs >= +1.0), no-aux " +
            fmt(s_noaux.psnr_mean) + " dB (<= full), no-condition-net " +
            fmt(s_noprior.psnr_mean) + " dB (<= full); training wall time " +
            fmt(train_minutes) + " min (<= 30)");
    std::cout << "  (all five runs finished after " << fmt(wall_minutes)
              << " min; single-clip overfit loss " << overfit_loss
              << (overfit_loss < 0.01 ? " < 0.01 ok" : " >= 0.01 FAIL")
              << ")\n";
    ok &= overfit_loss < 0.01;

    const bool aux_improves = s_full.sdr_restore_psnr > s_full.sdr_input_psnr;
    std::cout << "  (restored SDR " << fmt(s_full.sdr_restore_psnr)
              << " dB vs degraded input " << fmt(s_full.sdr_input_psnr)
              << " dB held-out" << (aux_improves ? ", improves ok" : " FAIL")
              << ")\n";
    ok &= aux_improves;
  }

  ok &= report(10, s_full.hf_psnr_mean >= s_nowa.hf_psnr_mean,
               "held-out HF-PSNR: with attention " + fmt(s_full.hf_psnr_mean) +
                   " dB vs without " + fmt(s_nowa.hf_psnr_mean) +
                   " dB (must not decrease)");

  {
    // static scene with per-frame grain: temporal color-error spread of the
    // fused model vs the single-frame (fusion-disabled) variant
    SourceClipParams sp;
    sp.motion = 0.0;
    std::vector<Frame> hdr = synth_source_clip(4000, sp);
    ClipPair pair = synth_clip_pair(hdr, kQp, 4000);
    std::vector<Frame> lq = pair.lq_sdr;
    std::vector<Frame> fused = convert_clip(lq, full, false);
    std::vector<Frame> single = convert_clip(lq, full, true);
    const Real std_fused = temporal_std_delta_e(fused, hdr);
    const Real std_single = temporal_std_delta_e(single, hdr);
    ok &= report(12, std_fused <= std_single,
                 "static-clip temporal std of color error: fused " +
                     std::to_string(std_fused) + " <= per-frame " +
                     std::to_string(std_single));
  }

  std::cout << (ok ? "ACCEPTANCE: all criteria passed\n"
                   : "ACCEPTANCE: FAILURES present\n");
  return ok ? 0 : 1;
}
