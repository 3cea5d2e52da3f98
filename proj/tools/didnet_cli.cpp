// didnet command-line tool: dataset synthesis, training, SDR->HDR
// conversion, evaluation, property proofs, and the modulation cost table.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "didnet/config.hpp"
#include "didnet/degradation.hpp"
#include "didnet/frame_io.hpp"
#include "didnet/metrics.hpp"
#include "didnet/model.hpp"
#include "didnet/modulation.hpp"
#include "didnet/prove.hpp"
#include "didnet/wavelet.hpp"

namespace fs = std::filesystem;
using namespace didnet;

namespace {

std::string clip_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%03d", index);
  return buf;
}

int cmd_synth(const std::string& out_dir, int clips, int64_t width,
              int64_t height, int qp, uint64_t seed, double motion,
              double grain, const std::string& import_dir) {
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < clips; ++i) {
    SourceClipParams sp;
    sp.width = width;
    sp.height = height;
    sp.motion = motion;
    sp.grain = grain;
    const uint64_t clip_seed = seed + uint64_t(i);
    std::vector<Frame> hdr = synth_source_clip(clip_seed, sp);
    ClipPair pair = synth_clip_pair(hdr, qp, clip_seed);

    const std::string cdir = out_dir + "/" + clip_dir_name(i);
    fs::create_directories(cdir + "/lq");
    if (!import_dir.empty()) {
      // external-codec escape hatch: take pre-degraded SDR frames from the
      // import tree (same clip/frame layout) instead of the DCT simulator
      for (int f = 0; f < ClipPair::kFrames; ++f) {
        const std::string src = import_dir + "/" + clip_dir_name(i) +
                                "/frame_" + std::to_string(f) + ".png";
        pair.lq_sdr[size_t(f)] =
            load_frame(src, ColorSpace::kSdrBt709, BitDepth::k8);
      }
    }
    for (int f = 0; f < ClipPair::kFrames; ++f)
      save_frame(cdir + "/lq/frame_" + std::to_string(f) + ".png",
                 pair.lq_sdr[size_t(f)]);
    save_frame(cdir + "/hq_sdr.dten", pair.hq_sdr_mid);
    save_frame(cdir + "/hq_hdr.dten", pair.hq_hdr_mid);

    ManifestEntry e;
    e.clip_id = clip_dir_name(i);
    e.qp = qp;
    e.seed = clip_seed;
    e.lq_dir = cdir + "/lq/";
    e.hqsdr_path = cdir + "/hq_sdr.dten";
    e.hqhdr_path = cdir + "/hq_hdr.dten";
    entries.push_back(std::move(e));
  }
  write_manifest(out_dir + "/manifest.txt", entries);
  std::cout << "wrote " << clips << " clips and manifest to " << out_dir
            << "\n";
  return 0;
}

std::vector<Frame> load_lq_clip(const std::string& lq_dir) {
  std::vector<Frame> clip;
  for (int f = 0; f < ClipPair::kFrames; ++f) {
    const std::string path = lq_dir + "frame_" + std::to_string(f) + ".png";
    clip.push_back(load_frame(path, ColorSpace::kSdrBt709, BitDepth::k8));
  }
  return clip;
}

std::vector<TrainSample> load_dataset(const std::string& manifest_path) {
  std::vector<TrainSample> data;
  for (const ManifestEntry& e : read_manifest(manifest_path)) {
    TrainSample s;
    for (const Frame& f : load_lq_clip(e.lq_dir)) s.lq.push_back(f.pixels);
    s.hq_sdr = load_frame(e.hqsdr_path, ColorSpace::kSdrBt709).pixels;
    s.hq_hdr = load_frame(e.hqhdr_path, ColorSpace::kHdrBt2020Pq).pixels;
    data.push_back(std::move(s));
  }
  return data;
}

int cmd_train(const std::string& config_path) {
  Config cfg = parse_config_file(config_path);
  DidnetConfig net;
  net.channels = cfg.channels;
  net.residual_blocks = cfg.residual_blocks;
  net.dmc_layers = cfg.dmc_layers;
  net.color_blocks = cfg.color_blocks;
  net.offset_channels = cfg.offset_channels;
  net.wa_enabled = cfg.wa_enabled;
  net.prior_enabled = cfg.prior_enabled;

  std::vector<TrainSample> data = load_dataset(cfg.train_manifest);
  NetworkParams params = NetworkParams::init(net, cfg.seed);
  std::cout << "training " << params.param_count() << " parameters on "
            << data.size() << " clips for " << cfg.steps << " steps\n";

  TrainConfig tc;
  tc.steps = cfg.steps;
  tc.lr = cfg.lr;
  tc.lr_warm_steps = cfg.lr_warm_steps;
  tc.lr_halve_every = cfg.lr_halve_every;
  tc.main_weight = cfg.main_weight;
  tc.aux_weight = cfg.aux_weight;
  tc.seed = cfg.seed;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.out_dir = cfg.out_dir;
  TrainResult res = train(params, data, tc);
  std::cout << "final loss " << res.losses.back() << "; checkpoints under "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_convert(const std::string& clip_dir, const std::string& checkpoint,
                const std::string& out_dir, bool per_frame) {
  std::vector<std::string> frame_files;
  for (int f = 0;; ++f) {
    const std::string png = clip_dir + "/frame_" + std::to_string(f) + ".png";
    const std::string dten =
        clip_dir + "/frame_" + std::to_string(f) + ".dten";
    if (fs::exists(png))
      frame_files.push_back(png);
    else if (fs::exists(dten))
      frame_files.push_back(dten);
    else
      break;
  }
  if (frame_files.size() != ClipPair::kFrames)
    throw ContractError(
        "convert: expected exactly 7 frames (frame_0..frame_6), found " +
        std::to_string(frame_files.size()));
  std::vector<Frame> clip;
  for (const std::string& path : frame_files)
    clip.push_back(load_frame(path, ColorSpace::kSdrBt709, BitDepth::k8));

  NetworkParams params = NetworkParams::load_checkpoint(checkpoint);
  std::vector<Frame> hdr = convert_clip(clip, params, per_frame);
  fs::create_directories(out_dir);
  for (size_t f = 0; f < hdr.size(); ++f)
    save_frame(out_dir + "/hdr_" + std::to_string(f) + ".png", hdr[f]);
  std::cout << "wrote " << hdr.size() << " HDR frames to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& checkpoint,
             const std::string& out_prefix, bool baseline) {
  NetworkParams params;
  if (!baseline) params = NetworkParams::load_checkpoint(checkpoint);

  std::vector<MetricReport> reports;
  for (const ManifestEntry& e : read_manifest(manifest_path)) {
    std::vector<Frame> clip = load_lq_clip(e.lq_dir);
    Frame ref_hdr = load_frame(e.hqhdr_path, ColorSpace::kHdrBt2020Pq);

    Frame pred;
    if (baseline) {
      pred = reference_tonemap_inverse(clip[ClipPair::kMiddle]);
    } else {
      NoTape off;
      std::vector<Tensor> window;
      for (const Frame& f : clip) window.push_back(f.pixels);
      DidnetOutputs o = didnet_forward(window, params);
      Tensor clamped = make_tensor(o.hdr.shape());
      for (int64_t i = 0; i < o.hdr.size(); ++i)
        clamped.data()[i] = std::clamp(o.hdr[i], Real(0), Real(1));
      pred = make_frame(std::move(clamped), ColorSpace::kHdrBt2020Pq,
                        BitDepth::kFloat);
    }

    MetricReport r;
    r.clip_id = e.clip_id;
    r.qp_label = e.qp;
    r.add("psnr", ClipPair::kMiddle, psnr(pred, ref_hdr));
    r.add("ssim", ClipPair::kMiddle, ssim(pred, ref_hdr));
    r.add("delta_e_itp", ClipPair::kMiddle, delta_e_itp(pred, ref_hdr));
    r.add("hf_psnr", ClipPair::kMiddle, hf_psnr(pred, ref_hdr));
    if (std::min(ref_hdr.height(), ref_hdr.width()) >= 176)
      r.add("ms_ssim", ClipPair::kMiddle, ms_ssim(pred, ref_hdr));
    reports.push_back(std::move(r));
  }
  write_metrics_csv(out_prefix + ".csv", reports);
  write_metrics_markdown(out_prefix + ".md", reports);
  std::cout << "wrote " << out_prefix << ".csv and " << out_prefix << ".md\n";
  return 0;
}

int cmd_flops() {
  std::printf("%-18s %14s %10s %12s\n", "feature shape", "feature-mod ops",
              "kernel-mod", "ratio");
  for (const auto& [h, w] : std::vector<std::pair<int64_t, int64_t>>{
           {720, 480}, {1080, 1920}, {2160, 3840}}) {
    const auto [gfm_ops, ckm_ops] = modulation_cost(h, w, 64, 64);
    char shape[32];
    std::snprintf(shape, sizeof shape, "%ldx%ldx64", long(h), long(w));
    std::printf("%-18s %14llu %10llu %11.5f%%\n", shape,
                (unsigned long long)gfm_ops, (unsigned long long)ckm_ops,
                100.0 * double(ckm_ops) / double(gfm_ops));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-degradation SDR-to-HDR conversion toolkit"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "synthesize a dataset");
  std::string synth_out = "data";
  int synth_clips = 8;
  int64_t synth_w = 64, synth_h = 64;
  int synth_qp = 37;
  uint64_t synth_seed = 1;
  double synth_motion = 1.0, synth_grain = 0.0035;
  std::string synth_import;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--clips", synth_clips, "number of clips");
  synth->add_option("--width", synth_w, "frame width (multiple of 8)");
  synth->add_option("--height", synth_h, "frame height (multiple of 8)");
  synth->add_option("--qp", synth_qp, "degradation level: 27/32/37/42");
  synth->add_option("--seed", synth_seed, "base seed");
  synth->add_option("--motion", synth_motion, "shape velocity scale");
  synth->add_option("--grain", synth_grain, "per-frame grain amplitude");
  synth->add_option("--import", synth_import,
                    "directory of externally degraded SDR frames");

  auto* train_cmd = app.add_subcommand("train", "train from a config file");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "key=value config file")
      ->required();

  auto* convert = app.add_subcommand("convert", "convert a 7-frame SDR clip");
  std::string conv_clip, conv_ckpt, conv_out = "converted";
  bool conv_per_frame = false;
  convert->add_option("--clip", conv_clip, "directory with frame_0..frame_6")
      ->required();
  convert->add_option("--checkpoint", conv_ckpt, "checkpoint directory")
      ->required();
  convert->add_option("--out", conv_out, "output directory");
  convert->add_flag("--per-frame", conv_per_frame,
                    "single-frame mode (no temporal fusion)");

  auto* eval = app.add_subcommand("eval", "evaluate on a dataset manifest");
  std::string eval_manifest, eval_ckpt, eval_out = "report";
  bool eval_baseline = false;
  eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory");
  eval->add_option("--out", eval_out, "report path prefix");
  eval->add_flag("--baseline", eval_baseline,
                 "evaluate the inverse-tonemap baseline instead of a model");

  auto* prove = app.add_subcommand("prove", "run all property suites");
  auto* flops = app.add_subcommand("flops", "print the modulation cost table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_clips, synth_w, synth_h, synth_qp,
                       synth_seed, synth_motion, synth_grain, synth_import);
    if (train_cmd->parsed()) return cmd_train(train_config);
    if (convert->parsed())
      return cmd_convert(conv_clip, conv_ckpt, conv_out, conv_per_frame);
    if (eval->parsed()) {
      if (!eval_baseline && eval_ckpt.empty())
        throw ContractError("eval: --checkpoint or --baseline required");
      return cmd_eval(eval_manifest, eval_ckpt, eval_out, eval_baseline);
    }
    if (prove->parsed()) return prove_all(std::cout) ? 0 : 1;
    if (flops->parsed()) return cmd_flops();
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
