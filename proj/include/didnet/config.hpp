#pragma once

#include <string>

#include "didnet/tensor.hpp"

namespace didnet {

/// Plain key=value run configuration. Unknown keys are rejected; the
/// required keys are width, height, qp, seed, channels, lr, steps,
/// aux_weight, main_weight, train_manifest, out_dir.
struct Config {
  int64_t width = 64;
  int64_t height = 64;
  int qp = 37;
  uint64_t seed = 1;
  int64_t channels = 16;
  Real lr = 5e-4;
  int64_t steps = 3000;
  Real aux_weight = 0.2;
  Real main_weight = 0.8;
  std::string train_manifest;
  std::string out_dir;

  // optional
  std::string test_manifest;
  int residual_blocks = 2;
  int dmc_layers = 3;
  int color_blocks = 6;
  int64_t offset_channels = 16;
  int64_t checkpoint_every = 1000;
  bool wa_enabled = true;
  bool prior_enabled = true;
  int64_t lr_warm_steps = 1000;
  int64_t lr_halve_every = 500;
};

Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);

}  // namespace didnet
