#pragma once

#include <string>
#include <vector>

#include "didnet/color.hpp"
#include "didnet/tensor.hpp"

namespace didnet {

Real psnr(const Tensor& a, const Tensor& b, Real peak = 1.0);
Real psnr(const Frame& a, const Frame& b, Real peak = 1.0);  // 99 dB cap

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// computed per channel over valid window positions and averaged.
/// Requires min(H,W) >= 11.
Real ssim(const Frame& a, const Frame& b);
Real ssim(const Tensor& a, const Tensor& b);

/// 5-scale MS-SSIM with weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333);
/// scales are linked by 2x2 mean downsampling and negative terms clamp to
/// zero. Requires min(H,W) >= 176 so that scale 5 still fits the window.
Real ms_ssim(const Frame& a, const Frame& b);

/// Mean over pixels of 720 * sqrt(dI^2 + dT^2 + dP^2) in ITP space.
/// Frames must carry the same space tag.
Real delta_e_itp(const Frame& a, const Frame& b);

/// Population standard deviation of per-frame delta_e_itp values.
Real temporal_std_delta_e(const std::vector<Frame>& pred,
                          const std::vector<Frame>& ref);

/// Per-clip metric series; mean() is the arithmetic mean of the values.
struct MetricReport {
  std::string clip_id;
  int qp_label = 0;

  struct Series {
    std::string metric;
    std::vector<int> frames;
    std::vector<Real> values;
  };
  std::vector<Series> series;

  void add(const std::string& metric, int frame, Real value);
  Real mean(const std::string& metric) const;
};

// CSV rows `clip,frame,metric,value` in report order (byte-stable).
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricReport>& reports);

// Markdown summary: one row per clip plus per-QP aggregate means.
void write_metrics_markdown(const std::string& path,
                            const std::vector<MetricReport>& reports);

}  // namespace didnet
