#include "didnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace didnet {

namespace {

constexpr int kWin = 11;
constexpr Real kSigma = 1.5;
constexpr Real kK1 = 0.01;
constexpr Real kK2 = 0.03;
constexpr Real kC1 = (kK1 * 1.0) * (kK1 * 1.0);
constexpr Real kC2 = (kK2 * 1.0) * (kK2 * 1.0);
constexpr Real kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct Gauss11 {
  Real w[kWin * kWin];
  Gauss11() {
    Real s = 0;
    for (int i = 0; i < kWin; ++i)
      for (int j = 0; j < kWin; ++j) {
        const Real dy = i - (kWin - 1) / 2.0;
        const Real dx = j - (kWin - 1) / 2.0;
        w[i * kWin + j] = std::exp(-(dy * dy + dx * dx) / (2 * kSigma * kSigma));
        s += w[i * kWin + j];
      }
    for (Real& v : w) v /= s;
  }
};
const Gauss11 kGauss;

// Mean luminance and contrast-structure terms over all valid windows of one
// channel plane; returns (mean l, mean cs, mean l*cs).
struct SsimTerms {
  Real l = 0, cs = 0, lcs = 0;
};

SsimTerms ssim_plane(const Real* a, const Real* b, int64_t H, int64_t W) {
  SsimTerms t;
  int64_t count = 0;
  for (int64_t y = 0; y + kWin <= H; ++y) {
    for (int64_t x = 0; x + kWin <= W; ++x) {
      Real ma = 0, mb = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const Real wv = kGauss.w[i * kWin + j];
          ma += wv * a[(y + i) * W + x + j];
          mb += wv * b[(y + i) * W + x + j];
        }
      Real va = 0, vb = 0, cov = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const Real wv = kGauss.w[i * kWin + j];
          const Real da = a[(y + i) * W + x + j] - ma;
          const Real db = b[(y + i) * W + x + j] - mb;
          va += wv * da * da;
          vb += wv * db * db;
          cov += wv * da * db;
        }
      const Real l = (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
      const Real cs = (2 * cov + kC2) / (va + vb + kC2);
      t.l += l;
      t.cs += cs;
      t.lcs += l * cs;
      ++count;
    }
  }
  t.l /= Real(count);
  t.cs /= Real(count);
  t.lcs /= Real(count);
  return t;
}

SsimTerms ssim_terms(const Tensor& a, const Tensor& b) {
  const int64_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
  SsimTerms acc;
  for (int64_t c = 0; c < C; ++c) {
    SsimTerms t = ssim_plane(a.data() + c * H * W, b.data() + c * H * W, H, W);
    acc.l += t.l;
    acc.cs += t.cs;
    acc.lcs += t.lcs;
  }
  acc.l /= Real(C);
  acc.cs /= Real(C);
  acc.lcs /= Real(C);
  return acc;
}

Tensor downsample2_crop(const Tensor& x) {
  const int64_t C = x.dim(0);
  const int64_t H = x.dim(1) & ~int64_t(1);
  const int64_t W = x.dim(2) & ~int64_t(1);
  Tensor out = make_tensor({C, H / 2, W / 2});
  const Real* px = x.data();
  Real* po = out.data();
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < H / 2; ++i)
      for (int64_t j = 0; j < W / 2; ++j)
        po[(c * (H / 2) + i) * (W / 2) + j] =
            0.25 * (px[(c * x.dim(1) + 2 * i) * x.dim(2) + 2 * j] +
                    px[(c * x.dim(1) + 2 * i) * x.dim(2) + 2 * j + 1] +
                    px[(c * x.dim(1) + 2 * i + 1) * x.dim(2) + 2 * j] +
                    px[(c * x.dim(1) + 2 * i + 1) * x.dim(2) + 2 * j + 1]);
  return out;
}

void require_same_frames(const Frame& a, const Frame& b, const char* op) {
  if (a.pixels.shape() != b.pixels.shape())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Real psnr(const Tensor& a, const Tensor& b, Real peak) {
  if (a.shape() != b.shape()) throw ShapeError("psnr: shape mismatch");
  const Real* pa = a.data();
  const Real* pb = b.data();
  const int64_t n = a.size();
  Real se = 0;
  for (int64_t i = 0; i < n; ++i) {
    const Real d = pa[i] - pb[i];
    se += d * d;
  }
  const Real mse = se / Real(n);
  if (mse <= 0) return 99.0;
  return std::min(Real(99), 10.0 * std::log10(peak * peak / mse));
}

Real psnr(const Frame& a, const Frame& b, Real peak) {
  require_same_frames(a, b, "psnr");
  return psnr(a.pixels, b.pixels, peak);
}

Real ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("ssim: shape mismatch");
  if (a.rank() != 3) throw ShapeError("ssim: expected [C,H,W]");
  if (a.dim(1) < kWin || a.dim(2) < kWin)
    throw ContractError("ssim: input smaller than the 11x11 window");
  return ssim_terms(a, b).lcs;
}

Real ssim(const Frame& a, const Frame& b) {
  require_same_frames(a, b, "ssim");
  return ssim(a.pixels, b.pixels);
}

Real ms_ssim(const Frame& a, const Frame& b) {
  require_same_frames(a, b, "ms_ssim");
  if (std::min(a.pixels.dim(1), a.pixels.dim(2)) < 176)
    throw ContractError("ms_ssim: min(H,W) must be >= 176 for 5 scales");
  Tensor xa = a.pixels, xb = b.pixels;
  Real result = 1.0;
  for (int scale = 0; scale < 5; ++scale) {
    SsimTerms t = ssim_terms(xa, xb);
    const Real cs = std::max(t.cs, Real(0));
    const Real l = std::max(t.l, Real(0));
    if (scale < 4) {
      result *= std::pow(cs, kMsWeights[scale]);
      xa = downsample2_crop(xa);
      xb = downsample2_crop(xb);
    } else {
      result *= std::pow(l * cs, kMsWeights[scale]);
    }
  }
  return result;
}

Real delta_e_itp(const Frame& a, const Frame& b) {
  require_same_frames(a, b, "delta_e_itp");
  if (a.space != b.space)
    throw ContractError("delta_e_itp: frames must share a color space tag");
  Tensor ia = rgb_to_itp(a);
  Tensor ib = rgb_to_itp(b);
  const int64_t hw = a.height() * a.width();
  const Real* pa = ia.data();
  const Real* pb = ib.data();
  Real acc = 0;
  for (int64_t i = 0; i < hw; ++i) {
    const Real di = pa[i] - pb[i];
    const Real dt = pa[hw + i] - pb[hw + i];
    const Real dp = pa[2 * hw + i] - pb[2 * hw + i];
    acc += 720.0 * std::sqrt(di * di + dt * dt + dp * dp);
  }
  return acc / Real(hw);
}

Real temporal_std_delta_e(const std::vector<Frame>& pred,
                          const std::vector<Frame>& ref) {
  if (pred.size() != ref.size() || pred.empty())
    throw ContractError("temporal_std_delta_e: clip length mismatch");
  std::vector<Real> de(pred.size());
  for (size_t i = 0; i < pred.size(); ++i)
    de[i] = delta_e_itp(pred[i], ref[i]);
  Real mean = 0;
  for (Real v : de) mean += v;
  mean /= Real(de.size());
  Real var = 0;
  for (Real v : de) var += (v - mean) * (v - mean);
  var /= Real(de.size());
  return std::sqrt(var);
}

void MetricReport::add(const std::string& metric, int frame, Real value) {
  for (Series& s : series) {
    if (s.metric == metric) {
      s.frames.push_back(frame);
      s.values.push_back(value);
      return;
    }
  }
  series.push_back({metric, {frame}, {value}});
}

Real MetricReport::mean(const std::string& metric) const {
  for (const Series& s : series) {
    if (s.metric == metric) {
      Real acc = 0;
      for (Real v : s.values) acc += v;
      return acc / Real(s.values.size());
    }
  }
  throw ContractError("MetricReport: unknown metric " + metric);
}

namespace {

std::string fmt_value(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricReport>& reports) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_metrics_csv: cannot open " + path);
  f << "clip,frame,metric,value\n";
  for (const MetricReport& r : reports)
    for (const MetricReport::Series& s : r.series)
      for (size_t i = 0; i < s.values.size(); ++i)
        f << r.clip_id << ',' << s.frames[i] << ',' << s.metric << ','
          << fmt_value(s.values[i]) << '\n';
  if (!f) throw IoError("write_metrics_csv: write failed");
}

void write_metrics_markdown(const std::string& path,
                            const std::vector<MetricReport>& reports) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_metrics_markdown: cannot open " + path);
  // collect the union of metric names in first-seen order
  std::vector<std::string> metrics;
  for (const MetricReport& r : reports)
    for (const auto& s : r.series)
      if (std::find(metrics.begin(), metrics.end(), s.metric) == metrics.end())
        metrics.push_back(s.metric);

  f << "| clip | qp |";
  for (const auto& m : metrics) f << ' ' << m << " |";
  f << "\n|---|---|";
  for (size_t i = 0; i < metrics.size(); ++i) f << "---|";
  f << '\n';
  for (const MetricReport& r : reports) {
    f << "| " << r.clip_id << " | " << r.qp_label << " |";
    for (const auto& m : metrics) f << ' ' << fmt_value(r.mean(m)) << " |";
    f << '\n';
  }
  // per-QP aggregate means
  std::set<int> qps;
  for (const MetricReport& r : reports) qps.insert(r.qp_label);
  for (int qp : qps) {
    f << "| mean(qp=" << qp << ") | " << qp << " |";
    for (const auto& m : metrics) {
      Real acc = 0;
      int n = 0;
      for (const MetricReport& r : reports)
        if (r.qp_label == qp) {
          acc += r.mean(m);
          ++n;
        }
      f << ' ' << fmt_value(acc / Real(n)) << " |";
    }
    f << '\n';
  }
  if (!f) throw IoError("write_metrics_markdown: write failed");
}

}  // namespace didnet
