#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "didnet/metrics.hpp"

using namespace didnet;

TEST_CASE("psnr closed forms") {
  Rng rng(1);
  Frame a = make_frame(Tensor::uniform({3, 8, 8}, 0, 1, rng),
                       ColorSpace::kSdrBt709);
  CHECK(psnr(a, a) == 99.0);

  Frame u = make_frame(Tensor::full({3, 8, 8}, 0.3), ColorSpace::kSdrBt709);
  Frame v = make_frame(Tensor::full({3, 8, 8}, 0.4), ColorSpace::kSdrBt709);
  CHECK(psnr(u, v) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(u, v) == psnr(v, u));

  Tensor checker = Tensor::zeros({1, 8, 8});
  for (int64_t i = 0; i < 64; ++i) checker.data()[i] = Real(i % 2);
  CHECK(psnr(checker, Tensor::zeros({1, 8, 8})) ==
        doctest::Approx(3.0102999566).epsilon(1e-9));

  CHECK_THROWS_AS(psnr(u.pixels, Tensor::zeros({3, 4, 4})), ShapeError);
}

TEST_CASE("ssim identity, constant closed form, anti-correlation") {
  Rng rng(2);
  Frame a = make_frame(Tensor::uniform({3, 16, 16}, 0, 1, rng),
                       ColorSpace::kSdrBt709);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));

  Frame ca = make_frame(Tensor::full({3, 12, 12}, 0.25), ColorSpace::kSdrBt709);
  Frame cb = make_frame(Tensor::full({3, 12, 12}, 0.35), ColorSpace::kSdrBt709);
  const Real c1 = 1e-4;
  const Real expected = (2 * 0.25 * 0.35 + c1) / (0.25 * 0.25 + 0.35 * 0.35 + c1);
  CHECK(ssim(ca, cb) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ssim(ca, cb) == doctest::Approx(ssim(cb, ca)).epsilon(1e-15));

  // binary image vs inverse: single 11x11 window, compare with a direct
  // formula oracle and check the strong negative correlation
  Tensor bin = Tensor::zeros({1, 11, 11});
  Rng brng(3);
  for (int64_t i = 0; i < 121; ++i)
    bin.data()[i] = (brng.raw() & 1) ? 1.0 : 0.0;
  Tensor inv = Tensor::zeros({1, 11, 11});
  for (int64_t i = 0; i < 121; ++i) inv.data()[i] = 1.0 - bin[i];
  const Real got = ssim(bin, inv);
  CHECK(got < -0.5);
  {
    // independent windowed oracle with the same Gaussian weights
    Real w[121], s = 0;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        const Real dy = i - 5.0, dx = j - 5.0;
        w[i * 11 + j] = std::exp(-(dy * dy + dx * dx) / (2 * 1.5 * 1.5));
        s += w[i * 11 + j];
      }
    for (Real& v : w) v /= s;
    Real ma = 0, mb = 0;
    for (int i = 0; i < 121; ++i) {
      ma += w[i] * bin[i];
      mb += w[i] * inv[i];
    }
    Real va = 0, vb = 0, cov = 0;
    for (int i = 0; i < 121; ++i) {
      va += w[i] * (bin[i] - ma) * (bin[i] - ma);
      vb += w[i] * (inv[i] - mb) * (inv[i] - mb);
      cov += w[i] * (bin[i] - ma) * (inv[i] - mb);
    }
    const Real c2 = 9e-4;
    const Real oracle = ((2 * ma * mb + c1) / (ma * ma + mb * mb + c1)) *
                        ((2 * cov + c2) / (va + vb + c2));
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
  }

  CHECK_THROWS_AS(
      ssim(make_frame(Tensor::zeros({3, 8, 8}), ColorSpace::kSdrBt709),
           make_frame(Tensor::zeros({3, 8, 8}), ColorSpace::kSdrBt709)),
      ContractError);
}

TEST_CASE("ms_ssim range, identity, size guard") {
  Rng rng(4);
  Tensor ramp = make_tensor({3, 192, 192});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < 192; ++y)
      for (int64_t x = 0; x < 192; ++x)
        ramp.data()[(c * 192 + y) * 192 + x] =
            0.1 + 0.8 * Real(y) / 191.0 + 0.02 * rng.next();
  Frame a = make_frame(ramp, ColorSpace::kSdrBt709);
  CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor noisy = ramp.clone();
  Rng nrng(5);
  for (int64_t i = 0; i < noisy.size(); ++i)
    noisy.data()[i] =
        std::clamp(noisy.data()[i] + nrng.uniform(-0.05, 0.05), 0.0, 1.0);
  Frame b = make_frame(noisy, ColorSpace::kSdrBt709);
  const Real v = ms_ssim(a, b);
  CHECK(v > 0.0);
  CHECK(v < 1.0);

  Frame small = make_frame(Tensor::zeros({3, 64, 64}), ColorSpace::kSdrBt709);
  CHECK_THROWS_AS(ms_ssim(small, small), ContractError);
}

TEST_CASE("delta_e_itp identity, single-axis shift, symmetry") {
  Frame a = make_frame(Tensor::full({3, 4, 4}, 0.4), ColorSpace::kHdrBt2020Pq);
  CHECK(delta_e_itp(a, a) == 0.0);

  const Real delta = 12.5 / 720.0;
  Frame b = make_frame(Tensor::full({3, 4, 4}, 0.4 + delta),
                       ColorSpace::kHdrBt2020Pq);
  CHECK(delta_e_itp(a, b) == doctest::Approx(12.5).epsilon(1e-6));
  CHECK(delta_e_itp(a, b) == doctest::Approx(delta_e_itp(b, a)).epsilon(1e-12));

  Frame sdr = make_frame(Tensor::full({3, 4, 4}, 0.4), ColorSpace::kSdrBt709);
  CHECK_THROWS_AS(delta_e_itp(a, sdr), ContractError);
}

TEST_CASE("temporal std of per-frame color error") {
  Frame ref = make_frame(Tensor::full({3, 4, 4}, 0.5), ColorSpace::kHdrBt2020Pq);
  CHECK(temporal_std_delta_e({ref, ref, ref}, {ref, ref, ref}) == 0.0);

  Frame d10 = make_frame(Tensor::full({3, 4, 4}, 0.5 + 10.0 / 720.0),
                         ColorSpace::kHdrBt2020Pq);
  Frame d14 = make_frame(Tensor::full({3, 4, 4}, 0.5 + 14.0 / 720.0),
                         ColorSpace::kHdrBt2020Pq);
  // constant per-frame values give zero spread
  CHECK(temporal_std_delta_e({d10, d10, d10}, {ref, ref, ref}) ==
        doctest::Approx(0.0).epsilon(1e-9));
  // {10, 14} -> population std 2.0
  CHECK(temporal_std_delta_e({d10, d14}, {ref, ref}) ==
        doctest::Approx(2.0).epsilon(1e-6));

  CHECK_THROWS_AS(temporal_std_delta_e({ref}, {ref, ref}), ContractError);
}

TEST_CASE("report invariants and writers") {
  MetricReport r;
  r.clip_id = "clip_000";
  r.qp_label = 37;
  r.add("psnr", 3, 30.0);
  r.add("psnr", 4, 32.0);
  r.add("ssim", 3, 0.9);
  CHECK(r.mean("psnr") == doctest::Approx(31.0));

  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "didnet_metrics").string();
  fs::create_directories(dir);
  write_metrics_csv(dir + "/r.csv", {r});
  write_metrics_markdown(dir + "/r.md", {r});

  std::ifstream csv(dir + "/r.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "clip,frame,metric,value");
  std::getline(csv, line);
  CHECK(line == "clip_000,3,psnr,30.000000");

  // byte stability across runs
  write_metrics_csv(dir + "/r2.csv", {r});
  std::ifstream c1(dir + "/r.csv"), c2(dir + "/r2.csv");
  std::string s1((std::istreambuf_iterator<char>(c1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(c2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}
