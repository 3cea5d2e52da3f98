#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "didnet/wavelet.hpp"

using namespace didnet;

namespace {

Real max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  Real m = 0;
  for (int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("dwt2_haar hand cases") {
  // constant image: ll = 2c, details vanish
  Tensor c = Tensor::full({1, 4, 4}, 0.75);
  WaveletCoeffs w = dwt2_haar(c);
  for (int64_t i = 0; i < w.ll.size(); ++i) {
    CHECK(w.ll[i] == doctest::Approx(1.5));
    CHECK(w.lh[i] == 0.0);
    CHECK(w.hl[i] == 0.0);
    CHECK(w.hh[i] == 0.0);
  }

  // block [[1,2],[3,4]]
  Tensor blk = Tensor::from_vector({1, 2, 2}, {1, 2, 3, 4});
  WaveletCoeffs wb = dwt2_haar(blk);
  CHECK(wb.ll[0] == doctest::Approx(5.0));
  CHECK(wb.lh[0] == doctest::Approx(-2.0));
  CHECK(wb.hl[0] == doctest::Approx(-1.0));
  CHECK(wb.hh[0] == doctest::Approx(0.0));

  CHECK_THROWS_AS(dwt2_haar(Tensor::zeros({1, 3, 4})), ShapeError);
}

TEST_CASE("Parseval energy equality") {
  Tensor x = Tensor::uniform({1, 8, 8}, -2, 2, uint64_t(13));
  WaveletCoeffs c = dwt2_haar(x);
  Real ex = 0, ec = 0;
  for (int64_t i = 0; i < x.size(); ++i) ex += x[i] * x[i];
  for (const Tensor* t : {&c.ll, &c.lh, &c.hl, &c.hh})
    for (int64_t i = 0; i < t->size(); ++i) ec += (*t)[i] * (*t)[i];
  CHECK(std::abs(ex - ec) / ex <= 1e-12);
}

TEST_CASE("idwt2_haar inverts dwt2_haar") {
  Tensor x = Tensor::uniform({2, 6, 8}, -3, 3, uint64_t(17));
  CHECK(max_abs_diff(idwt2_haar(dwt2_haar(x)), x) <= 1e-12);

  // inverse of the constant case: ll = 2c
  WaveletCoeffs c;
  c.ll = Tensor::full({1, 2, 2}, 1.5);
  c.lh = Tensor::zeros({1, 2, 2});
  c.hl = Tensor::zeros({1, 2, 2});
  c.hh = Tensor::zeros({1, 2, 2});
  Tensor rec = idwt2_haar(c);
  for (int64_t i = 0; i < rec.size(); ++i)
    CHECK(rec[i] == doctest::Approx(0.75));

  // inverse of the hand case
  WaveletCoeffs h;
  h.ll = Tensor::full({1, 1, 1}, 5.0);
  h.lh = Tensor::full({1, 1, 1}, -2.0);
  h.hl = Tensor::full({1, 1, 1}, -1.0);
  h.hh = Tensor::zeros({1, 1, 1});
  Tensor blk = idwt2_haar(h);
  CHECK(blk.at({0, 0, 0}) == doctest::Approx(1.0));
  CHECK(blk.at({0, 0, 1}) == doctest::Approx(2.0));
  CHECK(blk.at({0, 1, 0}) == doctest::Approx(3.0));
  CHECK(blk.at({0, 1, 1}) == doctest::Approx(4.0));

  c.hh = Tensor::zeros({1, 2, 3});
  CHECK_THROWS_AS(idwt2_haar(c), ShapeError);
}

TEST_CASE("dwt linearity per subband") {
  Rng rng(19);
  Tensor x = Tensor::uniform({1, 6, 6}, -1, 1, rng);
  Tensor y = Tensor::uniform({1, 6, 6}, -1, 1, rng);
  const Real a = -1.3;
  WaveletCoeffs lhs = dwt2_haar(add(mul_scalar(x, a), y));
  WaveletCoeffs wx = dwt2_haar(x);
  WaveletCoeffs wy = dwt2_haar(y);
  CHECK(max_abs_diff(lhs.lh, add(mul_scalar(wx.lh, a), wy.lh)) <= 1e-12);
  CHECK(max_abs_diff(lhs.hh, add(mul_scalar(wx.hh, a), wy.hh)) <= 1e-12);
}

TEST_CASE("wavelet_attention identity with zeroed branch and closed gate") {
  Rng rng(23);
  Tensor x = Tensor::uniform({3, 6, 6}, -1, 1, rng);

  // all conv weights zero
  WAParams zero;
  zero.reduce_w = Tensor::zeros({3, 12});
  zero.reduce_b = Tensor::zeros({3});
  zero.gate_w = Tensor::zeros({3, 3});
  zero.gate_b = Tensor::zeros({3});
  zero.expand_w = Tensor::zeros({12, 3});
  zero.expand_b = Tensor::zeros({12});
  CHECK(max_abs_diff(wavelet_attention(x, zero), x) <= 1e-12);

  // closed gate (large negative bias) with zero expansion bias also yields x
  WAParams gated = WAParams::init(3, 3, rng);
  std::fill(gated.expand_b.data(), gated.expand_b.data() + 12, 0.0);
  std::fill(gated.gate_b.data(), gated.gate_b.data() + 3, -60.0);
  std::fill(gated.gate_w.data(), gated.gate_w.data() + 9, 0.0);
  CHECK(max_abs_diff(wavelet_attention(x, gated), x) <= 1e-10);

  // random params: finite, shape-preserving, gradients flow
  WAParams p = WAParams::init(3, 3, rng);
  Tensor y = wavelet_attention(x, p);
  REQUIRE(y.shape() == x.shape());
  const Real err = grad_check(
      [&](const Tensor& t) {
        Tensor o = wavelet_attention(t, p);
        return sum(mul(o, o));
      },
      Tensor::uniform({3, 4, 4}, -1, 1, rng), 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("dwt ll-band gradient vs central differences") {
  const Real err = grad_check(
      [](const Tensor& t) { return sum(dwt2_haar(t).ll); },
      Tensor::uniform({1, 4, 4}, -1, 1, uint64_t(31)), 1e-5);
  CHECK(err <= 1e-6);
}

TEST_CASE("hf_psnr identity cap and injected detail noise") {
  Rng rng(29);
  Tensor ref = Tensor::uniform({3, 8, 8}, 0.2, 0.8, rng);
  Frame fr = make_frame(ref, ColorSpace::kSdrBt709);
  CHECK(hf_psnr(fr, fr) == 99.0);

  // add a known-MSE perturbation to the detail bands only
  WaveletCoeffs c = dwt2_haar(ref);
  const Real delta = 0.01;
  for (Tensor* t : {&c.lh, &c.hl, &c.hh})
    for (int64_t i = 0; i < t->size(); ++i)
      t->data()[i] += (i % 2 == 0 ? delta : -delta);
  Tensor pred = idwt2_haar(c);
  const Real expected = 10.0 * std::log10(1.0 / (delta * delta));
  CHECK(hf_psnr(pred, ref) == doctest::Approx(expected).epsilon(1e-4));

  CHECK_THROWS_AS(hf_psnr(ref, Tensor::zeros({3, 4, 4})), ShapeError);
}
