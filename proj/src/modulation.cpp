#include "didnet/modulation.hpp"

namespace didnet {

namespace {

void validate_mv(const ModulationVectors& mv, int64_t n, int64_t m) {
  if (mv.alpha.rank() != 1 || mv.alpha.dim(0) != n)
    throw ShapeError("modulation: alpha must be [out_channels]");
  if (mv.beta.rank() != 1 || mv.beta.dim(0) != n)
    throw ShapeError("modulation: beta must be [out_channels]");
  if (mv.gamma.rank() != 1 || mv.gamma.dim(0) != m)
    throw ShapeError("modulation: gamma must be [in_channels]");
  check_finite(mv.alpha, "modulation.alpha");
  check_finite(mv.beta, "modulation.beta");
  check_finite(mv.gamma, "modulation.gamma");
}

void validate_1x1(const Tensor& w, const Tensor& b) {
  if (w.rank() != 2) throw ShapeError("modulation: weight must be [n,m]");
  if (b.rank() != 1 || b.dim(0) != w.dim(0))
    throw ShapeError("modulation: bias must be [n]");
}

}  // namespace

ModulationVectors ModulationVectors::neutral(int64_t out_ch, int64_t in_ch) {
  ModulationVectors mv;
  mv.alpha = Tensor::full({out_ch}, 1.0);
  mv.beta = Tensor::zeros({out_ch});
  mv.gamma = Tensor::full({in_ch}, 1.0);
  return mv;
}

Tensor gfm(const Tensor& x, const Tensor& w, const Tensor& b,
           const ModulationVectors& mv) {
  validate_1x1(w, b);
  validate_mv(mv, w.dim(0), w.dim(1));
  const int64_t n = w.dim(0);
  Tensor y = conv1x1(x, w, b);
  Tensor a3 = reshape(mv.alpha, {n, 1, 1});
  Tensor b3 = reshape(mv.beta, {n, 1, 1});
  return add(mul(a3, y), b3);
}

FoldedKernel fold_modulation(const Tensor& w, const Tensor& b,
                             const ModulationVectors& mv) {
  validate_1x1(w, b);
  const int64_t n = w.dim(0), m = w.dim(1);
  validate_mv(mv, n, m);
  FoldedKernel fk;
  // alpha as a column [n,1] against gamma [m] broadcasts to [n,m]
  fk.weights = mul(w, mul(reshape(mv.alpha, {n, 1}), mv.gamma));
  fk.bias_term = add(mul(b, mv.alpha), mv.beta);
  return fk;
}

Tensor dmc(const Tensor& x, const Tensor& w, const Tensor& b,
           const ModulationVectors& mv) {
  FoldedKernel fk = fold_modulation(w, b, mv);
  return conv1x1(x, fk.weights, fk.bias_term);
}

Tensor dmc_unfolded(const Tensor& x, const Tensor& w, const Tensor& b,
                    const ModulationVectors& mv) {
  validate_1x1(w, b);
  const int64_t n = w.dim(0), m = w.dim(1);
  validate_mv(mv, n, m);
  Tensor scaled_in = mul(x, reshape(mv.gamma, {m, 1, 1}));
  Tensor wa = mul(w, reshape(mv.alpha, {n, 1}));
  Tensor y = conv1x1(scaled_in, wa, Tensor::zeros({n}));
  Tensor shift = add(mul(b, mv.alpha), mv.beta);
  return add(y, reshape(shift, {n, 1, 1}));
}

ConvKernel fold_modulation_conv(const ConvKernel& k,
                                const ModulationVectors& mv) {
  const int64_t n = k.out_channels(), m = k.in_channels();
  validate_mv(mv, n, m);
  Tensor a4 = reshape(mv.alpha, {n, 1, 1, 1});
  Tensor g4 = reshape(mv.gamma, {m, 1, 1});
  Tensor w = mul(k.weights, mul(a4, g4));
  Tensor b = add(mul(k.bias, mv.alpha), mv.beta);
  return ConvKernel(std::move(w), std::move(b));
}

std::pair<uint64_t, uint64_t> modulation_cost(int64_t h, int64_t w, int64_t m,
                                              int64_t n) {
  if (h < 1 || w < 1 || m < 1 || n < 1)
    throw ContractError("modulation_cost: dims must be positive");
  const uint64_t gfm_ops = 2ull * uint64_t(h) * uint64_t(w) * uint64_t(n);
  const uint64_t ckm_ops = uint64_t(n) * uint64_t(m) + 2ull * uint64_t(n);
  return {gfm_ops, ckm_ops};
}

}  // namespace didnet
