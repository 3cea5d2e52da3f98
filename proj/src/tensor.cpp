#include "didnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace didnet {

namespace {

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

void validate_shape(const std::vector<int64_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (int64_t d : shape) {
    if (d < 1) throw ShapeError("tensor dims must be positive");
  }
}

thread_local std::vector<Tape*> g_tape_stack;

}  // namespace

Tensor make_tensor(std::vector<int64_t> shape) {
  validate_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(size_t(shape_product(shape)), Real(0));
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(const std::vector<int64_t>& shape) {
  return make_tensor(shape);
}

Tensor Tensor::full(const std::vector<int64_t>& shape, Real value) {
  Tensor t = make_tensor(shape);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::uniform(const std::vector<int64_t>& shape, Real lo, Real hi,
                       uint64_t seed) {
  Rng rng(seed);
  return uniform(shape, lo, hi, rng);
}

Tensor Tensor::uniform(const std::vector<int64_t>& shape, Real lo, Real hi,
                       Rng& rng) {
  Tensor t = make_tensor(shape);
  for (Real& v : t.impl_->data) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::from_vector(const std::vector<int64_t>& shape,
                           std::vector<Real> values) {
  validate_shape(shape);
  if (shape_product(shape) != int64_t(values.size()))
    throw ShapeError("from_vector: value count does not match shape");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

const std::vector<int64_t>& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

int64_t Tensor::size() const { return int64_t(shape_product(shape())); }

Real* Tensor::data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data.data();
}

const Real* Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data.data();
}

Real Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a size-1 tensor");
  return data()[0];
}

Real Tensor::at(std::initializer_list<int64_t> idx) const {
  const auto& s = shape();
  if (idx.size() != s.size()) throw ShapeError("at(): wrong index rank");
  int64_t flat = 0;
  size_t d = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= s[d]) throw ShapeError("at(): index out of range");
    flat = flat * s[d] + i;
    ++d;
  }
  return data()[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = v;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

Real* Tensor::grad() {
  if (!has_grad()) throw ContractError("grad not materialized");
  return impl_->grad.data();
}

const Real* Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad not materialized");
  return impl_->grad.data();
}

void Tensor::ensure_grad() {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

Tensor Tensor::clone() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

// ---- tape ----

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  // Stack discipline: a Tape must outlive tapes created after it.
  g_tape_stack.pop_back();
}

Tape* Tape::active() {
  return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Tape::replay_reverse() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

NoTape::NoTape() { g_tape_stack.push_back(nullptr); }
NoTape::~NoTape() { g_tape_stack.pop_back(); }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void check_finite(const Tensor& t, const char* op_name) {
  const Real* p = t.data();
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i]))
      throw NumericError(std::string(op_name) +
                         ": non-finite value at flat index " +
                         std::to_string(i));
  }
}

// ---- broadcasting ----

namespace {

struct BcPlan {
  std::vector<int64_t> out_shape;
  std::vector<int64_t> sa, sb;  // effective strides per out dim (0 = broadcast)
  int64_t size = 1;
  bool same = false;
};

BcPlan broadcast_plan(const std::vector<int64_t>& a,
                      const std::vector<int64_t>& b) {
  BcPlan p;
  if (a == b) {
    p.out_shape = a;
    p.size = shape_product(a);
    p.same = true;
    return p;
  }
  const int ra = int(a.size()), rb = int(b.size());
  const int r = std::max(ra, rb);
  p.out_shape.resize(size_t(r));
  for (int d = 0; d < r; ++d) {
    const int64_t da = d < r - ra ? 1 : a[size_t(d - (r - ra))];
    const int64_t db = d < r - rb ? 1 : b[size_t(d - (r - rb))];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("broadcast: incompatible dims " + std::to_string(da) +
                       " vs " + std::to_string(db));
    p.out_shape[size_t(d)] = std::max(da, db);
  }
  p.size = shape_product(p.out_shape);
  // row-major strides, zeroed on broadcast dims
  p.sa.assign(size_t(r), 0);
  p.sb.assign(size_t(r), 0);
  int64_t stride = 1;
  for (int d = ra - 1; d >= 0; --d) {
    p.sa[size_t(d + (r - ra))] = (a[size_t(d)] == 1) ? 0 : stride;
    stride *= a[size_t(d)];
  }
  stride = 1;
  for (int d = rb - 1; d >= 0; --d) {
    p.sb[size_t(d + (r - rb))] = (b[size_t(d)] == 1) ? 0 : stride;
    stride *= b[size_t(d)];
  }
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_bc(const BcPlan& p, F&& f) {
  if (p.same) {
    for (int64_t i = 0; i < p.size; ++i) f(i, i, i);
    return;
  }
  const int r = int(p.out_shape.size());
  std::vector<int64_t> idx(size_t(r), 0);
  int64_t ia = 0, ib = 0;
  for (int64_t lin = 0; lin < p.size; ++lin) {
    f(lin, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      ia += p.sa[size_t(d)];
      ib += p.sb[size_t(d)];
      if (++idx[size_t(d)] < p.out_shape[size_t(d)]) break;
      ia -= p.sa[size_t(d)] * p.out_shape[size_t(d)];
      ib -= p.sb[size_t(d)] * p.out_shape[size_t(d)];
      idx[size_t(d)] = 0;
    }
  }
}

}  // namespace

// ---- elementwise ops ----

Tensor add(const Tensor& a, const Tensor& b) {
  BcPlan plan = broadcast_plan(a.shape(), b.shape());
  Tensor out = make_tensor(plan.out_shape);
  const Real* pa = a.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
    po[io] = pa[ia] + pb[ib];
  });
  check_finite(out, "add");
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    Tape::active()->record([av, bv, ov, plan]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      Real* ga = av.requires_grad() ? (av.ensure_grad(), av.grad()) : nullptr;
      Real* gb = bv.requires_grad() ? (bv.ensure_grad(), bv.grad()) : nullptr;
      for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        if (ga) ga[ia] += g[io];
        if (gb) gb[ib] += g[io];
      });
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  BcPlan plan = broadcast_plan(a.shape(), b.shape());
  Tensor out = make_tensor(plan.out_shape);
  const Real* pa = a.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
    po[io] = pa[ia] - pb[ib];
  });
  check_finite(out, "sub");
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    Tape::active()->record([av, bv, ov, plan]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      Real* ga = av.requires_grad() ? (av.ensure_grad(), av.grad()) : nullptr;
      Real* gb = bv.requires_grad() ? (bv.ensure_grad(), bv.grad()) : nullptr;
      for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        if (ga) ga[ia] += g[io];
        if (gb) gb[ib] -= g[io];
      });
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  BcPlan plan = broadcast_plan(a.shape(), b.shape());
  Tensor out = make_tensor(plan.out_shape);
  const Real* pa = a.data();
  const Real* pb = b.data();
  Real* po = out.data();
  for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
    po[io] = pa[ia] * pb[ib];
  });
  check_finite(out, "mul");
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tensor av = a, bv = b, ov = out;
    Tape::active()->record([av, bv, ov, plan]() mutable {
      if (!ov.has_grad()) return;
      const Real* g = ov.grad();
      const Real* pa2 = av.data();
      const Real* pb2 = bv.data();
      Real* ga = av.requires_grad() ? (av.ensure_grad(), av.grad()) : nullptr;
      Real* gb = bv.requires_grad() ? (bv.ensure_grad(), bv.grad()) : nullptr;
      for_each_bc(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        if (ga) ga[ia] += g[io] * pb2[ib];
        if (gb) gb[ib] += g[io] * pa2[ia];
      });
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, Real s) {
  Tensor out = make_tensor(a.shape());
  const Real* pa = a.data();
  Real* po = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + s;
  check_finite(out, "add_scalar");
  if (should_record({&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    Tape::active()->record([av, ov]() mutable {
      if (!ov.has_grad()) return;
      av.ensure_grad();
      const Real* g = ov.grad();
      Real* ga = av.grad();
      const int64_t m = av.size();
      for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, Real s) {
  Tensor out = make_tensor(a.shape());
  const Real* pa = a.data();
  Real* po = out.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * s;
  check_finite(out, "mul_scalar");
  if (should_record({&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    Tape::active()->record([av, ov, s]() mutable {
      if (!ov.has_grad()) return;
      av.ensure_grad();
      const Real* g = ov.grad();
      Real* ga = av.grad();
      const int64_t m = av.size();
      for (int64_t i = 0; i < m; ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Real acc = 0;
  const Real* pa = a.data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor out = Tensor::scalar(acc);
  check_finite(out, "sum");
  if (should_record({&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    Tape::active()->record([av, ov]() mutable {
      if (!ov.has_grad()) return;
      av.ensure_grad();
      const Real g = ov.grad()[0];
      Real* ga = av.grad();
      const int64_t m = av.size();
      for (int64_t i = 0; i < m; ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), Real(1) / Real(a.size())); }

Tensor reshape(const Tensor& a, const std::vector<int64_t>& shape) {
  validate_shape(shape);
  if (shape_product(shape) != a.size())
    throw ShapeError("reshape: element count mismatch");
  Tensor out = make_tensor(shape);
  std::memcpy(out.data(), a.data(), size_t(a.size()) * sizeof(Real));
  if (should_record({&a})) {
    out.set_requires_grad(true);
    Tensor av = a, ov = out;
    Tape::active()->record([av, ov]() mutable {
      if (!ov.has_grad()) return;
      av.ensure_grad();
      const Real* g = ov.grad();
      Real* ga = av.grad();
      const int64_t m = av.size();
      for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("l1_loss: shape mismatch");
  const Real* pp = pred.data();
  const Real* pt = target.data();
  const int64_t n = pred.size();
  Real acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pp[i] - pt[i]);
  Tensor out = Tensor::scalar(acc / Real(n));
  check_finite(out, "l1_loss");
  if (should_record({&pred, &target})) {
    out.set_requires_grad(true);
    Tensor pv = pred, tv = target, ov = out;
    Tape::active()->record([pv, tv, ov]() mutable {
      if (!ov.has_grad()) return;
      const Real g = ov.grad()[0];
      const Real* pp2 = pv.data();
      const Real* pt2 = tv.data();
      const int64_t m = pv.size();
      const Real scale = g / Real(m);
      Real* gp = pv.requires_grad() ? (pv.ensure_grad(), pv.grad()) : nullptr;
      Real* gt = tv.requires_grad() ? (tv.ensure_grad(), tv.grad()) : nullptr;
      for (int64_t i = 0; i < m; ++i) {
        const Real d = pp2[i] - pt2[i];
        const Real s = d > 0 ? Real(1) : (d < 0 ? Real(-1) : Real(0));
        if (gp) gp[i] += scale * s;
        if (gt) gt[i] -= scale * s;
      }
    });
  }
  return out;
}

void backward(Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward: loss must be a defined scalar tensor");
  Tape* tape = Tape::active();
  if (tape == nullptr)
    throw ContractError("backward: no active tape");
  loss.ensure_grad();
  loss.grad()[0] += Real(1);
  tape->replay_reverse();
}

Real grad_check(const std::function<Tensor(const Tensor&)>& fn,
                const Tensor& x0, Real eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");
  Tensor x = x0.clone();
  x.set_requires_grad(true);

  std::vector<Real> analytic(size_t(x.size()), Real(0));
  {
    Tape tape;
    Tensor y = fn(x);
    if (y.size() != 1) throw ContractError("grad_check: fn must be scalar");
    backward(y);
    if (x.has_grad())
      std::copy(x.grad(), x.grad() + x.size(), analytic.begin());
  }

  Real max_rel = 0;
  NoTape off;
  Real* px = x.data();
  for (int64_t i = 0; i < x.size(); ++i) {
    const Real saved = px[i];
    px[i] = saved + eps;
    const Real fp = fn(x).item();
    px[i] = saved - eps;
    const Real fm = fn(x).item();
    px[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite function value");
    const Real numeric = (fp - fm) / (2 * eps);
    const Real a = analytic[size_t(i)];
    const Real denom = std::max({Real(1), std::abs(a), std::abs(numeric)});
    max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
  }
  return max_rel;
}

// ---- DTEN ----

namespace {

void put_u32le(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64le(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const unsigned char* p;
  size_t n, off = 0;
  void need(size_t k, const char* what) {
    if (off + k > n) throw IoError(std::string("DTEN: truncated ") + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[off + size_t(i)]) << (8 * i);
    off += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[off + size_t(i)]) << (8 * i);
    off += 8;
    return v;
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return p[off++];
  }
};

}  // namespace

void dten_save(const std::string& path, const Tensor& t, DtenType type) {
  std::string buf;
  buf.reserve(32 + size_t(t.size()) * 8);
  buf += "DTEN";
  put_u32le(buf, 1);
  put_u32le(buf, uint32_t(t.rank()));
  for (int64_t d : t.shape()) put_u64le(buf, uint64_t(d));
  buf.push_back(char(uint8_t(type)));
  const Real* p = t.data();
  const int64_t n = t.size();
  if (type == DtenType::kF64) {
    for (int64_t i = 0; i < n; ++i) {
      uint64_t bits;
      double v = double(p[i]);
      std::memcpy(&bits, &v, 8);
      put_u64le(buf, bits);
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      uint32_t bits;
      float v = float(p[i]);
      std::memcpy(&bits, &v, 4);
      put_u32le(buf, bits);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("DTEN: cannot open for write: " + path);
  f.write(buf.data(), std::streamsize(buf.size()));
  if (!f) throw IoError("DTEN: write failed: " + path);
}

Tensor dten_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("DTEN: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  ByteReader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), "DTEN", 4) != 0)
    throw IoError("DTEN: bad magic in " + path);
  r.off = 4;
  const uint32_t version = r.u32("version");
  if (version != 1) throw IoError("DTEN: unsupported version");
  const uint32_t rank = r.u32("rank");
  if (rank == 0 || rank > 8) throw IoError("DTEN: bad rank");
  std::vector<int64_t> shape(rank);
  int64_t count = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint64_t d = r.u64("dims");
    if (d == 0 || d > (uint64_t(1) << 32)) throw IoError("DTEN: bad dim");
    shape[i] = int64_t(d);
    count *= shape[i];
  }
  const uint8_t dtype = r.u8("dtype");
  Tensor t = make_tensor(shape);
  Real* p = t.data();
  if (dtype == uint8_t(DtenType::kF64)) {
    r.need(size_t(count) * 8, "payload");
    for (int64_t i = 0; i < count; ++i) {
      const uint64_t bits = r.u64("payload");
      double v;
      std::memcpy(&v, &bits, 8);
      p[i] = Real(v);
    }
  } else if (dtype == uint8_t(DtenType::kF32)) {
    r.need(size_t(count) * 4, "payload");
    for (int64_t i = 0; i < count; ++i) {
      const uint32_t bits = r.u32("payload");
      float v;
      std::memcpy(&v, &bits, 4);
      p[i] = Real(v);
    }
  } else {
    throw IoError("DTEN: unknown dtype");
  }
  return t;
}

}  // namespace didnet
