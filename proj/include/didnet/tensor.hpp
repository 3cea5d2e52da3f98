#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace didnet {

using Real = double;

// Error taxonomy. Shape/contract errors are caller bugs; numeric errors mean
// a NaN/Inf escaped into tensor data; io errors cover malformed files.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic uniform generator. Values are derived from the raw
/// mt19937_64 stream through a fixed 53-bit mapping, so equal seeds give
/// bitwise-equal sequences on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // in [0,1)
  Real next() { return Real(engine_() >> 11) * 0x1.0p-53; }
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * next(); }
  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until materialized
  bool requires_grad = false;
};

/// Dense row-major N-d array of doubles with an optional gradient buffer.
/// Tensor is a shared handle: copies alias the same storage. Ops treat
/// tensors as immutable once produced; gradients accumulate via the Tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const std::vector<int64_t>& shape);
  static Tensor full(const std::vector<int64_t>& shape, Real value);
  static Tensor uniform(const std::vector<int64_t>& shape, Real lo, Real hi,
                        uint64_t seed);
  static Tensor uniform(const std::vector<int64_t>& shape, Real lo, Real hi,
                        Rng& rng);
  static Tensor from_vector(const std::vector<int64_t>& shape,
                            std::vector<Real> values);
  static Tensor scalar(Real v) { return from_vector({1}, {v}); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const;
  int rank() const { return int(shape().size()); }
  int64_t dim(int i) const { return shape().at(size_t(i)); }
  int64_t size() const;

  Real* data();
  const Real* data() const;
  Real item() const;  // size-1 tensors only

  // Flat and multi-index element access (reads only; tests use these).
  Real operator[](int64_t i) const { return data()[i]; }
  Real at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);
  bool has_grad() const;
  Real* grad();
  const Real* grad() const;
  void ensure_grad();
  void zero_grad();

  Tensor clone() const;  // deep copy, grad flag preserved, grad buffer not

  TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_tensor(std::vector<int64_t> shape);
};

// Fresh zero-filled tensor for op implementations.
Tensor make_tensor(std::vector<int64_t> shape);

/// Ordered record of executed ops. Constructing a Tape makes it the active
/// tape for the current thread (stack discipline); ops record a backward
/// closure when any input requires grad. Replaying the record in reverse
/// is a valid topological order, so each leaf receives its full gradient.
/// The tape owns the closures (and thus keeps intermediate tensors alive)
/// until clear() — no implicit pruning.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void replay_reverse();

 private:
  std::vector<std::function<void()>> nodes_;
};

/// Disables recording for its scope (e.g. numeric probes in grad_check).
class NoTape {
 public:
  NoTape();
  ~NoTape();
  NoTape(const NoTape&) = delete;
  NoTape& operator=(const NoTape&) = delete;
};

// True when a tape is active and any listed input requires grad.
bool should_record(std::initializer_list<const Tensor*> inputs);

// Throws NumericError if any element of t is NaN/Inf.
void check_finite(const Tensor& t, const char* op_name);

// ---- elementwise / reduction ops (broadcasting: trailing-dim alignment) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, Real s);
Tensor mul_scalar(const Tensor& a, Real s);
Tensor sum(const Tensor& a);   // -> shape [1]
Tensor mean(const Tensor& a);  // -> shape [1]
Tensor reshape(const Tensor& a, const std::vector<int64_t>& shape);

/// Mean absolute error over all elements; subgradient of |.| at 0 is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Seeds d(loss)/d(loss)=1 and replays the active tape in reverse,
/// accumulating into .grad of every requires-grad tensor on the path.
/// Repeated calls without zero_grad()/clear() accumulate; reset per step.
void backward(Tensor& loss);

/// Max over elements of |analytic - central_difference| /
/// max(1, |analytic|, |central_difference|) for a recorded scalar function.
/// eps must lie in [1e-7, 1e-3]; evaluate away from |.| kinks.
Real grad_check(const std::function<Tensor(const Tensor&)>& fn,
                const Tensor& x, Real eps);

// ---- DTEN tensor file format ----
// magic "DTEN", u32 version=1, u32 rank, rank x u64 dims, u8 dtype
// (0=f32, 1=f64), little-endian row-major payload.

enum class DtenType : uint8_t { kF32 = 0, kF64 = 1 };

void dten_save(const std::string& path, const Tensor& t,
               DtenType type = DtenType::kF64);
Tensor dten_load(const std::string& path);

}  // namespace didnet
