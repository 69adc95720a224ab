#pragma once

#include "icaclf/config.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace icaclf::inline ICACLF_ABI {

// Working precision of the engine. The production build uses 32-bit reals;
// a 64-bit variant of the library exists only for gradient verification.
#ifdef ICACLF_REAL_F64
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major tensor with an optional gradient buffer.
///
/// Copies share storage (handle semantics): the tape keeps activations alive
/// through them and parameters are referenced from several places. clone()
/// makes an independent deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0));
  Tensor(Shape shape, std::vector<real> values);

  static Tensor scalar(real value);
  static Tensor from(std::initializer_list<real> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<real> data();
  std::span<const real> data() const;
  real item() const;
  real& operator[](std::size_t i) { return data()[i]; }
  real operator[](std::size_t i) const { return data()[i]; }

  // Gradient buffer, allocated zero-filled on first access. Gradients are
  // reachable through const handles so that backward closures can
  // accumulate into captured inputs.
  std::span<real> grad() const;
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<real> data;
    std::vector<real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Append-only record of differentiable operations (define-by-run).
///
/// Ops append a node while a tape is active on the calling thread and at
/// least one input requires a gradient. backward() visits every node once in
/// reverse append order and then releases the saved activations.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(Tensor output, BackwardFn backward);
  void backward(Tensor& loss);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Tape receiving nodes on this thread, or nullptr when gradients are off.
  static Tape* active();

 private:
  friend class TapeScope;
  struct Node {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Makes a tape active on the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on the current thread (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// True when an op with these inputs must record a node.
bool needs_grad(std::initializer_list<const Tensor*> inputs);

/// Fingerprint of the discrete decisions (ReLU masks, pooling argmax, clamp
/// hits) taken by ops while the probe is alive. The gradient checker uses it
/// to detect finite-difference steps that cross a kink.
class NonSmoothProbe {
 public:
  NonSmoothProbe();
  ~NonSmoothProbe();
  NonSmoothProbe(const NonSmoothProbe&) = delete;
  NonSmoothProbe& operator=(const NonSmoothProbe&) = delete;

  std::uint64_t fingerprint() const { return state_; }

  static bool active();
  static void mix(std::uint64_t value);

 private:
  std::uint64_t state_;
  NonSmoothProbe* previous_;
};

}  // namespace icaclf
