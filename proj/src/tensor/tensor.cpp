#include "icaclf/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "icaclf/error.hpp"

namespace icaclf::inline ICACLF_ABI {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape shape, real fill) : impl_(std::make_shared<Impl>()) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + to_string(shape));
  }
  impl_->data.assign(numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<real> values) : impl_(std::make_shared<Impl>()) {
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(real value) { return Tensor(Shape{1}, value); }

Tensor Tensor::from(std::initializer_list<real> values) {
  return Tensor(Shape{values.size()}, std::vector<real>(values));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return impl_ ? impl_->data.size() : 0; }

std::span<real> Tensor::data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

std::span<const real> Tensor::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

real Tensor::item() const {
  if (size() != 1) throw ContractError("item() on a tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

std::span<real> Tensor::grad() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), real(0));
  return impl_->grad;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

void Tensor::zero_grad() {
  if (impl_) impl_->grad.assign(impl_->data.size(), real(0));
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_) throw ContractError("use of an undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::clone() const {
  Tensor copy;
  if (!impl_) return copy;
  copy.impl_ = std::make_shared<Impl>(*impl_);
  return copy;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local NonSmoothProbe* g_probe = nullptr;
}  // namespace

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Tensor output, BackwardFn backward) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(output), std::move(backward)});
}

void Tape::backward(Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  loss.grad()[0] += real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient are not on a path to
    // the loss.
    if (!it->output.has_grad()) continue;
    it->backward();
  }
  nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->defined() && t->requires_grad(); });
}

NonSmoothProbe::NonSmoothProbe() : state_(0x84222325cbf29ce4ULL), previous_(g_probe) { g_probe = this; }
NonSmoothProbe::~NonSmoothProbe() { g_probe = previous_; }

bool NonSmoothProbe::active() { return g_probe != nullptr; }

void NonSmoothProbe::mix(std::uint64_t value) {
  if (!g_probe) return;
  auto& s = g_probe->state_;
  s ^= value + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
}

}  // namespace icaclf
