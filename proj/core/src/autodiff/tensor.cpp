// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/autodiff/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "synthgt/error.hpp"

namespace synthgt::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_size(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("Tensor::from: shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  return impl_->shape.empty() ? 1 : impl_->shape.front();
}

std::size_t Tensor::cols() const {
  const std::size_t r = rows();
  return r == 0 ? 0 : size() / r;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("Tensor::item: tensor of shape " + shape_string(shape()) +
                        " is not a scalar");
  }
  return impl_->data.front();
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  Tensor out = clone();
  out.impl_->requires_grad = false;
  return out;
}

Tape::~Tape() { clear(); }

Tape* Tape::active() { return g_active_tape; }

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool Tape::should_record(std::span<const Tensor> inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor Tape::make_output(Shape shape, std::vector<double> data,
                         std::span<const Tensor> inputs, BackwardFn fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tape* tape = g_active_tape;
  if (tape != nullptr && should_record(inputs)) {
    impl->requires_grad = true;
    impl->tape = tape;
    impl->node = tape->entries_.size();
    Entry entry;
    entry.inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) entry.inputs.push_back(t.shared());
    entry.output = impl;
    entry.fn = std::move(fn);
    tape->entries_.push_back(std::move(entry));
  }
  return Tensor(std::move(impl));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  TensorImpl* root = loss.impl();
  if (root->tape != this) {
    throw ContractError("backward: loss was not recorded on this tape");
  }
  const std::size_t last = root->node;
  for (std::size_t i = 0; i <= last; ++i) {
    auto& out = *entries_[i].output;
    out.grad.assign(out.data.size(), 0.0);
  }
  root->grad[0] = 1.0;

  std::vector<TensorImpl*> raw;
  for (std::size_t i = last + 1; i-- > 0;) {
    Entry& entry = entries_[i];
    raw.clear();
    for (auto& in : entry.inputs) {
      if (in->requires_grad) in->ensure_grad();
      raw.push_back(in.get());
    }
    entry.fn(*entry.output, raw);
  }
}

void Tape::clear() {
  for (auto& entry : entries_) {
    if (entry.output->tape == this) entry.output->tape = nullptr;
  }
  entries_.clear();
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape::Pause::Pause() : previous_(g_active_tape) { g_active_tape = nullptr; }

Tape::Pause::~Pause() { g_active_tape = previous_; }

}  // namespace synthgt::ad
