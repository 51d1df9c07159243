// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace synthgt::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  // Set when the tensor is the output of an operation recorded on a tape.
  const Tape* tape = nullptr;
  std::size_t node = 0;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Dense row-major float64 tensor with shared ownership of its storage.
// Copies alias the same buffer; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  // Leading dimension; 1 for scalars.
  std::size_t rows() const;
  // Product of all trailing dimensions (row width of the 2-D view).
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  // Deep copy of the values; the copy is a fresh leaf.
  Tensor clone() const;
  // Leaf copy with requires_grad=false, cutting the tape.
  Tensor detach() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend class Tape;
};

// Records operations in execution order. Operations record onto the tape that
// is active on the calling thread (see Tape::Scope); with no active tape, or
// when no input requires a gradient, nothing is recorded.
class Tape {
 public:
  using BackwardFn = std::function<void(TensorImpl& out, std::span<TensorImpl* const> inputs)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  // Returns true when `inputs` would cause a recording on the active tape.
  static bool should_record(std::initializer_list<const Tensor*> inputs);
  static bool should_record(std::span<const Tensor> inputs);
  static Tape* active();

  // Creates the output tensor and, when required, records it.
  static Tensor make_output(Shape shape, std::vector<double> data,
                            std::span<const Tensor> inputs, BackwardFn fn);

  // Accumulates d(loss)/d(x) into every reachable tensor that requires a
  // gradient. Non-leaf gradients are reset first; leaf gradients accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording on the calling thread for its lifetime.
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Entry {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
};

}  // namespace synthgt::ad
