// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "synthgt/autodiff/ops.hpp"
#include "synthgt/autodiff/tensor.hpp"
#include "synthgt/random.hpp"

namespace synthgt::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered, named view over a model's learnable tensors. Tensors are shared
// with the owning model, so updates through the list are visible there.
class ParameterList {
 public:
  void add(std::string name, Tensor tensor);
  void extend(const ParameterList& other, const std::string& prefix = "");

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor& find(const std::string& name) const;
  std::size_t count() const;  // total scalar parameters
  std::size_t size() const { return entries_.size(); }

  // FNV-1a over names, shapes and raw bytes; equal iff bitwise-equal weights.
  std::string hash() const;
  // Copies values from a list with identical names and shapes.
  void assign_from(const ParameterList& other);
  void set_requires_grad(bool value);

 private:
  std::vector<NamedTensor> entries_;
};

// Affine map x W + b with W stored [in, out]. Uniform(-1/sqrt(in), 1/sqrt(in)) init.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& params, const std::string& prefix) const;
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }

  Tensor weight;
  Tensor bias;
};

// Dense stack with ReLU between layers (none after the last).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& sizes, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& params, const std::string& prefix) const;
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

}  // namespace synthgt::ad
