// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/autodiff/nn.hpp"

#include <cmath>

#include "synthgt/error.hpp"
#include "synthgt/hash.hpp"

namespace synthgt::ad {

void ParameterList::add(std::string name, Tensor tensor) {
  entries_.push_back({std::move(name), std::move(tensor)});
}

void ParameterList::extend(const ParameterList& other, const std::string& prefix) {
  for (const auto& e : other.entries_) entries_.push_back({prefix + e.name, e.tensor});
}

std::vector<Tensor> ParameterList::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

const Tensor& ParameterList::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("parameter '" + name + "' not found");
}

std::size_t ParameterList::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

std::string ParameterList::hash() const {
  Fnv1a h;
  for (const auto& e : entries_) {
    h.update(e.name);
    for (std::size_t d : e.tensor.shape()) h.update(static_cast<std::uint64_t>(d));
    h.update(e.tensor.data());
  }
  return h.hex();
}

void ParameterList::assign_from(const ParameterList& other) {
  if (other.entries_.size() != entries_.size()) {
    throw ContractError("assign_from: parameter count mismatch");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw ContractError("assign_from: parameter '" + dst.name + "' does not match '" +
                          src.name + "'");
    }
    auto out = dst.tensor.mutable_data();
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), out.begin());
  }
}

void ParameterList::set_requires_grad(bool value) {
  for (auto& e : entries_) e.tensor.set_requires_grad(value);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  std::vector<double> b(out);
  for (double& v : b) v = dist(rng);
  weight = Tensor::from({in, out}, std::move(w), true);
  bias = Tensor::from({out}, std::move(b), true);
}

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect(ParameterList& params, const std::string& prefix) const {
  params.add(prefix + "weight", weight);
  params.add(prefix + "bias", bias);
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ContractError("Mlp needs at least an input and an output size");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers_.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

void Mlp::collect(ParameterList& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(params, prefix + std::to_string(i) + ".");
  }
}

}  // namespace synthgt::ad
