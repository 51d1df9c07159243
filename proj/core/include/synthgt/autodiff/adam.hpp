// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "synthgt/autodiff/tensor.hpp"

namespace synthgt::ad {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(std::span<const Tensor> params, double learning_rate);
};

// One bias-corrected Adam update in place, then zeroes the gradients.
// Throws ContractError if a parameter carries no gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace synthgt::ad
