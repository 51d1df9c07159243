// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/autodiff/adam.hpp"

#include <cmath>
#include <string>

#include "synthgt/error.hpp"

namespace synthgt::ad {

AdamState AdamState::for_params(std::span<const Tensor> params, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.empty() && !params.empty()) {
    state = AdamState::for_params(params, state.learning_rate);
  }
  if (params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " of shape " +
                          shape_string(params[i].shape()) + " has no gradient");
    }
    if (state.first_moment[i].size() != params[i].size()) {
      throw ContractError("adam_step: moment buffer size mismatch for parameter " +
                          std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto g = params[i].mutable_grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
      g[j] = 0.0;
    }
  }
}

}  // namespace synthgt::ad
