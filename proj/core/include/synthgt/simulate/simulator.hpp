// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "synthgt/graph/cohort.hpp"

namespace synthgt::simulate {

// Parameters of the latent-factor cohort simulator.
//
// Each subject draws z ~ N(mu_class, I) in n_latent dimensions with
// mu_HC = 0 and mu_AD = effect_size * (1, ..., 1) / sqrt(n_latent), so
// ||mu_AD - mu_HC|| = effect_size. Every UDS item loads positively on the
// factor of its clinical domain; every MRI region loads on the factor of its
// lattice block with a block-dependent sign, so the class contrast survives
// per-subject normalization. Site offsets and unit noise are added per value.
struct SimSpec {
  std::size_t n_ad = 390;
  std::size_t n_hc = 847;
  double effect_size = 1.0;
  std::size_t n_latent = 8;
  std::size_t site_count = 5;
  double site_sigma = 0.3;
  double missing_rate = 0.05;  // UDS only
  // AD carriers of APOE4 get effect_size * (1 + apoe4_effect), non-carriers
  // effect_size * (1 - apoe4_effect). 0 keeps a single separation.
  double apoe4_effect = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

graph::Cohort simulate_cohort(const SimSpec& spec);

}  // namespace synthgt::simulate
