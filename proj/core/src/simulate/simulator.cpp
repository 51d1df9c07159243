// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/simulate/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "synthgt/error.hpp"
#include "synthgt/random.hpp"

namespace synthgt::simulate {

using graph::kMriNodes;
using graph::kUdsNodes;
using graph::Modality;

void SimSpec::validate() const {
  if (n_ad == 0) throw ConfigError("sim.n_ad", "must be > 0");
  if (n_hc == 0) throw ConfigError("sim.n_hc", "must be > 0");
  if (n_latent == 0) throw ConfigError("sim.n_latent", "must be > 0");
  if (site_count == 0) throw ConfigError("sim.site_count", "must be > 0");
  if (!(effect_size >= 0.0)) throw ConfigError("sim.effect_size", "must be >= 0");
  if (!(site_sigma >= 0.0)) throw ConfigError("sim.site_sigma", "must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigError("sim.missing_rate", "must lie in [0, 1)");
  }
  if (!(apoe4_effect >= 0.0 && apoe4_effect <= 1.0)) {
    throw ConfigError("sim.apoe4_effect", "must lie in [0, 1]");
  }
}

namespace {

struct Loadings {
  std::vector<std::size_t> uds_factor;  // per UDS item
  std::vector<double> uds_weight, uds_center, uds_scale;
  std::vector<std::size_t> mri_factor;  // per region
  std::vector<double> mri_weight;       // per region x feature, signed
  std::vector<std::vector<double>> site_offset;  // per site, 294 values
};

Loadings draw_loadings(const SimSpec& spec, const graph::CohortSchema& schema) {
  Rng rng = make_rng(spec.seed, "sim.loadings");
  std::uniform_real_distribution<double> weight(0.6, 1.2);
  std::uniform_real_distribution<double> center(-2.0, 2.0);
  std::uniform_real_distribution<double> item_scale(0.5, 3.0);
  Loadings l;
  for (std::size_t u = 0; u < kUdsNodes; ++u) {
    l.uds_factor.push_back(static_cast<std::size_t>(schema.uds_domains[u]) % spec.n_latent);
    l.uds_weight.push_back(weight(rng));
    l.uds_center.push_back(center(rng));
    l.uds_scale.push_back(item_scale(rng));
  }
  // Lattice split into 2 x 4 blocks of columns/rows; block b drives factor
  // b mod n_latent with sign (+) for even blocks and (-) for odd ones.
  const auto& layout = schema.mri_layout;
  for (std::size_t r = 0; r < kMriNodes; ++r) {
    const auto [row, col] = layout.cell(r);
    const std::size_t block = (row * 2 / layout.rows) * 4 + (col * 4 / layout.cols);
    l.mri_factor.push_back(block % spec.n_latent);
    const double sign = block % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t f = 0; f < graph::kMriFeatures; ++f) l.mri_weight.push_back(sign * weight(rng));
  }
  std::normal_distribution<double> offset(0.0, 1.0);
  for (std::size_t s = 0; s < spec.site_count; ++s) {
    std::vector<double> o(graph::kFlatDim);
    for (double& v : o) v = spec.site_sigma * offset(rng);
    l.site_offset.push_back(std::move(o));
  }
  return l;
}

}  // namespace

graph::Cohort simulate_cohort(const SimSpec& spec) {
  spec.validate();
  graph::Cohort cohort;
  cohort.provenance = graph::Provenance::kSimulatedReal;
  const Loadings load = draw_loadings(spec, *cohort.schema);

  const std::size_t n = spec.n_ad + spec.n_hc;
  std::vector<int> labels(n, 0);
  std::fill_n(labels.begin(), spec.n_ad, 1);
  Rng order_rng = make_rng(spec.seed, "sim.order");
  std::shuffle(labels.begin(), labels.end(), order_rng);

  Rng rng = make_rng(spec.seed, "sim.subjects");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> site_dist(0, static_cast<int>(spec.site_count) - 1);
  std::bernoulli_distribution missing(spec.missing_rate);
  const double per_factor = 1.0 / std::sqrt(static_cast<double>(spec.n_latent));

  cohort.subjects.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "sub-%05zu", i);
    graph::Subject s = graph::blank_subject(id, labels[i]);
    const bool ad = s.label == 1;
    s.age = (ad ? 75.0 : 71.0) + 7.0 * normal(rng);
    s.sex = coin(rng) ? 1 : 0;
    s.apoe4 = std::bernoulli_distribution(ad ? 0.55 : 0.25)(rng);
    s.site = site_dist(rng);

    double shift = ad ? spec.effect_size : 0.0;
    if (ad) shift *= s.apoe4 ? 1.0 + spec.apoe4_effect : 1.0 - spec.apoe4_effect;
    std::vector<double> z(spec.n_latent);
    for (double& v : z) v = shift * per_factor + normal(rng);

    const auto& offset = load.site_offset[static_cast<std::size_t>(s.site)];
    auto& mri = s.graph(Modality::kMri).features;
    for (std::size_t r = 0; r < kMriNodes; ++r) {
      for (std::size_t f = 0; f < graph::kMriFeatures; ++f) {
        const std::size_t k = r * graph::kMriFeatures + f;
        const double signal = load.mri_weight[k] * z[load.mri_factor[r]] + offset[k] + normal(rng);
        // thickness in mm, volume in cm^3
        mri[k] = f == 0 ? 2.5 + 0.15 * signal : 8.0 + 1.5 * signal;
      }
    }
    auto& uds = s.graph(Modality::kUds).features;
    for (std::size_t u = 0; u < kUdsNodes; ++u) {
      const double signal = load.uds_weight[u] * z[load.uds_factor[u]] +
                            offset[graph::kMriValues + u] + normal(rng);
      uds[u] = load.uds_center[u] + load.uds_scale[u] * signal;
    }
    for (std::size_t u = 0; u < kUdsNodes; ++u) {
      if (missing(rng)) uds[u] = std::numeric_limits<double>::quiet_NaN();
    }
    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

}  // namespace synthgt::simulate
