// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/simulate/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "synthgt/error.hpp"

namespace synthgt::simulate {

using graph::Modality;

namespace {

constexpr double kStdFloor = 1e-12;

double partial_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double ss = 0.0;
  std::size_t shared = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::isnan(a[j]) || std::isnan(b[j])) continue;
    const double d = a[j] - b[j];
    ss += d * d;
    ++shared;
  }
  if (shared == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(ss * static_cast<double>(a.size()) / static_cast<double>(shared));
}

graph::Cohort impute_from(const graph::Cohort& target, const graph::Cohort& donors,
                          std::size_t k, bool same_cohort) {
  if (k == 0) throw ContractError("knn_impute: k must be >= 1");
  const std::size_t items = graph::kUdsNodes;
  std::vector<bool> observed_somewhere(items, false);
  for (const auto& s : donors.subjects) {
    const auto& f = s.graph(Modality::kUds).features;
    for (std::size_t j = 0; j < items; ++j) {
      if (!std::isnan(f[j])) observed_somewhere[j] = true;
    }
  }

  graph::Cohort out = target;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& row = target.subjects[i].graph(Modality::kUds).features;
    if (std::none_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) continue;

    order.clear();
    for (std::size_t d = 0; d < donors.size(); ++d) {
      if (same_cohort && d == i) continue;
      const double dist = partial_distance(row, donors.subjects[d].graph(Modality::kUds).features);
      if (std::isfinite(dist)) order.emplace_back(dist, d);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });

    auto& filled = out.subjects[i].graph(Modality::kUds).features;
    for (std::size_t j = 0; j < items; ++j) {
      if (!std::isnan(row[j])) continue;
      if (!observed_somewhere[j]) {
        throw ImputationError("knn_impute: UDS item u" + std::to_string(j) +
                              " is missing in every subject");
      }
      double total = 0.0;
      std::size_t used = 0;
      for (const auto& [dist, d] : order) {
        const double v = donors.subjects[d].graph(Modality::kUds).features[j];
        if (std::isnan(v)) continue;
        total += v;
        if (++used == k) break;
      }
      if (used == 0) {
        throw ImputationError("knn_impute: no comparable donor observes UDS item u" +
                              std::to_string(j) + " for subject " + target.subjects[i].id);
      }
      filled[j] = total / static_cast<double>(used);
    }
  }
  return out;
}

void require_finite(const graph::Cohort& cohort, const char* where) {
  for (const auto& s : cohort.subjects) {
    for (const auto& g : s.graphs) {
      if (!std::all_of(g.features.begin(), g.features.end(), [](double v) { return std::isfinite(v); })) {
        throw ContractError(std::string(where) + ": subject " + s.id + " has a non-finite " +
                            graph::modality_name(g.modality) + " feature");
      }
    }
  }
}

}  // namespace

bool has_missing(const graph::Cohort& cohort) {
  for (const auto& s : cohort.subjects) {
    for (const auto& g : s.graphs) {
      if (std::any_of(g.features.begin(), g.features.end(), [](double v) { return std::isnan(v); })) {
        return true;
      }
    }
  }
  return false;
}

graph::Cohort knn_impute(const graph::Cohort& cohort, std::size_t k) {
  return impute_from(cohort, cohort, k, true);
}

graph::Cohort knn_impute(const graph::Cohort& target, const graph::Cohort& donors, std::size_t k) {
  return impute_from(target, donors, k, false);
}

graph::Standardization fit_standardization(const graph::Cohort& train) {
  if (train.size() == 0) throw ContractError("fit_standardization: empty training cohort");
  if (has_missing(train)) throw ContractError("fit_standardization: impute missing values first");
  require_finite(train, "fit_standardization");
  const std::size_t items = graph::kUdsNodes;
  graph::Standardization table;
  table.uds_mean.assign(items, 0.0);
  table.uds_std.assign(items, 0.0);
  const double n = static_cast<double>(train.size());
  for (const auto& s : train.subjects) {
    const auto& f = s.graph(Modality::kUds).features;
    for (std::size_t j = 0; j < items; ++j) table.uds_mean[j] += f[j] / n;
  }
  for (const auto& s : train.subjects) {
    const auto& f = s.graph(Modality::kUds).features;
    for (std::size_t j = 0; j < items; ++j) {
      const double d = f[j] - table.uds_mean[j];
      table.uds_std[j] += d * d / n;
    }
  }
  for (double& sd : table.uds_std) {
    sd = std::sqrt(sd);
    if (sd < kStdFloor) sd = 0.0;
  }
  table.fitted_on = train.ids();
  return table;
}

graph::Cohort apply_standardization(const graph::Standardization& table,
                                    const graph::Cohort& cohort) {
  if (table.uds_mean.size() != graph::kUdsNodes || table.uds_std.size() != graph::kUdsNodes) {
    throw ContractError("apply_standardization: table does not cover all UDS items");
  }
  if (has_missing(cohort)) throw ContractError("apply_standardization: impute missing values first");
  require_finite(cohort, "apply_standardization");
  graph::Cohort out = cohort;
  for (auto& s : out.subjects) {
    auto& uds = s.graph(Modality::kUds).features;
    for (std::size_t j = 0; j < uds.size(); ++j) {
      uds[j] = table.uds_std[j] == 0.0 ? 0.0 : (uds[j] - table.uds_mean[j]) / table.uds_std[j];
    }
    auto& mri = s.graph(Modality::kMri).features;
    const std::size_t dim = graph::kMriFeatures;
    const std::size_t nodes = graph::kMriNodes;
    for (std::size_t f = 0; f < dim; ++f) {
      double mean = 0.0;
      for (std::size_t r = 0; r < nodes; ++r) mean += mri[r * dim + f];
      mean /= static_cast<double>(nodes);
      double var = 0.0;
      for (std::size_t r = 0; r < nodes; ++r) {
        const double d = mri[r * dim + f] - mean;
        var += d * d;
      }
      const double sd = std::sqrt(var / static_cast<double>(nodes));
      for (std::size_t r = 0; r < nodes; ++r) {
        double& v = mri[r * dim + f];
        v = sd < kStdFloor ? 0.0 : (v - mean) / sd;
      }
    }
  }
  out.standardization = table;
  return out;
}

graph::Cohort standardize(const graph::Cohort& train, const graph::Cohort& apply_to) {
  return apply_standardization(fit_standardization(train), apply_to);
}

}  // namespace synthgt::simulate
