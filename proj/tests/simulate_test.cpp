// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "synthgt/error.hpp"
#include "synthgt/simulate/preprocess.hpp"
#include "synthgt/simulate/simulator.hpp"

namespace synthgt::simulate {
namespace {

using graph::Cohort;
using graph::Modality;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cohort toy_uds_cohort(const std::vector<std::pair<double, double>>& rows) {
  Cohort c;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = graph::blank_subject("t" + std::to_string(i), static_cast<int>(i % 2));
    auto& u = s.graph(Modality::kUds).features;
    u[0] = rows[i].first;
    u[1] = rows[i].second;
    c.subjects.push_back(std::move(s));
  }
  return c;
}

TEST(Simulator, DefaultSpecMatchesCohortCounts) {
  const Cohort c = simulate_cohort({});
  EXPECT_EQ(c.size(), 1237u);
  EXPECT_EQ(c.count_label(1), 390u);
  EXPECT_EQ(c.count_label(0), 847u);
  EXPECT_EQ(c.provenance, graph::Provenance::kSimulatedReal);
}

TEST(Simulator, SameSeedIsBitIdentical) {
  SimSpec spec;
  spec.n_ad = 20;
  spec.n_hc = 30;
  spec.seed = 42;
  const Cohort a = simulate_cohort(spec);
  const Cohort b = simulate_cohort(spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto fa = graph::flatten(a.subjects[i]);
    const auto fb = graph::flatten(b.subjects[i]);
    ASSERT_EQ(0, std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)));
    EXPECT_EQ(a.subjects[i].age, b.subjects[i].age);
  }
  spec.seed = 43;
  EXPECT_NE(graph::flatten(simulate_cohort(spec).subjects[0]), graph::flatten(a.subjects[0]));
}

TEST(Simulator, MissingnessOnlyInUds) {
  SimSpec spec;
  spec.n_ad = 50;
  spec.n_hc = 50;
  spec.missing_rate = 0.1;
  const Cohort c = simulate_cohort(spec);
  std::size_t missing = 0;
  for (const auto& s : c.subjects) {
    for (double v : s.graph(Modality::kMri).features) EXPECT_FALSE(std::isnan(v));
    for (double v : s.graph(Modality::kUds).features) missing += std::isnan(v) ? 1 : 0;
  }
  const double rate = static_cast<double>(missing) / (100.0 * 170.0);
  EXPECT_NEAR(rate, 0.1, 0.02);
}

TEST(Simulator, InvalidSpecIsConfigError) {
  SimSpec spec;
  spec.missing_rate = 1.0;
  EXPECT_THROW(simulate_cohort(spec), ConfigError);
  spec = {};
  spec.n_ad = 0;
  EXPECT_THROW(simulate_cohort(spec), ConfigError);
}

TEST(Simulator, ApoeCarriersAreEnrichedInAd) {
  const Cohort c = simulate_cohort({});
  double ad = 0, hc = 0;
  for (const auto& s : c.subjects) (s.label ? ad : hc) += s.apoe4 ? 1 : 0;
  EXPECT_GT(ad / 390.0, hc / 847.0 + 0.15);
}

TEST(KnnImpute, IdenticalNeighbourValues) {
  std::vector<std::pair<double, double>> rows{{0.0, kNaN}};
  for (int i = 1; i <= 7; ++i) rows.emplace_back(0.1 * i, 4.0);
  const Cohort out = knn_impute(toy_uds_cohort(rows), 5);
  EXPECT_DOUBLE_EQ(out.subjects[0].graph(Modality::kUds).features[1], 4.0);
}

TEST(KnnImpute, NoMissingIsIdentity) {
  SimSpec spec;
  spec.n_ad = 10;
  spec.n_hc = 10;
  spec.missing_rate = 0.0;
  const Cohort c = simulate_cohort(spec);
  const Cohort out = knn_impute(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(graph::flatten(c.subjects[i]), graph::flatten(out.subjects[i]));
  }
}

// Brute-force oracle: all pairwise distances on the single observed item,
// sorted, mean of the k nearest values of the missing item.
double brute_force_knn(const std::vector<std::pair<double, double>>& rows, std::size_t target,
                       std::size_t k) {
  std::vector<std::pair<double, double>> cand;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == target || std::isnan(rows[i].second)) continue;
    cand.emplace_back(std::abs(rows[i].first - rows[target].first), rows[i].second);
  }
  std::stable_sort(cand.begin(), cand.end());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += cand[i].second;
  return total / static_cast<double>(k);
}

TEST(KnnImpute, ToyCaseMatchesBruteForce) {
  const std::vector<std::pair<double, double>> rows{
      {0.0, kNaN}, {0.3, 1.0}, {-0.9, 2.0}, {2.5, 7.0}, {1.1, 3.0}, {-0.2, 5.0}};
  for (std::size_t k : {5u, 2u, 3u}) {
    const Cohort out = knn_impute(toy_uds_cohort(rows), k);
    EXPECT_NEAR(out.subjects[0].graph(Modality::kUds).features[1], brute_force_knn(rows, 0, k),
                1e-12)
        << "k=" << k;
  }
  // k = 5 uses every donor: (1 + 2 + 7 + 3 + 5) / 5
  EXPECT_NEAR(knn_impute(toy_uds_cohort(rows), 5).subjects[0].graph(Modality::kUds).features[1],
              18.0 / 5.0, 1e-12);
  // k = 2: nearest are 0.3 and -0.2 -> (1 + 5) / 2
  EXPECT_NEAR(knn_impute(toy_uds_cohort(rows), 2).subjects[0].graph(Modality::kUds).features[1],
              3.0, 1e-12);
}

TEST(KnnImpute, ObservedValuesUntouchedAndIdempotent) {
  SimSpec spec;
  spec.n_ad = 30;
  spec.n_hc = 40;
  spec.missing_rate = 0.15;
  const Cohort c = simulate_cohort(spec);
  const Cohort once = knn_impute(c);
  EXPECT_FALSE(has_missing(once));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& raw = c.subjects[i].graph(Modality::kUds).features;
    const auto& imp = once.subjects[i].graph(Modality::kUds).features;
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (!std::isnan(raw[j])) EXPECT_EQ(raw[j], imp[j]);
    }
  }
  const Cohort twice = knn_impute(once);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(graph::flatten(once.subjects[i]), graph::flatten(twice.subjects[i]));
  }
}

TEST(KnnImpute, ItemMissingEverywhereNamesTheItem) {
  Cohort c = toy_uds_cohort({{0.0, kNaN}, {1.0, kNaN}});
  try {
    knn_impute(c);
    FAIL();
  } catch (const ImputationError& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
  }
}

TEST(KnnImpute, HeldOutUsesDonorsOnly) {
  const Cohort donors = toy_uds_cohort({{0.0, 1.0}, {1.0, 3.0}, {5.0, 100.0}});
  const Cohort target = toy_uds_cohort({{0.4, kNaN}});
  const Cohort out = knn_impute(target, donors, 2);
  EXPECT_DOUBLE_EQ(out.subjects[0].graph(Modality::kUds).features[1], 2.0);
}

Cohort imputed_cohort(std::uint64_t seed, std::size_t n = 40) {
  SimSpec spec;
  spec.n_ad = n / 2;
  spec.n_hc = n - n / 2;
  spec.seed = seed;
  return knn_impute(simulate_cohort(spec));
}

TEST(Standardize, SelfStandardizationGivesZeroMeanUnitStd) {
  const Cohort c = imputed_cohort(1);
  const Cohort z = standardize(c, c);
  for (std::size_t j = 0; j < graph::kUdsNodes; ++j) {
    double mean = 0.0;
    for (const auto& s : z.subjects) mean += s.graph(Modality::kUds).features[j];
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (const auto& s : z.subjects) {
      const double d = s.graph(Modality::kUds).features[j] - mean;
      var += d * d;
    }
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(var / static_cast<double>(z.size())), 1.0, 1e-9);
  }
  for (const auto& s : z.subjects) {
    const auto& m = s.graph(Modality::kMri).features;
    for (std::size_t f = 0; f < 2; ++f) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < 62; ++r) mean += m[r * 2 + f] / 62.0;
      for (std::size_t r = 0; r < 62; ++r) sq += (m[r * 2 + f] - mean) * (m[r * 2 + f] - mean) / 62.0;
      EXPECT_NEAR(mean, 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-9);
    }
  }
  ASSERT_TRUE(z.standardization.has_value());
  EXPECT_EQ(z.standardization->fitted_on, c.ids());
}

TEST(Standardize, ConstantTrainColumnBecomesZero) {
  Cohort c = imputed_cohort(2);
  for (auto& s : c.subjects) s.graph(Modality::kUds).features[7] = 3.5;
  Cohort holdout = imputed_cohort(3, 10);
  const Cohort z = standardize(c, holdout);
  for (const auto& s : z.subjects) EXPECT_EQ(s.graph(Modality::kUds).features[7], 0.0);
}

TEST(Standardize, HeldOutUsesTrainStatistics) {
  const Cohort train = imputed_cohort(4);
  Cohort shifted = imputed_cohort(5, 20);
  for (auto& s : shifted.subjects) {
    for (double& v : s.graph(Modality::kUds).features) v += 2.0;
  }
  const Cohort with_train = standardize(train, shifted);
  const Cohort with_self = standardize(shifted, shifted);
  // Recompute by hand from train statistics only (leakage audit).
  const auto table = fit_standardization(train);
  bool differs = false;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    const auto& raw = shifted.subjects[i].graph(Modality::kUds).features;
    const auto& got = with_train.subjects[i].graph(Modality::kUds).features;
    for (std::size_t j = 0; j < raw.size(); ++j) {
      EXPECT_NEAR(got[j], (raw[j] - table.uds_mean[j]) / table.uds_std[j], 1e-12);
      if (std::abs(got[j] - with_self.subjects[i].graph(Modality::kUds).features[j]) > 1e-6) differs = true;
    }
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(with_train.standardization->fitted_on, train.ids());
}

TEST(Standardize, RejectsMissingValues) {
  SimSpec spec;
  spec.n_ad = 5;
  spec.n_hc = 5;
  spec.missing_rate = 0.5;
  const Cohort raw = simulate_cohort(spec);
  EXPECT_THROW(standardize(raw, raw), ContractError);
}

TEST(Standardize, RejectsInfiniteValues) {
  SimSpec spec;
  spec.n_ad = 5;
  spec.n_hc = 5;
  spec.missing_rate = 0.0;
  const Cohort clean = simulate_cohort(spec);
  Cohort bad = clean;
  bad.subjects[2].graph(graph::Modality::kMri).features[3] = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_standardization(bad), ContractError);
  EXPECT_THROW(apply_standardization(fit_standardization(clean), bad), ContractError);
}

}  // namespace
}  // namespace synthgt::simulate
