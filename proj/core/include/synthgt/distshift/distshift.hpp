// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthgt/graph/cohort.hpp"
#include "synthgt/gtx/encoder.hpp"

namespace synthgt::distshift {

enum class Space { kRaw, kEmbedding };
enum class ClassTag { kAd, kHc, kPooled };
const char* space_name(Space s);
const char* class_name(ClassTag c);

// n x d observations, row-major. Entries must be finite.
struct SampleMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  Space space = Space::kRaw;
  ClassTag cls = ClassTag::kPooled;

  SampleMatrix() = default;
  // Throws DimensionError on a size mismatch, ContractError on non-finite values.
  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
               Space space = Space::kRaw, ClassTag cls = ClassTag::kPooled);
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

struct MmdResult {
  double mmd2_biased = 0.0;
  double mmd2_unbiased = 0.0;  // NaN when either sample has fewer than 2 rows
  double bandwidth = 1.0;
  bool bandwidth_fallback = false;  // median distance was 0
};

// Median of pairwise distances over the union. Above `max_points` rows a
// deterministic evenly spaced subset is used.
double median_pairwise_distance(const SampleMatrix& x, const SampleMatrix& y,
                                std::size_t max_points = 1000);

// Squared MMD with k(a, b) = exp(-|a - b|^2 / (2 sigma^2)); median heuristic
// when no bandwidth is given.
MmdResult mmd_rbf(const SampleMatrix& x, const SampleMatrix& y,
                  std::optional<double> bandwidth = std::nullopt);

// Squared Frechet distance between Gaussian fits (covariance with 1/(n-1)).
double frechet_distance(const SampleMatrix& x, const SampleMatrix& y);
// Covariances are d x d row-major.
double frechet_from_moments(std::span<const double> mean_x, std::span<const double> cov_x,
                            std::span<const double> mean_y, std::span<const double> cov_y);

// 2 E|x - y| - E|x - x'| - E|y - y'| with every mean taken over all ordered
// pairs, so identical samples give exactly 0.
double energy_distance(const SampleMatrix& x, const SampleMatrix& y);

struct KsResult {
  double statistic = 0.0;
  double p = 1.0;
};
// Asymptotic two-sample p-value from the Kolmogorov distribution.
double ks_pvalue(double d, std::size_t n, std::size_t m);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
std::vector<KsResult> ks_per_feature(const SampleMatrix& x, const SampleMatrix& y);

struct ShiftRow {
  Space space = Space::kRaw;
  ClassTag cls = ClassTag::kPooled;
  std::string view = "raw";  // raw, fused, or a modality name
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  MmdResult mmd;
  double frechet = 0.0;
  double energy = 0.0;
  double ks_mean_statistic = 0.0;
  double ks_max_statistic = 0.0;
  double ks_reject_fraction = 0.0;  // features with p < 0.05
};

struct ShiftOptions {
  std::size_t max_samples = 1000;  // per side, seeded subsample above this
  std::uint64_t seed = 0;
  std::optional<double> bandwidth;
  bool per_modality = false;  // one embedding view per encoder instead of the fused one
};

struct ShiftReport {
  std::vector<ShiftRow> rows;
  std::string to_json() const;
  std::string to_markdown() const;
};

SampleMatrix raw_samples(const graph::Cohort& cohort, ClassTag cls);
SampleMatrix embedding_samples(const graph::Cohort& cohort, ClassTag cls,
                               std::span<const gtx::EncoderStack> encoders);

// Raw rows always; embedding rows when `encoders` is non-empty, either for the
// fused embedding or per encoder.
ShiftReport shift_report(const graph::Cohort& real, const graph::Cohort& synth,
                         std::span<const gtx::EncoderStack> encoders, const ShiftOptions& options = {});

}  // namespace synthgt::distshift
