// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synthgt/eval/metrics.hpp"
#include "synthgt/eval/summary.hpp"

namespace synthgt::cli {

struct ReportInput {
  std::string preset;
  eval::MetricsSummary summary;
  std::vector<eval::PredictionSet> test;  // pooled out-of-fold predictions, for ROC
  std::optional<std::string> distshift_markdown;
};

struct Report {
  std::string markdown;
  // File name (relative to the plot directory) and SVG text.
  std::vector<std::pair<std::string, std::string>> plots;
};

// `plot_dir` is the directory name the markdown links into.
Report render_report(const ReportInput& input, const std::string& plot_dir = "plots");

// Square matrix of pairwise p-values; cell (i, j) comes from the comparison of
// models i and j in either order, "n/a" where undefined.
std::string p_matrix_markdown(const eval::MetricsSummary& summary, bool delong);

}  // namespace synthgt::cli
