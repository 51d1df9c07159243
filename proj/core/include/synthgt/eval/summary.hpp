// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "synthgt/eval/metrics.hpp"

namespace synthgt::eval {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for one value
  std::size_t n = 0;
};

// Mean and sample std of the finite entries of `values`.
MeanStd mean_std(const std::vector<double>& values);

struct FoldMetrics {
  int fold = 0;
  std::size_t n = 0;
  double auc = 0.0;  // NaN when the fold holds a single class
  ConfusionMetrics confusion;
  SensAtSpec sens_at_spec;
};

struct ModelSummary {
  std::string model;
  std::vector<FoldMetrics> folds;
  MeanStd auc, accuracy, sensitivity, specificity;
  double pooled_auc = 0.0;
  ConfusionMetrics pooled_confusion;
  Calibration calibration;
  // Per-fold thresholds from validation, counts pooled over test folds.
  double sens_at_spec_sensitivity = 0.0;
  double sens_at_spec_specificity = 0.0;
  std::size_t sens_at_spec_unreachable = 0;
  DecisionCurve decision_curve;
  double prevalence = 0.0;
  std::vector<SubgroupRow> subgroups;
};

struct PairwiseComparison {
  std::string model_a;
  std::string model_b;
  DelongResult delong;                // pooled out-of-fold predictions
  std::vector<double> delong_fold_p;  // per fold; NaN where undefined
  McnemarResult mcnemar;              // pooled, threshold 0.5
};

struct SummaryOptions {
  double threshold = 0.5;
  double target_specificity = 0.90;
  std::size_t calibration_bins = 10;
  double dca_step = 0.01;
  double dca_max = 0.99;
};

struct MetricsSummary {
  std::string config_hash;
  SummaryOptions options;
  std::vector<ModelSummary> models;
  std::vector<PairwiseComparison> pairwise;

  const ModelSummary* find(const std::string& model) const;
  std::string to_json() const;
  // Model-comparison table: AUC / ACC / SEN / SPEC as mean +- std over folds.
  std::string table_markdown() const;
};

// `test[i]` and `validation[i]` belong to the same model. Validation sets may
// be empty, in which case sens_at_spec is skipped for that model.
MetricsSummary summarize(const std::vector<PredictionSet>& test,
                         const std::vector<PredictionSet>& validation, const SummaryOptions& options,
                         const std::string& config_hash = "");

std::string format_mean_std(const MeanStd& m, int digits = 3);

}  // namespace synthgt::eval
