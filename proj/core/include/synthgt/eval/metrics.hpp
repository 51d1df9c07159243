// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace synthgt::eval {

struct Prediction {
  std::string id;
  int label = 0;
  double probability = 0.0;
  int fold = 0;
  double age = 0.0;
  int sex = 0;
  bool apoe4 = false;
};

struct PredictionSet {
  std::string model;
  std::vector<Prediction> items;

  std::vector<int> labels() const;
  std::vector<double> probabilities() const;
  PredictionSet fold(int index) const;
};

// Mann-Whitney AUC with half credit for ties. Throws MetricError unless both
// classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);
double roc_auc(const PredictionSet& preds);

// Empirical ROC vertices from (0, 0) to (1, 1), one per distinct score taken in
// descending order; tied scores move diagonally.
struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
};
RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores);

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double sensitivity = 0.0;  // NaN without positives
  double specificity = 0.0;  // NaN without negatives
};

// Predicted positive iff probability >= threshold.
ConfusionMetrics confusion_metrics(std::span<const int> labels, std::span<const double> probs,
                                   double threshold = 0.5);

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double variance = 0.0;  // variance of auc_a - auc_b
  double z = 0.0;
  double p = 1.0;
};

// Paired DeLong test on two score vectors for the same subjects.
DelongResult delong_test(std::span<const int> labels, std::span<const double> a,
                         std::span<const double> b);

struct McnemarResult {
  std::size_t b = 0;  // only A correct
  std::size_t c = 0;  // only B correct
  double statistic = 0.0;
  double p = 1.0;
  bool exact = true;
};

// Exact binomial when b + c < 25, otherwise continuity-corrected chi-square.
McnemarResult mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_predicted = 0.0;
  double observed_rate = 0.0;
  std::size_t count = 0;
};

struct Calibration {
  std::vector<CalibrationBin> bins;  // non-empty bins only
  double brier = 0.0;
  double ece = 0.0;
};

// Equal-width bins on [0, 1]; probability 1.0 falls in the last bin.
Calibration calibration(std::span<const int> labels, std::span<const double> probs,
                        std::size_t n_bins = 10);

struct SensAtSpec {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double achieved_specificity = 0.0;
  double validation_specificity = 0.0;
  bool unreachable = false;
};

// Threshold chosen on validation as the smallest value whose specificity
// reaches the target, then applied unchanged to the test set.
SensAtSpec sens_at_spec(std::span<const int> val_labels, std::span<const double> val_probs,
                        std::span<const int> test_labels, std::span<const double> test_probs,
                        double target_specificity = 0.90);

struct DecisionCurve {
  std::vector<double> thresholds;
  std::vector<double> model;
  std::vector<double> treat_all;
  std::vector<double> treat_none;
};

double net_benefit(std::span<const int> labels, std::span<const double> probs, double pt);
// Throws MetricError if a threshold lies outside [0, 1).
DecisionCurve decision_curve(std::span<const int> labels, std::span<const double> probs,
                             std::span<const double> thresholds);
// 0.00, 0.01, ..., 0.99 truncated at `max`.
std::vector<double> threshold_grid(double step = 0.01, double max = 0.99);

struct SubgroupRow {
  std::string stratifier;
  std::string group;
  std::size_t n = 0;
  std::size_t positives = 0;
  bool auc_defined = false;
  double auc = 0.0;
  ConfusionMetrics confusion;
};

enum class Stratifier { kAge, kSex, kApoe4 };
const char* stratifier_name(Stratifier s);
std::string age_band(double age);

// Empty groups are omitted; groups with one class carry auc_defined = false.
std::vector<SubgroupRow> subgroup_eval(const PredictionSet& preds, Stratifier stratifier,
                                       double threshold = 0.5);

double normal_two_sided_p(double z);

}  // namespace synthgt::eval
