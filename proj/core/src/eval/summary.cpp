// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/eval/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "synthgt/error.hpp"

namespace synthgt::eval {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> folds_of(const PredictionSet& s) {
  std::set<int> f;
  for (const Prediction& p : s.items) f.insert(p.fold);
  return {f.begin(), f.end()};
}

bool both_classes(std::span<const int> labels) {
  const bool pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  return pos && neg;
}

double safe_auc(const PredictionSet& s) {
  const std::vector<int> y = s.labels();
  return both_classes(y) ? roc_auc(s) : kNaN;
}

std::vector<bool> correct_at(const PredictionSet& s, double threshold) {
  std::vector<bool> out;
  out.reserve(s.items.size());
  for (const Prediction& p : s.items) out.push_back((p.probability >= threshold ? 1 : 0) == p.label);
  return out;
}

// Finite doubles as numbers, everything else as null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json confusion_json(const ConfusionMetrics& m) {
  return Json{{"tp", m.tp},
              {"fp", m.fp},
              {"tn", m.tn},
              {"fn", m.fn},
              {"accuracy", num(m.accuracy)},
              {"balanced_accuracy", num(m.balanced_accuracy)},
              {"sensitivity", num(m.sensitivity)},
              {"specificity", num(m.specificity)}};
}

Json mean_std_json(const MeanStd& m) {
  return Json{{"mean", num(m.mean)}, {"std", num(m.std)}, {"n", m.n}};
}

Json model_json(const ModelSummary& m) {
  Json folds = Json::array();
  for (const FoldMetrics& f : m.folds) {
    folds.push_back(Json{{"fold", f.fold},
                         {"n", f.n},
                         {"auc", num(f.auc)},
                         {"confusion", confusion_json(f.confusion)},
                         {"sens_at_spec",
                          {{"threshold", num(f.sens_at_spec.threshold)},
                           {"sensitivity", num(f.sens_at_spec.sensitivity)},
                           {"test_specificity", num(f.sens_at_spec.achieved_specificity)},
                           {"validation_specificity", num(f.sens_at_spec.validation_specificity)},
                           {"unreachable", f.sens_at_spec.unreachable}}}});
  }
  Json bins = Json::array();
  for (const CalibrationBin& b : m.calibration.bins) {
    bins.push_back(Json{{"lower", b.lower},
                        {"upper", b.upper},
                        {"mean_predicted", num(b.mean_predicted)},
                        {"observed_rate", num(b.observed_rate)},
                        {"count", b.count}});
  }
  Json dca = Json::array();
  for (std::size_t i = 0; i < m.decision_curve.thresholds.size(); ++i) {
    dca.push_back(Json{{"threshold", m.decision_curve.thresholds[i]},
                       {"model", num(m.decision_curve.model[i])},
                       {"treat_all", num(m.decision_curve.treat_all[i])},
                       {"treat_none", num(m.decision_curve.treat_none[i])}});
  }
  Json groups = Json::array();
  for (const SubgroupRow& r : m.subgroups) {
    groups.push_back(Json{{"stratifier", r.stratifier},
                          {"group", r.group},
                          {"n", r.n},
                          {"positives", r.positives},
                          {"auc", r.auc_defined ? num(r.auc) : Json(nullptr)},
                          {"confusion", confusion_json(r.confusion)}});
  }
  return Json{{"model", m.model},
              {"folds", folds},
              {"auc", mean_std_json(m.auc)},
              {"accuracy", mean_std_json(m.accuracy)},
              {"sensitivity", mean_std_json(m.sensitivity)},
              {"specificity", mean_std_json(m.specificity)},
              {"pooled_auc", num(m.pooled_auc)},
              {"pooled_confusion", confusion_json(m.pooled_confusion)},
              {"calibration",
               {{"brier", num(m.calibration.brier)}, {"ece", num(m.calibration.ece)}, {"bins", bins}}},
              {"sens_at_spec",
               {{"sensitivity", num(m.sens_at_spec_sensitivity)},
                {"specificity", num(m.sens_at_spec_specificity)},
                {"unreachable_folds", m.sens_at_spec_unreachable}}},
              {"prevalence", num(m.prevalence)},
              {"decision_curve", dca},
              {"subgroups", groups}};
}

ModelSummary summarize_model(const PredictionSet& test, const PredictionSet& validation,
                             const SummaryOptions& o) {
  if (test.items.empty()) throw MetricError("summarize: model " + test.model + " has no predictions");
  ModelSummary m;
  m.model = test.model;
  std::vector<double> auc, acc, sen, spec;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (int f : folds_of(test)) {
    const PredictionSet part = test.fold(f);
    const std::vector<int> y = part.labels();
    const std::vector<double> p = part.probabilities();
    FoldMetrics fm;
    fm.fold = f;
    fm.n = part.items.size();
    fm.auc = safe_auc(part);
    fm.confusion = confusion_metrics(y, p, o.threshold);
    if (!validation.items.empty()) {
      const PredictionSet val = validation.fold(f);
      const std::vector<int> vy = val.labels();
      if (std::find(vy.begin(), vy.end(), 0) != vy.end()) {
        fm.sens_at_spec = sens_at_spec(vy, val.probabilities(), y, p, o.target_specificity);
        if (fm.sens_at_spec.unreachable) ++m.sens_at_spec_unreachable;
        const double t = std::min(fm.sens_at_spec.threshold, 1.0);
        for (std::size_t i = 0; i < y.size(); ++i) {
          const bool pos = !fm.sens_at_spec.unreachable && p[i] >= t;
          if (y[i] == 1) (pos ? tp : fn) += 1;
          else (pos ? fp : tn) += 1;
        }
      }
    }
    auc.push_back(fm.auc);
    acc.push_back(fm.confusion.accuracy);
    sen.push_back(fm.confusion.sensitivity);
    spec.push_back(fm.confusion.specificity);
    m.folds.push_back(fm);
  }
  m.auc = mean_std(auc);
  m.accuracy = mean_std(acc);
  m.sensitivity = mean_std(sen);
  m.specificity = mean_std(spec);
  m.sens_at_spec_sensitivity = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : kNaN;
  m.sens_at_spec_specificity = tn + fp > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : kNaN;

  const std::vector<int> y = test.labels();
  const std::vector<double> p = test.probabilities();
  m.pooled_auc = safe_auc(test);
  m.pooled_confusion = confusion_metrics(y, p, o.threshold);
  m.calibration = calibration(y, p, o.calibration_bins);
  m.prevalence = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
  const std::vector<double> grid = threshold_grid(o.dca_step, o.dca_max);
  m.decision_curve = decision_curve(y, p, grid);
  for (Stratifier s : {Stratifier::kAge, Stratifier::kSex, Stratifier::kApoe4}) {
    const auto rows = subgroup_eval(test, s, o.threshold);
    m.subgroups.insert(m.subgroups.end(), rows.begin(), rows.end());
  }
  return m;
}

PairwiseComparison compare(const PredictionSet& a, const PredictionSet& b, double threshold) {
  if (a.items.size() != b.items.size()) {
    throw MetricError("summarize: models " + a.model + " and " + b.model + " cover different subjects");
  }
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].id != b.items[i].id) {
      throw MetricError("summarize: models " + a.model + " and " + b.model + " are not aligned at row " +
                        std::to_string(i));
    }
  }
  PairwiseComparison c;
  c.model_a = a.model;
  c.model_b = b.model;
  const std::vector<int> y = a.labels();
  try {
    c.delong = delong_test(y, a.probabilities(), b.probabilities());
  } catch (const MetricError&) {
    c.delong.auc_a = safe_auc(a);
    c.delong.auc_b = safe_auc(b);
    c.delong.variance = 0.0;
    c.delong.z = kNaN;
    c.delong.p = kNaN;
  }
  for (int f : folds_of(a)) {
    const PredictionSet fa = a.fold(f);
    const PredictionSet fb = b.fold(f);
    const std::vector<int> fy = fa.labels();
    double p = kNaN;
    if (both_classes(fy)) {
      try {
        p = delong_test(fy, fa.probabilities(), fb.probabilities()).p;
      } catch (const MetricError&) {
      }
    }
    c.delong_fold_p.push_back(p);
  }
  c.mcnemar = mcnemar_test(correct_at(a, threshold), correct_at(b, threshold));
  return c;
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++r.n;
  }
  if (r.n == 0) return {kNaN, kNaN, 0};
  r.mean = sum / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      if (std::isfinite(v)) ss += (v - r.mean) * (v - r.mean);
    }
    r.std = std::sqrt(ss / static_cast<double>(r.n - 1));
  }
  return r;
}

std::string format_mean_std(const MeanStd& m, int digits) {
  if (m.n == 0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, m.mean, digits, m.std);
  return buf;
}

const ModelSummary* MetricsSummary::find(const std::string& model) const {
  for (const ModelSummary& m : models) {
    if (m.model == model) return &m;
  }
  return nullptr;
}

MetricsSummary summarize(const std::vector<PredictionSet>& test,
                         const std::vector<PredictionSet>& validation, const SummaryOptions& options,
                         const std::string& config_hash) {
  if (!validation.empty() && validation.size() != test.size()) {
    throw MetricError("summarize: " + std::to_string(test.size()) + " test sets but " +
                      std::to_string(validation.size()) + " validation sets");
  }
  MetricsSummary s;
  s.config_hash = config_hash;
  s.options = options;
  for (std::size_t i = 0; i < test.size(); ++i) {
    s.models.push_back(summarize_model(test[i], validation.empty() ? PredictionSet{} : validation[i], options));
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t j = i + 1; j < test.size(); ++j) {
      s.pairwise.push_back(compare(test[i], test[j], options.threshold));
    }
  }
  return s;
}

std::string MetricsSummary::to_json() const {
  Json models_json = Json::array();
  for (const ModelSummary& m : models) models_json.push_back(model_json(m));
  Json pairs = Json::array();
  for (const PairwiseComparison& c : pairwise) {
    Json fold_p = Json::array();
    for (double p : c.delong_fold_p) fold_p.push_back(num(p));
    pairs.push_back(Json{{"model_a", c.model_a},
                         {"model_b", c.model_b},
                         {"delong",
                          {{"auc_a", num(c.delong.auc_a)},
                           {"auc_b", num(c.delong.auc_b)},
                           {"z", num(c.delong.z)},
                           {"p", num(c.delong.p)},
                           {"fold_p", fold_p}}},
                         {"mcnemar",
                          {{"b", c.mcnemar.b},
                           {"c", c.mcnemar.c},
                           {"statistic", num(c.mcnemar.statistic)},
                           {"p", num(c.mcnemar.p)},
                           {"exact", c.mcnemar.exact}}}});
  }
  const Json j{{"format_version", 1},
               {"config_hash", config_hash},
               {"options",
                {{"threshold", options.threshold},
                 {"target_specificity", options.target_specificity},
                 {"calibration_bins", options.calibration_bins},
                 {"dca_step", options.dca_step},
                 {"dca_max", options.dca_max}}},
               {"models", models_json},
               {"pairwise", pairs}};
  return j.dump(2) + "\n";
}

std::string MetricsSummary::table_markdown() const {
  std::ostringstream out;
  out << "| Model | AUC | ACC | SEN | SPEC | Pooled AUC |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const ModelSummary& m : models) {
    char pooled[32];
    std::snprintf(pooled, sizeof pooled, "%.3f", m.pooled_auc);
    out << "| " << m.model << " | " << format_mean_std(m.auc) << " | " << format_mean_std(m.accuracy)
        << " | " << format_mean_std(m.sensitivity) << " | " << format_mean_std(m.specificity) << " | "
        << (std::isfinite(m.pooled_auc) ? pooled : "n/a") << " |\n";
  }
  return out.str();
}

}  // namespace synthgt::eval
