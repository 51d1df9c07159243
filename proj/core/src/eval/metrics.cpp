// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "synthgt/error.hpp"

namespace synthgt::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_sizes(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw MetricError(std::string(op) + ": " + std::to_string(a) + " labels but " +
                      std::to_string(b) + " scores");
  }
}

// Midranks (1-based) of the values, ties averaged.
std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<int> PredictionSet::labels() const {
  std::vector<int> out;
  for (const auto& p : items) out.push_back(p.label);
  return out;
}

std::vector<double> PredictionSet::probabilities() const {
  std::vector<double> out;
  for (const auto& p : items) out.push_back(p.probability);
  return out;
}

PredictionSet PredictionSet::fold(int index) const {
  PredictionSet out{model, {}};
  for (const auto& p : items) {
    if (p.fold == index) out.items.push_back(p);
  }
  return out;
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_sizes("roc_auc", labels.size(), scores.size());
  const auto ranks = midranks(scores);
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos_rank_sum += ranks[i];
      ++pos;
    }
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("roc_auc: both classes must be present");
  const double np = static_cast<double>(pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

double roc_auc(const PredictionSet& preds) {
  const auto y = preds.labels();
  const auto p = preds.probabilities();
  return roc_auc(y, p);
}

RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores) {
  check_sizes("roc_curve", labels.size(), scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("roc_curve: both classes must be present");
  RocCurve c;
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (labels[order[i]] == 1 ? tp : fp) += 1;
    if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
    c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
  }
  return c;
}

ConfusionMetrics confusion_metrics(std::span<const int> labels, std::span<const double> probs,
                                   double threshold) {
  check_sizes("confusion_metrics", labels.size(), probs.size());
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw MetricError("confusion_metrics: threshold must lie in [0, 1]");
  }
  ConfusionMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++m.tp : ++m.fn;
    } else {
      predicted ? ++m.fp : ++m.tn;
    }
  }
  const double n = static_cast<double>(labels.size());
  m.accuracy = n > 0 ? static_cast<double>(m.tp + m.tn) / n : kNaN;
  m.sensitivity = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : kNaN;
  m.specificity = m.tn + m.fp > 0 ? static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp) : kNaN;
  m.balanced_accuracy = 0.5 * (m.sensitivity + m.specificity);
  return m;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

DelongResult delong_test(std::span<const int> labels, std::span<const double> a,
                         std::span<const double> b) {
  check_sizes("delong_test", labels.size(), a.size());
  check_sizes("delong_test", labels.size(), b.size());
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw MetricError("delong_test: both classes must be present");
  const double m = static_cast<double>(pos.size());
  const double n = static_cast<double>(neg.size());

  // Structural components via midranks: V10_i = (R_i - R^pos_i) / n and
  // V01_j = 1 - (R_j - R^neg_j) / m.
  auto components = [&](std::span<const double> s, std::vector<double>& v10, std::vector<double>& v01) {
    std::vector<double> sp, sn;
    for (std::size_t i : pos) sp.push_back(s[i]);
    for (std::size_t j : neg) sn.push_back(s[j]);
    const auto all = midranks(s);
    const auto rp = midranks(sp);
    const auto rn = midranks(sn);
    v10.resize(pos.size());
    v01.resize(neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) v10[i] = (all[pos[i]] - rp[i]) / n;
    for (std::size_t j = 0; j < neg.size(); ++j) v01[j] = 1.0 - (all[neg[j]] - rn[j]) / m;
    return std::accumulate(v10.begin(), v10.end(), 0.0) / m;
  };
  std::vector<double> a10, a01, b10, b01;
  DelongResult r;
  r.auc_a = components(a, a10, a01);
  r.auc_b = components(b, b10, b01);

  auto cov = [](const std::vector<double>& x, const std::vector<double>& y) {
    const double k = static_cast<double>(x.size());
    if (x.size() < 2) return 0.0;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / (k - 1.0);
  };
  const double var_a = cov(a10, a10) / m + cov(a01, a01) / n;
  const double var_b = cov(b10, b10) / m + cov(b01, b01) / n;
  const double cov_ab = cov(a10, b10) / m + cov(a01, b01) / n;
  r.variance = var_a + var_b - 2.0 * cov_ab;
  const double diff = r.auc_a - r.auc_b;
  if (r.variance <= 1e-15) {
    if (std::abs(diff) <= 1e-15) {
      r.z = 0.0;
      r.p = 1.0;
      return r;
    }
    throw MetricError("delong_test: degenerate variance with unequal AUCs");
  }
  r.z = diff / std::sqrt(r.variance);
  r.p = normal_two_sided_p(r.z);
  return r;
}

McnemarResult mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) {
    throw MetricError("mcnemar_test: paired vectors differ in length");
  }
  McnemarResult r;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++r.b;
    if (!correct_a[i] && correct_b[i]) ++r.c;
  }
  const std::size_t total = r.b + r.c;
  if (total == 0) return r;
  if (total < 25) {
    r.exact = true;
    const std::size_t k = std::min(r.b, r.c);
    // log C(total, i) accumulated in double; total < 25 keeps this exact enough.
    double tail = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
      tail += std::exp(std::lgamma(static_cast<double>(total) + 1.0) -
                       std::lgamma(static_cast<double>(i) + 1.0) -
                       std::lgamma(static_cast<double>(total - i) + 1.0) -
                       static_cast<double>(total) * std::log(2.0));
    }
    r.statistic = static_cast<double>(k);
    r.p = std::min(1.0, 2.0 * tail);
  } else {
    r.exact = false;
    const double d = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
    r.statistic = std::max(0.0, d) * std::max(0.0, d) / static_cast<double>(total);
    r.p = std::erfc(std::sqrt(r.statistic / 2.0));
  }
  return r;
}

Calibration calibration(std::span<const int> labels, std::span<const double> probs,
                        std::size_t n_bins) {
  check_sizes("calibration", labels.size(), probs.size());
  if (n_bins == 0) throw MetricError("calibration: n_bins must be >= 1");
  std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  Calibration c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs[i];
    const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
    sum_p[bin] += p;
    sum_y[bin] += labels[i];
    ++count[bin];
    c.brier += (p - labels[i]) * (p - labels[i]);
  }
  const double n = static_cast<double>(labels.size());
  if (labels.empty()) return c;
  c.brier /= n;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double k = static_cast<double>(count[b]);
    CalibrationBin bin{static_cast<double>(b) / static_cast<double>(n_bins),
                       static_cast<double>(b + 1) / static_cast<double>(n_bins), sum_p[b] / k,
                       sum_y[b] / k, count[b]};
    c.ece += (k / n) * std::abs(bin.mean_predicted - bin.observed_rate);
    c.bins.push_back(bin);
  }
  return c;
}

SensAtSpec sens_at_spec(std::span<const int> val_labels, std::span<const double> val_probs,
                        std::span<const int> test_labels, std::span<const double> test_probs,
                        double target_specificity) {
  check_sizes("sens_at_spec", val_labels.size(), val_probs.size());
  check_sizes("sens_at_spec", test_labels.size(), test_probs.size());
  std::vector<double> neg;
  for (std::size_t i = 0; i < val_labels.size(); ++i) {
    if (val_labels[i] == 0) neg.push_back(val_probs[i]);
  }
  if (neg.empty()) throw MetricError("sens_at_spec: validation set has no negatives");
  std::sort(neg.begin(), neg.end());
  const double total = static_cast<double>(neg.size());
  SensAtSpec r;
  // Specificity at threshold t is the share of negatives scoring below t; the
  // candidates are 0 and the value just above each negative score.
  std::vector<double> candidates{0.0};
  for (double s : neg) candidates.push_back(std::nextafter(s, std::numeric_limits<double>::infinity()));
  for (double t : candidates) {
    const auto below = static_cast<double>(std::lower_bound(neg.begin(), neg.end(), t) - neg.begin());
    if (below / total >= target_specificity) {
      r.threshold = t;
      r.validation_specificity = below / total;
      break;
    }
  }
  r.unreachable = r.threshold > 1.0;
  const ConfusionMetrics m = confusion_metrics(test_labels, test_probs, std::min(r.threshold, 1.0));
  r.sensitivity = r.unreachable ? 0.0 : m.sensitivity;
  r.achieved_specificity = r.unreachable ? 1.0 : m.specificity;
  return r;
}

double net_benefit(std::span<const int> labels, std::span<const double> probs, double pt) {
  check_sizes("net_benefit", labels.size(), probs.size());
  if (!(pt >= 0.0 && pt < 1.0)) throw MetricError("net_benefit: threshold must lie in [0, 1)");
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (probs[i] >= pt) (labels[i] == 1 ? tp : fp) += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  return tp / n - fp / n * pt / (1.0 - pt);
}

DecisionCurve decision_curve(std::span<const int> labels, std::span<const double> probs,
                             std::span<const double> thresholds) {
  DecisionCurve d;
  const double n = static_cast<double>(labels.size());
  const double prevalence = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / n;
  for (double pt : thresholds) {
    d.thresholds.push_back(pt);
    d.model.push_back(net_benefit(labels, probs, pt));
    d.treat_all.push_back(prevalence - (1.0 - prevalence) * pt / (1.0 - pt));
    d.treat_none.push_back(0.0);
  }
  return d;
}

std::vector<double> threshold_grid(double step, double max) {
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * step;
    if (t > max + 1e-12 || t >= 1.0) break;
    out.push_back(t);
  }
  return out;
}

const char* stratifier_name(Stratifier s) {
  switch (s) {
    case Stratifier::kAge: return "age";
    case Stratifier::kSex: return "sex";
    case Stratifier::kApoe4: return "apoe4";
  }
  return "?";
}

std::string age_band(double age) {
  if (age < 70.0) return "<70";
  if (age <= 80.0) return "70-80";
  return ">80";
}

std::vector<SubgroupRow> subgroup_eval(const PredictionSet& preds, Stratifier stratifier,
                                       double threshold) {
  std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> groups;
  for (const auto& p : preds.items) {
    std::string key;
    switch (stratifier) {
      case Stratifier::kAge: key = age_band(p.age); break;
      case Stratifier::kSex: key = p.sex == 1 ? "male" : "female"; break;
      case Stratifier::kApoe4: key = p.apoe4 ? "carrier" : "non-carrier"; break;
    }
    groups[key].first.push_back(p.label);
    groups[key].second.push_back(p.probability);
  }
  std::vector<SubgroupRow> rows;
  for (const auto& [key, data] : groups) {
    SubgroupRow row;
    row.stratifier = stratifier_name(stratifier);
    row.group = key;
    row.n = data.first.size();
    row.positives = static_cast<std::size_t>(std::count(data.first.begin(), data.first.end(), 1));
    row.auc_defined = row.positives > 0 && row.positives < row.n;
    row.auc = row.auc_defined ? roc_auc(data.first, data.second) : kNaN;
    row.confusion = confusion_metrics(data.first, data.second, threshold);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace synthgt::eval
