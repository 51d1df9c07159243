// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "svg.hpp"
#include "synthgt/error.hpp"
#include "synthgt/train/pipeline.hpp"

namespace synthgt::cli {

namespace {

std::string num(double v, const char* format = "%.3f") {
  if (!std::isfinite(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

const eval::PairwiseComparison* find_pair(const eval::MetricsSummary& s, const std::string& a,
                                          const std::string& b) {
  for (const auto& p : s.pairwise) {
    if ((p.model_a == a && p.model_b == b) || (p.model_a == b && p.model_b == a)) return &p;
  }
  return nullptr;
}

std::string roc_plot(const std::vector<eval::PredictionSet>& test) {
  std::vector<Series> series;
  for (const auto& set : test) {
    const auto y = set.labels();
    const auto p = set.probabilities();
    try {
      const eval::RocCurve c = eval::roc_curve(y, p);
      series.push_back({set.model, c.fpr, c.tpr});
    } catch (const MetricError&) {
    }
  }
  series.push_back({"chance", {0.0, 1.0}, {0.0, 1.0}, true});
  return line_plot({"ROC (pooled out-of-fold)", "1 - specificity", "sensitivity"}, series);
}

std::string calibration_plot(const eval::MetricsSummary& s) {
  std::vector<Series> series;
  for (const auto& m : s.models) {
    Series line{m.model, {}, {}};
    for (const auto& bin : m.calibration.bins) {
      line.x.push_back(bin.mean_predicted);
      line.y.push_back(bin.observed_rate);
    }
    series.push_back(std::move(line));
  }
  series.push_back({"ideal", {0.0, 1.0}, {0.0, 1.0}, true});
  return line_plot({"Calibration", "mean predicted probability", "observed AD rate"}, series);
}

std::string dca_plot(const eval::MetricsSummary& s) {
  std::vector<Series> series;
  double top = 0.05;
  for (const auto& m : s.models) {
    const auto& dc = m.decision_curve;
    for (double v : dc.model) {
      if (std::isfinite(v)) top = std::max(top, v);
    }
    series.push_back({m.model, dc.thresholds, dc.model});
  }
  if (!s.models.empty()) {
    const auto& dc = s.models.front().decision_curve;
    for (double v : dc.treat_all) {
      if (std::isfinite(v)) top = std::max(top, v);
    }
    series.push_back({"treat all", dc.thresholds, dc.treat_all, true});
    series.push_back({"treat none", dc.thresholds, dc.treat_none, true});
  }
  PlotSpec spec{"Decision curve", "threshold probability", "net benefit"};
  spec.y_min = -0.05;
  spec.y_max = top * 1.1;
  return line_plot(spec, series);
}

}  // namespace

std::string p_matrix_markdown(const eval::MetricsSummary& summary, bool delong) {
  std::ostringstream out;
  out << "| |";
  for (const auto& m : summary.models) out << ' ' << m.model << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < summary.models.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& row : summary.models) {
    out << "| " << row.model << " |";
    for (const auto& col : summary.models) {
      if (row.model == col.model) {
        out << " |";
        continue;
      }
      const auto* pair = find_pair(summary, row.model, col.model);
      const double p = pair == nullptr ? NAN : (delong ? pair->delong.p : pair->mcnemar.p);
      out << ' ' << num(p, "%.3g") << " |";
    }
    out << '\n';
  }
  return out.str();
}

Report render_report(const ReportInput& input, const std::string& plot_dir) {
  const eval::MetricsSummary& s = input.summary;
  Report report;
  std::ostringstream md;
  md << "# synthgt report\n\n";
  md << "Preset: `" << input.preset << "`. Config hash: `" << s.config_hash << "`.\n\n";

  md << "## Model comparison\n\n";
  if (s.find(train::model_name(train::ModelKind::kPretrained)) == nullptr) {
    md << "> No pretrained graph-transformer predictions were found. Pipeline rows are omitted and only "
          "baseline models are reported.\n\n";
  }
  if (s.models.empty()) {
    md << "No predictions were found.\n";
    report.markdown = md.str();
    return report;
  }
  md << "Mean ± sample standard deviation over folds; pooled AUC over all out-of-fold predictions.\n\n";
  md << s.table_markdown() << '\n';

  md << "## Pairwise tests\n\n";
  md << "DeLong p-values on pooled out-of-fold scores:\n\n" << p_matrix_markdown(s, true) << '\n';
  md << "McNemar p-values at threshold " << num(s.options.threshold, "%.2f") << ":\n\n"
     << p_matrix_markdown(s, false) << '\n';

  md << "## Calibration and operating point\n\n";
  md << "| Model | Brier | ECE | Prevalence | SEN at " << num(s.options.target_specificity, "%.2f")
     << " SPEC | Test SPEC | Unreachable folds |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& m : s.models) {
    md << "| " << m.model << " | " << num(m.calibration.brier) << " | " << num(m.calibration.ece) << " | "
       << num(m.prevalence) << " | " << num(m.sens_at_spec_sensitivity) << " | "
       << num(m.sens_at_spec_specificity) << " | " << m.sens_at_spec_unreachable << " |\n";
  }
  md << '\n';

  report.plots.emplace_back("roc.svg", roc_plot(input.test));
  report.plots.emplace_back("calibration.svg", calibration_plot(s));
  report.plots.emplace_back("dca.svg", dca_plot(s));
  md << "## Plots\n\n";
  md << "![ROC](" << plot_dir << "/roc.svg)\n\n";
  md << "![Calibration](" << plot_dir << "/calibration.svg)\n\n";
  md << "![Decision curve](" << plot_dir << "/dca.svg)\n\n";

  md << "## Distribution shift\n\n";
  if (input.distshift_markdown) {
    md << *input.distshift_markdown << '\n';
  } else {
    md << "No distribution-shift results were found.\n\n";
  }

  md << "## Subgroups\n\n";
  md << "| Model | Stratifier | Group | n | AD | AUC | ACC |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& m : s.models) {
    for (const auto& g : m.subgroups) {
      md << "| " << m.model << " | " << g.stratifier << " | " << g.group << " | " << g.n << " | " << g.positives
         << " | " << (g.auc_defined ? num(g.auc) : "n/a") << " | " << num(g.confusion.accuracy) << " |\n";
    }
  }
  report.markdown = md.str();
  return report;
}

}  // namespace synthgt::cli
