// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/distshift/distshift.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "synthgt/error.hpp"
#include "synthgt/log.hpp"
#include "synthgt/random.hpp"

namespace synthgt::distshift {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_dim(const SampleMatrix& x, const SampleMatrix& y, const char* op) {
  if (x.rows == 0 || y.rows == 0) throw ContractError(std::string(op) + ": empty sample");
  if (x.cols != y.cols) {
    throw DimensionError(std::string(op) + ": dimension " + std::to_string(x.cols) + " vs " +
                         std::to_string(y.cols));
  }
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

template <typename F>
double pair_sum(const SampleMatrix& x, const SampleMatrix& y, F&& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < y.rows; ++j) row += f(sq_dist(x.row(i), y.row(j)));
    total += row;
  }
  return total;
}

// Sum over i != j of f(|x_i - x_j|^2).
template <typename F>
double offdiag_sum(const SampleMatrix& x, F&& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (i != j) row += f(sq_dist(x.row(i), x.row(j)));
    }
    total += row;
  }
  return total;
}

void moments(const SampleMatrix& s, std::vector<double>& mean, std::vector<double>& cov) {
  if (s.rows < 2) throw MetricError("frechet_distance: covariance needs at least 2 rows");
  Eigen::Map<const Matrix> m(s.values.data(), static_cast<Eigen::Index>(s.rows),
                             static_cast<Eigen::Index>(s.cols));
  const Eigen::RowVectorXd mu = m.colwise().mean();
  const Matrix centered = m.rowwise() - mu;
  const Matrix c = (centered.transpose() * centered) / static_cast<double>(s.rows - 1);
  mean.assign(mu.data(), mu.data() + mu.size());
  cov.assign(c.data(), c.data() + c.size());
}

Eigen::VectorXd clamped_eigenvalues(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw MetricError(std::string("frechet: ") + what + " eigensolver failed");
  Eigen::VectorXd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8) {
      throw MetricError(std::string("frechet: ") + what + " has eigenvalue " + std::to_string(ev[i]));
    }
    ev[i] = std::max(ev[i], 0.0);
  }
  return ev;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw MetricError("frechet: eigensolver failed");
  Eigen::VectorXd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8) throw MetricError("frechet: covariance has eigenvalue " + std::to_string(ev[i]));
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
}

std::vector<std::size_t> spaced_subset(std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx;
  if (n <= k) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  for (std::size_t i = 0; i < k; ++i) idx.push_back(i * n / k);
  return idx;
}

SampleMatrix subsample(const SampleMatrix& s, std::size_t max_rows, std::uint64_t seed,
                       std::string_view tag) {
  if (s.rows <= max_rows) return s;
  Rng rng = make_rng(seed, tag);
  std::vector<std::size_t> idx(s.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < max_rows; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (s.rows - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  std::vector<double> v;
  v.reserve(max_rows * s.cols);
  for (std::size_t i : idx) v.insert(v.end(), s.row(i).begin(), s.row(i).end());
  return SampleMatrix(max_rows, s.cols, std::move(v), s.space, s.cls);
}

std::vector<std::size_t> class_indices(const graph::Cohort& cohort, ClassTag cls) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const int y = cohort.subjects[i].label;
    if (cls == ClassTag::kPooled || (cls == ClassTag::kAd && y == 1) || (cls == ClassTag::kHc && y == 0)) {
      idx.push_back(i);
    }
  }
  return idx;
}

}  // namespace

const char* space_name(Space s) { return s == Space::kRaw ? "raw" : "embedding"; }

const char* class_name(ClassTag c) {
  switch (c) {
    case ClassTag::kAd: return "AD";
    case ClassTag::kHc: return "HC";
    case ClassTag::kPooled: return "pooled";
  }
  return "?";
}

SampleMatrix::SampleMatrix(std::size_t r, std::size_t c, std::vector<double> v, Space sp, ClassTag cl)
    : rows(r), cols(c), values(std::move(v)), space(sp), cls(cl) {
  if (values.size() != rows * cols) {
    throw DimensionError("SampleMatrix: " + std::to_string(values.size()) + " values for " +
                         std::to_string(rows) + " x " + std::to_string(cols));
  }
  for (double x : values) {
    if (!std::isfinite(x)) throw ContractError("SampleMatrix: non-finite entry");
  }
}

double median_pairwise_distance(const SampleMatrix& x, const SampleMatrix& y, std::size_t max_points) {
  require_same_dim(x, y, "median_pairwise_distance");
  std::vector<std::span<const double>> pts;
  for (std::size_t i = 0; i < x.rows; ++i) pts.push_back(x.row(i));
  for (std::size_t i = 0; i < y.rows; ++i) pts.push_back(y.row(i));
  const auto keep = spaced_subset(pts.size(), max_points);
  std::vector<double> d;
  d.reserve(keep.size() * (keep.size() - 1) / 2);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = a + 1; b < keep.size(); ++b) d.push_back(std::sqrt(sq_dist(pts[keep[a]], pts[keep[b]])));
  }
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  if (d.size() % 2 == 1) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MmdResult mmd_rbf(const SampleMatrix& x, const SampleMatrix& y, std::optional<double> bandwidth) {
  require_same_dim(x, y, "mmd_rbf");
  MmdResult r;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw ContractError("mmd_rbf: bandwidth must be > 0");
    r.bandwidth = *bandwidth;
  } else {
    r.bandwidth = median_pairwise_distance(x, y);
    if (!(r.bandwidth > 0.0)) {
      log::warn("mmd_rbf: median pairwise distance is 0, falling back to bandwidth 1.0");
      r.bandwidth = 1.0;
      r.bandwidth_fallback = true;
    }
  }
  const double gamma = 1.0 / (2.0 * r.bandwidth * r.bandwidth);
  auto k = [gamma](double d2) { return std::exp(-gamma * d2); };
  const double m = static_cast<double>(x.rows);
  const double n = static_cast<double>(y.rows);
  const double kxx_off = offdiag_sum(x, k);
  const double kyy_off = offdiag_sum(y, k);
  const double kxy = pair_sum(x, y, k);
  // k(a, a) = 1 on the diagonal.
  r.mmd2_biased = (kxx_off + m) / (m * m) + (kyy_off + n) / (n * n) - 2.0 * kxy / (m * n);
  r.mmd2_unbiased = (x.rows < 2 || y.rows < 2)
                        ? std::numeric_limits<double>::quiet_NaN()
                        : kxx_off / (m * (m - 1.0)) + kyy_off / (n * (n - 1.0)) - 2.0 * kxy / (m * n);
  return r;
}

double frechet_from_moments(std::span<const double> mean_x, std::span<const double> cov_x,
                            std::span<const double> mean_y, std::span<const double> cov_y) {
  const std::size_t d = mean_x.size();
  if (mean_y.size() != d || cov_x.size() != d * d || cov_y.size() != d * d) {
    throw DimensionError("frechet_from_moments: inconsistent moment shapes");
  }
  for (double v : cov_x) if (!std::isfinite(v)) throw MetricError("frechet: non-finite covariance");
  for (double v : cov_y) if (!std::isfinite(v)) throw MetricError("frechet: non-finite covariance");
  const auto di = static_cast<Eigen::Index>(d);
  const Eigen::MatrixXd sx = Eigen::Map<const Matrix>(cov_x.data(), di, di);
  const Eigen::MatrixXd sy = Eigen::Map<const Matrix>(cov_y.data(), di, di);
  const Eigen::MatrixXd sx_half = psd_sqrt(0.5 * (sx + sx.transpose()));
  Eigen::MatrixXd inner = sx_half * sy * sx_half;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::VectorXd ev = clamped_eigenvalues(inner, "cross term");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (mean_x[i] - mean_y[i]) * (mean_x[i] - mean_y[i]);
  const double trace_sqrt = ev.cwiseSqrt().sum();
  const double d2 = mean_term + sx.trace() + sy.trace() - 2.0 * trace_sqrt;
  return std::max(d2, 0.0);
}

double frechet_distance(const SampleMatrix& x, const SampleMatrix& y) {
  require_same_dim(x, y, "frechet_distance");
  std::vector<double> mx, cx, my, cy;
  moments(x, mx, cx);
  moments(y, my, cy);
  return frechet_from_moments(mx, cx, my, cy);
}

double energy_distance(const SampleMatrix& x, const SampleMatrix& y) {
  require_same_dim(x, y, "energy_distance");
  auto dist = [](double d2) { return std::sqrt(d2); };
  const double m = static_cast<double>(x.rows);
  const double n = static_cast<double>(y.rows);
  const double exy = pair_sum(x, y, dist) / (m * n);
  const double exx = offdiag_sum(x, dist) / (m * m);
  const double eyy = offdiag_sum(y, dist) / (n * n);
  return 2.0 * exy - exx - eyy;
}

double ks_pvalue(double d, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) return 1.0;
  const double en = std::sqrt(static_cast<double>(n) * static_cast<double>(m) /
                              static_cast<double>(n + m));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ContractError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_pvalue(d, a.size(), b.size())};
}

std::vector<KsResult> ks_per_feature(const SampleMatrix& x, const SampleMatrix& y) {
  require_same_dim(x, y, "ks_per_feature");
  std::vector<KsResult> out;
  out.reserve(x.cols);
  std::vector<double> a(x.rows), b(y.rows);
  for (std::size_t f = 0; f < x.cols; ++f) {
    for (std::size_t i = 0; i < x.rows; ++i) a[i] = x.values[i * x.cols + f];
    for (std::size_t i = 0; i < y.rows; ++i) b[i] = y.values[i * y.cols + f];
    out.push_back(ks_two_sample(a, b));
  }
  return out;
}

SampleMatrix raw_samples(const graph::Cohort& cohort, ClassTag cls) {
  const auto idx = class_indices(cohort, cls);
  std::vector<double> v;
  std::size_t d = 0;
  for (std::size_t i : idx) {
    const auto row = graph::flatten(cohort.subjects[i]);
    d = row.size();
    v.insert(v.end(), row.begin(), row.end());
  }
  return SampleMatrix(idx.size(), d, std::move(v), Space::kRaw, cls);
}

SampleMatrix embedding_samples(const graph::Cohort& cohort, ClassTag cls,
                               std::span<const gtx::EncoderStack> encoders) {
  const auto idx = class_indices(cohort, cls);
  if (idx.empty()) return SampleMatrix(0, 0, {}, Space::kEmbedding, cls);
  const ad::Tensor z = gtx::embed_fused(encoders, cohort, idx);
  return SampleMatrix(z.rows(), z.cols(), std::vector<double>(z.data().begin(), z.data().end()),
                      Space::kEmbedding, cls);
}

ShiftReport shift_report(const graph::Cohort& real, const graph::Cohort& synth,
                         std::span<const gtx::EncoderStack> encoders, const ShiftOptions& options) {
  ShiftReport report;
  struct View {
    std::string name;
    std::span<const gtx::EncoderStack> encoders;
  };
  std::vector<View> views{{"raw", {}}};
  if (!encoders.empty()) {
    if (options.per_modality) {
      for (std::size_t e = 0; e < encoders.size(); ++e) {
        views.push_back({graph::modality_name(encoders[e].modality()), encoders.subspan(e, 1)});
      }
    } else {
      views.push_back({"fused", encoders});
    }
  }
  for (const View& view : views) {
    const Space space = view.encoders.empty() ? Space::kRaw : Space::kEmbedding;
    for (ClassTag cls : {ClassTag::kAd, ClassTag::kHc, ClassTag::kPooled}) {
      const SampleMatrix r_full = space == Space::kRaw ? raw_samples(real, cls)
                                                       : embedding_samples(real, cls, view.encoders);
      const SampleMatrix s_full = space == Space::kRaw ? raw_samples(synth, cls)
                                                       : embedding_samples(synth, cls, view.encoders);
      if (r_full.rows == 0 || s_full.rows == 0) continue;
      const SampleMatrix r = subsample(r_full, options.max_samples, options.seed, "distshift.real");
      const SampleMatrix s = subsample(s_full, options.max_samples, options.seed, "distshift.synth");
      ShiftRow row;
      row.space = space;
      row.cls = cls;
      row.view = view.name;
      row.n_real = r.rows;
      row.n_synth = s.rows;
      row.mmd = mmd_rbf(r, s, options.bandwidth);
      row.frechet = frechet_distance(r, s);
      row.energy = energy_distance(r, s);
      const auto ks = ks_per_feature(r, s);
      std::size_t rejected = 0;
      for (const KsResult& k : ks) {
        row.ks_mean_statistic += k.statistic;
        row.ks_max_statistic = std::max(row.ks_max_statistic, k.statistic);
        if (k.p < 0.05) ++rejected;
      }
      row.ks_mean_statistic /= static_cast<double>(ks.size());
      row.ks_reject_fraction = static_cast<double>(rejected) / static_cast<double>(ks.size());
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string ShiftReport::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ShiftRow& r : rows) {
    nlohmann::ordered_json j;
    j["space"] = space_name(r.space);
    j["view"] = r.view;
    j["class"] = class_name(r.cls);
    j["n_real"] = r.n_real;
    j["n_synth"] = r.n_synth;
    j["mmd2_biased"] = r.mmd.mmd2_biased;
    j["mmd2_unbiased"] = std::isfinite(r.mmd.mmd2_unbiased) ? nlohmann::ordered_json(r.mmd.mmd2_unbiased)
                                                            : nlohmann::ordered_json(nullptr);
    j["bandwidth"] = r.mmd.bandwidth;
    j["bandwidth_fallback"] = r.mmd.bandwidth_fallback;
    j["frechet"] = r.frechet;
    j["energy"] = r.energy;
    j["ks_mean_statistic"] = r.ks_mean_statistic;
    j["ks_max_statistic"] = r.ks_max_statistic;
    j["ks_reject_fraction"] = r.ks_reject_fraction;
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

std::string ShiftReport::to_markdown() const {
  std::string md =
      "| space | view | class | n real | n synth | MMD² (biased) | MMD² (unbiased) | bandwidth | Fréchet | energy | "
      "KS mean D | KS max D | KS p<0.05 |\n"
      "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  char buf[512];
  for (const ShiftRow& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %s | %zu | %zu | %.5g | %.5g | %.4g | %.5g | %.5g | %.4f | %.4f | %.3f |\n",
                  space_name(r.space), r.view.c_str(), class_name(r.cls), r.n_real, r.n_synth, r.mmd.mmd2_biased,
                  r.mmd.mmd2_unbiased, r.mmd.bandwidth, r.frechet, r.energy, r.ks_mean_statistic,
                  r.ks_max_statistic, r.ks_reject_fraction);
    md += buf;
  }
  return md;
}

}  // namespace synthgt::distshift
