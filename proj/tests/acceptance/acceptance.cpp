// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "support/finite_difference.hpp"
#include "support/random_tensor.hpp"
#include "support/toy_ddpm.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/ddpm/ddpm.hpp"
#include "synthgt/distshift/distshift.hpp"
#include "synthgt/eval/metrics.hpp"
#include "synthgt/eval/summary.hpp"
#include "synthgt/graph/topology.hpp"
#include "synthgt/gtx/encoder.hpp"
#include "synthgt/io/text.hpp"
#include "synthgt/log.hpp"

namespace {

using namespace synthgt;
namespace fs = std::filesystem;
using Json = nlohmann::json;

// Tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kOracleTol = 1e-9;
constexpr double kToyMeanTol = 0.3;
constexpr double kToyBudget = 120.0;
constexpr double kAlphaBarMax = 1e-3;
constexpr double kDeskRunBudget = 15 * 60.0;
constexpr double kDirectionalBudget = 45 * 60.0;
constexpr int kDirectionalSeeds = 5;
constexpr int kEarlyFusionWinsNeeded = 4;
constexpr double kNullAucLo = 0.45, kNullAucHi = 0.55;
constexpr double kNullEceMax = 0.02;
constexpr double kNullDelongMin = 0.05;
constexpr double kNullBudget = 10 * 60.0;
constexpr std::size_t kNullSubjects = 1000;
constexpr double kTargetSpec = 0.90, kSpecTol = 0.05;
constexpr std::size_t kUtilitySubjects = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

double grad_error(const std::function<ad::Tensor()>& f, const std::vector<ad::Tensor>& params,
                  std::string& worst) {
  for (ad::Tensor p : params) p.clear_grad();
  {
    ad::Tape tape;
    ad::Tape::Scope scope(tape);
    tape.backward(f());
  }
  const auto check = testing::check_gradients([&] { return f().item(); }, params);
  if (!check.worst.empty()) worst = check.worst;
  return check.max_rel_error;
}

Outcome gradients() {
  using namespace ad;
  using testing::random_tensor;
  Rng rng(2024);
  std::map<std::string, double> errors;
  std::string worst;
  auto run = [&](const std::string& name, const std::function<Tensor()>& f, const std::vector<Tensor>& p) {
    errors[name] = std::max(errors[name], grad_error(f, p, worst));
  };

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), w = random_tensor({3, 2}, rng, false);
    run("matmul", [&] { return sum(mul(matmul(a, b), w)); }, {a, b});
  }
  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng), c = random_tensor({3, 4}, rng);
    run("add/sub/mul/scale", [&] { return sum(mul(scale(sub(add(a, b), c), 1.7), add(a, b))); }, {a, b, c});
  }
  {
    Tensor a = random_tensor({5, 3}, rng), p = random_tensor({5, 3}, rng, true, 0.5, 2.0);
    Tensor w = random_tensor({5, 3}, rng, false);
    run("relu/log", [&] { return sum(mul(add(relu(a), ad::log(p)), w)); }, {a, p});
  }
  {
    Tensor a = random_tensor({4, 5}, rng), w = random_tensor({4, 5}, rng, false);
    run("softmax_rows/mean", [&] { return mean(mul(softmax_rows(a), w)); }, {a});
  }
  {
    Tensor s = random_tensor({7, 3}, rng), w = random_tensor({7, 3}, rng, false);
    const std::vector<std::size_t> seg{0, 2, 0, 1, 2, 2, 0};
    run("segment_softmax", [&] { return sum(mul(segment_softmax(s, seg, 3), w)); }, {s});
  }
  {
    Tensor x = random_tensor({6, 3}, rng), w = random_tensor({2, 3}, rng, false);
    const std::vector<std::size_t> seg{0, 1, 1, 0, 1, 0};
    run("segment_max", [&] { return sum(mul(segment_max(x, seg, 2), w)); }, {x});
    run("segment_mean", [&] { return sum(mul(segment_mean(x, seg, 2), w)); }, {x});
    run("segment_sum", [&] { return sum(mul(segment_sum(x, seg, 2), w)); }, {x});
  }
  {
    Tensor a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng), w = random_tensor({4, 6}, rng, false);
    const std::vector<std::size_t> idx{2, 0, 2, 1};
    run("concat/gather", [&] { return sum(mul(gather_rows(concat_last({a, b}), idx), w)); }, {a, b});
    Tensor u = random_tensor({3}, rng), v = random_tensor({2}, rng), w5 = random_tensor({5}, rng, false);
    run("reshape", [&] { return sum(mul(reshape(concat_last({u, v}), {5}), w5)); }, {u, v});
  }
  {
    Tensor x = random_tensor({4, 4}, rng), w = random_tensor({4, 4}, rng, false);
    run("dropout",
        [&] {
          Rng mask(5);
          return sum(mul(dropout(x, 0.3, mask, true), w));
        },
        {x});
  }
  {
    Tensor q = random_tensor({5, 6}, rng), k = random_tensor({5, 6}, rng), v = random_tensor({5, 6}, rng);
    Tensor w = random_tensor({5, 6}, rng, false);
    run("head_dot/head_scale", [&] { return sum(mul(head_scale(head_dot(q, k, 2), v, 2), w)); }, {q, k, v});
  }
  {
    NeighborLists nbrs;
    nbrs.offsets = {0, 2, 5, 7, 8};
    nbrs.indices = {0, 1, 0, 1, 2, 1, 2, 3};
    Tensor q = random_tensor({8, 6}, rng), k = random_tensor({8, 6}, rng), v = random_tensor({8, 6}, rng);
    Tensor w = random_tensor({8, 6}, rng, false);
    run("neighborhood_attention", [&] { return sum(mul(neighborhood_attention(q, k, v, nbrs, 3), w)); }, {q, k, v});
  }
  {
    Tensor logits = random_tensor({6, 2}, rng);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0};
    run("softmax_cross_entropy", [&] { return softmax_cross_entropy(logits, labels); }, {logits});
    Tensor p = random_tensor({3, 3}, rng), t = random_tensor({3, 3}, rng);
    run("mse", [&] { return mse(p, t); }, {p, t});
  }
  {
    gtx::EncoderConfig small;
    small.layers = {{2, 3, 5}, {2, 3, 5}, {2, 2, 4}};
    const gtx::EncoderStack mri(graph::Modality::kMri, 2, small, rng);
    const gtx::EncoderStack uds(graph::Modality::kUds, 1, small, rng);
    const gtx::FusionClassifier clf({4, 4}, {6, 5}, 2, rng);
    const graph::Topology tm = graph::build_lattice({2, 3, 0});
    const graph::Topology tu = graph::build_uds_topology(std::vector<int>{0, 0, 1, 1, 1});
    const Tensor xm = random_tensor({2 * 6, 2}, rng, false);
    const Tensor xu = random_tensor({2 * 5, 1}, rng, false);
    const std::vector<int> labels{1, 0};
    ParameterList params;
    params.extend(mri.parameters(), "mri.");
    params.extend(uds.parameters(), "uds.");
    params.extend(clf.parameters(), "clf.");
    run("graph transformer + fusion head",
        [&] {
          const std::vector<Tensor> emb{mri.encode(xm, tm.neighbor_lists(), false, nullptr),
                                        uds.encode(xu, tu.neighbor_lists(), false, nullptr)};
          return softmax_cross_entropy(clf.logits(emb), labels);
        },
        params.tensors());
  }
  {
    ddpm::DenoiserConfig cfg;
    cfg.data_dim = 3;
    cfg.time_dim = 4;
    cfg.label_dim = 2;
    cfg.hidden = {5};
    const ddpm::Denoiser model(cfg, rng);
    const ddpm::NoiseSchedule s = ddpm::NoiseSchedule::linear(20);
    ddpm::LabeledVectors b;
    b.dim = 3;
    for (int i = 0; i < 4; ++i) {
      b.labels.push_back(i % 2);
      for (int d = 0; d < 3; ++d) b.values.push_back(standard_normal(rng));
    }
    const std::vector<std::size_t> t{1, 7, 13, 20};
    std::vector<double> eps(b.values.size());
    for (double& e : eps) e = standard_normal(rng);
    const ddpm::NoisePredictor p = ddpm::predictor(model, s);
    run("ddpm loss", [&] { return ddpm::ddpm_loss(b, t, eps, p, s); }, model.parameters().tensors());
  }

  double max_err = 0.0;
  std::string worst_name;
  for (const auto& [name, e] : errors) {
    if (e > max_err) {
      max_err = e;
      worst_name = name;
    }
  }
  return {max_err < kGradTol, std::to_string(errors.size()) + " cases, max rel error " + fmt("%.2e", max_err) +
                                  " (" + worst_name + ") < " + fmt("%.0e", kGradTol)};
}

// ---------------------------------------------------------------- 2

double brute_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : points) {
    double fa = 0.0, fb = 0.0;
    for (double v : a) fa += v <= t ? 1.0 : 0.0;
    for (double v : b) fb += v <= t ? 1.0 : 0.0;
    d = std::max(d, std::abs(fa / a.size() - fb / b.size()));
  }
  return d;
}

double brute_energy(const std::vector<double>& x, const std::vector<double>& y) {
  auto mean_abs = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (double u : a)
      for (double v : b) s += std::abs(u - v);
    return s / static_cast<double>(a.size() * b.size());
  };
  return 2.0 * mean_abs(x, y) - mean_abs(x, x) - mean_abs(y, y);
}

double brute_mmd(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
  auto k = [&](double a, double b) { return std::exp(-(a - b) * (a - b) / (2.0 * sigma * sigma)); };
  auto mean_k = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (double u : a)
      for (double v : b) s += k(u, v);
    return s / static_cast<double>(a.size() * b.size());
  };
  return mean_k(x, x) + mean_k(y, y) - 2.0 * mean_k(x, y);
}

double binomial_two_sided(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  double tail = 0.0;
  for (std::size_t i = 0; i <= std::min(b, c); ++i) {
    double comb = 1.0;
    for (std::size_t j = 0; j < i; ++j) comb = comb * static_cast<double>(n - j) / static_cast<double>(j + 1);
    tail += comb * std::pow(0.5, static_cast<double>(n));
  }
  return std::min(1.0, 2.0 * tail);
}

Outcome metric_oracles() {
  Rng rng(7);
  double worst = 0.0;
  std::string where;
  auto track = [&](const std::string& name, double got, double want) {
    const double e = std::abs(got - want);
    if (e > worst || !std::isfinite(got)) {
      worst = std::isfinite(got) ? e : INFINITY;
      where = name;
    }
  };

  track("auc hand", eval::roc_auc(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8}), 0.75);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i == 0 ? 1 : (i == 1 ? 0 : rng() % 2));
      s[i] = std::round(uniform01(rng) * 25.0) / 25.0;
    }
    track("auc brute force", eval::roc_auc(y, s), brute_auc(y, s));
  }

  track("ks hand", distshift::ks_two_sample({1, 2}, {1.5}).statistic, 0.5);
  track("ks disjoint", distshift::ks_two_sample({0, 0, 0}, {1, 1, 1}).statistic, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + rng() % 30), b(1 + rng() % 30);
    for (double& v : a) v = std::round(standard_normal(rng) * 4.0) / 4.0;
    for (double& v : b) v = std::round(standard_normal(rng) * 4.0) / 4.0 + 0.3;
    track("ks brute force", distshift::ks_two_sample(a, b).statistic, brute_ks(a, b));
  }

  auto matrix = [](const std::vector<double>& v) { return distshift::SampleMatrix(v.size(), 1, v); };
  track("energy hand", distshift::energy_distance(matrix({0}), matrix({1})), 2.0);
  track("energy pairs", distshift::energy_distance(matrix({0, 2}), matrix({1})), brute_energy({0, 2}, {1}));
  track("mmd hand", distshift::mmd_rbf(matrix({0}), matrix({1}), 1.0).mmd2_biased, 2.0 - 2.0 * std::exp(-0.5));
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(2 + rng() % 20), y(2 + rng() % 20);
    for (double& v : x) v = standard_normal(rng);
    for (double& v : y) v = standard_normal(rng) + 0.5;
    track("energy brute force", distshift::energy_distance(matrix(x), matrix(y)), brute_energy(x, y));
    const double sigma = 0.5 + uniform01(rng);
    track("mmd kernel sums", distshift::mmd_rbf(matrix(x), matrix(y), sigma).mmd2_biased, brute_mmd(x, y, sigma));
  }

  track("ece hand",
        eval::calibration(std::vector<int>{0, 1, 1, 1}, std::vector<double>{0.2, 0.2, 0.9, 0.9}, 2).ece, 0.2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + rng() % 100, bins = 1 + rng() % 12;
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = uniform01(rng);
      y[i] = uniform01(rng) < p[i] ? 1 : 0;
    }
    double ece = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      double count = 0.0, sp = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bin = std::min(bins - 1, static_cast<std::size_t>(p[i] * static_cast<double>(bins)));
        if (bin != b) continue;
        count += 1.0;
        sp += p[i];
        sy += y[i];
      }
      if (count > 0) ece += count / static_cast<double>(n) * std::abs(sp / count - sy / count);
    }
    track("ece brute force", eval::calibration(y, p, bins).ece, ece);
  }

  {
    const std::vector<int> y{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    const std::vector<double> s{0.9, 0.6, 0.2, 0.8, 0.3, 0.1, 0.1, 0.2, 0.05, 0.4};
    // pt = 0.25: TP = 2, FP = 3 -> 2/10 - 3/10 * (0.25 / 0.75)
    track("net benefit hand", eval::net_benefit(y, s, 0.25), 0.2 - 0.3 / 3.0);
    track("treat-all at 0", eval::net_benefit(y, std::vector<double>(10, 1.0), 0.0), 0.3);
  }

  auto mcnemar = [](std::size_t b, std::size_t c, std::size_t both) {
    std::vector<bool> a, bb;
    for (std::size_t i = 0; i < b; ++i) a.push_back(true), bb.push_back(false);
    for (std::size_t i = 0; i < c; ++i) a.push_back(false), bb.push_back(true);
    for (std::size_t i = 0; i < both; ++i) a.push_back(true), bb.push_back(true);
    return eval::mcnemar_test(a, bb);
  };
  track("mcnemar hand", mcnemar(10, 0, 3).p, 2.0 * std::pow(0.5, 10));
  for (std::size_t b = 0; b <= 12; ++b) {
    for (std::size_t c = 0; c <= 12; ++c) {
      const eval::McnemarResult r = mcnemar(b, c, 2);
      if (r.exact) track("mcnemar exact", r.p, binomial_two_sided(b, c));
    }
  }
  return {worst < kOracleTol, "max abs deviation " + fmt("%.2e", worst) + " (" + where + ") < " + fmt("%.0e", kOracleTol)};
}

// ---------------------------------------------------------------- 3

Outcome distance_identities() {
  const std::vector<double> mean{0.3, -1.0}, cov{2.0, 0.4, 0.4, 1.0};
  const double same = distshift::frechet_from_moments(mean, cov, mean, cov);
  const double closed = distshift::frechet_from_moments(std::vector<double>{0.0}, std::vector<double>{1.0},
                                                        std::vector<double>{1.0}, std::vector<double>{4.0});
  const double mmd = distshift::mmd_rbf(distshift::SampleMatrix(1, 1, {0.0}), distshift::SampleMatrix(1, 1, {1.0}),
                                        1.0)
                         .mmd2_biased;
  Rng rng(3);
  std::vector<double> x(60);
  for (double& v : x) v = standard_normal(rng);
  const distshift::SampleMatrix sx(30, 2, x);
  const double self = distshift::frechet_distance(sx, sx);
  const double e1 = std::abs(same), e2 = std::abs(closed - 2.0), e3 = std::abs(mmd - (2.0 - 2.0 * std::exp(-0.5)));
  const bool pass = e1 < kOracleTol && e2 < kOracleTol && e3 < kOracleTol && std::abs(self) < 1e-8;
  return {pass, "identical moments " + fmt("%.1e", same) + ", 1-D closed form " + fmt("%.12f", closed) +
                    " (want 2), MMD hand case " + fmt("%.12f", mmd) + " (want 0.786938680575), self " +
                    fmt("%.1e", self)};
}

// ---------------------------------------------------------------- 4

distshift::SampleMatrix toy_class(const ddpm::LabeledVectors& v, int label) {
  std::vector<double> rows;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.labels[i] != label) continue;
    rows.insert(rows.end(), v.row(i).begin(), v.row(i).end());
    ++n;
  }
  return distshift::SampleMatrix(n, v.dim, rows);
}

Outcome ddpm_toy() {
  const auto t0 = std::chrono::steady_clock::now();
  int passed = 0;
  std::string detail;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const ddpm::LabeledVectors data = testing::toy_gaussians(1000, seed);
    const ddpm::NoiseSchedule schedule = testing::toy_schedule();
    const ddpm::DdpmTrainResult r =
        ddpm::train_ddpm(data, schedule, testing::toy_denoiser_config(), testing::toy_train_config(seed));
    const ddpm::NoisePredictor p = ddpm::predictor(r.denoiser, schedule);
    const distshift::SampleMatrix real_ad = toy_class(data, 1), real_hc = toy_class(data, 0);
    const double between = distshift::mmd_rbf(real_ad, real_hc).mmd2_biased;
    bool ok = true;
    double worst_mean = 0.0, worst_mmd = 0.0;
    for (int label = 0; label < 2; ++label) {
      const std::vector<double> x = ddpm::sample_vectors(p, schedule, 2, label, 1000, seed + 100);
      for (std::size_t d = 0; d < 2; ++d) {
        double m = 0.0;
        for (std::size_t i = 0; i < 1000; ++i) m += x[2 * i + d] / 1000.0;
        worst_mean = std::max(worst_mean, std::abs(m - testing::kToyMeans[label][d]));
      }
      const double within =
          distshift::mmd_rbf(distshift::SampleMatrix(1000, 2, x), label == 1 ? real_ad : real_hc).mmd2_biased;
      worst_mmd = std::max(worst_mmd, within);
      ok = ok && within < between;
    }
    ok = ok && worst_mean < kToyMeanTol;
    passed += ok ? 1 : 0;
    detail += "seed " + std::to_string(seed) + ": mean err " + fmt("%.3f", worst_mean) + ", MMD " +
              fmt("%.4f", worst_mmd) + " vs " + fmt("%.4f", between) + "; ";
  }
  const double elapsed = seconds_since(t0);
  return {passed == 3 && elapsed <= kToyBudget,
          std::to_string(passed) + "/3 seeds, " + detail + fmt("%.0f s", elapsed) + " <= " + fmt("%.0f s", kToyBudget)};
}

// ---------------------------------------------------------------- 5

Outcome schedule_property() {
  const ddpm::NoiseSchedule s = ddpm::NoiseSchedule::linear();
  const double ab = s.alpha_bar(s.steps);
  return {s.steps == 1000 && ab < kAlphaBarMax, "T = " + std::to_string(s.steps) + ", alpha_bar_T = " +
                                                    fmt("%.3e", ab) + " < " + fmt("%.0e", kAlphaBarMax)};
}

// ---------------------------------------------------------------- pipeline runs

struct RunOutcome {
  eval::MetricsSummary summary;
  std::vector<eval::PredictionSet> test;
  Json folds;
  double seconds = 0.0;
};

RunOutcome run_pipeline(const cli::RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  cli::cmd_run(config);
  RunOutcome out;
  out.seconds = seconds_since(t0);
  const cli::Layout layout{config.output_dir};
  const cli::PredictionFiles files = cli::read_prediction_dir(layout.predictions());
  out.test = files.test;
  out.summary = eval::summarize(files.test, files.validation, config.eval.summary, config.hash());
  out.folds = Json::parse(io::read_file(layout.folds()));
  return out;
}

cli::RunConfig desk_config(const fs::path& work, const std::string& name, std::uint64_t seed) {
  cli::RunConfig c = cli::preset("desk");
  c.seed = seed;
  c.output_dir = (work / name).string();
  return c;
}

double pooled_auc(const RunOutcome& r, train::ModelKind kind) {
  const eval::ModelSummary* m = r.summary.find(train::model_name(kind));
  return m == nullptr ? NAN : m->pooled_auc;
}

std::map<std::uint64_t, RunOutcome> g_desk_runs;

const RunOutcome& desk_run(const fs::path& work, std::uint64_t seed) {
  auto it = g_desk_runs.find(seed);
  if (it == g_desk_runs.end()) {
    it = g_desk_runs.emplace(seed, run_pipeline(desk_config(work, "desk_seed" + std::to_string(seed), seed))).first;
  }
  return it->second;
}

// ---------------------------------------------------------------- 6

Outcome pipeline_integrity(const fs::path& work) {
  const RunOutcome& r = desk_run(work, 1);
  bool audits = true;
  std::size_t folds = 0;
  std::set<std::string> seen_test;
  bool partition = true;
  for (const Json& f : r.folds["folds"]) {
    ++folds;
    for (const auto& [key, value] : f["audit"].items()) audits = audits && value.get<bool>();
    audits = audits && f["encoder_hash_before"] == f["encoder_hash_after"];
  }
  for (const eval::PredictionSet& set : r.test) {
    std::set<std::string> ids;
    for (const eval::Prediction& p : set.items) ids.insert(p.id);
    partition = partition && ids.size() == set.items.size() && ids.size() == 200;
  }
  const bool pass = audits && partition && folds == 5 && r.seconds <= kDeskRunBudget;
  return {pass, std::to_string(folds) + " folds, audits " + (audits ? "clean" : "FAILED") + ", partition " +
                    (partition ? "exact" : "BROKEN") + ", run " + fmt("%.0f s", r.seconds) + " <= " +
                    fmt("%.0f s", kDeskRunBudget)};
}

// ---------------------------------------------------------------- 7

Outcome directional(const fs::path& work) {
  double total = 0.0, sum_pre = 0.0, sum_rand = 0.0;
  int wins = 0;
  std::string detail;
  for (int seed = 1; seed <= kDirectionalSeeds; ++seed) {
    const RunOutcome& r = desk_run(work, static_cast<std::uint64_t>(seed));
    total += r.seconds;
    const double pre = pooled_auc(r, train::ModelKind::kPretrained);
    const double rnd = pooled_auc(r, train::ModelKind::kRandomFrozen);
    const double early = pooled_auc(r, train::ModelKind::kEarlyFusion);
    sum_pre += pre;
    sum_rand += rnd;
    wins += pre >= early ? 1 : 0;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.3f", pre) + "/" + fmt("%.3f", rnd) + "/" +
              fmt("%.3f", early) + "; ";
  }
  const double mean_pre = sum_pre / kDirectionalSeeds, mean_rand = sum_rand / kDirectionalSeeds;
  const bool pass = mean_pre >= mean_rand && wins >= kEarlyFusionWinsNeeded && total <= kDirectionalBudget;
  return {pass, "pooled AUC pretrained/random/early: " + detail + "mean " + fmt("%.3f", mean_pre) + " vs " +
                    fmt("%.3f", mean_rand) + ", beats early fusion in " + std::to_string(wins) + "/" +
                    std::to_string(kDirectionalSeeds) + ", total " + fmt("%.0f s", total) + " <= " +
                    fmt("%.0f s", kDirectionalBudget)};
}

// ---------------------------------------------------------------- 8

cli::RunConfig large_config(const fs::path& work, const std::string& name, double effect, std::size_t n) {
  cli::RunConfig c = desk_config(work, name, 11);
  c.sim.effect_size = effect;
  c.sim.n_ad = n * 63 / 200;
  c.sim.n_hc = n - c.sim.n_ad;
  c.pipeline.ddpm.epochs = 50;
  c.pipeline.ddpm.synthetic_per_class = 250;
  c.pipeline.train.pretrain.epochs = 5;
  return c;
}

Outcome null_case(const fs::path& work) {
  const RunOutcome r = run_pipeline(large_config(work, "null", 0.0, kNullSubjects));
  bool auc_ok = true;
  std::string aucs;
  for (const eval::ModelSummary& m : r.summary.models) {
    auc_ok = auc_ok && m.pooled_auc >= kNullAucLo && m.pooled_auc <= kNullAucHi;
    aucs += m.model + " " + fmt("%.3f", m.pooled_auc) + ", ";
  }
  double min_p = 1.0;
  for (const eval::PairwiseComparison& p : r.summary.pairwise) min_p = std::min(min_p, p.delong.p);

  // Constant predictor: each test subject gets the AD rate of its training folds.
  const eval::PredictionSet& any = r.test.front();
  std::map<int, std::pair<double, double>> by_fold;
  for (const eval::Prediction& p : any.items) {
    by_fold[p.fold].first += p.label;
    by_fold[p.fold].second += 1.0;
  }
  double pos = 0.0, all = 0.0;
  for (const auto& [f, c] : by_fold) pos += c.first, all += c.second;
  std::vector<int> y;
  std::vector<double> prob;
  for (const eval::Prediction& p : any.items) {
    const auto& c = by_fold[p.fold];
    y.push_back(p.label);
    prob.push_back((pos - c.first) / (all - c.second));
  }
  const double ece = eval::calibration(y, prob, 10).ece;
  const bool pass = auc_ok && ece < kNullEceMax && min_p > kNullDelongMin && r.seconds <= kNullBudget;
  return {pass, "n = " + std::to_string(kNullSubjects) + ", pooled AUC " + aucs + "constant-prevalence ECE " +
                    fmt("%.4f", ece) + ", min DeLong p " + fmt("%.3f", min_p) + ", " + fmt("%.0f s", r.seconds) +
                    " <= " + fmt("%.0f s", kNullBudget)};
}

// ---------------------------------------------------------------- 9

Outcome clinical_utility(const fs::path& work) {
  const RunOutcome r = run_pipeline(large_config(work, "utility", 2.0, kUtilitySubjects));
  const eval::ModelSummary* m = r.summary.find(train::model_name(train::ModelKind::kPretrained));
  if (m == nullptr) return {false, "no pretrained model in the run"};
  const double spec = m->sens_at_spec_specificity;
  const auto& dc = m->decision_curve;
  bool dominates = true;
  double worst_gap = INFINITY;
  for (std::size_t i = 0; i < dc.thresholds.size(); ++i) {
    if (dc.thresholds[i] + 1e-12 < m->prevalence) continue;
    const double gap = dc.model[i] - dc.treat_all[i];
    worst_gap = std::min(worst_gap, gap);
    dominates = dominates && gap >= 0.0;
  }
  const bool pass = std::abs(spec - kTargetSpec) <= kSpecTol && dominates;
  return {pass, "pretrained model, pooled AUC " + fmt("%.3f", m->pooled_auc) + ": test specificity " +
                    fmt("%.3f", spec) + " (target " + fmt("%.2f", kTargetSpec) + " +- " + fmt("%.2f", kSpecTol) +
                    "), min NB(model) - NB(treat all) for pt >= prevalence " + fmt("%.2f", m->prevalence) + ": " +
                    fmt("%.4f", worst_gap)};
}

// ---------------------------------------------------------------- 10

Outcome reproducibility(const fs::path& work) {
  std::string first, second;
  for (const char* name : {"repro_a", "repro_b"}) {
    cli::RunConfig c = desk_config(work, name, 5);
    c.sim.n_ad = 30;
    c.sim.n_hc = 50;
    c.pipeline.ddpm.epochs = 20;
    c.pipeline.ddpm.synthetic_per_class = 60;
    c.pipeline.train.pretrain.epochs = 2;
    c.pipeline.train.downstream.max_epochs = 20;
    cli::cmd_run(c);
    (first.empty() ? first : second) = io::read_file(cli::Layout{c.output_dir}.metrics());
  }
  return {!first.empty() && first == second,
          "metrics JSON " + std::to_string(first.size()) + " bytes, " + (first == second ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthgt acceptance checks"};
  std::string work = (fs::temp_directory_path() / "synthgt_acceptance").string();
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  log::set_level(log::Level::kWarn);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"metric oracle equivalence", metric_oracles},
      {"analytic distance identities", distance_identities},
      {"DDPM toy recovery", ddpm_toy},
      {"schedule property", schedule_property},
      {"pipeline integrity (desk preset)", [&] { return pipeline_integrity(work); }},
      {"directional claim (n = 200, delta = 1)", [&] { return directional(work); }},
      {"null-case sanity (delta = 0)", [&] { return null_case(work); }},
      {"clinical-utility layer (delta = 2)", [&] { return clinical_utility(work); }},
      {"reproducibility", [&] { return reproducibility(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
