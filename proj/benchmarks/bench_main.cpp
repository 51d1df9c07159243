// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "synthgt/autodiff/ops.hpp"
#include "synthgt/ddpm/ddpm.hpp"
#include "synthgt/distshift/distshift.hpp"
#include "synthgt/eval/metrics.hpp"
#include "synthgt/gtx/encoder.hpp"
#include "synthgt/random.hpp"
#include "synthgt/simulate/preprocess.hpp"
#include "synthgt/simulate/simulator.hpp"

namespace {

using namespace synthgt;

ad::Tensor random_tensor(ad::Shape shape, Rng& rng, bool grad = false) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = standard_normal(rng);
  return ad::Tensor::from(shape, std::move(v), grad);
}

const graph::Cohort& cohort() {
  static const graph::Cohort c = [] {
    simulate::SimSpec spec;
    spec.n_ad = 32;
    spec.n_hc = 32;
    spec.missing_rate = 0.0;
    graph::Cohort raw = simulate::simulate_cohort(spec);
    return simulate::standardize(raw, raw);
  }();
  return c;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const ad::Tensor a = random_tensor({n, 64}, rng);
  const ad::Tensor b = random_tensor({64, 64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->Arg(170)->Arg(5440);

void BM_NeighborhoodAttention(benchmark::State& state) {
  const graph::Cohort& c = cohort();
  const auto& nb = c.schema->topology(graph::Modality::kUds).neighbor_lists();
  const std::size_t rows = 32 * nb.nodes();
  Rng rng(2);
  const ad::Tensor q = random_tensor({rows, 64}, rng, true);
  const ad::Tensor k = random_tensor({rows, 64}, rng, true);
  const ad::Tensor v = random_tensor({rows, 64}, rng, true);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Tape::Scope scope(tape);
    const ad::Tensor z = ad::neighborhood_attention(q, k, v, nb, 4);
    if (state.range(0) == 1) tape.backward(ad::sum(z));
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_NeighborhoodAttention)->Arg(0)->Arg(1)->ArgName("backward");

void BM_EncoderEmbed(benchmark::State& state) {
  const auto modality = static_cast<graph::Modality>(state.range(0));
  const graph::Cohort& c = cohort();
  Rng rng(3);
  const gtx::EncoderStack enc(modality, c.subjects[0].graph(modality).dim, gtx::EncoderConfig{}, rng);
  const std::vector<std::size_t> subjects = gtx::all_subjects(c);
  for (auto _ : state) benchmark::DoNotOptimize(gtx::embed(enc, c, subjects));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(subjects.size()));
}
BENCHMARK(BM_EncoderEmbed)
    ->Arg(static_cast<int>(graph::Modality::kMri))
    ->Arg(static_cast<int>(graph::Modality::kUds))
    ->Unit(benchmark::kMillisecond);

void BM_DdpmSample(benchmark::State& state) {
  Rng rng(4);
  ddpm::DenoiserConfig cfg;
  cfg.hidden = {256, 256};
  const ddpm::Denoiser model(cfg, rng);
  const ddpm::NoiseSchedule schedule = ddpm::NoiseSchedule::linear(50, 1e-4, 0.2);
  const auto predict = ddpm::predictor(model, schedule);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddpm::sample_vectors(predict, schedule, cfg.data_dim, 1, 100, 7));
  }
  state.SetItemsProcessed(state.iterations() * 100 * 50);
}
BENCHMARK(BM_DdpmSample)->Unit(benchmark::kMillisecond);

void BM_Delong(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<int> y(n);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 3 == 0);
    a[i] = uniform01(rng) + 0.3 * y[i];
    b[i] = uniform01(rng) + 0.2 * y[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::delong_test(y, a, b));
}
BENCHMARK(BM_Delong)->Arg(1237)->Arg(10000);

void BM_MmdRbf(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  std::vector<double> x(n * graph::kFlatDim), y(n * graph::kFlatDim);
  for (double& v : x) v = standard_normal(rng);
  for (double& v : y) v = standard_normal(rng) + 0.1;
  const distshift::SampleMatrix a(n, graph::kFlatDim, x), b(n, graph::kFlatDim, y);
  for (auto _ : state) benchmark::DoNotOptimize(distshift::mmd_rbf(a, b));
}
BENCHMARK(BM_MmdRbf)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
