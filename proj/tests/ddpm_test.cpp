// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "support/finite_difference.hpp"
#include "support/toy_ddpm.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/ddpm/ddpm.hpp"
#include "synthgt/error.hpp"
#include "synthgt/simulate/preprocess.hpp"
#include "synthgt/simulate/simulator.hpp"

namespace synthgt::ddpm {
namespace {

TEST(NoiseSchedule, DefaultInvariants) {
  const NoiseSchedule s = NoiseSchedule::linear();
  ASSERT_EQ(s.steps, 1000u);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(1000), 0.02);
  for (std::size_t t = 1; t <= s.steps; ++t) {
    EXPECT_GT(s.beta(t), 0.0);
    EXPECT_LT(s.beta(t), 1.0);
    if (t > 1) {
      EXPECT_GE(s.beta(t), s.beta(t - 1));
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
    }
  }
  EXPECT_LT(s.alpha_bar(1000), 1e-3);
}

TEST(NoiseSchedule, FinalAlphaBarMatchesLogSum) {
  // Oracle: exp(sum log(1 - beta_t)) over the closed-form linear betas.
  double log_bar = 0.0;
  for (int i = 0; i < 1000; ++i) log_bar += std::log1p(-(1e-4 + (0.02 - 1e-4) * i / 999.0));
  EXPECT_NEAR(NoiseSchedule::linear().alpha_bar(1000), std::exp(log_bar), 1e-12);
  EXPECT_NEAR(std::exp(log_bar), 4.0e-5, 0.5e-5);
}

TEST(NoiseSchedule, InvalidRangeIsConfigError) {
  EXPECT_THROW(NoiseSchedule::linear(0), ConfigError);
  EXPECT_THROW(NoiseSchedule::linear(10, 0.1, 0.01), ConfigError);
}

TEST(ForwardDiffuse, ZeroNoiseScalesSignal) {
  const NoiseSchedule s = NoiseSchedule::linear();
  const std::vector<double> x0{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0);
  const auto xt = forward_diffuse(s, x0, 37, zero);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(xt[i], std::sqrt(s.alpha_bar(37)) * x0[i]);
}

TEST(ForwardDiffuse, FinalStepIsAlmostPureNoise) {
  const NoiseSchedule s = NoiseSchedule::linear();
  Rng rng(3);
  std::vector<double> x0(294), eps(294);
  for (double& v : eps) v = standard_normal(rng);
  x0[0] = 1.0;
  const auto xt = forward_diffuse(s, x0, 1000, eps);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    num += (xt[i] - eps[i]) * (xt[i] - eps[i]);
    den += eps[i] * eps[i];
  }
  EXPECT_LT(std::sqrt(num / den), 0.05);
}

TEST(ForwardDiffuse, TimestepOutOfRange) {
  const NoiseSchedule s = NoiseSchedule::linear(10);
  const std::vector<double> x{1.0};
  EXPECT_THROW(forward_diffuse(s, x, 0, x), ContractError);
  EXPECT_THROW(forward_diffuse(s, x, 11, x), ContractError);
}

TEST(ForwardDiffuse, ComposedStepsMatchMarginal) {
  // Monte Carlo oracle: three applications of the single-step kernel.
  const NoiseSchedule s = NoiseSchedule::linear(1000);
  Rng rng(11);
  const double x0 = 1.0;
  const std::size_t draws = 100000;
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    double x = x0;
    for (std::size_t t = 1; t <= 3; ++t) {
      x = std::sqrt(1.0 - s.beta(t)) * x + std::sqrt(s.beta(t)) * standard_normal(rng);
    }
    mean += x;
    sq += x * x;
  }
  mean /= static_cast<double>(draws);
  const double var = sq / static_cast<double>(draws) - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(s.alpha_bar(3)) * x0, 0.01 * std::sqrt(s.alpha_bar(3)));
  EXPECT_NEAR(var, 1.0 - s.alpha_bar(3), 0.01 * (1.0 - s.alpha_bar(3)));
}

TEST(TimeEmbedding, SinCosHalves) {
  const auto e = time_embedding(5, 8);
  EXPECT_DOUBLE_EQ(e[0], std::sin(5.0));
  EXPECT_DOUBLE_EQ(e[4], std::cos(5.0));
  EXPECT_NEAR(e[1], std::sin(5.0 * std::pow(10000.0, -0.25)), 1e-15);
}

LabeledVectors random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  LabeledVectors b;
  b.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>(i % 2));
    for (std::size_t d = 0; d < dim; ++d) b.values.push_back(standard_normal(rng));
  }
  return b;
}

NoisePredictor zero_predictor() {
  return [](const ad::Tensor& x, std::span<const std::size_t>, std::span<const int>) {
    return ad::Tensor::zeros(x.shape());
  };
}

TEST(DdpmLoss, ZeroPredictorGivesUnitLoss) {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  const LabeledVectors b = random_batch(5000, 20, 1);
  Rng rng(2);
  EXPECT_NEAR(ddpm_loss(b, zero_predictor(), s, rng).item(), 1.0, 0.05);
}

TEST(DdpmLoss, OraclePredictorGivesZeroLoss) {
  const NoiseSchedule s = NoiseSchedule::linear(100);
  const LabeledVectors b = random_batch(64, 7, 4);
  Rng rng(5);
  std::vector<std::size_t> t(b.size());
  std::vector<double> eps(b.values.size());
  for (auto& v : t) v = 1 + rng() % 100;
  for (auto& v : eps) v = standard_normal(rng);
  // Recovers eps from x_t using the known x0 and timestep.
  NoisePredictor oracle = [&](const ad::Tensor& x, std::span<const std::size_t> ts,
                              std::span<const int>) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double a = std::sqrt(s.alpha_bar(ts[i]));
      const double c = std::sqrt(1.0 - s.alpha_bar(ts[i]));
      for (std::size_t d = 0; d < b.dim; ++d) {
        out[i * b.dim + d] = (x.at(i, d) - a * b.values[i * b.dim + d]) / c;
      }
    }
    return ad::Tensor::from(x.shape(), std::move(out));
  };
  EXPECT_NEAR(ddpm_loss(b, t, eps, oracle, s).item(), 0.0, 1e-20);
}

TEST(DdpmLoss, EmptyBatchIsContractError) {
  const NoiseSchedule s = NoiseSchedule::linear(10);
  Rng rng(1);
  LabeledVectors empty;
  empty.dim = 3;
  EXPECT_THROW(ddpm_loss(empty, zero_predictor(), s, rng), ContractError);
}

DenoiserConfig tiny_config() {
  DenoiserConfig c;
  c.data_dim = 3;
  c.time_dim = 4;
  c.label_dim = 2;
  c.hidden = {6, 5};
  return c;
}

TEST(DdpmLoss, GradientMatchesFiniteDifferences) {
  Rng init(7);
  const Denoiser model(tiny_config(), init);
  const NoiseSchedule s = NoiseSchedule::linear(50);
  const LabeledVectors b = random_batch(4, 3, 8);
  Rng rng(9);
  std::vector<std::size_t> t{3, 17, 42, 50};
  std::vector<double> eps(12);
  for (auto& v : eps) v = standard_normal(rng);
  const NoisePredictor p = predictor(model, s);
  const auto params = model.parameters().tensors();
  ad::Tape tape;
  {
    ad::Tape::Scope scope(tape);
    tape.backward(ddpm_loss(b, t, eps, p, s));
  }
  const auto check = testing::check_gradients(
      [&] { return ddpm_loss(b, t, eps, p, s).item(); }, params);
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
}

TEST(Predictor, AddsScheduleSkipToNetworkOutput) {
  Rng init(4);
  const NoiseSchedule s = NoiseSchedule::linear(20);
  const LabeledVectors b = random_batch(2, 3, 5);
  const ad::Tensor x = ad::Tensor::from({2, 3}, b.values);
  const std::vector<std::size_t> t{1, 20};
  const std::vector<int> y{0, 1};
  const Denoiser with(tiny_config(), init);
  const ad::Tensor net = with.forward(x, t, y);
  const ad::Tensor full = predictor(with, s)(x, t, y);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = net.data()[i * 3 + j] + std::sqrt(1.0 - s.alpha_bar(t[i])) * b.values[i * 3 + j];
      EXPECT_NEAR(full.data()[i * 3 + j], expected, 1e-12);
    }
  }
  DenoiserConfig plain_cfg = tiny_config();
  plain_cfg.noise_skip = false;
  Rng init2(4);
  const Denoiser plain(plain_cfg, init2);
  const ad::Tensor a = predictor(plain, s)(x, t, y);
  const ad::Tensor direct = plain.forward(x, t, y);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), direct.data().begin()));
  const std::vector<std::size_t> late{1, 21};
  EXPECT_THROW(predictor(with, s)(x, late, y), ContractError);
}

TEST(Denoiser, ShapesAndLabelTable) {
  Rng rng(1);
  const Denoiser d(DenoiserConfig{}, rng);
  const auto params = d.parameters();
  EXPECT_EQ(params.find("label_embedding").shape(), (ad::Shape{2, 16}));
  EXPECT_EQ(params.find("mlp.0.weight").shape(), (ad::Shape{294 + 64 + 16, 512}));
  const std::vector<std::size_t> t{1, 2};
  const std::vector<int> y{0, 1};
  EXPECT_EQ(d.forward(ad::Tensor::zeros({2, 294}), t, y).shape(), (ad::Shape{2, 294}));
  const std::vector<int> bad{0, 2};
  EXPECT_THROW(d.forward(ad::Tensor::zeros({2, 294}), t, bad), ContractError);
}

TEST(TrainDdpm, SameSeedGivesIdenticalWeights) {
  const LabeledVectors data = random_batch(40, 3, 12);
  const NoiseSchedule s = NoiseSchedule::linear(20);
  DdpmTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 5;
  const auto a = train_ddpm(data, s, tiny_config(), cfg);
  const auto b = train_ddpm(data, s, tiny_config(), cfg);
  EXPECT_EQ(a.denoiser.parameters().hash(), b.denoiser.parameters().hash());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 6;
  EXPECT_NE(train_ddpm(data, s, tiny_config(), cfg).denoiser.parameters().hash(),
            a.denoiser.parameters().hash());
}

TEST(TrainDdpm, DivergenceAbortsWithEpochAndRate) {
  DdpmTrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e100;
  try {
    train_ddpm(random_batch(8, 3, 1), NoiseSchedule::linear(10), tiny_config(), cfg);
    FAIL();
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1e+100"), std::string::npos) << msg;
  }
}

TEST(TrainDdpm, NonFiniteInputIsContractError) {
  LabeledVectors data = random_batch(8, 3, 1);
  data.values[4] = std::nan("");
  EXPECT_THROW(train_ddpm(data, NoiseSchedule::linear(10), tiny_config(), {}), ContractError);
}

TEST(TrainDdpm, CheckpointsWrittenEveryNEpochs) {
  const auto dir = std::filesystem::temp_directory_path() / "synthgt_ddpm_ckpt_test";
  std::filesystem::remove_all(dir);
  DdpmTrainConfig cfg;
  cfg.epochs = 4;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = dir;
  cfg.config_hash = "feed";
  const auto r = train_ddpm(random_batch(10, 3, 2), NoiseSchedule::linear(10), tiny_config(), cfg);
  EXPECT_TRUE(std::filesystem::exists(dir / "ddpm_epoch_0002.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ddpm_epoch_0004.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "ddpm_epoch_0003.json"));
  const auto loaded = load_checkpoint(io::read_checkpoint(dir / "ddpm_epoch_0004.json"));
  EXPECT_EQ(loaded.denoiser.parameters().hash(), r.denoiser.parameters().hash());
  EXPECT_EQ(loaded.config_hash, "feed");
  EXPECT_EQ(loaded.schedule.steps, 10u);
  std::filesystem::remove_all(dir);
}

class ToyDdpm : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new LabeledVectors(testing::toy_gaussians(1000, 21));
    result_ = new DdpmTrainResult(train_ddpm(*data_, testing::toy_schedule(),
                                             testing::toy_denoiser_config(),
                                             testing::toy_train_config(21)));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete result_;
  }
  static LabeledVectors* data_;
  static DdpmTrainResult* result_;
};
LabeledVectors* ToyDdpm::data_ = nullptr;
DdpmTrainResult* ToyDdpm::result_ = nullptr;

TEST_F(ToyDdpm, LossDecreases) {
  EXPECT_LT(result_->final_loss, result_->initial_loss);
  for (std::size_t i = 1; i < result_->best_loss.size(); ++i) {
    EXPECT_LE(result_->best_loss[i], result_->best_loss[i - 1]);
  }
  EXPECT_LT(result_->best_loss.back(), result_->epoch_loss.front());
}

TEST_F(ToyDdpm, ConditionalMeansRecovered) {
  const NoisePredictor p = predictor(result_->denoiser, testing::toy_schedule());
  for (int label = 0; label < 2; ++label) {
    const auto x = sample_vectors(p, testing::toy_schedule(), 2, label, 1000, 99);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
      m0 += x[2 * i] / 1000.0;
      m1 += x[2 * i + 1] / 1000.0;
    }
    EXPECT_NEAR(m0, testing::kToyMeans[label][0], 0.3) << "label " << label;
    EXPECT_NEAR(m1, testing::kToyMeans[label][1], 0.3) << "label " << label;
  }
}

TEST_F(ToyDdpm, SamplesAreLabelFaithful) {
  // Probe: the Bayes classifier for the two true toy classes is sign(x).
  const NoisePredictor p = predictor(result_->denoiser, testing::toy_schedule());
  for (int label = 0; label < 2; ++label) {
    const auto x = sample_vectors(p, testing::toy_schedule(), 2, label, 500, 7);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 500; ++i) hits += ((x[2 * i] > 0.0) == (label == 1)) ? 1 : 0;
    EXPECT_GE(hits, 450u) << "label " << label;
  }
}

TEST(Sample, ZeroPredictorFollowsVarianceRecursion) {
  const NoiseSchedule s = NoiseSchedule::linear(50, 1e-3, 0.05);
  const std::size_t n = 10000;
  const auto x = sample_vectors(zero_predictor(), s, 1, 0, n, 3);
  // v_T = 1; v_{t-1} = v_t / alpha_t + beta_t for t > 1; v_0 = v_1 / alpha_1.
  double v = 1.0;
  for (std::size_t t = s.steps; t >= 1; --t) v = v / s.alpha(t) + (t > 1 ? s.beta(t) : 0.0);
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double xi : x) var += (xi - mean) * (xi - mean) / static_cast<double>(n);
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(v / static_cast<double>(n)));
  EXPECT_NEAR(var, v, 5.0 * v * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST(Sample, DeterministicAndChunkParallelInvariant) {
  Rng init(1);
  const Denoiser d(tiny_config(), init);
  const NoiseSchedule s = NoiseSchedule::linear(15);
  SampleOptions serial;
  serial.chunk = 7;
  SampleOptions parallel = serial;
  parallel.jobs = 3;
  const auto a = sample_vectors(predictor(d, s), s, 3, 1, 30, 42, serial);
  const auto b = sample_vectors(predictor(d, s), s, 3, 1, 30, 42, serial);
  const auto c = sample_vectors(predictor(d, s), s, 3, 1, 30, 42, parallel);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_NE(a, sample_vectors(predictor(d, s), s, 3, 0, 30, 42, serial));
  EXPECT_THROW(sample_vectors(predictor(d, s), s, 3, 1, 0, 42), ContractError);
}

TEST(Sample, BalancedSyntheticCohort) {
  simulate::SimSpec spec;
  spec.n_ad = 20;
  spec.n_hc = 30;
  const graph::Cohort real = simulate::standardize(simulate::knn_impute(simulate::simulate_cohort(spec)),
                                                   simulate::knn_impute(simulate::simulate_cohort(spec)));
  DenoiserConfig cfg;
  cfg.hidden = {16};
  Rng init(2);
  const Denoiser d(cfg, init);
  const std::vector<std::size_t> per_class{2000, 2000};
  SampleOptions opts;
  opts.jobs = 4;
  const graph::Cohort syn = sample_cohort(d, NoiseSchedule::linear(3), per_class, real, 5, opts);
  EXPECT_EQ(syn.size(), 4000u);
  EXPECT_EQ(syn.count_label(0), 2000u);
  EXPECT_EQ(syn.count_label(1), 2000u);
  EXPECT_EQ(syn.provenance, graph::Provenance::kDdpmSynthetic);
  for (const auto& sub : syn.subjects) {
    bool found = false;
    for (const auto& r : real.subjects) {
      if (r.label == sub.label && r.age == sub.age && r.apoe4 == sub.apoe4) found = true;
    }
    ASSERT_TRUE(found) << sub.id;
  }
  const std::vector<std::size_t> none{0, 0};
  EXPECT_THROW(sample_cohort(d, NoiseSchedule::linear(3), none, real, 5), ContractError);
}

}  // namespace
}  // namespace synthgt::ddpm
