// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "synthgt/autodiff/nn.hpp"
#include "synthgt/autodiff/tensor.hpp"
#include "synthgt/graph/cohort.hpp"
#include "synthgt/io/checkpoint.hpp"
#include "synthgt/random.hpp"

namespace synthgt::ddpm {

enum class ReverseVariance { kBeta, kPosterior };

// Linear beta schedule. Timesteps are 1-based: betas[t - 1] is beta_t.
struct NoiseSchedule {
  std::size_t steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  static NoiseSchedule linear(std::size_t steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);

  double beta(std::size_t t) const { return betas[t - 1]; }
  double alpha(std::size_t t) const { return alphas[t - 1]; }
  double alpha_bar(std::size_t t) const { return alpha_bars[t - 1]; }
  // Reverse-step standard deviation sigma_t.
  double sigma(std::size_t t, ReverseVariance kind) const;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. Composing the single-step
// kernel N(sqrt(1 - beta_t) x_{t-1}, beta_t I) gives a Gaussian whose mean
// scales by prod sqrt(alpha_s) and whose variance is 1 - prod alpha_s.
std::vector<double> forward_diffuse(const NoiseSchedule& schedule, std::span<const double> x0,
                                    std::size_t t, std::span<const double> eps);

// Sinusoidal embedding: [sin(t w_i), cos(t w_i)], w_i = 10000^(-i / (dim/2)).
std::vector<double> time_embedding(std::size_t t, std::size_t dim);

struct DenoiserConfig {
  std::size_t data_dim = graph::kFlatDim;
  std::size_t time_dim = 64;
  std::size_t label_dim = 16;
  std::size_t classes = 2;
  std::vector<std::size_t> hidden{512, 512};
  // eps_theta = sqrt(1 - abar_t) x_t + MLP(...); the MLP learns the residual.
  bool noise_skip = true;
};

// eps_theta(x_t, t, y): MLP over [x_t, time embedding, label embedding].
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(DenoiserConfig config, Rng& rng);

  // x_t [B, data_dim]; one timestep and label per row.
  ad::Tensor forward(const ad::Tensor& x_t, std::span<const std::size_t> t,
                     std::span<const int> y) const;
  ad::ParameterList parameters() const;
  const DenoiserConfig& config() const { return config_; }

 private:
  DenoiserConfig config_;
  ad::Tensor label_table_;
  ad::Mlp mlp_;
};

using NoisePredictor = std::function<ad::Tensor(const ad::Tensor& x_t,
                                                std::span<const std::size_t> t,
                                                std::span<const int> y)>;

// Full noise prediction: the network output plus the skip term when enabled.
NoisePredictor predictor(const Denoiser& denoiser, const NoiseSchedule& schedule);

// Row-major block of equal-length vectors with one class label per row.
struct LabeledVectors {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

LabeledVectors flatten_cohort(const graph::Cohort& cohort);

// Mean squared error between eps and the prediction at x_t, with the
// timesteps and noise supplied (eps is [B, dim] row-major).
ad::Tensor ddpm_loss(const LabeledVectors& batch, std::span<const std::size_t> t,
                     std::span<const double> eps, const NoisePredictor& model,
                     const NoiseSchedule& schedule);

// Draws t ~ U{1..T} and eps ~ N(0, I) per row, then the loss above.
ad::Tensor ddpm_loss(const LabeledVectors& batch, const NoisePredictor& model,
                     const NoiseSchedule& schedule, Rng& rng);

struct DdpmTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  std::string config_hash;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct DdpmTrainResult {
  Denoiser denoiser;
  std::vector<double> epoch_loss;
  std::vector<double> best_loss;  // running minimum of epoch_loss
  // Loss over the full data set on one fixed draw of (t, eps), before and
  // after training.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Adam over shuffled minibatches. Throws TrainingError on a non-finite loss,
// naming the epoch and learning rate.
DdpmTrainResult train_ddpm(const LabeledVectors& data, const NoiseSchedule& schedule,
                           const DenoiserConfig& model_config, const DdpmTrainConfig& config);

struct SampleOptions {
  ReverseVariance variance = ReverseVariance::kBeta;
  std::size_t chunk = 500;
  std::size_t jobs = 1;
};

// Ancestral sampling of n vectors conditioned on `label`. Chunks use
// independent RNG streams derived from `seed` and are concatenated in order.
std::vector<double> sample_vectors(const NoisePredictor& model, const NoiseSchedule& schedule,
                                   std::size_t dim, int label, std::size_t n, std::uint64_t seed,
                                   const SampleOptions& options = {});

// Balanced-by-request synthetic cohort. Covariates are copied from a random
// training subject of the same class. Throws ContractError if n <= 0.
graph::Cohort sample_cohort(const Denoiser& denoiser, const NoiseSchedule& schedule,
                            std::span<const std::size_t> per_class, const graph::Cohort& training,
                            std::uint64_t seed, const SampleOptions& options = {});

io::Checkpoint make_checkpoint(const Denoiser& denoiser, const NoiseSchedule& schedule,
                               const std::string& config_hash);
struct LoadedDdpm {
  Denoiser denoiser;
  NoiseSchedule schedule;
  std::string config_hash;
};
LoadedDdpm load_checkpoint(const io::Checkpoint& ckpt);

}  // namespace synthgt::ddpm
