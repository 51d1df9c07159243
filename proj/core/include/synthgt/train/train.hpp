// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "synthgt/autodiff/nn.hpp"
#include "synthgt/graph/cohort.hpp"
#include "synthgt/gtx/encoder.hpp"
#include "synthgt/io/checkpoint.hpp"

namespace synthgt::train {

struct PretrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 2e-3;
  std::size_t batch_size = 32;
  double dropout = 0.3;
};

struct DownstreamConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double val_fraction = 0.2;
};

struct TrainConfig {
  PretrainConfig pretrain;
  DownstreamConfig downstream;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Fold index per subject: each class is shuffled with its own seeded stream
// and dealt round-robin. Throws ContractError if a class has fewer than k members.
std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);
std::string assignment_hash(std::span<const int> folds);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Stratified holdout of `pool` (indices into `labels`): round(fraction * n_c)
// per class go to validation. Throws ContractError if validation is empty.
Split stratified_holdout(std::span<const int> labels, std::span<const std::size_t> pool,
                         double fraction, std::uint64_t seed);

struct PretrainResult {
  gtx::EncoderStack encoder;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;  // eval mode, on the synthetic training set
  double majority_rate = 0.0;
};

// Encoder plus a throwaway linear head (embedding -> 2) trained with
// cross-entropy; the head is discarded. Throws TrainingError on a non-finite loss.
PretrainResult pretrain_encoder(graph::Modality modality, const graph::Cohort& synth,
                                const gtx::EncoderConfig& encoder, const PretrainConfig& config,
                                std::uint64_t seed);

// Row-aligned input blocks, one row-major matrix per block.
struct Blocks {
  std::vector<std::size_t> dims;
  std::vector<std::vector<double>> data;
  std::size_t rows = 0;

  void add(std::size_t dim, std::vector<double> values);
  std::vector<ad::Tensor> gather(std::span<const std::size_t> rows) const;
};

// One block per encoder holding its frozen eval-mode graph embeddings.
Blocks embedding_blocks(std::span<const gtx::EncoderStack> encoders, const graph::Cohort& cohort);
// The 294 flattened features as a single block.
Blocks flat_block(const graph::Cohort& cohort);
// MRI (124) and UDS (170) as two blocks.
Blocks modality_blocks(const graph::Cohort& cohort);

// Per-modality dense branches (input -> 128 -> 32, ReLU after each) whose
// outputs are concatenated into a dense head.
class LateFusionNet {
 public:
  LateFusionNet() = default;
  LateFusionNet(std::vector<std::size_t> input_dims, std::vector<std::size_t> branch_sizes,
                std::vector<std::size_t> head_hidden, std::size_t classes, Rng& rng);
  ad::Tensor logits(std::span<const ad::Tensor> blocks) const;
  ad::ParameterList parameters() const;

 private:
  std::vector<ad::Mlp> branches_;
  ad::Mlp head_;
};

// Type-erased view of a classifier over Blocks.
struct Trainable {
  std::function<ad::Tensor(std::span<const ad::Tensor>)> logits;
  ad::ParameterList parameters;
};
Trainable trainable(const gtx::FusionClassifier& c);
Trainable trainable(const LateFusionNet& c);

struct FitResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
};

// Adam on cross-entropy with early stopping on validation loss; the weights of
// the best epoch are restored before returning.
FitResult fit_classifier(const Trainable& model, const Blocks& blocks, std::span<const int> labels,
                         std::span<const std::size_t> train_rows,
                         std::span<const std::size_t> val_rows, const DownstreamConfig& config,
                         std::uint64_t seed);

double mean_cross_entropy(const Trainable& model, const Blocks& blocks, std::span<const int> labels,
                          std::span<const std::size_t> rows);
// P(AD) per selected row.
std::vector<double> predict_proba(const Trainable& model, const Blocks& blocks,
                                  std::span<const std::size_t> rows);

std::string encoders_hash(std::span<const gtx::EncoderStack> encoders);

struct DownstreamResult {
  gtx::FusionClassifier classifier;
  FitResult fit;
  Split split;
  std::string encoder_hash_before;
  std::string encoder_hash_after;
};

// Frozen-encoder classifier on `real_train`. Throws ContractError if any
// encoder weight changes.
DownstreamResult train_downstream(std::span<const gtx::EncoderStack> encoders,
                                  const graph::Cohort& real_train,
                                  const std::vector<std::size_t>& hidden,
                                  const DownstreamConfig& config, std::uint64_t seed);

io::Checkpoint make_classifier_checkpoint(const ad::ParameterList& params, const std::string& kind,
                                          const std::string& config_hash);

}  // namespace synthgt::train
