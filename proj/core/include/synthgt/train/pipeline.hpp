// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "synthgt/ddpm/ddpm.hpp"
#include "synthgt/eval/metrics.hpp"
#include "synthgt/graph/cohort.hpp"
#include "synthgt/gtx/encoder.hpp"
#include "synthgt/train/train.hpp"

namespace synthgt::train {

enum class ModelKind { kPretrained, kRandomFrozen, kEarlyFusion, kLateFusion };
const char* model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);  // throws ConfigError
std::vector<ModelKind> all_models();

struct DdpmStageConfig {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::vector<std::size_t> hidden{512, 512};
  std::size_t time_dim = 64;
  std::size_t label_dim = 16;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t synthetic_per_class = 2000;
  ddpm::ReverseVariance variance = ddpm::ReverseVariance::kBeta;
};

struct PipelineConfig {
  DdpmStageConfig ddpm;
  gtx::EncoderConfig encoder;
  std::vector<std::size_t> classifier_hidden{512, 256};
  std::vector<std::size_t> late_branch{128, 32};
  TrainConfig train;
  std::size_t knn_k = 5;
  std::size_t jobs = 1;
  std::vector<ModelKind> models = all_models();
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
  bool keep_fold_data = false;           // retain cohorts and encoders in FoldResult
  std::string config_hash;
  std::function<void(const std::string&)> progress;

  void validate() const;  // throws ConfigError
};

// Id audits of one fold; every flag must hold.
struct FoldAudit {
  bool partition_ok = false;          // train and test disjoint
  bool ddpm_inputs_clean = false;     // no test id among DDPM training rows
  bool standardization_clean = false; // statistics fitted on training ids only
  bool imputation_clean = false;      // test imputed from training donors only
  bool validation_clean = false;      // early-stopping rows drawn from training ids
  bool encoders_frozen = false;       // hashes unchanged across downstream training
  bool all() const;
};

struct ModelRun {
  ModelKind kind = ModelKind::kPretrained;
  std::vector<eval::Prediction> test;
  std::vector<eval::Prediction> validation;
  std::string classifier_hash;
  FitResult fit;
};

struct FoldResult {
  int fold = 0;
  std::vector<ModelRun> models;
  FoldAudit audit;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<std::string> ddpm_ids;
  std::vector<std::string> validation_ids;
  std::string encoder_hash_before;
  std::string encoder_hash_after;
  double ddpm_initial_loss = 0.0;
  double ddpm_final_loss = 0.0;
  std::map<std::string, double> pretrain_accuracy;  // by modality
  std::map<std::string, double> seconds;            // by stage
  std::map<std::string, std::string> checkpoints;   // by artifact name
  // Filled only with PipelineConfig::keep_fold_data.
  std::shared_ptr<const graph::Cohort> real_train;  // imputed and standardized
  std::shared_ptr<const graph::Cohort> synthetic;
  std::vector<gtx::EncoderStack> encoders;          // pretrained, frozen

  const ModelRun* find(ModelKind kind) const;
};

struct PipelineResult {
  std::vector<int> assignment;
  std::string assignment_hash;
  std::vector<FoldResult> folds;

  // Test predictions of one model across folds, ordered by fold then subject.
  eval::PredictionSet pooled(ModelKind kind) const;
  eval::PredictionSet pooled_validation(ModelKind kind) const;
  bool has(ModelKind kind) const;
};

// One fold of the protocol. `real` may contain missing values.
FoldResult run_fold(const graph::Cohort& real, std::span<const int> assignment, int fold,
                    const PipelineConfig& config);

// Stratified folds, then run_fold per fold (up to `jobs` at once). Errors carry
// the fold index and stage.
PipelineResult run_pipeline(const graph::Cohort& real, const PipelineConfig& config);

// run_pipeline restricted to the non-pretrained models on the same folds.
PipelineResult baselines(const graph::Cohort& real, const PipelineConfig& config);

}  // namespace synthgt::train
