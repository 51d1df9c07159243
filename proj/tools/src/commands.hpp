// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace synthgt::cli {

// Default artifact layout under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path cohort() const { return root / "cohort"; }
  std::filesystem::path ddpm_checkpoint() const { return root / "ddpm" / "ddpm.json"; }
  std::filesystem::path ddpm_training_cohort() const { return root / "ddpm" / "train_cohort"; }
  std::filesystem::path synthetic() const { return root / "synthetic"; }
  std::filesystem::path encoders() const { return root / "encoders"; }
  std::filesystem::path predictions() const { return root / "predictions"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path folds() const { return root / "folds.json"; }
  std::filesystem::path metrics() const { return root / "metrics.json"; }
  std::filesystem::path metrics_table() const { return root / "metrics.md"; }
  std::filesystem::path distshift_json() const { return root / "distshift.json"; }
  std::filesystem::path distshift_markdown() const { return root / "distshift.md"; }
  std::filesystem::path report() const { return root / "report.md"; }
  std::filesystem::path plots() const { return root / "plots"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

// Inputs a subcommand may take instead of the default layout.
struct CommandInputs {
  std::optional<std::filesystem::path> cohort;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> synthetic;
  std::optional<std::filesystem::path> encoders;
  std::optional<std::filesystem::path> predictions;
  std::optional<std::size_t> per_class;
};

// Each command writes its artifacts and merges its stage timings into the
// manifest. Failures surface as StageError (stage name attached) or
// ConfigError.
void cmd_simulate(const RunConfig& config);
void cmd_ddpm_train(const RunConfig& config, const CommandInputs& in);
void cmd_ddpm_sample(const RunConfig& config, const CommandInputs& in);
void cmd_pretrain(const RunConfig& config, const CommandInputs& in);
void cmd_train(const RunConfig& config, const CommandInputs& in);
void cmd_evaluate(const RunConfig& config, const CommandInputs& in);
void cmd_distshift(const RunConfig& config, const CommandInputs& in);
void cmd_report(const RunConfig& config, const CommandInputs& in);
void cmd_run(const RunConfig& config);

// Test and validation prediction sets found in a directory, in canonical
// model order. Validation sets are empty where no file exists.
struct PredictionFiles {
  std::vector<eval::PredictionSet> test;
  std::vector<eval::PredictionSet> validation;
};
PredictionFiles read_prediction_dir(const std::filesystem::path& dir);

const char* tool_version();

}  // namespace synthgt::cli
