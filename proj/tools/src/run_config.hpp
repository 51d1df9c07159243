// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "synthgt/distshift/distshift.hpp"
#include "synthgt/eval/summary.hpp"
#include "synthgt/simulate/simulator.hpp"
#include "synthgt/train/pipeline.hpp"

namespace synthgt::cli {

struct EvalSection {
  eval::SummaryOptions summary;
  std::size_t distshift_max_samples = 1000;
  int distshift_fold = 0;
  bool distshift_per_modality = false;
};

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::string output_dir = "runs/latest";
  std::size_t jobs = 1;
  simulate::SimSpec sim;
  train::PipelineConfig pipeline;  // ddpm, model, train sections; hash and callbacks unset
  EvalSection eval;

  nlohmann::ordered_json to_json() const;
  // FNV-1a of the canonical JSON with output_dir and jobs excluded, since
  // neither changes any result.
  std::string hash() const;
  // Pipeline config carrying seed, jobs and hash.
  train::PipelineConfig pipeline_config() const;
  simulate::SimSpec sim_spec() const;
  void validate() const;  // throws ConfigError
};

// "desk" (single-core minutes) or "paper" (the published hyperparameters).
RunConfig preset(const std::string& name);

// Overlays a JSON object onto `base`. Unknown keys and wrongly typed values
// throw ConfigError naming the key path.
RunConfig overlay(RunConfig base, const nlohmann::ordered_json& doc);

// Reads TOML (.toml) or JSON (.json) into a JSON document.
nlohmann::ordered_json read_config_document(const std::filesystem::path& path);

struct ConfigOverrides {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> jobs;
};

// Preset (flag, then file, then "desk") + file + flags, then the output-dir
// environment override when no --output flag was given.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const ConfigOverrides& flags);

inline constexpr const char* kOutputDirEnv = "SYNTHGT_OUTPUT_DIR";

}  // namespace synthgt::cli
