// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "synthgt/eval/metrics.hpp"

namespace synthgt::io {

// subject_id,label,prob_ad,fold,age,sex,apoe4 after a config-hash comment line.
void write_predictions(const std::filesystem::path& path, const eval::PredictionSet& preds,
                       const std::string& config_hash);
// Model name is taken from the file stem.
eval::PredictionSet read_predictions(const std::filesystem::path& path);

}  // namespace synthgt::io
