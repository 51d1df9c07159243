// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "synthgt/autodiff/nn.hpp"

namespace synthgt::io {

inline constexpr int kCheckpointFormatVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

// JSON container shared by DDPM and encoder checkpoints: named flat weight
// arrays plus scalar and string metadata.
struct Checkpoint {
  std::string kind;
  std::string config_hash;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> strings;
  std::vector<NamedArray> arrays;

  double scalar(const std::string& key) const;
  const std::string& string(const std::string& key) const;
  const NamedArray& array(const std::string& name) const;

  void put_parameters(const ad::ParameterList& params);
  // Copies stored arrays into `params` by name; shapes must match.
  void load_parameters(ad::ParameterList& params) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError on a malformed file or a version mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace synthgt::io
