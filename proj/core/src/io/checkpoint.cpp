// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/io/checkpoint.hpp"

#include <algorithm>

#include "json.hpp"
#include "synthgt/autodiff/tensor.hpp"
#include "synthgt/error.hpp"
#include "synthgt/io/text.hpp"

namespace synthgt::io {

using nlohmann::json;

double Checkpoint::scalar(const std::string& key) const {
  auto it = scalars.find(key);
  if (it == scalars.end()) throw IoError("checkpoint: missing scalar '" + key + "'");
  return it->second;
}

const std::string& Checkpoint::string(const std::string& key) const {
  auto it = strings.find(key);
  if (it == strings.end()) throw IoError("checkpoint: missing string '" + key + "'");
  return it->second;
}

const NamedArray& Checkpoint::array(const std::string& name) const {
  auto it = std::find_if(arrays.begin(), arrays.end(),
                         [&](const NamedArray& a) { return a.name == name; });
  if (it == arrays.end()) throw IoError("checkpoint: missing array '" + name + "'");
  return *it;
}

void Checkpoint::put_parameters(const ad::ParameterList& params) {
  for (const auto& e : params.entries()) {
    const auto d = e.tensor.data();
    arrays.push_back({e.name, e.tensor.shape(), std::vector<double>(d.begin(), d.end())});
  }
}

void Checkpoint::load_parameters(ad::ParameterList& params) const {
  for (const auto& e : params.entries()) {
    const NamedArray& a = array(e.name);
    if (a.shape != e.tensor.shape()) {
      throw IoError("checkpoint: array '" + e.name + "' has shape " + ad::shape_string(a.shape) +
                    ", model expects " + ad::shape_string(e.tensor.shape()));
    }
    ad::Tensor t = e.tensor;
    std::copy(a.data.begin(), a.data.end(), t.mutable_data().begin());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["kind"] = ckpt.kind;
  j["config_hash"] = ckpt.config_hash;
  j["scalars"] = ckpt.scalars;
  j["strings"] = ckpt.strings;
  json arrays = json::array();
  for (const auto& a : ckpt.arrays) {
    arrays.push_back({{"name", a.name}, {"shape", a.shape}, {"data", a.data}});
  }
  j["arrays"] = std::move(arrays);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, j.dump());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw IoError("checkpoint " + path.string() + ": unsupported format_version " +
                    std::to_string(version));
    }
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.scalars = j.at("scalars").get<std::map<std::string, double>>();
    c.strings = j.at("strings").get<std::map<std::string, std::string>>();
    for (const auto& a : j.at("arrays")) {
      NamedArray arr{a.at("name").get<std::string>(), a.at("shape").get<std::vector<std::size_t>>(),
                     a.at("data").get<std::vector<double>>()};
      if (ad::shape_size(arr.shape) != arr.data.size()) {
        throw IoError("checkpoint " + path.string() + ": array '" + arr.name +
                      "' data does not match its shape");
      }
      c.arrays.push_back(std::move(arr));
    }
    return c;
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace synthgt::io
