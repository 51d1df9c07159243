// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthgt/graph/topology.hpp"

namespace synthgt::graph {

// Node feature matrix of one modality for one subject. Missing values are NaN
// until imputation.
struct ModalityGraph {
  Modality modality = Modality::kMri;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<double> features;  // nodes x dim, row-major

  double at(std::size_t node, std::size_t feature) const { return features[node * dim + feature]; }
  bool operator==(const ModalityGraph&) const = default;
};

struct Subject {
  std::string id;
  int label = 0;  // 0 = HC, 1 = AD
  double age = 0.0;
  int sex = 0;  // binary code
  bool apoe4 = false;
  int site = 0;
  std::array<ModalityGraph, kModalityCount> graphs;

  const ModalityGraph& graph(Modality m) const { return graphs[static_cast<std::size_t>(m)]; }
  ModalityGraph& graph(Modality m) { return graphs[static_cast<std::size_t>(m)]; }
};

enum class Provenance { kSimulatedReal, kDdpmSynthetic };
const char* provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

// Training-set statistics replayed on held-out data. MRI is normalized per
// subject, so only UDS columns carry global statistics.
struct Standardization {
  std::vector<double> uds_mean;
  std::vector<double> uds_std;  // 0 marks a constant column
  std::vector<std::string> fitted_on;  // subject ids whose values produced the table
};

// Shared, immutable graph structure of both modalities.
struct CohortSchema {
  MriLayout mri_layout;
  std::vector<int> uds_domains = default_uds_domains();
  std::shared_ptr<const Topology> mri;
  std::shared_ptr<const Topology> uds;

  static std::shared_ptr<const CohortSchema> make(const MriLayout& layout,
                                                  std::vector<int> uds_domains);
  static std::shared_ptr<const CohortSchema> default_schema();
  const Topology& topology(Modality m) const { return m == Modality::kMri ? *mri : *uds; }
};

struct Cohort {
  std::vector<Subject> subjects;
  Provenance provenance = Provenance::kSimulatedReal;
  std::optional<Standardization> standardization;
  std::shared_ptr<const CohortSchema> schema = CohortSchema::default_schema();

  std::size_t size() const { return subjects.size(); }
  std::size_t count_label(int label) const;
  std::vector<int> labels() const;
  std::vector<std::string> ids() const;
  // Copy with the selected subjects only, preserving order of `indices`.
  Cohort subset(std::span<const std::size_t> indices) const;
};

ModalityGraph empty_graph(Modality m);
// Both graphs zero-filled with the registered shapes.
Subject blank_subject(std::string id, int label);

// Throws ContractError if a subject's graphs do not match the registered
// modality shapes or the label is not 0/1.
void validate_subject(const Subject& s);

// [MRI row-major (124) | UDS (170)], length 294.
std::vector<double> flatten(const Subject& s);
std::array<ModalityGraph, kModalityCount> unflatten(std::span<const double> values);
// Cohort as an n x 294 row-major matrix.
std::vector<double> flatten_cohort(const Cohort& c);

}  // namespace synthgt::graph
