// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/graph/cohort.hpp"

#include <algorithm>

#include "synthgt/error.hpp"

namespace synthgt::graph {

const char* provenance_name(Provenance p) {
  return p == Provenance::kSimulatedReal ? "simulated_real" : "ddpm_synthetic";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "simulated_real") return Provenance::kSimulatedReal;
  if (name == "ddpm_synthetic") return Provenance::kDdpmSynthetic;
  throw ConfigError("provenance", "unknown provenance '" + name + "'");
}

std::shared_ptr<const CohortSchema> CohortSchema::make(const MriLayout& layout,
                                                       std::vector<int> uds_domains) {
  if (uds_domains.size() != kUdsNodes) {
    throw ConfigError("uds_domains", "expected " + std::to_string(kUdsNodes) +
                                         " node assignments, got " +
                                         std::to_string(uds_domains.size()));
  }
  auto schema = std::make_shared<CohortSchema>();
  schema->mri_layout = layout;
  schema->mri = std::make_shared<const Topology>(build_mri_topology(layout));
  schema->uds = std::make_shared<const Topology>(build_uds_topology(uds_domains));
  schema->uds_domains = std::move(uds_domains);
  return schema;
}

std::shared_ptr<const CohortSchema> CohortSchema::default_schema() {
  static const std::shared_ptr<const CohortSchema> schema = make(MriLayout{}, default_uds_domains());
  return schema;
}

std::size_t Cohort::count_label(int label) const {
  return static_cast<std::size_t>(std::count_if(
      subjects.begin(), subjects.end(), [label](const Subject& s) { return s.label == label; }));
}

std::vector<int> Cohort::labels() const {
  std::vector<int> out;
  out.reserve(subjects.size());
  for (const Subject& s : subjects) out.push_back(s.label);
  return out;
}

std::vector<std::string> Cohort::ids() const {
  std::vector<std::string> out;
  out.reserve(subjects.size());
  for (const Subject& s : subjects) out.push_back(s.id);
  return out;
}

Cohort Cohort::subset(std::span<const std::size_t> indices) const {
  Cohort out;
  out.provenance = provenance;
  out.standardization = standardization;
  out.schema = schema;
  out.subjects.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= subjects.size()) throw ContractError("Cohort::subset: index out of range");
    out.subjects.push_back(subjects[i]);
  }
  return out;
}

ModalityGraph empty_graph(Modality m) {
  ModalityGraph g;
  g.modality = m;
  g.nodes = m == Modality::kMri ? kMriNodes : kUdsNodes;
  g.dim = m == Modality::kMri ? kMriFeatures : kUdsFeatures;
  g.features.assign(g.nodes * g.dim, 0.0);
  return g;
}

Subject blank_subject(std::string id, int label) {
  Subject s;
  s.id = std::move(id);
  s.label = label;
  s.graphs = {empty_graph(Modality::kMri), empty_graph(Modality::kUds)};
  return s;
}

void validate_subject(const Subject& s) {
  if (s.label != 0 && s.label != 1) {
    throw ContractError("subject " + s.id + ": label must be 0 or 1");
  }
  for (Modality m : {Modality::kMri, Modality::kUds}) {
    const ModalityGraph& g = s.graph(m);
    const ModalityGraph expected = empty_graph(m);
    if (g.modality != m || g.nodes != expected.nodes || g.dim != expected.dim ||
        g.features.size() != expected.features.size()) {
      throw ContractError("subject " + s.id + ": " + modality_name(m) + " graph has shape " +
                          std::to_string(g.nodes) + "x" + std::to_string(g.dim) + ", expected " +
                          std::to_string(expected.nodes) + "x" + std::to_string(expected.dim));
    }
  }
}

std::vector<double> flatten(const Subject& s) {
  validate_subject(s);
  std::vector<double> out;
  out.reserve(kFlatDim);
  const auto& mri = s.graph(Modality::kMri).features;
  const auto& uds = s.graph(Modality::kUds).features;
  out.insert(out.end(), mri.begin(), mri.end());
  out.insert(out.end(), uds.begin(), uds.end());
  return out;
}

std::array<ModalityGraph, kModalityCount> unflatten(std::span<const double> values) {
  if (values.size() != kFlatDim) {
    throw DimensionError("unflatten: expected " + std::to_string(kFlatDim) + " values, got " +
                         std::to_string(values.size()));
  }
  ModalityGraph mri = empty_graph(Modality::kMri);
  ModalityGraph uds = empty_graph(Modality::kUds);
  std::copy_n(values.begin(), kMriValues, mri.features.begin());
  std::copy(values.begin() + kMriValues, values.end(), uds.features.begin());
  return {std::move(mri), std::move(uds)};
}

std::vector<double> flatten_cohort(const Cohort& c) {
  std::vector<double> out;
  out.reserve(c.size() * kFlatDim);
  for (const Subject& s : c.subjects) {
    const auto v = flatten(s);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace synthgt::graph
