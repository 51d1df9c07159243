// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "synthgt/graph/cohort.hpp"

namespace synthgt::io {

inline constexpr int kCohortFormatVersion = 1;

// Cohort directory layout:
//   subjects.csv  id,label,age,sex,apoe4,site_id
//   mri.csv       id,r0_thickness,r0_volume,...,r61_volume
//   uds.csv       id,u0,...,u169   (empty field = missing)
//   cohort.json   {"format_version":1, provenance, mri_layout, uds_domains,
//                  standardization, config_hash}
void write_cohort(const std::filesystem::path& dir, const graph::Cohort& cohort,
                  const std::string& config_hash = "");
graph::Cohort read_cohort(const std::filesystem::path& dir);

// config_hash recorded in cohort.json ("" if absent).
std::string read_cohort_hash(const std::filesystem::path& dir);

}  // namespace synthgt::io
