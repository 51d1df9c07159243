// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "synthgt/graph/cohort.hpp"

namespace synthgt::simulate {

// Fills missing UDS entries with the unweighted mean of that item over the k
// nearest subjects that observe it. Distance between two subjects is the
// Euclidean distance over mutually observed UDS items, rescaled by
// (items / mutually observed). Observed values are never altered.
// Throws ImputationError if an item is missing in every subject.
graph::Cohort knn_impute(const graph::Cohort& cohort, std::size_t k = 5);

// Imputes `target` using only `donors` as neighbours (held-out data imputed
// from training subjects).
graph::Cohort knn_impute(const graph::Cohort& target, const graph::Cohort& donors,
                         std::size_t k = 5);

// UDS column statistics of `train` (population std).
graph::Standardization fit_standardization(const graph::Cohort& train);

// UDS z-scored with the table; MRI normalized per subject per column.
// Columns with std < 1e-12 become 0. Throws ContractError on NaN input.
graph::Cohort apply_standardization(const graph::Standardization& table,
                                    const graph::Cohort& cohort);

// apply_standardization(fit_standardization(train), apply_to).
graph::Cohort standardize(const graph::Cohort& train, const graph::Cohort& apply_to);

bool has_missing(const graph::Cohort& cohort);

}  // namespace synthgt::simulate
