// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synthgt/autodiff/ops.hpp"

namespace synthgt::graph {

enum class Modality { kMri = 0, kUds = 1 };
inline constexpr std::size_t kModalityCount = 2;

const char* modality_name(Modality m);
Modality parse_modality(const std::string& name);

inline constexpr std::size_t kMriNodes = 62;
inline constexpr std::size_t kMriFeatures = 2;  // cortical thickness, volume
inline constexpr std::size_t kUdsNodes = 170;
inline constexpr std::size_t kUdsFeatures = 1;
inline constexpr std::size_t kMriValues = kMriNodes * kMriFeatures;
inline constexpr std::size_t kFlatDim = kMriValues + kUdsNodes * kUdsFeatures;  // 294

using Edge = std::pair<std::size_t, std::size_t>;

// Immutable undirected graph with neighbor lists that include the node itself.
class Topology {
 public:
  // Validates bounds, rejects self-loops and duplicate edges (in either
  // orientation). Edges are stored with u < v, sorted.
  static Topology from_edges(std::size_t node_count, std::vector<Edge> edges);

  std::size_t node_count() const { return neighbors_.nodes(); }
  const std::vector<Edge>& edges() const { return edges_; }
  // Sorted neighbors of u, including u.
  std::span<const std::size_t> neighbors(std::size_t u) const { return neighbors_.of(u); }
  const ad::NeighborLists& neighbor_lists() const { return neighbors_; }
  bool has_edge(std::size_t u, std::size_t v) const;
  std::size_t component_count() const;
  bool connected() const { return component_count() == 1; }
  // Stable content hash identifying the topology.
  const std::string& id() const { return id_; }

  // Same graph with nodes relabeled: new node perm[u] is old node u.
  Topology permuted(std::span<const std::size_t> perm) const;

 private:
  std::vector<Edge> edges_;
  ad::NeighborLists neighbors_;
  std::string id_;
};

// Lattice proxy for atlas adjacency: a rows x cols 4-neighbour grid in
// row-major order with the last `omitted` cells of the final row removed.
struct MriLayout {
  std::size_t rows = 8;
  std::size_t cols = 8;
  std::size_t omitted = 2;

  std::size_t node_count() const { return rows * cols - omitted; }
  // Grid cell of node u.
  std::pair<std::size_t, std::size_t> cell(std::size_t u) const { return {u / cols, u % cols}; }
};

// Throws ConfigError unless the layout yields exactly 62 nodes.
Topology build_mri_topology(const MriLayout& layout = {});
// Lattice graph without the 62-node requirement (used for toy graphs).
Topology build_lattice(const MriLayout& layout);

// Cliques within clinical domains, no cross-domain edges. Every node must be
// assigned a domain id >= 0 (ConfigError otherwise).
Topology build_uds_topology(std::span<const int> domain_of_node);
// Default: 8 contiguous domains of sizes {22,22,22,22,22,20,20,20}.
std::vector<int> default_uds_domains();
std::vector<int> uds_domains_from_sizes(std::span<const std::size_t> sizes);

}  // namespace synthgt::graph
