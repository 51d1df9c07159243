// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/graph/topology.hpp"

#include <algorithm>
#include <numeric>

#include "synthgt/error.hpp"
#include "synthgt/hash.hpp"

namespace synthgt::graph {

const char* modality_name(Modality m) { return m == Modality::kMri ? "mri" : "uds"; }

Modality parse_modality(const std::string& name) {
  if (name == "mri" || name == "MRI") return Modality::kMri;
  if (name == "uds" || name == "UDS") return Modality::kUds;
  throw ConfigError("modality", "unknown modality '" + name + "' (expected mri or uds)");
}

Topology Topology::from_edges(std::size_t node_count, std::vector<Edge> edges) {
  for (Edge& e : edges) {
    if (e.first >= node_count || e.second >= node_count) {
      throw ConfigError("edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                        ") out of range for " + std::to_string(node_count) + " nodes");
    }
    if (e.first == e.second) {
      throw ConfigError("self-loop on node " + std::to_string(e.first) +
                        " (self is implicit in neighbor lists)");
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw ConfigError("duplicate edge (" + std::to_string(dup->first) + ", " +
                      std::to_string(dup->second) + ")");
  }

  std::vector<std::vector<std::size_t>> adj(node_count);
  for (std::size_t u = 0; u < node_count; ++u) adj[u].push_back(u);
  for (const Edge& e : edges) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  Topology t;
  t.neighbors_.offsets.assign(1, 0);
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    t.neighbors_.indices.insert(t.neighbors_.indices.end(), list.begin(), list.end());
    t.neighbors_.offsets.push_back(t.neighbors_.indices.size());
  }
  t.edges_ = std::move(edges);

  Fnv1a h;
  h.update(static_cast<std::uint64_t>(node_count));
  for (const Edge& e : t.edges_) {
    h.update(static_cast<std::uint64_t>(e.first));
    h.update(static_cast<std::uint64_t>(e.second));
  }
  t.id_ = h.hex();
  return t;
}

bool Topology::has_edge(std::size_t u, std::size_t v) const {
  if (u == v || u >= node_count() || v >= node_count()) return false;
  auto n = neighbors(u);
  return std::binary_search(n.begin(), n.end(), v);
}

std::size_t Topology::component_count() const {
  const std::size_t n = node_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (const Edge& e : edges_) {
    const std::size_t a = find(e.first);
    const std::size_t b = find(e.second);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

Topology Topology::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != node_count()) throw ContractError("permuted: permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const Edge& e : edges_) edges.emplace_back(perm[e.first], perm[e.second]);
  return from_edges(node_count(), std::move(edges));
}

Topology build_lattice(const MriLayout& layout) {
  if (layout.rows == 0 || layout.cols == 0 || layout.omitted >= layout.cols) {
    throw ConfigError("mri_layout", "need rows, cols > 0 and omitted < cols");
  }
  const std::size_t n = layout.node_count();
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    const auto [r, c] = layout.cell(u);
    if (c + 1 < layout.cols && u + 1 < n) edges.emplace_back(u, u + 1);
    if (r + 1 < layout.rows && u + layout.cols < n) edges.emplace_back(u, u + layout.cols);
  }
  return Topology::from_edges(n, std::move(edges));
}

Topology build_mri_topology(const MriLayout& layout) {
  if (layout.rows * layout.cols < layout.omitted || layout.node_count() != kMriNodes) {
    throw ConfigError("mri_layout", "layout yields " +
                                        std::to_string(layout.rows * layout.cols - layout.omitted) +
                                        " nodes, expected " + std::to_string(kMriNodes));
  }
  return build_lattice(layout);
}

Topology build_uds_topology(std::span<const int> domain_of_node) {
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t u = 0; u < domain_of_node.size(); ++u) {
    const int d = domain_of_node[u];
    if (d < 0) {
      throw ConfigError("uds_domains", "node " + std::to_string(u) + " has no clinical domain");
    }
    if (static_cast<std::size_t>(d) >= members.size()) members.resize(d + 1);
    members[d].push_back(u);
  }
  std::vector<Edge> edges;
  for (const auto& group : members) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) edges.emplace_back(group[i], group[j]);
    }
  }
  return Topology::from_edges(domain_of_node.size(), std::move(edges));
}

std::vector<int> uds_domains_from_sizes(std::span<const std::size_t> sizes) {
  std::vector<int> out;
  for (std::size_t d = 0; d < sizes.size(); ++d) out.insert(out.end(), sizes[d], static_cast<int>(d));
  return out;
}

std::vector<int> default_uds_domains() {
  const std::size_t sizes[] = {22, 22, 22, 22, 22, 20, 20, 20};
  return uds_domains_from_sizes(sizes);
}

}  // namespace synthgt::graph
