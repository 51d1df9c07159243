// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "synthgt/autodiff/tensor.hpp"
#include "synthgt/random.hpp"

namespace synthgt::ad {

// Compressed neighbor lists of one graph: neighbors of node u are
// indices[offsets[u] .. offsets[u+1]). Batched tensors stack several graphs
// with identical topology along the row axis.
struct NeighborLists {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;

  std::size_t nodes() const { return offsets.size() - 1; }
  std::size_t edges() const { return indices.size(); }
  std::span<const std::size_t> of(std::size_t u) const {
    return {indices.data() + offsets[u], offsets[u + 1] - offsets[u]};
  }
};

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise sum; `b` may also match a trailing suffix of a's shape, in which
// case it is broadcast over the leading dimensions (bias add).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Softmax along the last axis of a 2-D tensor.
Tensor softmax_rows(const Tensor& a);

// Softmax over the rows sharing a segment id, independently per column.
// `scores` is [E] or [E,H]; segment has E entries in [0, segments).
Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t segments);

// Column-wise reductions of the rows of x grouped by segment id -> [segments, cols].
// Empty segments yield zeros.
Tensor segment_max(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments);
Tensor segment_mean(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments);
Tensor segment_sum(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments);

Tensor concat_last(std::span<const Tensor> parts);
Tensor concat_last(std::initializer_list<Tensor> parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

// Inverted dropout: in train mode each entry is zeroed with probability p and
// survivors are scaled by 1/(1-p). Eval mode (or p == 0) returns x unchanged.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool train);

// Per-head row-wise dot products: q, k are [E, H*dh] -> [E, H].
Tensor head_dot(const Tensor& q, const Tensor& k, std::size_t heads);
// Scales each head block of v [E, H*dh] by weights [E, H].
Tensor head_scale(const Tensor& weights, const Tensor& v, std::size_t heads);

// Multi-head attention restricted to each node's neighbor list. q, k, v are
// [G*n, H*dh] for G stacked graphs of n nodes. For node u and head h:
//   a(u->v) = softmax_{v in N(u)} <q_u, k_v> / sqrt(dh),  z_u = sum_v a(u->v) v_v
// Fused forward/backward; equivalent to composing gather_rows, head_dot,
// segment_softmax, head_scale and segment_sum.
Tensor neighborhood_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              const NeighborLists& neighbors, std::size_t heads);

// Mean negative log-likelihood of integer labels under row-wise softmax.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
// Mean of squared differences over all entries.
Tensor mse(const Tensor& prediction, const Tensor& target);

}  // namespace synthgt::ad
