// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "synthgt/autodiff/nn.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/graph/cohort.hpp"
#include "synthgt/graph/topology.hpp"
#include "synthgt/io/checkpoint.hpp"
#include "synthgt/random.hpp"

namespace synthgt::gtx {

// Edge list of G stacked copies of one graph: edge e goes from src[e] to
// dst[e] (dst in the neighbor list of src, self included).
struct EdgeIndex {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
};
EdgeIndex edge_index(const ad::NeighborLists& neighbors, std::size_t graphs);

// One graph-transformer block: per-head Q/K/V projections, neighborhood
// attention scaled by 1/sqrt(d_h), head concatenation and output projection.
class GTLayer {
 public:
  GTLayer() = default;
  GTLayer(std::size_t in_dim, std::size_t heads, std::size_t head_dim, std::size_t out_dim,
          Rng& rng);

  // x is [G*n, in_dim] for G stacked graphs sharing `neighbors` (n nodes).
  ad::Tensor forward(const ad::Tensor& x, const ad::NeighborLists& neighbors) const;
  // Same result composed from generic primitives (slower; used as a cross-check).
  ad::Tensor forward_reference(const ad::Tensor& x, const ad::NeighborLists& neighbors) const;
  // Attention weights [E, heads] in edge_index order.
  ad::Tensor attention_weights(const ad::Tensor& x, const ad::NeighborLists& neighbors) const;

  void collect(ad::ParameterList& params, const std::string& prefix) const;

  std::size_t in_dim() const { return query.in_dim(); }
  std::size_t out_dim() const { return output.out_dim(); }
  std::size_t heads() const { return heads_; }
  std::size_t head_dim() const { return head_dim_; }

  ad::Linear query, key, value, output;

 private:
  void check_input(const ad::Tensor& x, const ad::NeighborLists& neighbors) const;
  std::size_t heads_ = 0;
  std::size_t head_dim_ = 0;
};

enum class Pooling { kMax, kMean };

struct LayerSpec {
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t out_dim = 64;
};

struct EncoderConfig {
  std::vector<LayerSpec> layers{{4, 16, 64}, {4, 16, 64}, {4, 8, 32}};
  double dropout = 0.3;
  Pooling pooling = Pooling::kMax;
};

// Three GT blocks with ReLU and dropout between them, then global pooling.
class EncoderStack {
 public:
  EncoderStack() = default;
  EncoderStack(graph::Modality modality, std::size_t in_dim, EncoderConfig config, Rng& rng);

  // Node features [G*n, in_dim] -> graph embeddings [G, embedding_dim].
  // Dropout is active only when `train` is set (then `rng` must be non-null).
  ad::Tensor encode(const ad::Tensor& x, const ad::NeighborLists& neighbors, bool train,
                    Rng* rng) const;
  // Per-node features after the last block, before pooling.
  ad::Tensor node_features(const ad::Tensor& x, const ad::NeighborLists& neighbors, bool train,
                           Rng* rng) const;

  ad::ParameterList parameters() const;
  graph::Modality modality() const { return modality_; }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t embedding_dim() const { return layers_.back().out_dim(); }
  const EncoderConfig& config() const { return config_; }
  const std::vector<GTLayer>& layers() const { return layers_; }
  std::vector<GTLayer>& mutable_layers() { return layers_; }

 private:
  graph::Modality modality_ = graph::Modality::kMri;
  std::size_t in_dim_ = 0;
  EncoderConfig config_;
  std::vector<GTLayer> layers_;
};

// Node features of the selected subjects stacked as [count*n, dim].
ad::Tensor stack_features(const graph::Cohort& cohort, std::span<const std::size_t> subjects,
                          graph::Modality modality);

// Dense head over the concatenated modality embeddings.
class FusionClassifier {
 public:
  FusionClassifier() = default;
  FusionClassifier(std::vector<std::size_t> input_dims, std::vector<std::size_t> hidden,
                   std::size_t classes, Rng& rng);

  // One [B, dim_m] embedding per modality in fixed order -> logits [B, classes].
  // Throws ContractError on a wrong modality count.
  ad::Tensor logits(std::span<const ad::Tensor> embeddings) const;
  ad::ParameterList parameters() const;
  const std::vector<std::size_t>& input_dims() const { return input_dims_; }
  const ad::Mlp& mlp() const { return mlp_; }

 private:
  std::vector<std::size_t> input_dims_;
  ad::Mlp mlp_;
};

// Softmax probabilities [B, classes] (no gradient tracking needed).
ad::Tensor fuse_and_classify(const FusionClassifier& classifier,
                             std::span<const ad::Tensor> embeddings);

// Eval-mode graph embeddings [count, embedding_dim] of the selected subjects,
// computed in chunks with recording paused.
ad::Tensor embed(const EncoderStack& encoder, const graph::Cohort& cohort,
                 std::span<const std::size_t> subjects, std::size_t chunk = 256);
// Modality embeddings concatenated in encoder order, [count, sum of dims].
ad::Tensor embed_fused(std::span<const EncoderStack> encoders, const graph::Cohort& cohort,
                       std::span<const std::size_t> subjects);
std::vector<std::size_t> all_subjects(const graph::Cohort& cohort);

io::Checkpoint make_encoder_checkpoint(const EncoderStack& encoder, const std::string& config_hash);
EncoderStack load_encoder_checkpoint(const io::Checkpoint& ckpt);

}  // namespace synthgt::gtx
