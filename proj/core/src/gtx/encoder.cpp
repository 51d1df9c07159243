// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/gtx/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthgt/error.hpp"

namespace synthgt::gtx {

EdgeIndex edge_index(const ad::NeighborLists& neighbors, std::size_t graphs) {
  EdgeIndex e;
  const std::size_t n = neighbors.nodes();
  e.src.reserve(graphs * neighbors.edges());
  e.dst.reserve(graphs * neighbors.edges());
  for (std::size_t g = 0; g < graphs; ++g) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v : neighbors.of(u)) {
        e.src.push_back(g * n + u);
        e.dst.push_back(g * n + v);
      }
    }
  }
  return e;
}

GTLayer::GTLayer(std::size_t in_dim, std::size_t heads, std::size_t head_dim, std::size_t out_dim,
                 Rng& rng)
    : query(in_dim, heads * head_dim, rng),
      key(in_dim, heads * head_dim, rng),
      value(in_dim, heads * head_dim, rng),
      output(heads * head_dim, out_dim, rng),
      heads_(heads),
      head_dim_(head_dim) {
  if (heads == 0 || head_dim == 0 || out_dim == 0 || in_dim == 0) {
    throw ConfigError("model.layers", "heads, head_dim, in_dim and out_dim must be > 0");
  }
}

void GTLayer::check_input(const ad::Tensor& x, const ad::NeighborLists& neighbors) const {
  if (x.rank() != 2 || x.cols() != in_dim()) {
    throw ContractError("GTLayer: features " + ad::shape_string(x.shape()) + " but layer expects " +
                        std::to_string(in_dim()) + " columns");
  }
  if (neighbors.nodes() == 0 || x.rows() % neighbors.nodes() != 0) {
    throw ContractError("GTLayer: " + std::to_string(x.rows()) + " rows is not a multiple of " +
                        std::to_string(neighbors.nodes()) + " nodes");
  }
}

ad::Tensor GTLayer::forward(const ad::Tensor& x, const ad::NeighborLists& neighbors) const {
  check_input(x, neighbors);
  const ad::Tensor z = ad::neighborhood_attention(query.forward(x), key.forward(x),
                                                  value.forward(x), neighbors, heads_);
  return output.forward(z);
}

ad::Tensor GTLayer::attention_weights(const ad::Tensor& x, const ad::NeighborLists& neighbors) const {
  check_input(x, neighbors);
  const EdgeIndex e = edge_index(neighbors, x.rows() / neighbors.nodes());
  const ad::Tensor q = ad::gather_rows(query.forward(x), e.src);
  const ad::Tensor k = ad::gather_rows(key.forward(x), e.dst);
  const ad::Tensor scores =
      ad::scale(ad::head_dot(q, k, heads_), 1.0 / std::sqrt(static_cast<double>(head_dim_)));
  return ad::segment_softmax(scores, e.src, x.rows());
}

ad::Tensor GTLayer::forward_reference(const ad::Tensor& x, const ad::NeighborLists& neighbors) const {
  const ad::Tensor alpha = attention_weights(x, neighbors);
  const EdgeIndex e = edge_index(neighbors, x.rows() / neighbors.nodes());
  const ad::Tensor messages = ad::head_scale(alpha, ad::gather_rows(value.forward(x), e.dst), heads_);
  return output.forward(ad::segment_sum(messages, e.src, x.rows()));
}

void GTLayer::collect(ad::ParameterList& params, const std::string& prefix) const {
  query.collect(params, prefix + "query.");
  key.collect(params, prefix + "key.");
  value.collect(params, prefix + "value.");
  output.collect(params, prefix + "output.");
}

EncoderStack::EncoderStack(graph::Modality modality, std::size_t in_dim, EncoderConfig config,
                           Rng& rng)
    : modality_(modality), in_dim_(in_dim), config_(std::move(config)) {
  if (config_.layers.empty()) throw ConfigError("model.layers", "encoder needs at least one layer");
  if (!(config_.dropout >= 0.0 && config_.dropout < 1.0)) {
    throw ConfigError("model.dropout", "must lie in [0, 1)");
  }
  std::size_t d = in_dim;
  for (const LayerSpec& spec : config_.layers) {
    layers_.emplace_back(d, spec.heads, spec.head_dim, spec.out_dim, rng);
    d = spec.out_dim;
  }
}

ad::Tensor EncoderStack::node_features(const ad::Tensor& x, const ad::NeighborLists& neighbors,
                                       bool train, Rng* rng) const {
  if (train && rng == nullptr && config_.dropout > 0.0) {
    throw ContractError("EncoderStack: training mode needs an rng for dropout");
  }
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h, neighbors);
    if (i + 1 < layers_.size()) {
      h = ad::relu(h);
      if (train) h = ad::dropout(h, config_.dropout, *rng, true);
    }
  }
  return h;
}

ad::Tensor EncoderStack::encode(const ad::Tensor& x, const ad::NeighborLists& neighbors, bool train,
                                Rng* rng) const {
  const ad::Tensor h = node_features(x, neighbors, train, rng);
  const std::size_t n = neighbors.nodes();
  const std::size_t graphs = x.rows() / n;
  std::vector<std::size_t> segment(x.rows());
  for (std::size_t i = 0; i < segment.size(); ++i) segment[i] = i / n;
  return config_.pooling == Pooling::kMax ? ad::segment_max(h, segment, graphs)
                                          : ad::segment_mean(h, segment, graphs);
}

ad::ParameterList EncoderStack::parameters() const {
  ad::ParameterList p;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(p, "layer" + std::to_string(i) + ".");
  }
  return p;
}

ad::Tensor stack_features(const graph::Cohort& cohort, std::span<const std::size_t> subjects,
                          graph::Modality modality) {
  if (subjects.empty()) throw ContractError("stack_features: no subjects selected");
  const auto& first = cohort.subjects.at(subjects[0]).graph(modality);
  std::vector<double> values;
  values.reserve(subjects.size() * first.features.size());
  for (std::size_t i : subjects) {
    const auto& g = cohort.subjects.at(i).graph(modality);
    values.insert(values.end(), g.features.begin(), g.features.end());
  }
  return ad::Tensor::from({subjects.size() * first.nodes, first.dim}, std::move(values));
}

FusionClassifier::FusionClassifier(std::vector<std::size_t> input_dims,
                                   std::vector<std::size_t> hidden, std::size_t classes, Rng& rng)
    : input_dims_(std::move(input_dims)) {
  std::vector<std::size_t> sizes{std::accumulate(input_dims_.begin(), input_dims_.end(), std::size_t{0})};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(classes);
  mlp_ = ad::Mlp(sizes, rng);
}

ad::Tensor FusionClassifier::logits(std::span<const ad::Tensor> embeddings) const {
  if (embeddings.size() != input_dims_.size()) {
    throw ContractError("FusionClassifier: expected " + std::to_string(input_dims_.size()) +
                        " modality embeddings, got " + std::to_string(embeddings.size()));
  }
  for (std::size_t m = 0; m < embeddings.size(); ++m) {
    if (embeddings[m].rank() != 2 || embeddings[m].cols() != input_dims_[m]) {
      throw ContractError("FusionClassifier: embedding " + std::to_string(m) + " has shape " +
                          ad::shape_string(embeddings[m].shape()) + ", expected width " +
                          std::to_string(input_dims_[m]));
    }
  }
  if (embeddings.size() == 1) return mlp_.forward(embeddings[0]);
  return mlp_.forward(ad::concat_last(embeddings));
}

ad::ParameterList FusionClassifier::parameters() const {
  ad::ParameterList p;
  mlp_.collect(p, "mlp.");
  return p;
}

ad::Tensor fuse_and_classify(const FusionClassifier& classifier,
                             std::span<const ad::Tensor> embeddings) {
  return ad::softmax_rows(classifier.logits(embeddings));
}

ad::Tensor embed(const EncoderStack& encoder, const graph::Cohort& cohort,
                 std::span<const std::size_t> subjects, std::size_t chunk) {
  if (subjects.empty()) throw ContractError("embed: no subjects selected");
  if (chunk == 0) chunk = subjects.size();
  ad::Tape::Pause pause;
  const ad::NeighborLists& neighbors = cohort.schema->topology(encoder.modality()).neighbor_lists();
  const std::size_t d = encoder.embedding_dim();
  std::vector<double> out;
  out.reserve(subjects.size() * d);
  for (std::size_t start = 0; start < subjects.size(); start += chunk) {
    const auto part = subjects.subspan(start, std::min(chunk, subjects.size() - start));
    const ad::Tensor z =
        encoder.encode(stack_features(cohort, part, encoder.modality()), neighbors, false, nullptr);
    out.insert(out.end(), z.data().begin(), z.data().end());
  }
  return ad::Tensor::from({subjects.size(), d}, std::move(out));
}

ad::Tensor embed_fused(std::span<const EncoderStack> encoders, const graph::Cohort& cohort,
                       std::span<const std::size_t> subjects) {
  std::vector<ad::Tensor> parts;
  for (const EncoderStack& e : encoders) parts.push_back(embed(e, cohort, subjects));
  ad::Tape::Pause pause;
  return parts.size() == 1 ? parts[0] : ad::concat_last(parts);
}

std::vector<std::size_t> all_subjects(const graph::Cohort& cohort) {
  std::vector<std::size_t> idx(cohort.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

io::Checkpoint make_encoder_checkpoint(const EncoderStack& encoder, const std::string& config_hash) {
  io::Checkpoint c;
  c.kind = "encoder";
  c.config_hash = config_hash;
  c.strings["modality"] = graph::modality_name(encoder.modality());
  c.strings["pooling"] = encoder.config().pooling == Pooling::kMax ? "max" : "mean";
  c.scalars["in_dim"] = static_cast<double>(encoder.in_dim());
  c.scalars["dropout"] = encoder.config().dropout;
  c.scalars["layers"] = static_cast<double>(encoder.config().layers.size());
  for (std::size_t i = 0; i < encoder.config().layers.size(); ++i) {
    const LayerSpec& s = encoder.config().layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    c.scalars[p + "heads"] = static_cast<double>(s.heads);
    c.scalars[p + "head_dim"] = static_cast<double>(s.head_dim);
    c.scalars[p + "out_dim"] = static_cast<double>(s.out_dim);
  }
  c.put_parameters(encoder.parameters());
  return c;
}

EncoderStack load_encoder_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.kind != "encoder") throw IoError("checkpoint kind '" + ckpt.kind + "' is not encoder");
  auto count = [&](const std::string& key) { return static_cast<std::size_t>(ckpt.scalar(key)); };
  EncoderConfig cfg;
  cfg.layers.clear();
  cfg.dropout = ckpt.scalar("dropout");
  cfg.pooling = ckpt.string("pooling") == "mean" ? Pooling::kMean : Pooling::kMax;
  for (std::size_t i = 0; i < count("layers"); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    cfg.layers.push_back({count(p + "heads"), count(p + "head_dim"), count(p + "out_dim")});
  }
  Rng rng(0);
  EncoderStack enc(graph::parse_modality(ckpt.string("modality")), count("in_dim"), cfg, rng);
  ad::ParameterList params = enc.parameters();
  ckpt.load_parameters(params);
  return enc;
}

}  // namespace synthgt::gtx
