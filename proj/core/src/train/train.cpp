// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthgt/autodiff/adam.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/error.hpp"
#include "synthgt/hash.hpp"
#include "synthgt/random.hpp"

namespace synthgt::train {
namespace {

void seeded_shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::vector<double>> snapshot(const ad::ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& e : params.entries()) out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

void restore(const ad::ParameterList& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    ad::Tensor t = params.entries()[i].tensor;
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
  }
}

std::vector<ad::Tensor> as_trainable(const ad::ParameterList& params) {
  std::vector<ad::Tensor> t = params.tensors();
  for (ad::Tensor& x : t) x.set_requires_grad(true);
  return t;
}

std::vector<int> pick(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(labels[r]);
  return y;
}

}  // namespace

void TrainConfig::validate() const {
  if (folds < 2) throw ConfigError("train.folds", "must be >= 2");
  if (downstream.patience < 1) throw ConfigError("train.downstream.patience", "must be >= 1");
  if (!(downstream.val_fraction > 0.0 && downstream.val_fraction < 1.0)) {
    throw ConfigError("train.downstream.val_fraction", "must lie in (0, 1)");
  }
  if (downstream.batch_size == 0) throw ConfigError("train.downstream.batch_size", "must be > 0");
  if (downstream.max_epochs == 0) throw ConfigError("train.downstream.max_epochs", "must be > 0");
  if (!(downstream.learning_rate > 0.0)) throw ConfigError("train.downstream.learning_rate", "must be > 0");
  if (pretrain.batch_size == 0) throw ConfigError("train.pretrain.batch_size", "must be > 0");
  if (!(pretrain.learning_rate > 0.0)) throw ConfigError("train.pretrain.learning_rate", "must be > 0");
  if (!(pretrain.dropout >= 0.0 && pretrain.dropout < 1.0)) {
    throw ConfigError("train.pretrain.dropout", "must lie in [0, 1)");
  }
}

std::vector<int> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("stratified_kfold: k must be >= 2");
  std::vector<int> folds(labels.size(), -1);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < k) {
      throw ContractError("stratified_kfold: class " + std::to_string(cls) + " has " +
                          std::to_string(members.size()) + " members, fewer than k = " + std::to_string(k));
    }
    Rng rng = make_rng(seed, "kfold", static_cast<std::uint64_t>(cls));
    seeded_shuffle(members, rng);
    for (std::size_t j = 0; j < members.size(); ++j) folds[members[j]] = static_cast<int>(j % k);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (folds[i] < 0) throw ContractError("stratified_kfold: label " + std::to_string(labels[i]) + " is not 0/1");
  }
  return folds;
}

std::string assignment_hash(std::span<const int> folds) {
  Fnv1a h;
  for (int f : folds) h.update(static_cast<std::uint64_t>(f));
  return h.hex();
}

Split stratified_holdout(std::span<const int> labels, std::span<const std::size_t> pool,
                         double fraction, std::uint64_t seed) {
  Split s;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i : pool) {
      if (labels[i] == cls) members.push_back(i);
    }
    Rng rng = make_rng(seed, "holdout", static_cast<std::uint64_t>(cls));
    seeded_shuffle(members, rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    s.validation.insert(s.validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.insert(s.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  if (s.validation.empty()) throw ContractError("stratified_holdout: validation split is empty");
  if (s.train.empty()) throw ContractError("stratified_holdout: training split is empty");
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

PretrainResult pretrain_encoder(graph::Modality modality, const graph::Cohort& synth,
                                const gtx::EncoderConfig& encoder, const PretrainConfig& config,
                                std::uint64_t seed) {
  if (synth.size() == 0) throw ContractError("pretrain_encoder: empty synthetic cohort");
  const std::string tag = std::string("pretrain.") + graph::modality_name(modality);
  gtx::EncoderConfig cfg = encoder;
  cfg.dropout = config.dropout;
  Rng init = make_rng(seed, tag + ".init");
  PretrainResult result;
  result.encoder = gtx::EncoderStack(modality, synth.subjects[0].graph(modality).dim, cfg, init);
  ad::Linear head(result.encoder.embedding_dim(), 2, init);

  ad::ParameterList params = result.encoder.parameters();
  head.collect(params, "head.");
  std::vector<ad::Tensor> tensors = as_trainable(params);
  ad::AdamState adam = ad::AdamState::for_params(tensors, config.learning_rate);

  const ad::NeighborLists& neighbors = synth.schema->topology(modality).neighbor_lists();
  const std::vector<int> labels = synth.labels();
  std::vector<std::size_t> order = gtx::all_subjects(synth);
  Rng rng = make_rng(seed, tag + ".train");
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      const std::vector<int> y = pick(labels, batch);
      ad::Tape tape;
      ad::Tape::Scope scope(tape);
      const ad::Tensor z = result.encoder.encode(gtx::stack_features(synth, batch, modality), neighbors, true, &rng);
      const ad::Tensor loss = ad::softmax_cross_entropy(head.forward(z), y);
      if (!std::isfinite(loss.item())) {
        throw TrainingError("pretrain_encoder(" + std::string(graph::modality_name(modality)) +
                            "): non-finite loss at epoch " + std::to_string(epoch) + " (learning rate " +
                            std::to_string(config.learning_rate) + ")");
      }
      tape.backward(loss);
      ad::adam_step(tensors, adam);
      total += loss.item() * static_cast<double>(batch.size());
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  for (ad::Tensor& t : tensors) t.set_requires_grad(false);

  const std::vector<std::size_t> all = gtx::all_subjects(synth);
  const ad::Tensor z = gtx::embed(result.encoder, synth, all);
  std::size_t correct = 0;
  {
    ad::Tape::Pause pause;
    const ad::Tensor logits = head.forward(z);
    for (std::size_t i = 0; i < all.size(); ++i) {
      const int pred = logits.data()[2 * i + 1] > logits.data()[2 * i] ? 1 : 0;
      if (pred == labels[i]) ++correct;
    }
  }
  const double n = static_cast<double>(all.size());
  const double positives = static_cast<double>(synth.count_label(1));
  result.train_accuracy = static_cast<double>(correct) / n;
  result.majority_rate = std::max(positives, n - positives) / n;
  return result;
}

void Blocks::add(std::size_t dim, std::vector<double> values) {
  if (dim == 0 || values.size() % dim != 0) throw DimensionError("Blocks::add: values not a multiple of dim");
  const std::size_t r = values.size() / dim;
  if (!data.empty() && r != rows) {
    throw DimensionError("Blocks::add: " + std::to_string(r) + " rows, expected " + std::to_string(rows));
  }
  rows = r;
  dims.push_back(dim);
  data.push_back(std::move(values));
}

std::vector<ad::Tensor> Blocks::gather(std::span<const std::size_t> selected) const {
  std::vector<ad::Tensor> out;
  for (std::size_t b = 0; b < dims.size(); ++b) {
    std::vector<double> v;
    v.reserve(selected.size() * dims[b]);
    for (std::size_t r : selected) {
      if (r >= rows) throw ContractError("Blocks::gather: row " + std::to_string(r) + " out of range");
      const auto first = data[b].begin() + static_cast<std::ptrdiff_t>(r * dims[b]);
      v.insert(v.end(), first, first + static_cast<std::ptrdiff_t>(dims[b]));
    }
    out.push_back(ad::Tensor::from({selected.size(), dims[b]}, std::move(v)));
  }
  return out;
}

Blocks embedding_blocks(std::span<const gtx::EncoderStack> encoders, const graph::Cohort& cohort) {
  Blocks b;
  const std::vector<std::size_t> all = gtx::all_subjects(cohort);
  for (const gtx::EncoderStack& e : encoders) {
    const ad::Tensor z = gtx::embed(e, cohort, all);
    b.add(z.cols(), std::vector<double>(z.data().begin(), z.data().end()));
  }
  return b;
}

Blocks flat_block(const graph::Cohort& cohort) {
  Blocks b;
  b.add(graph::kFlatDim, graph::flatten_cohort(cohort));
  return b;
}

Blocks modality_blocks(const graph::Cohort& cohort) {
  std::vector<double> mri, uds;
  for (const graph::Subject& s : cohort.subjects) {
    const auto& m = s.graph(graph::Modality::kMri).features;
    const auto& u = s.graph(graph::Modality::kUds).features;
    mri.insert(mri.end(), m.begin(), m.end());
    uds.insert(uds.end(), u.begin(), u.end());
  }
  Blocks b;
  b.add(graph::kMriValues, std::move(mri));
  b.add(graph::kUdsNodes * graph::kUdsFeatures, std::move(uds));
  return b;
}

LateFusionNet::LateFusionNet(std::vector<std::size_t> input_dims, std::vector<std::size_t> branch_sizes,
                             std::vector<std::size_t> head_hidden, std::size_t classes, Rng& rng) {
  if (branch_sizes.empty()) throw ConfigError("model.late_branch", "needs at least one layer");
  std::size_t concat = 0;
  for (std::size_t d : input_dims) {
    std::vector<std::size_t> sizes{d};
    sizes.insert(sizes.end(), branch_sizes.begin(), branch_sizes.end());
    branches_.emplace_back(sizes, rng);
    concat += branch_sizes.back();
  }
  std::vector<std::size_t> sizes{concat};
  sizes.insert(sizes.end(), head_hidden.begin(), head_hidden.end());
  sizes.push_back(classes);
  head_ = ad::Mlp(sizes, rng);
}

ad::Tensor LateFusionNet::logits(std::span<const ad::Tensor> blocks) const {
  if (blocks.size() != branches_.size()) {
    throw ContractError("LateFusionNet: expected " + std::to_string(branches_.size()) + " blocks, got " +
                        std::to_string(blocks.size()));
  }
  std::vector<ad::Tensor> parts;
  for (std::size_t i = 0; i < blocks.size(); ++i) parts.push_back(ad::relu(branches_[i].forward(blocks[i])));
  return head_.forward(ad::concat_last(parts));
}

ad::ParameterList LateFusionNet::parameters() const {
  ad::ParameterList p;
  for (std::size_t i = 0; i < branches_.size(); ++i) branches_[i].collect(p, "branch" + std::to_string(i) + ".");
  head_.collect(p, "head.");
  return p;
}

Trainable trainable(const gtx::FusionClassifier& c) {
  return {[&c](std::span<const ad::Tensor> b) { return c.logits(b); }, c.parameters()};
}

Trainable trainable(const LateFusionNet& c) {
  return {[&c](std::span<const ad::Tensor> b) { return c.logits(b); }, c.parameters()};
}

double mean_cross_entropy(const Trainable& model, const Blocks& blocks, std::span<const int> labels,
                          std::span<const std::size_t> rows) {
  ad::Tape::Pause pause;
  const std::vector<int> y = pick(labels, rows);
  return ad::softmax_cross_entropy(model.logits(blocks.gather(rows)), y).item();
}

std::vector<double> predict_proba(const Trainable& model, const Blocks& blocks,
                                  std::span<const std::size_t> rows) {
  ad::Tape::Pause pause;
  const ad::Tensor p = ad::softmax_rows(model.logits(blocks.gather(rows)));
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = p.data()[2 * i + 1];
  return out;
}

FitResult fit_classifier(const Trainable& model, const Blocks& blocks, std::span<const int> labels,
                         std::span<const std::size_t> train_rows,
                         std::span<const std::size_t> val_rows, const DownstreamConfig& config,
                         std::uint64_t seed) {
  if (val_rows.empty()) throw ContractError("fit_classifier: empty validation split");
  if (train_rows.empty()) throw ContractError("fit_classifier: empty training split");
  if (labels.size() != blocks.rows) throw DimensionError("fit_classifier: labels and blocks differ in rows");
  std::vector<ad::Tensor> tensors = as_trainable(model.parameters);
  ad::AdamState adam = ad::AdamState::for_params(tensors, config.learning_rate);
  Rng rng = make_rng(seed, "downstream.batches");
  std::vector<std::size_t> order(train_rows.begin(), train_rows.end());

  FitResult fit;
  fit.best_val_loss = mean_cross_entropy(model, blocks, labels, val_rows);
  auto best = snapshot(model.parameters);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    seeded_shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      const std::vector<int> y = pick(labels, batch);
      ad::Tape tape;
      ad::Tape::Scope scope(tape);
      const ad::Tensor loss = ad::softmax_cross_entropy(model.logits(blocks.gather(batch)), y);
      if (!std::isfinite(loss.item())) {
        throw TrainingError("fit_classifier: non-finite loss at epoch " + std::to_string(epoch) +
                            " (learning rate " + std::to_string(config.learning_rate) + ")");
      }
      tape.backward(loss);
      ad::adam_step(tensors, adam);
      total += loss.item() * static_cast<double>(batch.size());
    }
    fit.train_loss.push_back(total / static_cast<double>(order.size()));
    const double val = mean_cross_entropy(model, blocks, labels, val_rows);
    fit.val_loss.push_back(val);
    fit.epochs_run = epoch;
    if (val < fit.best_val_loss) {
      fit.best_val_loss = val;
      fit.best_epoch = epoch;
      best = snapshot(model.parameters);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  restore(model.parameters, best);
  for (ad::Tensor& t : tensors) t.set_requires_grad(false);
  return fit;
}

std::string encoders_hash(std::span<const gtx::EncoderStack> encoders) {
  Fnv1a h;
  for (const gtx::EncoderStack& e : encoders) h.update(e.parameters().hash());
  return h.hex();
}

DownstreamResult train_downstream(std::span<const gtx::EncoderStack> encoders,
                                  const graph::Cohort& real_train,
                                  const std::vector<std::size_t>& hidden,
                                  const DownstreamConfig& config, std::uint64_t seed) {
  DownstreamResult r;
  r.encoder_hash_before = encoders_hash(encoders);
  const std::vector<int> labels = real_train.labels();
  const std::vector<std::size_t> pool = gtx::all_subjects(real_train);
  r.split = stratified_holdout(labels, pool, config.val_fraction, seed);
  const Blocks blocks = embedding_blocks(encoders, real_train);
  Rng init = make_rng(seed, "downstream.init");
  r.classifier = gtx::FusionClassifier(blocks.dims, hidden, 2, init);
  r.fit = fit_classifier(trainable(r.classifier), blocks, labels, r.split.train, r.split.validation, config, seed);
  r.encoder_hash_after = encoders_hash(encoders);
  if (r.encoder_hash_after != r.encoder_hash_before) {
    throw ContractError("train_downstream: frozen encoder weights changed");
  }
  return r;
}

io::Checkpoint make_classifier_checkpoint(const ad::ParameterList& params, const std::string& kind,
                                          const std::string& config_hash) {
  io::Checkpoint c;
  c.kind = kind;
  c.config_hash = config_hash;
  c.put_parameters(params);
  return c;
}

}  // namespace synthgt::train
