// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/train/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "synthgt/error.hpp"
#include "synthgt/io/checkpoint.hpp"
#include "synthgt/random.hpp"
#include "synthgt/simulate/preprocess.hpp"

namespace synthgt::train {
namespace {

bool disjoint(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  return std::none_of(b.begin(), b.end(), [&](const std::string& id) { return sa.count(id) > 0; });
}

std::vector<std::string> ids_at(const graph::Cohort& c, std::span<const std::size_t> rows) {
  std::vector<std::string> out;
  for (std::size_t r : rows) out.push_back(c.subjects[r].id);
  return out;
}

std::vector<eval::Prediction> predictions(const graph::Cohort& c, std::span<const std::size_t> rows,
                                          const std::vector<double>& probs, int fold) {
  std::vector<eval::Prediction> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const graph::Subject& s = c.subjects[rows[i]];
    out.push_back({s.id, s.label, probs[i], fold, s.age, s.sex, s.apoe4});
  }
  return out;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename F>
auto stage(FoldResult& r, const std::string& name, F&& fn) {
  Stopwatch watch;
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      r.seconds[name] += watch.seconds();
    } else {
      auto value = fn();
      r.seconds[name] += watch.seconds();
      return value;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, r.fold, e.what());
  }
}

bool wants(const PipelineConfig& c, ModelKind k) {
  return std::find(c.models.begin(), c.models.end(), k) != c.models.end();
}

void save(FoldResult& r, const PipelineConfig& c, const std::string& name, const io::Checkpoint& ckpt) {
  if (c.checkpoint_dir.empty()) return;
  const auto path = c.checkpoint_dir / ("fold" + std::to_string(r.fold)) / (name + ".json");
  io::write_checkpoint(path, ckpt);
  r.checkpoints[name] = path.string();
}

}  // namespace

const char* model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPretrained: return "gt_pretrained";
    case ModelKind::kRandomFrozen: return "gt_random_frozen";
    case ModelKind::kEarlyFusion: return "early_fusion_dnn";
    case ModelKind::kLateFusion: return "late_fusion_dnn";
  }
  return "?";
}

ModelKind parse_model(const std::string& name) {
  for (ModelKind k : all_models()) {
    if (name == model_name(k)) return k;
  }
  throw ConfigError("train.models", "unknown model '" + name + "'");
}

std::vector<ModelKind> all_models() {
  return {ModelKind::kPretrained, ModelKind::kRandomFrozen, ModelKind::kEarlyFusion, ModelKind::kLateFusion};
}

void PipelineConfig::validate() const {
  train.validate();
  if (ddpm.steps == 0) throw ConfigError("ddpm.steps", "must be > 0");
  if (!(ddpm.beta_start > 0.0 && ddpm.beta_start <= ddpm.beta_end && ddpm.beta_end < 1.0)) {
    throw ConfigError("ddpm.beta_start", "need 0 < beta_start <= beta_end < 1");
  }
  if (ddpm.batch_size == 0) throw ConfigError("ddpm.batch_size", "must be > 0");
  if (!(ddpm.learning_rate > 0.0)) throw ConfigError("ddpm.learning_rate", "must be > 0");
  if (ddpm.synthetic_per_class == 0) throw ConfigError("ddpm.synthetic_per_class", "must be > 0");
  if (ddpm.time_dim == 0 || ddpm.time_dim % 2 != 0) throw ConfigError("ddpm.time_dim", "must be even and > 0");
  if (encoder.layers.empty()) throw ConfigError("model.layers", "encoder needs at least one layer");
  if (!(encoder.dropout >= 0.0 && encoder.dropout < 1.0)) throw ConfigError("model.dropout", "must lie in [0, 1)");
  if (knn_k == 0) throw ConfigError("sim.knn_k", "must be > 0");
  if (jobs == 0) throw ConfigError("jobs", "must be > 0");
  if (models.empty()) throw ConfigError("train.models", "select at least one model");
}

bool FoldAudit::all() const {
  return partition_ok && ddpm_inputs_clean && standardization_clean && imputation_clean &&
         validation_clean && encoders_frozen;
}

const ModelRun* FoldResult::find(ModelKind kind) const {
  for (const ModelRun& m : models) {
    if (m.kind == kind) return &m;
  }
  return nullptr;
}

bool PipelineResult::has(ModelKind kind) const {
  return !folds.empty() && folds.front().find(kind) != nullptr;
}

eval::PredictionSet PipelineResult::pooled(ModelKind kind) const {
  eval::PredictionSet s{model_name(kind), {}};
  for (const FoldResult& f : folds) {
    if (const ModelRun* m = f.find(kind)) s.items.insert(s.items.end(), m->test.begin(), m->test.end());
  }
  return s;
}

eval::PredictionSet PipelineResult::pooled_validation(ModelKind kind) const {
  eval::PredictionSet s{model_name(kind), {}};
  for (const FoldResult& f : folds) {
    if (const ModelRun* m = f.find(kind)) {
      s.items.insert(s.items.end(), m->validation.begin(), m->validation.end());
    }
  }
  return s;
}

FoldResult run_fold(const graph::Cohort& real, std::span<const int> assignment, int fold,
                    const PipelineConfig& config) {
  FoldResult r;
  r.fold = fold;
  const std::uint64_t seed = config.train.seed;
  const auto k = static_cast<std::uint64_t>(fold);
  auto note = [&](const std::string& msg) {
    if (config.progress) config.progress("fold " + std::to_string(fold) + ": " + msg);
  };

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) (assignment[i] == fold ? test_rows : train_rows).push_back(i);
  const graph::Cohort train_raw = real.subset(train_rows);
  const graph::Cohort test_raw = real.subset(test_rows);
  r.train_ids = train_raw.ids();
  r.test_ids = test_raw.ids();
  r.audit.partition_ok = !test_rows.empty() && disjoint(r.train_ids, r.test_ids);

  note("imputing");
  graph::Cohort train_imp, test_imp;
  stage(r, "impute", [&] {
    train_imp = simulate::has_missing(train_raw) ? simulate::knn_impute(train_raw, config.knn_k) : train_raw;
    test_imp = simulate::has_missing(test_raw) ? simulate::knn_impute(test_raw, train_raw, config.knn_k) : test_raw;
  });
  r.audit.imputation_clean = disjoint(train_raw.ids(), r.test_ids);

  graph::Cohort train_z, test_z;
  stage(r, "standardize", [&] {
    const graph::Standardization table = simulate::fit_standardization(train_imp);
    train_z = simulate::apply_standardization(table, train_imp);
    test_z = simulate::apply_standardization(table, test_imp);
    r.audit.standardization_clean = disjoint(table.fitted_on, r.test_ids) && table.fitted_on == r.train_ids;
  });

  if (config.keep_fold_data) r.real_train = std::make_shared<const graph::Cohort>(train_z);
  const std::vector<int> train_labels = train_z.labels();
  const Split split = stage(r, "split", [&] {
    return stratified_holdout(train_labels, gtx::all_subjects(train_z), config.train.downstream.val_fraction,
                              derive_seed(seed, "fold.holdout", k));
  });
  r.validation_ids = ids_at(train_z, split.validation);
  r.audit.validation_clean = disjoint(r.validation_ids, r.test_ids);
  const std::vector<std::size_t> test_all = gtx::all_subjects(test_z);

  auto run_model = [&](ModelKind kind, const Trainable& model, const Blocks& train_blocks,
                       const Blocks& test_blocks) {
    const std::string name = model_name(kind);
    note("training " + name);
    ModelRun run;
    run.kind = kind;
    stage(r, "downstream." + name, [&] {
      run.fit = fit_classifier(model, train_blocks, train_labels, split.train, split.validation,
                               config.train.downstream, derive_seed(seed, "fold.fit." + name, k));
      run.test = predictions(test_z, test_all, predict_proba(model, test_blocks, test_all), fold);
      run.validation = predictions(train_z, split.validation,
                                   predict_proba(model, train_blocks, split.validation), fold);
      run.classifier_hash = model.parameters.hash();
      save(r, config, "classifier_" + name, make_classifier_checkpoint(model.parameters, "classifier", config.config_hash));
    });
    r.models.push_back(std::move(run));
  };

  auto run_frozen = [&](ModelKind kind, const std::vector<gtx::EncoderStack>& encoders) {
    const std::string before = encoders_hash(encoders);
    const Blocks train_blocks = stage(r, "embed", [&] { return embedding_blocks(encoders, train_z); });
    const Blocks test_blocks = stage(r, "embed", [&] { return embedding_blocks(encoders, test_z); });
    Rng init = make_rng(seed, std::string("fold.init.") + model_name(kind), k);
    const gtx::FusionClassifier clf(train_blocks.dims, config.classifier_hidden, 2, init);
    run_model(kind, trainable(clf), train_blocks, test_blocks);
    const std::string after = encoders_hash(encoders);
    if (kind == ModelKind::kPretrained) {
      r.encoder_hash_before = before;
      r.encoder_hash_after = after;
    }
    if (before != after) throw StageError("downstream", fold, "frozen encoder weights changed");
  };

  r.audit.encoders_frozen = true;
  if (wants(config, ModelKind::kPretrained)) {
    const DdpmStageConfig& d = config.ddpm;
    const ddpm::NoiseSchedule schedule = ddpm::NoiseSchedule::linear(d.steps, d.beta_start, d.beta_end);
    const ddpm::LabeledVectors data = ddpm::flatten_cohort(train_z);
    r.ddpm_ids = train_z.ids();
    r.audit.ddpm_inputs_clean = disjoint(r.ddpm_ids, r.test_ids);
    note("training DDPM on " + std::to_string(data.size()) + " subjects");
    ddpm::DenoiserConfig dcfg;
    dcfg.hidden = d.hidden;
    dcfg.time_dim = d.time_dim;
    dcfg.label_dim = d.label_dim;
    const ddpm::DdpmTrainResult trained = stage(r, "ddpm", [&] {
      ddpm::DdpmTrainConfig tc;
      tc.epochs = d.epochs;
      tc.batch_size = d.batch_size;
      tc.learning_rate = d.learning_rate;
      tc.seed = derive_seed(seed, "fold.ddpm", k);
      tc.config_hash = config.config_hash;
      return ddpm::train_ddpm(data, schedule, dcfg, tc);
    });
    r.ddpm_initial_loss = trained.initial_loss;
    r.ddpm_final_loss = trained.final_loss;
    save(r, config, "ddpm", ddpm::make_checkpoint(trained.denoiser, schedule, config.config_hash));

    note("sampling " + std::to_string(2 * d.synthetic_per_class) + " synthetic subjects");
    const graph::Cohort synth = stage(r, "ddpm_sample", [&] {
      const std::vector<std::size_t> per_class{d.synthetic_per_class, d.synthetic_per_class};
      ddpm::SampleOptions opts;
      opts.variance = d.variance;
      return ddpm::sample_cohort(trained.denoiser, schedule, per_class, train_z,
                                 derive_seed(seed, "fold.sample", k), opts);
    });

    std::vector<gtx::EncoderStack> encoders;
    for (graph::Modality m : {graph::Modality::kMri, graph::Modality::kUds}) {
      const std::string mod = graph::modality_name(m);
      note("pretraining " + mod + " encoder");
      PretrainResult p = stage(r, "pretrain." + mod, [&] {
        return pretrain_encoder(m, synth, config.encoder, config.train.pretrain,
                                derive_seed(seed, "fold.pretrain", k));
      });
      r.pretrain_accuracy[mod] = p.train_accuracy;
      save(r, config, "encoder_" + mod, gtx::make_encoder_checkpoint(p.encoder, config.config_hash));
      encoders.push_back(std::move(p.encoder));
    }
    run_frozen(ModelKind::kPretrained, encoders);
    if (config.keep_fold_data) {
      r.synthetic = std::make_shared<const graph::Cohort>(synth);
      r.encoders = std::move(encoders);
    }
  } else {
    r.audit.ddpm_inputs_clean = true;
  }

  if (wants(config, ModelKind::kRandomFrozen)) {
    Rng init = make_rng(seed, "fold.random_encoders", k);
    std::vector<gtx::EncoderStack> encoders;
    for (graph::Modality m : {graph::Modality::kMri, graph::Modality::kUds}) {
      encoders.emplace_back(m, train_z.subjects[0].graph(m).dim, config.encoder, init);
    }
    run_frozen(ModelKind::kRandomFrozen, encoders);
  }

  if (wants(config, ModelKind::kEarlyFusion)) {
    const Blocks train_blocks = flat_block(train_z);
    const Blocks test_blocks = flat_block(test_z);
    Rng init = make_rng(seed, "fold.init.early_fusion_dnn", k);
    const gtx::FusionClassifier clf(train_blocks.dims, config.classifier_hidden, 2, init);
    run_model(ModelKind::kEarlyFusion, trainable(clf), train_blocks, test_blocks);
  }

  if (wants(config, ModelKind::kLateFusion)) {
    const Blocks train_blocks = modality_blocks(train_z);
    const Blocks test_blocks = modality_blocks(test_z);
    Rng init = make_rng(seed, "fold.init.late_fusion_dnn", k);
    const LateFusionNet net(train_blocks.dims, config.late_branch, config.classifier_hidden, 2, init);
    run_model(ModelKind::kLateFusion, trainable(net), train_blocks, test_blocks);
  }
  return r;
}

PipelineResult run_pipeline(const graph::Cohort& real, const PipelineConfig& config) {
  config.validate();
  PipelineResult result;
  result.assignment = stratified_kfold(real.labels(), config.train.folds, config.train.seed);
  result.assignment_hash = assignment_hash(result.assignment);
  const std::size_t folds = config.train.folds;
  result.folds.resize(folds);
  std::vector<std::exception_ptr> errors(folds);
  std::mutex mutex;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t f;
      {
        std::lock_guard lock(mutex);
        if (next >= folds) return;
        f = next++;
      }
      try {
        result.folds[f] = run_fold(real, result.assignment, static_cast<int>(f), config);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(config.jobs, folds);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

PipelineResult baselines(const graph::Cohort& real, const PipelineConfig& config) {
  PipelineConfig c = config;
  c.models = {ModelKind::kRandomFrozen, ModelKind::kEarlyFusion, ModelKind::kLateFusion};
  return run_pipeline(real, c);
}

}  // namespace synthgt::train
