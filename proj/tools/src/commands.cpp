// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "report.hpp"
#include "synthgt/ddpm/ddpm.hpp"
#include "synthgt/distshift/distshift.hpp"
#include "synthgt/error.hpp"
#include "synthgt/eval/summary.hpp"
#include "synthgt/io/checkpoint.hpp"
#include "synthgt/io/cohort_io.hpp"
#include "synthgt/io/predictions_io.hpp"
#include "synthgt/io/text.hpp"
#include "synthgt/log.hpp"
#include "synthgt/random.hpp"
#include "synthgt/simulate/preprocess.hpp"
#include "synthgt/simulate/simulator.hpp"
#include "synthgt/train/pipeline.hpp"
#include "synthgt/train/train.hpp"

#ifndef SYNTHGT_VERSION
#define SYNTHGT_VERSION "0.0.0"
#endif

namespace synthgt::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kValidationSuffix = ".validation";

// Stage timings and artifacts of one output directory. An existing manifest
// with the same config hash is extended, anything else is replaced.
class Manifest {
 public:
  Manifest(const RunConfig& config, std::string command) : config_(config), layout_{config.output_dir} {
    const fs::path path = layout_.manifest();
    if (fs::exists(path)) {
      try {
        Json old = Json::parse(io::read_file(path));
        if (old.value("config_hash", "") == config.hash()) {
          stages_ = old.value("stages", Json::object());
          artifacts_ = old.value("artifacts", Json::object());
          commands_ = old.value("commands", Json::array());
        }
      } catch (const std::exception&) {
      }
    }
    commands_.push_back(std::move(command));
  }

  const Layout& layout() const { return layout_; }

  template <typename F>
  auto stage(const std::string& name, F&& body) -> decltype(body()) {
    log::info("stage " + name);
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      stages_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record();
      } else {
        auto result = body();
        record();
        return result;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const StageError& e) {
      fail(name);
      throw;
    } catch (const std::exception& e) {
      fail(name);
      throw StageError(name, -1, e.what());
    }
  }

  void artifact(const std::string& name, const fs::path& path) {
    artifacts_[name] = path.lexically_relative(layout_.root).generic_string();
  }

  void write() const {
    Json j;
    j["tool"] = "synthgt";
    j["version"] = tool_version();
    j["config_hash"] = config_.hash();
    j["preset"] = config_.preset;
    j["seeds"] = {{"master", config_.seed},
                  {"simulate", config_.sim_spec().seed},
                  {"folds", config_.pipeline_config().train.seed},
                  {"distshift", derive_seed(config_.seed, "distshift")}};
    j["commands"] = commands_;
    j["stages"] = stages_;
    j["artifacts"] = artifacts_;
    if (!failed_.empty()) j["failed_stage"] = failed_;
    j["config"] = config_.to_json();
    io::write_file_atomic(layout_.manifest(), j.dump(2) + "\n");
  }

 private:
  void fail(const std::string& name) {
    failed_ = name;
    try {
      write();
    } catch (const std::exception&) {
    }
  }

  const RunConfig& config_;
  Layout layout_;
  Json stages_ = Json::object();
  Json artifacts_ = Json::object();
  Json commands_ = Json::array();
  std::string failed_;
};

fs::path pick(const std::optional<fs::path>& given, const fs::path& fallback) { return given ? *given : fallback; }

train::PipelineConfig pipeline_for(const RunConfig& config, const Layout& layout) {
  train::PipelineConfig p = config.pipeline_config();
  p.checkpoint_dir = layout.checkpoints();
  p.progress = [](const std::string& msg) { log::info(msg); };
  return p;
}

graph::Cohort preprocess_whole(const graph::Cohort& cohort, std::size_t knn_k) {
  const graph::Cohort imputed = simulate::has_missing(cohort) ? simulate::knn_impute(cohort, knn_k) : cohort;
  return simulate::standardize(imputed, imputed);
}

ddpm::DenoiserConfig denoiser_config(const train::DdpmStageConfig& d) {
  ddpm::DenoiserConfig c;
  c.hidden = d.hidden;
  c.time_dim = d.time_dim;
  c.label_dim = d.label_dim;
  return c;
}

Json fold_json(const train::FoldResult& f) {
  Json j;
  j["fold"] = f.fold;
  j["n_train"] = f.train_ids.size();
  j["n_test"] = f.test_ids.size();
  j["n_validation"] = f.validation_ids.size();
  j["audit"] = {{"partition_ok", f.audit.partition_ok},
                {"ddpm_inputs_clean", f.audit.ddpm_inputs_clean},
                {"standardization_clean", f.audit.standardization_clean},
                {"imputation_clean", f.audit.imputation_clean},
                {"validation_clean", f.audit.validation_clean},
                {"encoders_frozen", f.audit.encoders_frozen}};
  if (!f.ddpm_ids.empty()) {
    j["ddpm_initial_loss"] = f.ddpm_initial_loss;
    j["ddpm_final_loss"] = f.ddpm_final_loss;
    j["encoder_hash_before"] = f.encoder_hash_before;
    j["encoder_hash_after"] = f.encoder_hash_after;
  }
  j["pretrain_accuracy"] = f.pretrain_accuracy;
  Json models = Json::object();
  for (const train::ModelRun& m : f.models) {
    models[train::model_name(m.kind)] = {{"best_epoch", m.fit.best_epoch},
                                         {"epochs_run", m.fit.epochs_run},
                                         {"best_validation_loss", m.fit.best_val_loss},
                                         {"classifier_hash", m.classifier_hash}};
  }
  j["models"] = models;
  j["seconds"] = f.seconds;
  j["checkpoints"] = f.checkpoints;
  return j;
}

void write_cohort_stage(Manifest& m, const RunConfig& config, graph::Cohort& out) {
  out = m.stage("simulate", [&] { return simulate::simulate_cohort(config.sim_spec()); });
  m.stage("write_cohort", [&] { io::write_cohort(m.layout().cohort(), out, config.hash()); });
  m.artifact("cohort", m.layout().cohort());
}

train::PipelineResult pipeline_stage(Manifest& m, const RunConfig& config, const graph::Cohort& cohort,
                                     bool keep) {
  const Layout& layout = m.layout();
  train::PipelineConfig p = pipeline_for(config, layout);
  p.keep_fold_data = keep;
  train::PipelineResult result = m.stage("pipeline", [&] { return train::run_pipeline(cohort, p); });
  for (const train::FoldResult& f : result.folds) {
    if (!f.audit.all()) throw StageError("audit", f.fold, "leakage or freeze audit failed");
  }
  m.stage("write_predictions", [&] {
    const std::string hash = config.hash();
    for (train::ModelKind kind : train::all_models()) {
      if (!result.has(kind)) continue;
      const std::string name = train::model_name(kind);
      const fs::path test = layout.predictions() / (name + ".csv");
      const fs::path val = layout.predictions() / (name + kValidationSuffix + ".csv");
      io::write_predictions(test, result.pooled(kind), hash);
      io::write_predictions(val, result.pooled_validation(kind), hash);
      m.artifact("predictions." + name, test);
      m.artifact("validation_predictions." + name, val);
    }
    Json folds;
    folds["config_hash"] = hash;
    folds["assignment_hash"] = result.assignment_hash;
    folds["folds"] = Json::array();
    for (const train::FoldResult& f : result.folds) folds["folds"].push_back(fold_json(f));
    io::write_file_atomic(layout.folds(), folds.dump(2) + "\n");
    m.artifact("folds", layout.folds());
  });
  if (fs::exists(layout.checkpoints())) m.artifact("checkpoints", layout.checkpoints());
  return result;
}

eval::MetricsSummary evaluate_stage(Manifest& m, const RunConfig& config, const PredictionFiles& files) {
  const Layout& layout = m.layout();
  eval::MetricsSummary summary = m.stage("evaluate", [&] {
    return eval::summarize(files.test, files.validation, config.eval.summary, config.hash());
  });
  m.stage("write_metrics", [&] {
    io::write_file_atomic(layout.metrics(), summary.to_json());
    io::write_file_atomic(layout.metrics_table(), summary.table_markdown());
  });
  m.artifact("metrics", layout.metrics());
  m.artifact("metrics_table", layout.metrics_table());
  return summary;
}

void distshift_stage(Manifest& m, const RunConfig& config, const graph::Cohort& real, const graph::Cohort& synth,
                     std::span<const gtx::EncoderStack> encoders) {
  const Layout& layout = m.layout();
  distshift::ShiftOptions opts;
  opts.max_samples = config.eval.distshift_max_samples;
  opts.seed = derive_seed(config.seed, "distshift");
  opts.per_modality = config.eval.distshift_per_modality;
  const distshift::ShiftReport report =
      m.stage("distshift", [&] { return distshift::shift_report(real, synth, encoders, opts); });
  m.stage("write_distshift", [&] {
    io::write_file_atomic(layout.distshift_json(), report.to_json());
    io::write_file_atomic(layout.distshift_markdown(), report.to_markdown());
  });
  m.artifact("distshift", layout.distshift_json());
  m.artifact("distshift_table", layout.distshift_markdown());
}

void report_stage(Manifest& m, const RunConfig& config, const eval::MetricsSummary& summary,
                  const std::vector<eval::PredictionSet>& test) {
  const Layout& layout = m.layout();
  m.stage("report", [&] {
    ReportInput input{config.preset, summary, test, std::nullopt};
    if (fs::exists(layout.distshift_markdown())) input.distshift_markdown = io::read_file(layout.distshift_markdown());
    const Report report = render_report(input, "plots");
    for (const auto& [name, svg] : report.plots) {
      io::write_file_atomic(layout.plots() / name, svg);
      m.artifact("plot." + name, layout.plots() / name);
    }
    io::write_file_atomic(layout.report(), report.markdown);
  });
  m.artifact("report", layout.report());
}

std::vector<gtx::EncoderStack> load_encoders(const fs::path& dir) {
  std::vector<gtx::EncoderStack> encoders;
  for (graph::Modality mod : {graph::Modality::kMri, graph::Modality::kUds}) {
    const fs::path path = dir / (std::string("encoder_") + graph::modality_name(mod) + ".json");
    encoders.push_back(gtx::load_encoder_checkpoint(io::read_checkpoint(path)));
  }
  return encoders;
}

}  // namespace

const char* tool_version() { return SYNTHGT_VERSION; }

PredictionFiles read_prediction_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": prediction directory not found");
  std::map<std::string, eval::PredictionSet> test, validation;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  const std::string suffix = kValidationSuffix;
  for (const fs::path& path : files) {
    eval::PredictionSet set = io::read_predictions(path);
    const std::string stem = path.stem().string();
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
      set.model = stem.substr(0, stem.size() - suffix.size());
      validation[set.model] = std::move(set);
    } else {
      test[stem] = std::move(set);
    }
  }
  std::vector<std::string> order;
  for (train::ModelKind k : train::all_models()) {
    if (test.count(train::model_name(k)) != 0) order.push_back(train::model_name(k));
  }
  for (const auto& [name, set] : test) {
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
  }
  PredictionFiles out;
  for (const std::string& name : order) {
    out.test.push_back(test[name]);
    auto it = validation.find(name);
    out.validation.push_back(it != validation.end() ? it->second : eval::PredictionSet{name, {}});
  }
  if (out.test.empty()) throw IoError(dir.string() + ": no prediction files");
  return out;
}

void cmd_simulate(const RunConfig& config) {
  Manifest m(config, "simulate");
  graph::Cohort cohort;
  write_cohort_stage(m, config, cohort);
  m.write();
}

void cmd_ddpm_train(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "ddpm-train");
  const Layout& layout = m.layout();
  const graph::Cohort cohort = m.stage("read_cohort", [&] { return io::read_cohort(pick(in.cohort, layout.cohort())); });
  const graph::Cohort train = m.stage("preprocess", [&] { return preprocess_whole(cohort, config.pipeline.knn_k); });
  const train::DdpmStageConfig& d = config.pipeline.ddpm;
  const ddpm::NoiseSchedule schedule = ddpm::NoiseSchedule::linear(d.steps, d.beta_start, d.beta_end);
  const ddpm::DdpmTrainResult trained = m.stage("ddpm", [&] {
    ddpm::DdpmTrainConfig tc;
    tc.epochs = d.epochs;
    tc.batch_size = d.batch_size;
    tc.learning_rate = d.learning_rate;
    tc.seed = derive_seed(config.seed, "ddpm");
    tc.config_hash = config.hash();
    tc.on_epoch = [](std::size_t epoch, double loss) {
      log::debug("ddpm epoch " + std::to_string(epoch) + " loss " + io::format_double(loss));
    };
    return ddpm::train_ddpm(ddpm::flatten_cohort(train), schedule, denoiser_config(d), tc);
  });
  log::info("ddpm loss " + io::format_double(trained.initial_loss) + " -> " + io::format_double(trained.final_loss));
  m.stage("write_ddpm", [&] {
    io::write_checkpoint(layout.ddpm_checkpoint(), ddpm::make_checkpoint(trained.denoiser, schedule, config.hash()));
    io::write_cohort(layout.ddpm_training_cohort(), train, config.hash());
  });
  m.artifact("ddpm_checkpoint", layout.ddpm_checkpoint());
  m.artifact("ddpm_training_cohort", layout.ddpm_training_cohort());
  m.write();
}

void cmd_ddpm_sample(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "ddpm-sample");
  const Layout& layout = m.layout();
  const ddpm::LoadedDdpm loaded = m.stage("read_ddpm", [&] {
    return ddpm::load_checkpoint(io::read_checkpoint(pick(in.checkpoint, layout.ddpm_checkpoint())));
  });
  const graph::Cohort train =
      m.stage("read_cohort", [&] { return io::read_cohort(pick(in.cohort, layout.ddpm_training_cohort())); });
  const std::size_t n = in.per_class.value_or(config.pipeline.ddpm.synthetic_per_class);
  if (n == 0) throw ConfigError("n_per_class", "must be > 0");
  const graph::Cohort synth = m.stage("ddpm_sample", [&] {
    ddpm::SampleOptions opts;
    opts.variance = config.pipeline.ddpm.variance;
    opts.jobs = config.jobs;
    const std::vector<std::size_t> per_class{n, n};
    return ddpm::sample_cohort(loaded.denoiser, loaded.schedule, per_class, train,
                               derive_seed(config.seed, "sample"), opts);
  });
  const fs::path out = pick(in.synthetic, layout.synthetic());
  m.stage("write_synthetic", [&] { io::write_cohort(out, synth, config.hash()); });
  m.artifact("synthetic", out);
  m.write();
}

void cmd_pretrain(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "pretrain");
  const Layout& layout = m.layout();
  const graph::Cohort synth =
      m.stage("read_synthetic", [&] { return io::read_cohort(pick(in.synthetic, layout.synthetic())); });
  const fs::path dir = pick(in.encoders, layout.encoders());
  for (graph::Modality mod : {graph::Modality::kMri, graph::Modality::kUds}) {
    const std::string name = graph::modality_name(mod);
    const train::PretrainResult p = m.stage("pretrain." + name, [&] {
      return train::pretrain_encoder(mod, synth, config.pipeline.encoder, config.pipeline.train.pretrain,
                                     derive_seed(config.seed, "pretrain"));
    });
    log::info(name + " encoder training accuracy " + io::format_double(p.train_accuracy));
    const fs::path path = dir / ("encoder_" + name + ".json");
    m.stage("write_encoder." + name,
            [&] { io::write_checkpoint(path, gtx::make_encoder_checkpoint(p.encoder, config.hash())); });
    m.artifact("encoder." + name, path);
  }
  m.write();
}

void cmd_train(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "train");
  const graph::Cohort cohort =
      m.stage("read_cohort", [&] { return io::read_cohort(pick(in.cohort, m.layout().cohort())); });
  pipeline_stage(m, config, cohort, false);
  m.write();
}

void cmd_evaluate(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "evaluate");
  const PredictionFiles files =
      m.stage("read_predictions", [&] { return read_prediction_dir(pick(in.predictions, m.layout().predictions())); });
  evaluate_stage(m, config, files);
  m.write();
}

void cmd_distshift(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "distshift");
  const Layout& layout = m.layout();
  const graph::Cohort real =
      m.stage("read_cohort", [&] { return io::read_cohort(pick(in.cohort, layout.ddpm_training_cohort())); });
  const graph::Cohort synth =
      m.stage("read_synthetic", [&] { return io::read_cohort(pick(in.synthetic, layout.synthetic())); });
  std::vector<gtx::EncoderStack> encoders;
  const fs::path dir = pick(in.encoders, layout.encoders());
  if (in.encoders || fs::exists(dir)) encoders = m.stage("read_encoders", [&] { return load_encoders(dir); });
  distshift_stage(m, config, real, synth, encoders);
  m.write();
}

void cmd_report(const RunConfig& config, const CommandInputs& in) {
  Manifest m(config, "report");
  const PredictionFiles files =
      m.stage("read_predictions", [&] { return read_prediction_dir(pick(in.predictions, m.layout().predictions())); });
  const eval::MetricsSummary summary = m.stage("evaluate", [&] {
    return eval::summarize(files.test, files.validation, config.eval.summary, config.hash());
  });
  report_stage(m, config, summary, files.test);
  m.write();
}

void cmd_run(const RunConfig& config) {
  Manifest m(config, "run");
  const auto start = std::chrono::steady_clock::now();
  graph::Cohort cohort;
  write_cohort_stage(m, config, cohort);
  const train::PipelineResult result = pipeline_stage(m, config, cohort, true);

  PredictionFiles files;
  for (train::ModelKind kind : train::all_models()) {
    if (!result.has(kind)) continue;
    files.test.push_back(result.pooled(kind));
    files.validation.push_back(result.pooled_validation(kind));
  }
  const eval::MetricsSummary summary = evaluate_stage(m, config, files);

  const auto fold = static_cast<std::size_t>(config.eval.distshift_fold);
  const train::FoldResult& f = result.folds.at(fold);
  if (f.synthetic) {
    distshift_stage(m, config, *f.real_train, *f.synthetic, f.encoders);
  } else {
    log::info("distshift skipped: no synthetic cohort without the pretrained model");
    fs::remove(m.layout().distshift_json());
    fs::remove(m.layout().distshift_markdown());
  }
  report_stage(m, config, summary, files.test);
  log::info("run finished in " +
            std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()) + " s");
  m.write();
}

}  // namespace synthgt::cli
