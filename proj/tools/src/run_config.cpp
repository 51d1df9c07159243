// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include "synthgt/error.hpp"
#include "synthgt/hash.hpp"
#include "synthgt/io/text.hpp"
#include "toml.hpp"

namespace synthgt::cli {

namespace {

using Json = nlohmann::ordered_json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed is read through the size_t accessor");

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed, path-aware view of one JSON object; every key must be consumed.
class Section {
 public:
  Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_, "expected a table");
  }

  bool has(const char* key) const { return doc_.contains(key); }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  void get(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(join(path_, key), "expected a non-negative integer");
    }
    out = v.get<std::size_t>();
  }
  void get(const char* key, int& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
    out = v.get<int>();
  }
  void get(const char* key, bool& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
    out = v.get<bool>();
  }
  void get(const char* key, double& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
    out = v.get<double>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
    out = v.get<std::string>();
  }
  void get(const char* key, std::vector<std::size_t>& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError(join(path_, key), "expected an array of integers");
    std::vector<std::size_t> parsed;
    for (const Json& e : v) {
      if (!e.is_number_integer() || e.get<long long>() <= 0) {
        throw ConfigError(join(path_, key), "expected positive integers");
      }
      parsed.push_back(e.get<std::size_t>());
    }
    out = std::move(parsed);
  }

  std::string path(const char* key) const { return join(path_, key); }

  void done() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown key");
    }
  }

 private:
  const Json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* variance_name(ddpm::ReverseVariance v) {
  return v == ddpm::ReverseVariance::kBeta ? "beta" : "posterior";
}

const char* pooling_name(gtx::Pooling p) { return p == gtx::Pooling::kMax ? "max" : "mean"; }

void read_sim(Section s, simulate::SimSpec& sim, std::size_t& knn_k) {
  s.get("n_ad", sim.n_ad);
  s.get("n_hc", sim.n_hc);
  s.get("effect_size", sim.effect_size);
  s.get("n_latent", sim.n_latent);
  s.get("site_count", sim.site_count);
  s.get("site_sigma", sim.site_sigma);
  s.get("missing_rate", sim.missing_rate);
  s.get("apoe4_effect", sim.apoe4_effect);
  s.get("knn_k", knn_k);
  s.done();
}

void read_ddpm(Section s, train::DdpmStageConfig& d) {
  s.get("steps", d.steps);
  s.get("beta_start", d.beta_start);
  s.get("beta_end", d.beta_end);
  s.get("hidden", d.hidden);
  s.get("time_dim", d.time_dim);
  s.get("label_dim", d.label_dim);
  s.get("epochs", d.epochs);
  s.get("batch_size", d.batch_size);
  s.get("learning_rate", d.learning_rate);
  s.get("synthetic_per_class", d.synthetic_per_class);
  if (s.has("variance")) {
    std::string v;
    s.get("variance", v);
    if (v == "beta") d.variance = ddpm::ReverseVariance::kBeta;
    else if (v == "posterior") d.variance = ddpm::ReverseVariance::kPosterior;
    else throw ConfigError(s.path("variance"), "expected \"beta\" or \"posterior\", got \"" + v + "\"");
  }
  s.done();
}

void read_model(Section s, train::PipelineConfig& p) {
  if (s.has("layers")) {
    const Json& layers = s.raw("layers");
    if (!layers.is_array() || layers.empty()) throw ConfigError(s.path("layers"), "expected a non-empty array of tables");
    std::vector<gtx::LayerSpec> parsed;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Section l(layers[i], s.path("layers") + "[" + std::to_string(i) + "]");
      gtx::LayerSpec spec;
      l.get("heads", spec.heads);
      l.get("head_dim", spec.head_dim);
      l.get("out_dim", spec.out_dim);
      l.done();
      parsed.push_back(spec);
    }
    p.encoder.layers = std::move(parsed);
  }
  if (s.has("dropout")) {
    s.get("dropout", p.encoder.dropout);
    p.train.pretrain.dropout = p.encoder.dropout;
  }
  if (s.has("pooling")) {
    std::string v;
    s.get("pooling", v);
    if (v == "max") p.encoder.pooling = gtx::Pooling::kMax;
    else if (v == "mean") p.encoder.pooling = gtx::Pooling::kMean;
    else throw ConfigError(s.path("pooling"), "expected \"max\" or \"mean\", got \"" + v + "\"");
  }
  s.get("classifier_hidden", p.classifier_hidden);
  s.get("late_branch", p.late_branch);
  s.done();
}

void read_train(Section s, train::PipelineConfig& p) {
  train::TrainConfig& t = p.train;
  s.get("folds", t.folds);
  s.get("pretrain_epochs", t.pretrain.epochs);
  s.get("pretrain_learning_rate", t.pretrain.learning_rate);
  s.get("pretrain_batch_size", t.pretrain.batch_size);
  s.get("learning_rate", t.downstream.learning_rate);
  s.get("batch_size", t.downstream.batch_size);
  s.get("max_epochs", t.downstream.max_epochs);
  s.get("patience", t.downstream.patience);
  s.get("val_fraction", t.downstream.val_fraction);
  if (s.has("models")) {
    const Json& v = s.raw("models");
    if (!v.is_array()) throw ConfigError(s.path("models"), "expected an array of model names");
    std::vector<train::ModelKind> models;
    for (const Json& e : v) {
      if (!e.is_string()) throw ConfigError(s.path("models"), "expected model names");
      models.push_back(train::parse_model(e.get<std::string>()));
    }
    p.models = std::move(models);
  }
  s.done();
}

void read_eval(Section s, EvalSection& e) {
  s.get("threshold", e.summary.threshold);
  s.get("target_specificity", e.summary.target_specificity);
  s.get("calibration_bins", e.summary.calibration_bins);
  s.get("dca_step", e.summary.dca_step);
  s.get("dca_max", e.summary.dca_max);
  s.get("distshift_max_samples", e.distshift_max_samples);
  s.get("distshift_fold", e.distshift_fold);
  s.get("distshift_per_modality", e.distshift_per_modality);
  s.done();
}

}  // namespace

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  train::PipelineConfig& p = c.pipeline;
  if (name == "paper") {
    c.sim.n_ad = 390;
    c.sim.n_hc = 847;
    p.ddpm.steps = 1000;
    p.ddpm.beta_end = 0.02;
    p.ddpm.hidden = {512, 512};
    p.ddpm.epochs = 100;
    p.ddpm.synthetic_per_class = 2000;
    p.train.pretrain.epochs = 100;
    p.train.pretrain.learning_rate = 2e-3;
    p.train.downstream.learning_rate = 1e-3;
    p.train.downstream.max_epochs = 200;
    p.encoder.dropout = 0.3;
    p.train.pretrain.dropout = 0.3;
    return c;
  }
  if (name == "desk") {
    c.sim.n_ad = 63;
    c.sim.n_hc = 137;
    p.ddpm.steps = 200;
    p.ddpm.beta_end = 0.07;
    p.ddpm.hidden = {256, 256};
    p.ddpm.epochs = 100;
    p.ddpm.synthetic_per_class = 500;
    p.train.pretrain.epochs = 10;
    p.train.downstream.max_epochs = 100;
    return c;
  }
  throw ConfigError("preset", "expected \"desk\" or \"paper\", got \"" + name + "\"");
}

RunConfig overlay(RunConfig base, const Json& doc) {
  Section root(doc, "");
  if (root.has("preset")) {
    std::string p;
    root.get("preset", p);
    if (p != base.preset) throw ConfigError("preset", "conflicts with the selected preset \"" + base.preset + "\"");
  }
  root.get("seed", base.seed);
  root.get("output_dir", base.output_dir);
  root.get("jobs", base.jobs);
  if (root.has("sim")) read_sim(Section(root.raw("sim"), "sim"), base.sim, base.pipeline.knn_k);
  if (root.has("ddpm")) read_ddpm(Section(root.raw("ddpm"), "ddpm"), base.pipeline.ddpm);
  if (root.has("model")) read_model(Section(root.raw("model"), "model"), base.pipeline);
  if (root.has("train")) read_train(Section(root.raw("train"), "train"), base.pipeline);
  if (root.has("eval")) read_eval(Section(root.raw("eval"), "eval"), base.eval);
  root.done();
  return base;
}

Json RunConfig::to_json() const {
  const train::PipelineConfig& p = pipeline;
  Json layers = Json::array();
  for (const gtx::LayerSpec& l : p.encoder.layers) {
    layers.push_back(Json{{"heads", l.heads}, {"head_dim", l.head_dim}, {"out_dim", l.out_dim}});
  }
  Json models = Json::array();
  for (train::ModelKind k : p.models) models.push_back(train::model_name(k));
  return Json{
      {"preset", preset},
      {"seed", seed},
      {"output_dir", output_dir},
      {"jobs", jobs},
      {"sim",
       {{"n_ad", sim.n_ad},
        {"n_hc", sim.n_hc},
        {"effect_size", sim.effect_size},
        {"n_latent", sim.n_latent},
        {"site_count", sim.site_count},
        {"site_sigma", sim.site_sigma},
        {"missing_rate", sim.missing_rate},
        {"apoe4_effect", sim.apoe4_effect},
        {"knn_k", p.knn_k}}},
      {"ddpm",
       {{"steps", p.ddpm.steps},
        {"beta_start", p.ddpm.beta_start},
        {"beta_end", p.ddpm.beta_end},
        {"hidden", p.ddpm.hidden},
        {"time_dim", p.ddpm.time_dim},
        {"label_dim", p.ddpm.label_dim},
        {"epochs", p.ddpm.epochs},
        {"batch_size", p.ddpm.batch_size},
        {"learning_rate", p.ddpm.learning_rate},
        {"synthetic_per_class", p.ddpm.synthetic_per_class},
        {"variance", variance_name(p.ddpm.variance)}}},
      {"model",
       {{"layers", layers},
        {"dropout", p.encoder.dropout},
        {"pooling", pooling_name(p.encoder.pooling)},
        {"classifier_hidden", p.classifier_hidden},
        {"late_branch", p.late_branch}}},
      {"train",
       {{"folds", p.train.folds},
        {"models", models},
        {"pretrain_epochs", p.train.pretrain.epochs},
        {"pretrain_learning_rate", p.train.pretrain.learning_rate},
        {"pretrain_batch_size", p.train.pretrain.batch_size},
        {"learning_rate", p.train.downstream.learning_rate},
        {"batch_size", p.train.downstream.batch_size},
        {"max_epochs", p.train.downstream.max_epochs},
        {"patience", p.train.downstream.patience},
        {"val_fraction", p.train.downstream.val_fraction}}},
      {"eval",
       {{"threshold", eval.summary.threshold},
        {"target_specificity", eval.summary.target_specificity},
        {"calibration_bins", eval.summary.calibration_bins},
        {"dca_step", eval.summary.dca_step},
        {"dca_max", eval.summary.dca_max},
        {"distshift_max_samples", eval.distshift_max_samples},
        {"distshift_fold", eval.distshift_fold},
        {"distshift_per_modality", eval.distshift_per_modality}}}};
}

std::string RunConfig::hash() const {
  Json j = to_json();
  j.erase("output_dir");
  j.erase("jobs");
  return hash_string(j.dump());
}

train::PipelineConfig RunConfig::pipeline_config() const {
  train::PipelineConfig p = pipeline;
  p.train.seed = seed;
  p.jobs = jobs;
  p.config_hash = hash();
  return p;
}

simulate::SimSpec RunConfig::sim_spec() const {
  simulate::SimSpec s = sim;
  s.seed = seed;
  return s;
}

void RunConfig::validate() const {
  sim_spec().validate();
  pipeline_config().validate();
  if (jobs == 0) throw ConfigError("jobs", "must be > 0");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  const eval::SummaryOptions& o = eval.summary;
  if (!(o.threshold >= 0.0 && o.threshold <= 1.0)) throw ConfigError("eval.threshold", "must lie in [0, 1]");
  if (!(o.target_specificity > 0.0 && o.target_specificity < 1.0)) {
    throw ConfigError("eval.target_specificity", "must lie in (0, 1)");
  }
  if (o.calibration_bins == 0) throw ConfigError("eval.calibration_bins", "must be > 0");
  if (!(o.dca_step > 0.0) || !(o.dca_max >= 0.0 && o.dca_max < 1.0)) {
    throw ConfigError("eval.dca_step", "need dca_step > 0 and 0 <= dca_max < 1");
  }
  if (eval.distshift_max_samples < 2) throw ConfigError("eval.distshift_max_samples", "must be >= 2");
  if (eval.distshift_fold < 0 || static_cast<std::size_t>(eval.distshift_fold) >= pipeline.train.folds) {
    throw ConfigError("eval.distshift_fold", "must name an existing fold");
  }
}

Json read_config_document(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const std::string ext = path.extension().string();
  if (ext == ".json") {
    try {
      return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  if (ext != ".toml") throw ConfigError(path.string() + ": expected a .toml or .json file");
  try {
    const toml::table table = toml::parse(text, path.string());
    std::ostringstream out;
    out << toml::json_formatter{table};
    return Json::parse(out.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const ConfigOverrides& flags) {
  Json doc = Json::object();
  if (file) doc = read_config_document(*file);
  std::string name = "desk";
  if (flags.preset) {
    name = *flags.preset;
  } else if (doc.is_object() && doc.contains("preset") && doc["preset"].is_string()) {
    name = doc["preset"].get<std::string>();
  }
  if (flags.preset && doc.is_object()) doc.erase("preset");
  RunConfig c = overlay(preset(name), doc);
  if (flags.seed) c.seed = *flags.seed;
  if (flags.jobs) c.jobs = *flags.jobs;
  if (flags.output_dir) {
    c.output_dir = *flags.output_dir;
  } else if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    c.output_dir = env;
  }
  c.validate();
  return c;
}

}  // namespace synthgt::cli
