// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/ddpm/ddpm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "synthgt/autodiff/adam.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/error.hpp"

namespace synthgt::ddpm {

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw ConfigError("ddpm.steps", "must be > 0");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("ddpm.beta_start", "need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  double bar = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    bar *= 1.0 - beta;
    s.alpha_bars.push_back(bar);
  }
  return s;
}

double NoiseSchedule::sigma(std::size_t t, ReverseVariance kind) const {
  if (kind == ReverseVariance::kBeta) return std::sqrt(beta(t));
  const double prev = t > 1 ? alpha_bar(t - 1) : 1.0;
  return std::sqrt(beta(t) * (1.0 - prev) / (1.0 - alpha_bar(t)));
}

std::vector<double> forward_diffuse(const NoiseSchedule& schedule, std::span<const double> x0,
                                    std::size_t t, std::span<const double> eps) {
  if (t < 1 || t > schedule.steps) {
    throw ContractError("forward_diffuse: t=" + std::to_string(t) + " outside [1, " +
                        std::to_string(schedule.steps) + "]");
  }
  if (eps.size() != x0.size()) {
    throw DimensionError("forward_diffuse: eps has " + std::to_string(eps.size()) +
                         " values, x0 has " + std::to_string(x0.size()));
  }
  const double a = std::sqrt(schedule.alpha_bar(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

std::vector<double> time_embedding(std::size_t t, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(static_cast<double>(t) * w);
    out[half + i] = std::cos(static_cast<double>(t) * w);
  }
  return out;
}

Denoiser::Denoiser(DenoiserConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.classes == 0 || config_.data_dim == 0) {
    throw ConfigError("ddpm.model", "data_dim and classes must be > 0");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> table(config_.classes * config_.label_dim);
  for (double& v : table) v = normal(rng);
  label_table_ = ad::Tensor::from({config_.classes, config_.label_dim}, std::move(table), true);
  std::vector<std::size_t> sizes{config_.data_dim + config_.time_dim + config_.label_dim};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(config_.data_dim);
  mlp_ = ad::Mlp(sizes, rng);
}

ad::Tensor Denoiser::forward(const ad::Tensor& x_t, std::span<const std::size_t> t,
                             std::span<const int> y) const {
  const std::size_t rows = x_t.rows();
  if (x_t.cols() != config_.data_dim || t.size() != rows || y.size() != rows) {
    throw DimensionError("Denoiser::forward: x_t " + ad::shape_string(x_t.shape()) + " with " +
                         std::to_string(t.size()) + " timesteps and " + std::to_string(y.size()) +
                         " labels");
  }
  std::vector<double> temb(rows * config_.time_dim);
  std::vector<std::size_t> label_rows(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto e = time_embedding(t[i], config_.time_dim);
    std::copy(e.begin(), e.end(), temb.begin() + static_cast<std::ptrdiff_t>(i * config_.time_dim));
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= config_.classes) {
      throw ContractError("Denoiser::forward: label " + std::to_string(y[i]) + " out of range");
    }
    label_rows[i] = static_cast<std::size_t>(y[i]);
  }
  const ad::Tensor time = ad::Tensor::from({rows, config_.time_dim}, std::move(temb));
  const ad::Tensor label = ad::gather_rows(label_table_, label_rows);
  return mlp_.forward(ad::concat_last({x_t, time, label}));
}

ad::ParameterList Denoiser::parameters() const {
  ad::ParameterList p;
  p.add("label_embedding", label_table_);
  mlp_.collect(p, "mlp.");
  return p;
}

NoisePredictor predictor(const Denoiser& denoiser, const NoiseSchedule& schedule) {
  if (!denoiser.config().noise_skip) {
    return [&denoiser](const ad::Tensor& x, std::span<const std::size_t> t, std::span<const int> y) {
      return denoiser.forward(x, t, y);
    };
  }
  return [&denoiser, schedule](const ad::Tensor& x, std::span<const std::size_t> t,
                                std::span<const int> y) {
    const std::size_t rows = x.rows();
    const std::size_t cols = x.cols();
    std::vector<double> scale(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (t[i] < 1 || t[i] > schedule.steps) {
        throw ContractError("predictor: t=" + std::to_string(t[i]) + " outside [1, " +
                            std::to_string(schedule.steps) + "]");
      }
      std::fill_n(scale.begin() + static_cast<std::ptrdiff_t>(i * cols), cols,
                  std::sqrt(1.0 - schedule.alpha_bar(t[i])));
    }
    const ad::Tensor skip = ad::mul(x, ad::Tensor::from({rows, cols}, std::move(scale)));
    return ad::add(denoiser.forward(x, t, y), skip);
  };
}

LabeledVectors flatten_cohort(const graph::Cohort& cohort) {
  LabeledVectors out;
  out.dim = graph::kFlatDim;
  out.values.reserve(cohort.size() * out.dim);
  for (const auto& s : cohort.subjects) {
    const auto v = graph::flatten(s);
    out.values.insert(out.values.end(), v.begin(), v.end());
    out.labels.push_back(s.label);
  }
  return out;
}

ad::Tensor ddpm_loss(const LabeledVectors& batch, std::span<const std::size_t> t,
                     std::span<const double> eps, const NoisePredictor& model,
                     const NoiseSchedule& schedule) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("ddpm_loss: empty batch");
  if (t.size() != n || eps.size() != n * batch.dim) {
    throw DimensionError("ddpm_loss: batch of " + std::to_string(n) + " rows with " +
                         std::to_string(t.size()) + " timesteps and " + std::to_string(eps.size()) +
                         " noise values");
  }
  std::vector<double> xt(n * batch.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = forward_diffuse(schedule, batch.row(i), t[i], eps.subspan(i * batch.dim, batch.dim));
    std::copy(row.begin(), row.end(), xt.begin() + static_cast<std::ptrdiff_t>(i * batch.dim));
  }
  const ad::Tensor x = ad::Tensor::from({n, batch.dim}, std::move(xt));
  const ad::Tensor target = ad::Tensor::from({n, batch.dim}, std::vector<double>(eps.begin(), eps.end()));
  return ad::mse(model(x, t, batch.labels), target);
}

namespace {

void draw_noise(std::size_t n, std::size_t dim, std::size_t steps, Rng& rng,
                std::vector<std::size_t>& t, std::vector<double>& eps) {
  std::uniform_int_distribution<std::size_t> step(1, steps);
  std::normal_distribution<double> normal(0.0, 1.0);
  t.resize(n);
  eps.resize(n * dim);
  for (std::size_t i = 0; i < n; ++i) t[i] = step(rng);
  for (double& e : eps) e = normal(rng);
}

LabeledVectors take_rows(const LabeledVectors& data, std::span<const std::size_t> idx) {
  LabeledVectors out;
  out.dim = data.dim;
  out.values.reserve(idx.size() * data.dim);
  for (std::size_t i : idx) {
    const auto r = data.row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

double probe_loss(const LabeledVectors& data, const NoisePredictor& model,
                  const NoiseSchedule& schedule, std::uint64_t seed) {
  Rng rng = make_rng(seed, "ddpm.probe");
  std::vector<std::size_t> t;
  std::vector<double> eps;
  draw_noise(data.size(), data.dim, schedule.steps, rng, t, eps);
  return ddpm_loss(data, t, eps, model, schedule).item();
}

}  // namespace

ad::Tensor ddpm_loss(const LabeledVectors& batch, const NoisePredictor& model,
                     const NoiseSchedule& schedule, Rng& rng) {
  std::vector<std::size_t> t;
  std::vector<double> eps;
  draw_noise(batch.size(), batch.dim, schedule.steps, rng, t, eps);
  return ddpm_loss(batch, t, eps, model, schedule);
}

DdpmTrainResult train_ddpm(const LabeledVectors& data, const NoiseSchedule& schedule,
                           const DenoiserConfig& model_config, const DdpmTrainConfig& config) {
  if (data.size() == 0) throw ContractError("train_ddpm: empty training set");
  if (data.dim != model_config.data_dim) {
    throw DimensionError("train_ddpm: data dim " + std::to_string(data.dim) + " vs model dim " +
                         std::to_string(model_config.data_dim));
  }
  if (config.batch_size == 0) throw ConfigError("ddpm.batch_size", "must be > 0");
  if (!std::all_of(data.values.begin(), data.values.end(), [](double v) { return std::isfinite(v); })) {
    throw ContractError("train_ddpm: training vectors contain non-finite values");
  }
  Rng init_rng = make_rng(config.seed, "ddpm.init");
  DdpmTrainResult result{Denoiser(model_config, init_rng), {}, {}, 0.0, 0.0};
  const NoisePredictor model = predictor(result.denoiser, schedule);
  result.initial_loss = probe_loss(data, model, schedule, config.seed);

  ad::ParameterList params = result.denoiser.parameters();
  std::vector<ad::Tensor> tensors = params.tensors();
  ad::AdamState adam = ad::AdamState::for_params(tensors, config.learning_rate);
  Rng rng = make_rng(config.seed, "ddpm.train");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  ad::Tape tape;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const LabeledVectors batch =
          take_rows(data, std::span<const std::size_t>(order).subspan(start, end - start));
      tape.clear();
      ad::Tape::Scope scope(tape);
      const ad::Tensor loss = ddpm_loss(batch, model, schedule, rng);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "train_ddpm: non-finite loss at epoch %zu (learning rate %g)",
                      epoch, config.learning_rate);
        throw TrainingError(msg);
      }
      tape.backward(loss);
      ad::adam_step(tensors, adam);
      total += value * static_cast<double>(end - start);
    }
    tape.clear();
    const double epoch_loss = total / static_cast<double>(order.size());
    best = std::min(best, epoch_loss);
    result.epoch_loss.push_back(epoch_loss);
    result.best_loss.push_back(best);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      char name[48];
      std::snprintf(name, sizeof name, "ddpm_epoch_%04zu.json", epoch);
      io::write_checkpoint(config.checkpoint_dir / name,
                           make_checkpoint(result.denoiser, schedule, config.config_hash));
    }
  }
  result.final_loss = probe_loss(data, model, schedule, config.seed);
  return result;
}

namespace {

void sample_chunk(const NoisePredictor& model, const NoiseSchedule& schedule, std::size_t dim,
                  int label, std::size_t n, Rng& rng, ReverseVariance variance, double* out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n * dim);
  for (double& v : x) v = normal(rng);
  const std::vector<int> labels(n, label);
  std::vector<std::size_t> steps(n);
  for (std::size_t t = schedule.steps; t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    const ad::Tensor eps = model(ad::Tensor::from({n, dim}, x), steps, labels);
    const auto e = eps.data();
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
    const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
    const double sigma = t > 1 ? schedule.sigma(t, variance) : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv_sqrt_alpha * (x[i] - coef * e[i]);
      if (t > 1) x[i] += sigma * normal(rng);
    }
  }
  std::copy(x.begin(), x.end(), out);
}

}  // namespace

std::vector<double> sample_vectors(const NoisePredictor& model, const NoiseSchedule& schedule,
                                   std::size_t dim, int label, std::size_t n, std::uint64_t seed,
                                   const SampleOptions& options) {
  if (n == 0) throw ContractError("sample: n must be > 0");
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<double> out(n * dim);
  auto run = [&](std::size_t c) {
    const std::size_t start = c * chunk;
    const std::size_t m = std::min(chunk, n - start);
    Rng rng = make_rng(seed, "ddpm.sample", static_cast<std::uint64_t>(label) * 1000003u + c);
    sample_chunk(model, schedule, dim, label, m, rng, options.variance, out.data() + start * dim);
  };
  const std::size_t jobs = std::min(std::max<std::size_t>(1, options.jobs), chunks);
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return out;
  }
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += jobs) run(c);
    });
  }
  for (auto& th : workers) th.join();
  return out;
}

graph::Cohort sample_cohort(const Denoiser& denoiser, const NoiseSchedule& schedule,
                            std::span<const std::size_t> per_class, const graph::Cohort& training,
                            std::uint64_t seed, const SampleOptions& options) {
  if (denoiser.config().data_dim != graph::kFlatDim) {
    throw DimensionError("sample_cohort: denoiser dim " + std::to_string(denoiser.config().data_dim) +
                         " is not a subject vector");
  }
  const std::size_t total = std::accumulate(per_class.begin(), per_class.end(), std::size_t{0});
  if (total == 0) throw ContractError("sample_cohort: n must be > 0");
  graph::Cohort out;
  out.provenance = graph::Provenance::kDdpmSynthetic;
  out.standardization = training.standardization;
  out.schema = training.schema;
  Rng cov_rng = make_rng(seed, "ddpm.covariates");
  const NoisePredictor model = predictor(denoiser, schedule);
  std::size_t next_id = 0;
  for (std::size_t label = 0; label < per_class.size(); ++label) {
    if (per_class[label] == 0) continue;
    std::vector<const graph::Subject*> pool;
    for (const auto& s : training.subjects) {
      if (s.label == static_cast<int>(label)) pool.push_back(&s);
    }
    if (pool.empty()) {
      throw ContractError("sample_cohort: training cohort has no subject with label " +
                          std::to_string(label));
    }
    const auto values = sample_vectors(model, schedule, graph::kFlatDim, static_cast<int>(label),
                                       per_class[label], seed, options);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < per_class[label]; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "syn-%05zu", next_id++);
      const graph::Subject& donor = *pool[pick(cov_rng)];
      graph::Subject s;
      s.id = id;
      s.label = static_cast<int>(label);
      s.age = donor.age;
      s.sex = donor.sex;
      s.apoe4 = donor.apoe4;
      s.site = donor.site;
      const auto begin = values.begin() + static_cast<std::ptrdiff_t>(i * graph::kFlatDim);
      s.graphs = graph::unflatten(std::vector<double>(begin, begin + graph::kFlatDim));
      out.subjects.push_back(std::move(s));
    }
  }
  return out;
}

io::Checkpoint make_checkpoint(const Denoiser& denoiser, const NoiseSchedule& schedule,
                               const std::string& config_hash) {
  io::Checkpoint c;
  c.kind = "ddpm";
  c.config_hash = config_hash;
  const auto& cfg = denoiser.config();
  c.scalars["steps"] = static_cast<double>(schedule.steps);
  c.scalars["beta_start"] = schedule.beta_start;
  c.scalars["beta_end"] = schedule.beta_end;
  c.scalars["data_dim"] = static_cast<double>(cfg.data_dim);
  c.scalars["time_dim"] = static_cast<double>(cfg.time_dim);
  c.scalars["label_dim"] = static_cast<double>(cfg.label_dim);
  c.scalars["classes"] = static_cast<double>(cfg.classes);
  c.scalars["hidden_layers"] = static_cast<double>(cfg.hidden.size());
  c.scalars["noise_skip"] = cfg.noise_skip ? 1.0 : 0.0;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    c.scalars["hidden_" + std::to_string(i)] = static_cast<double>(cfg.hidden[i]);
  }
  c.put_parameters(denoiser.parameters());
  return c;
}

LoadedDdpm load_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.kind != "ddpm") throw IoError("checkpoint kind '" + ckpt.kind + "' is not ddpm");
  auto count = [&](const std::string& key) { return static_cast<std::size_t>(ckpt.scalar(key)); };
  DenoiserConfig cfg;
  cfg.data_dim = count("data_dim");
  cfg.time_dim = count("time_dim");
  cfg.label_dim = count("label_dim");
  cfg.classes = count("classes");
  cfg.hidden.clear();
  cfg.noise_skip = ckpt.scalar("noise_skip") != 0.0;
  for (std::size_t i = 0; i < count("hidden_layers"); ++i) {
    cfg.hidden.push_back(count("hidden_" + std::to_string(i)));
  }
  Rng rng(0);
  LoadedDdpm out{Denoiser(cfg, rng),
                 NoiseSchedule::linear(count("steps"), ckpt.scalar("beta_start"),
                                       ckpt.scalar("beta_end")),
                 ckpt.config_hash};
  ad::ParameterList params = out.denoiser.parameters();
  ckpt.load_parameters(params);
  return out;
}

}  // namespace synthgt::ddpm
