// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "commands.hpp"
#include "run_config.hpp"
#include "synthgt/error.hpp"
#include "synthgt/log.hpp"
#include "synthgt/train/pipeline.hpp"

namespace {

using synthgt::cli::CommandInputs;
using synthgt::cli::RunConfig;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::size_t> jobs;
  std::string log_level = "info";
  std::optional<std::string> cohort, checkpoint, synthetic, encoders, predictions;
  std::optional<std::size_t> per_class;
  std::vector<std::string> models;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("-c,--config", f.config, "TOML or JSON configuration file");
  app->add_option("--preset", f.preset, "desk or paper");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("-o,--output", f.output, "Output directory (overrides SYNTHGT_OUTPUT_DIR)");
  app->add_option("-j,--jobs", f.jobs, "Parallel workers");
  app->add_option("--log-level", f.log_level, "debug, info, warn, error or off");
}

CommandInputs inputs(const Flags& f) {
  CommandInputs in;
  if (f.cohort) in.cohort = *f.cohort;
  if (f.checkpoint) in.checkpoint = *f.checkpoint;
  if (f.synthetic) in.synthetic = *f.synthetic;
  if (f.encoders) in.encoders = *f.encoders;
  if (f.predictions) in.predictions = *f.predictions;
  in.per_class = f.per_class;
  return in;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Synthetic-data pretraining of graph transformers for AD classification"};
  app.set_version_flag("--version", synthgt::cli::tool_version());
  app.require_subcommand(1);
  Flags f;
  add_common(&app, f);

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, f);
    return s;
  };
  CLI::App* simulate = sub("simulate", "Simulate a labelled cohort");
  CLI::App* ddpm_train = sub("ddpm-train", "Train the conditional DDPM on a whole cohort");
  ddpm_train->add_option("--cohort", f.cohort, "Cohort directory");
  CLI::App* ddpm_sample = sub("ddpm-sample", "Sample a synthetic cohort from a DDPM checkpoint");
  ddpm_sample->add_option("--checkpoint", f.checkpoint, "DDPM checkpoint");
  ddpm_sample->add_option("--cohort", f.cohort, "Standardized cohort the DDPM was trained on");
  ddpm_sample->add_option("--synthetic", f.synthetic, "Output directory for the synthetic cohort");
  ddpm_sample->add_option("--n-per-class", f.per_class, "Synthetic subjects per class");
  CLI::App* pretrain = sub("pretrain", "Pretrain modality encoders on a synthetic cohort");
  pretrain->add_option("--synthetic", f.synthetic, "Synthetic cohort directory");
  pretrain->add_option("--encoders", f.encoders, "Output directory for encoder checkpoints");
  CLI::App* train = sub("train", "Cross-validated pipeline and baselines");
  train->add_option("--cohort", f.cohort, "Cohort directory");
  train->add_option("--models", f.models, "Subset of models")->delimiter(',');
  CLI::App* run = sub("run", "simulate, train, evaluate, distshift and report in one go");
  run->add_option("--models", f.models, "Subset of models")->delimiter(',');
  CLI::App* evaluate = sub("evaluate", "Metrics from prediction files");
  evaluate->add_option("--predictions", f.predictions, "Prediction directory");
  CLI::App* distshift = sub("distshift", "Real versus synthetic distribution shift");
  distshift->add_option("--cohort", f.cohort, "Standardized real cohort");
  distshift->add_option("--synthetic", f.synthetic, "Synthetic cohort directory");
  distshift->add_option("--encoders", f.encoders, "Encoder checkpoint directory");
  CLI::App* report = sub("report", "Markdown report with SVG plots");
  report->add_option("--predictions", f.predictions, "Prediction directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  synthgt::log::Level level;
  if (!synthgt::log::parse_level(f.log_level, level)) {
    std::cerr << "config error: --log-level: unknown level '" << f.log_level << "'\n";
    return 2;
  }
  synthgt::log::set_level(level);

  RunConfig config;
  try {
    synthgt::cli::ConfigOverrides o;
    o.preset = f.preset;
    o.seed = f.seed;
    o.output_dir = f.output;
    o.jobs = f.jobs;
    std::optional<std::filesystem::path> file;
    if (f.config) file = *f.config;
    config = synthgt::cli::load_run_config(file, o);
    if (!f.models.empty()) {
      config.pipeline.models.clear();
      for (const std::string& m : f.models) config.pipeline.models.push_back(synthgt::train::parse_model(m));
    }
  } catch (const synthgt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  const CommandInputs in = inputs(f);
  try {
    namespace cmd = synthgt::cli;
    if (*simulate) cmd::cmd_simulate(config);
    else if (*ddpm_train) cmd::cmd_ddpm_train(config, in);
    else if (*ddpm_sample) cmd::cmd_ddpm_sample(config, in);
    else if (*pretrain) cmd::cmd_pretrain(config, in);
    else if (*train) cmd::cmd_train(config, in);
    else if (*run) cmd::cmd_run(config);
    else if (*evaluate) cmd::cmd_evaluate(config, in);
    else if (*distshift) cmd::cmd_distshift(config, in);
    else if (*report) cmd::cmd_report(config, in);
  } catch (const synthgt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const synthgt::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
