// tools/emofuse.cpp

// Copyright 2026  Emofuse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Command-line front door. Every subcommand is a thin wrapper around the
// library functions in emofuse/pipeline/commands.hpp, so behavior here is
// identical to driving the pipeline in-process.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "emofuse/pipeline/commands.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string preset = "desk";
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
};

emofuse::pipeline::RunConfig resolve_config(const CliOptions& opt) {
  emofuse::pipeline::RunConfig cfg = emofuse::pipeline::preset_config(opt.preset);
  if (!opt.config_path.empty())
    cfg = emofuse::pipeline::load_config(opt.config_path, cfg);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.jobs > 0) cfg.jobs = opt.jobs;
  cfg.validate();
  return cfg;
}

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config applied on top of the preset");
  cmd->add_option("--preset", opt.preset, "Base preset: desk (default) or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", opt.out_dir, "Output directory (overrides config out_dir)");
  cmd->add_option("--seed", opt.seed, "Master seed (overrides config seed)")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--jobs", opt.jobs, "Worker cap (commands currently run serially)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emofuse: multimodal speech+text emotion recognition toolkit"};
  app.require_subcommand(1);
  CliOptions opt;

  CLI::App* c_synth = app.add_subcommand("synth", "Generate the synthetic corpora");
  CLI::App* c_features = app.add_subcommand("features", "Extract log-mel feature caches");
  CLI::App* c_pretrain = app.add_subcommand("pretrain", "Speaker-id backbone pretraining");
  CLI::App* c_train_speech =
      app.add_subcommand("train-speech", "Train the speech model per fold");
  CLI::App* c_train_text = app.add_subcommand("train-text", "Train the text model per fold");
  CLI::App* c_score = app.add_subcommand("score", "Score test and holdout segments");
  CLI::App* c_fuse = app.add_subcommand("fuse", "Fuse modality scores per fold");
  CLI::App* c_eval = app.add_subcommand("eval", "Compute WA/UA reports");
  CLI::App* c_pipeline =
      app.add_subcommand("pipeline", "Run synth through eval in one invocation");
  CLI::App* c_gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference checks for every operator");

  for (CLI::App* c : {c_synth, c_features, c_pretrain, c_train_speech, c_train_text,
                      c_score, c_fuse, c_eval, c_pipeline})
    add_common_flags(c, opt);

  int gc_seeds = 10;
  c_gradcheck->add_option("--seeds", gc_seeds, "Random drawings per operator");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gradcheck->parsed()) return emofuse::pipeline::cmd_gradcheck(std::cout, gc_seeds) ? 0 : 1;
    const emofuse::pipeline::RunConfig cfg = resolve_config(opt);
    if (c_synth->parsed()) emofuse::pipeline::cmd_synth(cfg);
    if (c_features->parsed()) emofuse::pipeline::cmd_features(cfg);
    if (c_pretrain->parsed()) emofuse::pipeline::cmd_pretrain(cfg);
    if (c_train_speech->parsed()) emofuse::pipeline::cmd_train_speech(cfg);
    if (c_train_text->parsed()) emofuse::pipeline::cmd_train_text(cfg);
    if (c_score->parsed()) emofuse::pipeline::cmd_score(cfg);
    if (c_fuse->parsed()) emofuse::pipeline::cmd_fuse(cfg);
    if (c_eval->parsed()) {
      const auto report = emofuse::pipeline::cmd_eval(cfg);
      std::cout << "report: " << report.string() << "\n";
    }
    if (c_pipeline->parsed()) {
      const auto report = emofuse::pipeline::run_full_pipeline(cfg);
      std::cout << "report: " << report.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
