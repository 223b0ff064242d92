// Copyright 2026  Emofuse Authors
//
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

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "emofuse/pipeline/commands.hpp"
#include "emofuse/pipeline/config.hpp"

namespace {

namespace fs = std::filesystem;
namespace pipeline = emofuse::pipeline;
using pipeline::RunConfig;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small but complete run: 2 sessions so LOSO yields 2 folds, a disjoint
// pretraining corpus, fine_tune transfer. Executed once and shared by every
// test case that inspects run artifacts.
RunConfig mini_config() {
  RunConfig cfg;
  cfg.seed = 2026;
  cfg.out_dir = "/tmp/emofuse_test_pipeline/run_a";
  cfg.synth.n_sessions = 2;
  cfg.synth.speakers_per_session = 2;
  cfg.synth.segments_per_speaker = 4;
  cfg.synth.snr_db = 25.0;
  cfg.synth.pretrain_sessions = 1;
  cfg.synth.pretrain_speakers_per_session = 4;
  cfg.synth.pretrain_segments_per_speaker = 4;
  cfg.pretrain.epochs = 2;
  cfg.speech.epochs = 2;
  cfg.speech.batch_size = 8;
  cfg.text.epochs = 4;
  return cfg;
}

const RunConfig& mini_run() {
  static const RunConfig cfg = [] {
    RunConfig c = mini_config();
    fs::remove_all("/tmp/emofuse_test_pipeline");
    pipeline::run_full_pipeline(c);
    return c;
  }();
  return cfg;
}

}  // namespace

TEST_CASE("unknown config keys are rejected with their location", "[pipeline]") {
  CHECK_THROWS_WITH(pipeline::config_from_json(nlohmann::json{{"bogus", 1}}),
                    Catch::Matchers::ContainsSubstring("unknown key \"bogus\"") &&
                        Catch::Matchers::ContainsSubstring("(root)"));
  CHECK_THROWS_WITH(
      pipeline::config_from_json(nlohmann::json{{"speech", {{"lr", 0.1}}}}),
      Catch::Matchers::ContainsSubstring("unknown key \"lr\"") &&
          Catch::Matchers::ContainsSubstring("\"speech\""));
  CHECK_THROWS_WITH(
      pipeline::config_from_json(nlohmann::json{{"synth", {{"snr", 10}}}}),
      Catch::Matchers::ContainsSubstring("unknown key \"snr\""));
  CHECK_THROWS_WITH(pipeline::config_from_json(nlohmann::json::array({1, 2})),
                    Catch::Matchers::ContainsSubstring("must be a JSON object"));
}

TEST_CASE("partial configs overlay the defaults", "[pipeline]") {
  RunConfig c = pipeline::config_from_json(nlohmann::json{{"speech", {{"epochs", 3}}}});
  CHECK(c.speech.epochs == 3);
  RunConfig d;
  CHECK(c.speech.base_lr == d.speech.base_lr);  // untouched fields keep defaults
  CHECK(c.seed == d.seed);
  CHECK(c.text.epochs == d.text.epochs);
}

TEST_CASE("presets expose the desk and full-scale parameter sets", "[pipeline]") {
  RunConfig desk = pipeline::preset_config("desk");
  CHECK(pipeline::to_json(desk).dump() == pipeline::to_json(RunConfig{}).dump());
  CHECK(desk.speech.preset == "resnet_lite_desk");
  CHECK(desk.speech.base_lr == 0.01);

  RunConfig paper = pipeline::preset_config("paper");
  CHECK(paper.speech.preset == "resnet34_full");
  CHECK(paper.speech.base_lr == 0.1);
  CHECK(paper.speech.head_lr == 0.1);
  CHECK(paper.augment.policy == "aggressive");
  CHECK(paper.text.n_layers == 12);
  CHECK(paper.text.hidden_dim == 768);
  CHECK(paper.text.lr == 2e-5);

  CHECK_THROWS_WITH(pipeline::preset_config("tablet"),
                    Catch::Matchers::ContainsSubstring("tablet"));
}

TEST_CASE("configs survive a JSON round trip", "[pipeline]") {
  RunConfig c;
  c.seed = 999;
  c.out_dir = "runs/elsewhere";
  c.augment.copies = 3;
  c.augment.policy = "aggressive";
  c.frontend.window = emofuse::audio::WindowKind::kHann;
  c.fusion.strategy = "equal";
  c.fusion.pooled_norm = true;
  c.chunking.lengths = {100, 200};
  c.speech.transfer = "scratch";
  c.synth.cross_modal_ambiguity = 0.25;

  const std::string once = pipeline::to_json(c).dump(2);
  RunConfig back = pipeline::config_from_json(nlohmann::json::parse(once));
  CHECK(pipeline::to_json(back).dump(2) == once);
}

TEST_CASE("config files must hold valid JSON", "[pipeline]") {
  const fs::path path = fs::temp_directory_path() / "emofuse_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_WITH(pipeline::load_config(path.string()),
                    Catch::Matchers::ContainsSubstring("not valid JSON"));
  fs::remove(path);
  CHECK_THROWS_WITH(pipeline::load_config((fs::temp_directory_path() /
                                           "emofuse_no_such_config.json")
                                              .string()),
                    Catch::Matchers::ContainsSubstring("cannot open config"));
}

TEST_CASE("config validation rejects out-of-range settings", "[pipeline]") {
  RunConfig c;
  c.out_dir = "";
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("out_dir"));

  c = RunConfig{};
  c.augment.copies = 0;
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("augment.copies"));

  c = RunConfig{};
  c.fusion.strategy = "mean";
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("fusion.strategy"));

  c = RunConfig{};
  c.chunking.lengths.clear();
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("chunking.lengths"));

  c = RunConfig{};
  c.speech.transfer = "warm_start";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = RunConfig{};
  c.synth.n_sessions = 9;
  c.synth.speakers_per_session = 4;  // 36 speakers exceed the timbre cap
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("exceeds 32"));
}

TEST_CASE("the config fingerprint ignores placement but tracks semantics",
          "[pipeline]") {
  RunConfig a;
  RunConfig b = a;
  b.out_dir = "runs/somewhere_else";
  b.jobs = 7;
  CHECK(pipeline::config_fingerprint(a) == pipeline::config_fingerprint(b));

  RunConfig c = a;
  c.seed = a.seed + 1;
  CHECK(pipeline::config_fingerprint(a) != pipeline::config_fingerprint(c));

  RunConfig d = a;
  d.synth.snr_db += 1.0;
  CHECK(pipeline::config_fingerprint(a) != pipeline::config_fingerprint(d));
}

TEST_CASE("the gradient check command reports per-op rows", "[pipeline]") {
  std::ostringstream os;
  const bool ok = pipeline::cmd_gradcheck(os, 1, 1e-4);
  const std::string table = os.str();
  INFO(table);
  CHECK(ok);
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("conv2d"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("attention"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("PASS"));
  CHECK_THAT(table, !Catch::Matchers::ContainsSubstring("FAIL"));
}

TEST_CASE("a small end-to-end run produces the full artifact tree", "[pipeline]") {
  const RunConfig& cfg = mini_run();
  const pipeline::RunPaths paths(cfg.out_dir);

  REQUIRE(fs::exists(paths.report_json()));
  REQUIRE(fs::exists(paths.report_text()));
  REQUIRE(fs::exists(paths.report_csv()));
  CHECK(fs::exists(paths.resolved_config()));
  CHECK(fs::exists(paths.pretrain_ckpt()));

  for (const char* step :
       {"synth", "features", "pretrain", "train_speech", "train_text", "score", "fuse",
        "eval"})
    CHECK(fs::exists(paths.manifest_dir() / (std::string(step) + ".json")));

  const nlohmann::json report = nlohmann::json::parse(slurp(paths.report_json()));
  CHECK(report.at("n_folds").get<int>() == 2);
  CHECK(report.at("classes").size() == 4);
  CHECK(report.at("headline_fusion").get<std::string>() == "fused_search");

  for (const char* mod : {"speech", "text", "fused_search", "fused_equal"}) {
    const nlohmann::json& m = report.at("modalities").at(mod);
    REQUIRE(m.at("folds").size() == 2);
    for (const auto& fold : m.at("folds")) {
      CHECK(fold.at("wa").get<double>() >= 0.0);
      CHECK(fold.at("wa").get<double>() <= 1.0);
      CHECK(fold.at("ua").get<double>() >= 0.0);
      CHECK(fold.at("ua").get<double>() <= 1.0);
      REQUIRE(fold.at("confusion").size() == 4);
      for (const auto& row : fold.at("confusion")) REQUIRE(row.size() == 4);
    }
    CHECK(m.at("mean_ua").get<double>() >= 0.0);
  }

  // Per-fold score artifacts, readable and of the declared modality.
  for (int k = 0; k < 2; ++k) {
    const fs::path fold = paths.fold_dir(k);
    const emofuse::fusion::ScoreSet speech = emofuse::fusion::read_scores(
        (fold / "scores_speech_test.jsonl").string());
    CHECK(speech.modality == emofuse::fusion::Modality::kSpeech);
    CHECK(speech.n_classes == 4);
    CHECK(speech.entries.size() == 8);  // one held-out session, 2 x 4 segments
    const emofuse::fusion::ScoreSet fused =
        emofuse::fusion::read_scores((fold / "fused_search.jsonl").string());
    CHECK(fused.modality == emofuse::fusion::Modality::kFused);
    CHECK(fs::exists(fold / "weight_report.json"));
    CHECK(fs::exists(fold / "fused_equal.jsonl"));
  }

  // The recorded fingerprint matches a recomputation from the config.
  const std::string crc = report.at("config_crc32").get<std::string>();
  CHECK(crc == emofuse::strprintf("%08x", pipeline::config_fingerprint(cfg)));
}

TEST_CASE("re-running evaluation on fixed scores is byte-stable", "[pipeline]") {
  const RunConfig& cfg = mini_run();
  const pipeline::RunPaths paths(cfg.out_dir);
  const std::string before_json = slurp(paths.report_json());
  const std::string before_text = slurp(paths.report_text());
  const std::string before_csv = slurp(paths.report_csv());
  pipeline::cmd_eval(cfg);
  CHECK(slurp(paths.report_json()) == before_json);
  CHECK(slurp(paths.report_text()) == before_text);
  CHECK(slurp(paths.report_csv()) == before_csv);
}

TEST_CASE("fusion refuses score files whose segment ids disagree", "[pipeline]") {
  const RunConfig& cfg = mini_run();
  const pipeline::RunPaths paths(cfg.out_dir);
  const fs::path victim = paths.fold_dir(0) / "scores_speech_test.jsonl";
  const std::string original = slurp(victim);

  // Rename one segment id in the speech file only.
  emofuse::fusion::ScoreSet s = emofuse::fusion::read_scores(victim.string());
  emofuse::fusion::ScoreSet doctored;
  doctored.modality = s.modality;
  bool first = true;
  for (const auto& [id, post] : s.entries) {
    doctored.add(first ? id + "_renamed" : id, post);
    first = false;
  }
  emofuse::fusion::write_scores(victim.string(), doctored);

  CHECK_THROWS_WITH(pipeline::cmd_fuse(cfg),
                    Catch::Matchers::ContainsSubstring("segment id sets differ") &&
                        Catch::Matchers::ContainsSubstring("_renamed"));

  std::ofstream restore(victim, std::ios::binary);
  restore << original;
  restore.close();
  pipeline::cmd_fuse(cfg);  // restored state fuses again
}

TEST_CASE("missing score files name the absent path and the missing step",
          "[pipeline]") {
  RunConfig cfg = mini_config();
  cfg.out_dir = "/tmp/emofuse_test_pipeline/run_missing";
  fs::remove_all(cfg.out_dir);
  pipeline::cmd_synth(cfg);
  CHECK_THROWS_WITH(pipeline::cmd_fuse(cfg),
                    Catch::Matchers::ContainsSubstring("missing score file") &&
                        Catch::Matchers::ContainsSubstring("run the score step"));
  fs::remove_all(cfg.out_dir);
}
