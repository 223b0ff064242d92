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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "emofuse/common.hpp"
#include "emofuse/fusion/fusion.hpp"
#include "emofuse/fusion/scores.hpp"

namespace {

using emofuse::Rng;
namespace fusion = emofuse::fusion;
using fusion::Modality;
using fusion::ScoreSet;

ScoreSet make_set(Modality m,
                  const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  ScoreSet s;
  s.modality = m;
  for (const auto& [id, post] : rows) s.add(id, post);
  return s;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("fusion at the weight endpoints returns each modality bit-for-bit",
          "[fusion]") {
  ScoreSet speech = make_set(Modality::kSpeech, {{"a", {-0.11, -2.42, -3.07, -3.25}},
                                                 {"b", {-1.73, -0.21, -2.55, -4.02}}});
  ScoreSet text = make_set(Modality::kText, {{"a", {-1.52, -0.44, -2.01, -2.53}},
                                             {"b", {-0.66, -1.88, -1.97, -2.44}}});

  ScoreSet all_speech = fusion::fuse(speech, text, 1.0);
  ScoreSet all_text = fusion::fuse(speech, text, 0.0);
  for (const auto& id : {"a", "b"}) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(all_speech.at(id)[c] == speech.at(id)[c]);  // exact, not approximate
      CHECK(all_text.at(id)[c] == text.at(id)[c]);
    }
  }
  CHECK(all_speech.modality == Modality::kFused);
}

TEST_CASE("weighted score sum matches the worked example", "[fusion]") {
  ScoreSet speech = make_set(Modality::kSpeech, {{"u1", {-0.1, -2.4, -3.0, -3.2}}});
  ScoreSet text = make_set(Modality::kText, {{"u1", {-1.5, -0.4, -2.0, -2.5}}});
  ScoreSet fused = fusion::fuse(speech, text, 0.5);
  const std::vector<double> expected = {-0.8, -1.4, -2.5, -2.85};
  for (std::size_t c = 0; c < 4; ++c)
    CHECK_THAT(fused.at("u1")[c], Catch::Matchers::WithinAbs(expected[c], 1e-12));
}

TEST_CASE("fused scores are the declared linear combination everywhere", "[fusion]") {
  Rng rng(314);
  ScoreSet speech, text;
  speech.modality = Modality::kSpeech;
  text.modality = Modality::kText;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> s(4), t(4);
    for (auto& v : s) v = -5.0 * rng.uniform_real();
    for (auto& v : t) v = -5.0 * rng.uniform_real();
    speech.add("seg" + std::to_string(i), s);
    text.add("seg" + std::to_string(i), t);
  }
  for (double w1 : {0.13, 0.5, 0.87}) {
    ScoreSet fused = fusion::fuse(speech, text, w1);
    ScoreSet swapped = fusion::fuse(text, speech, 1.0 - w1);
    for (const auto& [id, post] : fused.entries) {
      for (std::size_t c = 0; c < post.size(); ++c) {
        const double manual = w1 * speech.at(id)[c] + (1.0 - w1) * text.at(id)[c];
        CHECK_THAT(post[c], Catch::Matchers::WithinAbs(manual, 1e-15));
        CHECK_THAT(swapped.at(id)[c], Catch::Matchers::WithinAbs(manual, 1e-12));
      }
    }
  }
}

TEST_CASE("fusion rejects weights outside the unit interval", "[fusion]") {
  ScoreSet speech = make_set(Modality::kSpeech, {{"a", {-1.0, -2.0}}});
  ScoreSet text = make_set(Modality::kText, {{"a", {-2.0, -1.0}}});
  CHECK_THROWS_AS(fusion::fuse(speech, text, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(fusion::fuse(speech, text, 1.01), std::invalid_argument);
  CHECK_THROWS_AS(fusion::fuse(speech, text, std::nan("")), std::invalid_argument);
}

TEST_CASE("id mismatches are reported with the offending segment names", "[fusion]") {
  ScoreSet speech = make_set(Modality::kSpeech,
                             {{"only_speech", {-1.0, -2.0}}, {"shared", {-1.0, -2.0}}});
  ScoreSet text =
      make_set(Modality::kText, {{"only_text", {-2.0, -1.0}}, {"shared", {-2.0, -1.0}}});
  CHECK_THROWS_WITH(fusion::check_same_ids(speech, text),
                    Catch::Matchers::ContainsSubstring("only_speech") &&
                        Catch::Matchers::ContainsSubstring("only_text") &&
                        Catch::Matchers::ContainsSubstring("2 mismatched"));

  ScoreSet three = make_set(Modality::kText, {{"shared", {-2.0, -1.0, -0.5}}});
  CHECK_THROWS_WITH(fusion::check_same_ids(speech, three),
                    Catch::Matchers::ContainsSubstring("class count mismatch"));
}

TEST_CASE("score normalization matches the three-point oracle", "[fusion]") {
  // Single class, three segments, scores {-1, -2, -3}: mean -2, population
  // stddev sqrt(2/3), so the normalized values are {+1.2247, 0, -1.2247}.
  ScoreSet s = make_set(Modality::kSpeech, {{"a", {-1.0}}, {"b", {-2.0}}, {"c", {-3.0}}});
  fusion::NormStats st = fusion::estimate_norm_stats(s);
  REQUIRE(st.mean.size() == 1);
  CHECK_THAT(st.mean[0], Catch::Matchers::WithinAbs(-2.0, 1e-12));
  CHECK_THAT(st.stddev[0], Catch::Matchers::WithinAbs(std::sqrt(2.0 / 3.0), 1e-12));

  ScoreSet z = fusion::znorm(s, st);
  CHECK_THAT(z.at("a")[0], Catch::Matchers::WithinAbs(1.2247, 1e-4));
  CHECK_THAT(z.at("b")[0], Catch::Matchers::WithinAbs(0.0, 1e-4));
  CHECK_THAT(z.at("c")[0], Catch::Matchers::WithinAbs(-1.2247, 1e-4));
}

TEST_CASE("pooled statistics collapse all classes into one scalar pair", "[fusion]") {
  ScoreSet s = make_set(Modality::kText, {{"a", {1.0, 3.0}}, {"b", {5.0, 7.0}}});

  fusion::NormStats per_class = fusion::estimate_norm_stats(s, false);
  REQUIRE(per_class.mean.size() == 2);
  CHECK_THAT(per_class.mean[0], Catch::Matchers::WithinAbs(3.0, 1e-12));
  CHECK_THAT(per_class.mean[1], Catch::Matchers::WithinAbs(5.0, 1e-12));
  CHECK_THAT(per_class.stddev[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(per_class.stddev[1], Catch::Matchers::WithinAbs(2.0, 1e-12));

  fusion::NormStats pooled = fusion::estimate_norm_stats(s, true);
  REQUIRE(pooled.mean.size() == 1);
  CHECK(pooled.pooled);
  CHECK_THAT(pooled.mean[0], Catch::Matchers::WithinAbs(4.0, 1e-12));
  CHECK_THAT(pooled.stddev[0], Catch::Matchers::WithinAbs(std::sqrt(5.0), 1e-12));

  CHECK_THROWS_WITH(
      fusion::estimate_norm_stats(make_set(Modality::kText, {{"a", {1.0}}})),
      Catch::Matchers::ContainsSubstring("at least 2 segments"));
}

TEST_CASE("constant scores normalize to zero through the variance floor", "[fusion]") {
  ScoreSet s = make_set(Modality::kSpeech, {{"a", {-2.0}}, {"b", {-2.0}}});
  fusion::NormStats st = fusion::estimate_norm_stats(s);
  CHECK(st.stddev[0] == 1e-8);  // floored, never zero
  ScoreSet z = fusion::znorm(s, st);
  CHECK(z.at("a")[0] == 0.0);
}

TEST_CASE("znorm rejects mismatched per-class statistics", "[fusion]") {
  ScoreSet s = make_set(Modality::kSpeech, {{"a", {-1.0, -2.0}}, {"b", {-2.0, -1.0}}});
  fusion::NormStats st = fusion::estimate_norm_stats(s);
  st.n_classes = 3;
  st.mean.push_back(0.0);
  st.stddev.push_back(1.0);
  CHECK_THROWS_AS(fusion::znorm(s, st), std::invalid_argument);
}

TEST_CASE("argmax classification resolves ties to the lowest class", "[fusion]") {
  CHECK(fusion::classify({-1.0, -1.0, -2.0}) == 0);
  CHECK(fusion::classify({-3.0, -1.0, -1.0}) == 1);
  CHECK(fusion::classify({-0.5, -1.0, -2.0}) == 0);
  CHECK(fusion::classify({-2.0, -1.0, -0.5}) == 2);
}

TEST_CASE("weight search sweeps a 101-point grid and keeps the smallest tie",
          "[fusion]") {
  // One two-class segment where the fused argmax flips to the correct label
  // exactly at w1 = 0.61: every weight above ties at UA 1, the search must
  // keep the first.
  ScoreSet speech = make_set(Modality::kSpeech, {{"u", {-0.1, -2.0}}});
  ScoreSet text = make_set(Modality::kText, {{"u", {-3.0, -0.05}}});
  fusion::WeightSearchResult res = fusion::search_weight(speech, text, {"u"}, {0});
  REQUIRE(res.grid.size() == 101);
  REQUIRE(res.ua.size() == 101);
  CHECK_THAT(res.grid[94], Catch::Matchers::WithinAbs(0.94, 1e-12));
  CHECK_THAT(res.best_w1, Catch::Matchers::WithinAbs(0.61, 1e-12));
  CHECK(res.best_ua == 1.0);
  CHECK(res.ua[60] == 0.0);
  CHECK(res.ua[61] == 1.0);

  // Both modalities already correct: every weight ties, keep w1 = 0.
  fusion::WeightSearchResult flat =
      fusion::search_weight(speech, make_set(Modality::kText, {{"u", {-0.2, -1.5}}}),
                            {"u"}, {0});
  CHECK(flat.best_w1 == 0.0);
  CHECK(flat.best_ua == 1.0);

  CHECK_THROWS_WITH(fusion::search_weight(speech, text, {}, {}),
                    Catch::Matchers::ContainsSubstring("empty holdout"));
  CHECK_THROWS_WITH(fusion::search_weight(speech, text, {"u"}, {0, 1}),
                    Catch::Matchers::ContainsSubstring("1 ids but 2 labels"));
}

TEST_CASE("equal-weight fusion normalizes with holdout statistics before summing",
          "[fusion]") {
  ScoreSet speech = make_set(Modality::kSpeech, {{"x", {-1.0}}, {"y", {-3.0}}});
  ScoreSet text = make_set(Modality::kText, {{"x", {-10.0}}, {"y", {-30.0}}});
  ScoreSet speech_hold = make_set(Modality::kSpeech, {{"h1", {-1.0}}, {"h2", {-3.0}}});
  ScoreSet text_hold = make_set(Modality::kText, {{"h1", {-10.0}}, {"h2", {-30.0}}});

  ScoreSet fused = fusion::equal_weight_fusion(speech, text, speech_hold, text_hold);
  // Holdout stats: speech mean -2 std 1; text mean -20 std 10. Both segments
  // normalize to +1 ("x") and -1 ("y") in each modality, so the equal-weight
  // sum is +1 and -1.
  CHECK_THAT(fused.at("x")[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(fused.at("y")[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("score files survive a write/read round trip", "[fusion]") {
  ScoreSet s = make_set(Modality::kText, {{"a", {-0.25, -1.5, -2.0, -3.0}},
                                          {"b", {-1.0, -0.5, -2.25, -2.75}}});
  const std::string path = temp_path("emofuse_scores_roundtrip.jsonl");
  fusion::write_scores(path, s);
  ScoreSet back = fusion::read_scores(path);
  CHECK(back.modality == Modality::kText);
  CHECK(back.n_classes == 4);
  REQUIRE(back.entries.size() == 2);
  for (const auto& [id, post] : s.entries)
    for (std::size_t c = 0; c < post.size(); ++c) CHECK(back.at(id)[c] == post[c]);
  std::remove(path.c_str());
}

TEST_CASE("score file errors carry the file name and line number", "[fusion]") {
  const std::string path = temp_path("emofuse_scores_bad.jsonl");
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": "a", "modality": "speech", "log_post": [-1.0, -2.0]})" << "\n";
    out << "not json at all\n";
  }
  CHECK_THROWS_WITH(fusion::read_scores(path), Catch::Matchers::ContainsSubstring(":2") &&
                                                   Catch::Matchers::ContainsSubstring(
                                                       "malformed"));

  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": "a", "modality": "speech", "log_post": [-1.0, -2.0]})" << "\n";
    out << R"({"id": "b", "modality": "speech"})" << "\n";
  }
  CHECK_THROWS_WITH(fusion::read_scores(path),
                    Catch::Matchers::ContainsSubstring("missing id/modality/log_post"));

  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": "a", "modality": "speech", "log_post": [-1.0, -2.0]})" << "\n";
    out << R"({"id": "a", "modality": "speech", "log_post": [-2.0, -1.0]})" << "\n";
  }
  CHECK_THROWS_WITH(fusion::read_scores(path),
                    Catch::Matchers::ContainsSubstring(":2") &&
                        Catch::Matchers::ContainsSubstring("duplicate segment id"));

  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": "a", "modality": "speech", "log_post": [-1.0, -2.0]})" << "\n";
    out << R"({"id": "b", "modality": "text", "log_post": [-2.0, -1.0]})" << "\n";
  }
  CHECK_THROWS_WITH(fusion::read_scores(path),
                    Catch::Matchers::ContainsSubstring("mixed modalities"));

  {
    std::ofstream out(path, std::ios::binary);
  }
  CHECK_THROWS_WITH(fusion::read_scores(path),
                    Catch::Matchers::ContainsSubstring("empty"));
  std::remove(path.c_str());

  CHECK_THROWS_AS(fusion::read_scores(temp_path("emofuse_scores_missing.jsonl")),
                  std::runtime_error);
}

TEST_CASE("external score import checks the expected modality", "[fusion]") {
  ScoreSet s = make_set(Modality::kText, {{"a", {-1.0, -2.0}}});
  const std::string path = temp_path("emofuse_scores_external.jsonl");
  fusion::write_scores(path, s);
  ScoreSet ok = fusion::import_external_scores(path, Modality::kText);
  CHECK(ok.entries.size() == 1);
  CHECK_THROWS_WITH(fusion::import_external_scores(path, Modality::kSpeech),
                    Catch::Matchers::ContainsSubstring("expected \"speech\""));
  std::remove(path.c_str());
}
