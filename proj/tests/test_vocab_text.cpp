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
// CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE, MERCHANTABLITY OR
// NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "catch_amalgamated.hpp"
#include "emofuse/models/text.hpp"
#include "emofuse/text/vocab.hpp"

using namespace emofuse;
using text::Vocabulary;

TEST_CASE("special tokens occupy the reserved ids", "[text]") {
  Vocabulary v = Vocabulary::build({"hello world"});
  REQUIRE(v.token_of(text::kPadId) == "[PAD]");
  REQUIRE(v.token_of(text::kClsId) == "[CLS]");
  REQUIRE(v.token_of(text::kSepId) == "[SEP]");
  REQUIRE(v.token_of(text::kUnkId) == "[UNK]");
  REQUIRE(text::kPadId == 0);
  REQUIRE(text::kClsId == 1);
  REQUIRE(text::kSepId == 2);
  REQUIRE(text::kUnkId == 3);
}

TEST_CASE("word ids sort by descending frequency then lexicographically", "[text]") {
  // "b" occurs 3x, "a" and "c" 2x each, "z" once.
  Vocabulary v = Vocabulary::build({"b b a c", "b a c z"});
  REQUIRE(v.id_of("b") == 4);
  REQUIRE(v.id_of("a") == 5);  // ties broken alphabetically
  REQUIRE(v.id_of("c") == 6);
  REQUIRE(v.id_of("z") == 7);
}

TEST_CASE("min_freq filters rare words but the char inventory stays", "[text]") {
  Vocabulary v = Vocabulary::build({"common common rare"}, 2);
  REQUIRE(v.id_of("common") >= 4);
  REQUIRE(v.id_of("rare") == -1);
  // Single characters survive via the seeded inventory.
  for (char c = 'a'; c <= 'z'; ++c) REQUIRE(v.id_of(std::string(1, c)) >= 0);
  for (char c = '0'; c <= '9'; ++c) REQUIRE(v.id_of(std::string(1, c)) >= 0);
  REQUIRE(v.id_of("'") >= 0);
}

TEST_CASE("tokenization lowercases input", "[text]") {
  Vocabulary v = Vocabulary::build({"hello"});
  REQUIRE(v.id_of("hello") >= 4);
  auto seq = text::tokenize("HELLO", v, 8);
  REQUIRE(seq.ids[1] == v.id_of("hello"));
}

TEST_CASE("unknown words fall back to characters and then UNK", "[text]") {
  Vocabulary v = Vocabulary::build({"known words only"});
  auto enc = v.encode_word("cab");  // unseen word, known characters
  REQUIRE(enc == std::vector<int>({v.id_of("c"), v.id_of("a"), v.id_of("b")}));
  auto weird = v.encode_word("@#");  // characters outside the inventory
  REQUIRE(weird == std::vector<int>({text::kUnkId, text::kUnkId}));
}

TEST_CASE("tokenize wraps with CLS and SEP, pads, and masks", "[text]") {
  Vocabulary v = Vocabulary::build({"one two three"});
  auto seq = text::tokenize("one two", v, 8);
  REQUIRE(seq.ids.size() == 8);
  REQUIRE(seq.mask.size() == 8);
  REQUIRE(seq.ids[0] == text::kClsId);
  REQUIRE(seq.ids[1] == v.id_of("one"));
  REQUIRE(seq.ids[2] == v.id_of("two"));
  REQUIRE(seq.ids[3] == text::kSepId);
  for (int i = 4; i < 8; ++i) {
    REQUIRE(seq.ids[i] == text::kPadId);
    REQUIRE(seq.mask[i] == 0);
  }
  for (int i = 0; i < 4; ++i) REQUIRE(seq.mask[i] == 1);
}

TEST_CASE("truncation keeps SEP as the final real token", "[text]") {
  Vocabulary v = Vocabulary::build({"a b c d e f g h"});
  auto seq = text::tokenize("a b c d e f g h", v, 6);
  REQUIRE(seq.ids[0] == text::kClsId);
  REQUIRE(seq.ids[5] == text::kSepId);
  for (int i = 0; i < 6; ++i) REQUIRE(seq.mask[i] == 1);
  REQUIRE_THROWS_AS(text::tokenize("a", v, 1), std::invalid_argument);
}

TEST_CASE("vocabulary save/load round trips ids", "[text]") {
  Vocabulary v = Vocabulary::build({"alpha beta beta gamma"});
  auto dir = std::filesystem::temp_directory_path() / "emofuse_text_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "vocab.txt").string();
  v.save(path);
  Vocabulary back = Vocabulary::load(path);
  REQUIRE(back.size() == v.size());
  for (int id = 0; id < v.size(); ++id) REQUIRE(back.token_of(id) == v.token_of(id));

  std::ofstream bad(path);
  bad << "not-a-special\n";
  bad.close();
  REQUIRE_THROWS_AS(Vocabulary::load(path), std::runtime_error);
}

TEST_CASE("transformer config enforces head divisibility", "[text]") {
  models::TransformerConfig cfg;
  cfg.vocab_size = 10;
  cfg.hidden_dim = 30;
  cfg.n_heads = 4;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.hidden_dim = 32;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.vocab_size = 3;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("padding content cannot influence the logits", "[text]") {
  Vocabulary v = Vocabulary::build({"calm bright quiet storm words here"});
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  cfg.max_len = 16;
  Rng rng(404);
  models::TextModel<float> model(cfg, rng);

  auto seq = text::tokenize("calm storm", v, cfg.max_len);
  std::vector<std::int64_t> ids(seq.ids.begin(), seq.ids.end());

  nn::Tape<float> t1;
  auto ps1 = model.all_params();
  nn::stage(t1, ps1, false);
  auto out1 = t1.value(model.forward(t1, ids, seq.mask, 1));

  // Replace every PAD slot with arbitrary in-vocabulary junk, mask unchanged.
  std::vector<std::int64_t> doctored = ids;
  for (std::size_t i = 0; i < doctored.size(); ++i)
    if (seq.mask[i] == 0) doctored[i] = 4 + static_cast<std::int64_t>(i % 3);
  nn::Tape<float> t2;
  auto ps2 = model.all_params();
  nn::stage(t2, ps2, false);
  auto out2 = t2.value(model.forward(t2, doctored, seq.mask, 1));

  REQUIRE(out1.data == out2.data);  // bit-identical, not merely close
}

TEST_CASE("attention rows are distributions and padded keys get zero", "[text]") {
  Vocabulary v = Vocabulary::build({"some words for the attention test"});
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  cfg.max_len = 12;
  Rng rng(11);
  models::TextModel<float> model(cfg, rng);

  auto seq = text::tokenize("some words", v, cfg.max_len);
  std::vector<std::int64_t> ids(seq.ids.begin(), seq.ids.end());
  nn::Tape<float> t;
  auto ps = model.all_params();
  nn::stage(t, ps, false);
  nn::Tensor<float> attn;
  model.forward(t, ids, seq.mask, 1, &attn);

  REQUIRE(attn.shape.size() == 3);
  REQUIRE(attn.shape[0] == cfg.n_heads);            // one sample, all heads
  REQUIRE(attn.shape[1] == cfg.max_len);
  const std::int64_t L = cfg.max_len;
  for (std::int64_t h = 0; h < attn.shape[0]; ++h)
    for (std::int64_t q = 0; q < L; ++q) {
      double sum = 0.0;
      for (std::int64_t k = 0; k < L; ++k) {
        const float w = attn.data[(h * L + q) * L + k];
        if (seq.mask[static_cast<std::size_t>(k)] == 0)
          REQUIRE(w == 0.0f);  // exactly zero on padded keys
        sum += w;
      }
      REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-4));
    }
}

TEST_CASE("forward validates id range and sequence size", "[text]") {
  Vocabulary v = Vocabulary::build({"tiny corpus"});
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  cfg.max_len = 8;
  Rng rng(5);
  models::TextModel<float> model(cfg, rng);
  nn::Tape<float> t;
  auto ps = model.all_params();
  nn::stage(t, ps, false);
  std::vector<std::int64_t> ids(8, 0);
  std::vector<std::uint8_t> mask(8, 1);
  ids[3] = v.size();  // one past the end
  REQUIRE_THROWS_AS(model.forward(t, ids, mask, 1), std::invalid_argument);
  std::vector<std::int64_t> short_ids(7, 0);
  REQUIRE_THROWS_AS(model.forward(t, short_ids, mask, 1), std::invalid_argument);
}

TEST_CASE("score_text returns normalized finite log posteriors", "[text]") {
  Vocabulary v = Vocabulary::build({"a b c d"});
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  Rng rng(21);
  models::TextModel<float> model(cfg, rng);
  auto scores = model.score_text("a d", v);
  REQUIRE(scores.size() == 4);
  double lse = 0.0;
  for (double s : scores) {
    REQUIRE(std::isfinite(s));
    lse += std::exp(s);
  }
  REQUIRE_THAT(lse, Catch::Matchers::WithinAbs(1.0, 1e-4));
}

TEST_CASE("a tiny transformer overfits eight separable sentences", "[text]") {
  const std::vector<std::string> transcripts = {
      "furious rage shouting", "rage outraged seething",
      "delighted cheerful laughing", "wonderful thrilled grinning",
      "report schedule routine", "ordinary statement plain",
      "weeping mournful lonely", "grieving sorrowful weary"};
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
  Vocabulary v = Vocabulary::build(transcripts);
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  cfg.max_len = 16;
  Rng rng(31);
  models::TextModel<float> model(cfg, rng);
  models::TextTrainHyper hyper;
  hyper.epochs = 40;
  hyper.batch_size = 8;
  hyper.target_accuracy = 0.0;  // no early stop; run deep into the overfit
  auto hist = models::train_text(model, transcripts, labels, v, hyper, rng);
  REQUIRE(hist.back().accuracy == 1.0);
  REQUIRE(hist.back().loss < hist.front().loss);
  // The trained model classifies its own training sentences.
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    auto scores = model.score_text(transcripts[i], v);
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (scores[c] > scores[best]) best = c;
    REQUIRE(best == labels[i]);
  }
}

TEST_CASE("train_text validates inputs", "[text]") {
  Vocabulary v = Vocabulary::build({"x"});
  models::TransformerConfig cfg = models::TransformerConfig::desk();
  cfg.vocab_size = v.size();
  Rng rng(1);
  models::TextModel<float> model(cfg, rng);
  models::TextTrainHyper hyper;
  REQUIRE_THROWS_AS(models::train_text(model, {}, {}, v, hyper, rng),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(models::train_text(model, {"x"}, {0, 1}, v, hyper, rng),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(models::train_text(model, {"x"}, {7}, v, hyper, rng),
                    std::invalid_argument);
}
