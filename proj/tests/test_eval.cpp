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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emofuse/audio/wave.hpp"
#include "emofuse/common.hpp"
#include "emofuse/eval/folds.hpp"
#include "emofuse/eval/manifest.hpp"
#include "emofuse/eval/metrics.hpp"
#include "emofuse/eval/synthetic.hpp"

namespace {

using emofuse::Rng;
namespace eval = emofuse::eval;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

eval::DatasetManifest tiny_manifest(int sessions, int speakers_per_session,
                                    int segments_per_speaker) {
  eval::DatasetManifest m;
  const std::vector<std::string>& names = eval::class_names();
  for (int s = 1; s <= sessions; ++s)
    for (int k = 0; k < speakers_per_session; ++k) {
      const int speaker = (s - 1) * speakers_per_session + k + 1;
      for (int u = 0; u < segments_per_speaker; ++u) {
        eval::ManifestEntry e;
        e.id = "s" + std::to_string(s) + "_spk" + std::to_string(speaker) + "_u" +
               std::to_string(u);
        e.wav = "wav/" + e.id + ".wav";
        e.transcript = "text";
        e.label = names[static_cast<std::size_t>(u % 4)];
        e.session = s;
        e.speaker = speaker;
        m.entries.push_back(std::move(e));
      }
    }
  return m;
}

}  // namespace

TEST_CASE("accuracy metrics match the two-class worked example", "[eval]") {
  // Reference class 0: 9 correct, 1 predicted as class 1. Reference class 1:
  // 10 predicted as class 0, 30 correct. WA = 39/50, UA = (0.9 + 0.75)/2.
  std::vector<int> ref, pred;
  for (int i = 0; i < 9; ++i) { ref.push_back(0); pred.push_back(0); }
  ref.push_back(0); pred.push_back(1);
  for (int i = 0; i < 10; ++i) { ref.push_back(1); pred.push_back(0); }
  for (int i = 0; i < 30; ++i) { ref.push_back(1); pred.push_back(1); }

  eval::ConfusionMatrix cm = eval::confusion(ref, pred, 2);
  CHECK(cm.counts[0][0] == 9);
  CHECK(cm.counts[0][1] == 1);
  CHECK(cm.counts[1][0] == 10);
  CHECK(cm.counts[1][1] == 30);
  CHECK_THAT(eval::weighted_accuracy(cm), Catch::Matchers::WithinAbs(0.78, 1e-12));
  CHECK_THAT(eval::unweighted_accuracy(cm), Catch::Matchers::WithinAbs(0.825, 1e-12));
}

TEST_CASE("metrics agree with a brute-force recount on random label sets", "[eval]") {
  Rng rng(20240817);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_classes = static_cast<int>(rng.uniform_int(2, 5));
    const int n = static_cast<int>(rng.uniform_int(n_classes, 60));
    std::vector<int> ref, pred;
    // Guarantee every class appears at least once in the reference so the
    // brute-force mean needs no skip logic.
    for (int c = 0; c < n_classes; ++c) ref.push_back(c);
    for (int i = n_classes; i < n; ++i)
      ref.push_back(static_cast<int>(rng.uniform_int(0, n_classes - 1)));
    for (int i = 0; i < n; ++i)
      pred.push_back(static_cast<int>(rng.uniform_int(0, n_classes - 1)));

    eval::ConfusionMatrix cm = eval::confusion(ref, pred, n_classes);

    // Brute force, straight from the label vectors.
    std::int64_t correct = 0;
    for (int i = 0; i < n; ++i)
      if (ref[static_cast<std::size_t>(i)] == pred[static_cast<std::size_t>(i)]) ++correct;
    const double wa_brute = static_cast<double>(correct) / static_cast<double>(n);

    double recall_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
      std::int64_t support = 0, hit = 0;
      for (int i = 0; i < n; ++i)
        if (ref[static_cast<std::size_t>(i)] == c) {
          ++support;
          if (pred[static_cast<std::size_t>(i)] == c) ++hit;
        }
      recall_sum += static_cast<double>(hit) / static_cast<double>(support);
    }
    const double ua_brute = recall_sum / static_cast<double>(n_classes);

    INFO("trial " << trial << ": n=" << n << " classes=" << n_classes);
    CHECK_THAT(eval::weighted_accuracy(cm), Catch::Matchers::WithinAbs(wa_brute, 1e-12));
    CHECK_THAT(eval::unweighted_accuracy(cm), Catch::Matchers::WithinAbs(ua_brute, 1e-12));
    CHECK(cm.total() == n);

    // Every cell equals a direct pair count.
    for (int r = 0; r < n_classes; ++r)
      for (int p = 0; p < n_classes; ++p) {
        std::int64_t pairs = 0;
        for (int i = 0; i < n; ++i)
          if (ref[static_cast<std::size_t>(i)] == r &&
              pred[static_cast<std::size_t>(i)] == p)
            ++pairs;
        CHECK(cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(p)] ==
              pairs);
      }
  }
}

TEST_CASE("classes without reference segments are excluded from the recall mean",
          "[eval]") {
  eval::ConfusionMatrix cm =
      eval::confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 3);  // class 2 never referenced
  std::vector<int> skipped;
  const double ua = eval::unweighted_accuracy(cm, &skipped);
  CHECK_THAT(ua, Catch::Matchers::WithinAbs((0.5 + 1.0) / 2.0, 1e-12));
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0] == 2);
}

TEST_CASE("metric preconditions reject malformed inputs", "[eval]") {
  CHECK_THROWS_WITH(eval::confusion({0, 1}, {0}, 2),
                    Catch::Matchers::ContainsSubstring("2 reference labels but 1"));
  CHECK_THROWS_WITH(eval::confusion({0, 2}, {0, 0}, 2),
                    Catch::Matchers::ContainsSubstring("(2, 0)"));
  CHECK_THROWS_AS(eval::confusion({-1}, {0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(eval::weighted_accuracy(eval::ConfusionMatrix(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval::unweighted_accuracy(eval::ConfusionMatrix(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval::aggregate({}), std::invalid_argument);
}

TEST_CASE("fold aggregation is the unweighted mean over folds", "[eval]") {
  eval::FoldMetrics f1, f2;
  f1.wa = 0.5; f1.ua = 0.4;
  f2.wa = 0.7; f2.ua = 0.8;
  eval::AggregateMetrics a = eval::aggregate({f1, f2});
  CHECK_THAT(a.mean_wa, Catch::Matchers::WithinAbs(0.6, 1e-12));
  CHECK_THAT(a.mean_ua, Catch::Matchers::WithinAbs(0.6, 1e-12));
}

TEST_CASE("label mapping merges happy and excited and rejects unknowns", "[eval]") {
  CHECK(eval::map_label("angry") == 0);
  CHECK(eval::map_label("happy") == 1);
  CHECK(eval::map_label("excited") == 1);
  CHECK(eval::map_label("happy_excited") == 1);
  CHECK(eval::map_label("neutral") == 2);
  CHECK(eval::map_label("sad") == 3);
  CHECK_THROWS_WITH(eval::map_label("bored"),
                    Catch::Matchers::ContainsSubstring("bored"));
  CHECK(eval::class_names().size() == 4);
}

TEST_CASE("manifest validation catches structural defects", "[eval]") {
  eval::DatasetManifest empty;
  CHECK_THROWS_WITH(empty.validate(), Catch::Matchers::ContainsSubstring("no entries"));

  eval::DatasetManifest m = tiny_manifest(2, 1, 4);
  m.validate();  // sound as constructed

  eval::DatasetManifest dup = m;
  dup.entries.push_back(dup.entries.front());
  CHECK_THROWS_WITH(dup.validate(),
                    Catch::Matchers::ContainsSubstring("duplicate segment id"));

  eval::DatasetManifest bad_session = m;
  bad_session.entries[0].session = 0;
  CHECK_THROWS_WITH(bad_session.validate(),
                    Catch::Matchers::ContainsSubstring("session 0"));

  eval::DatasetManifest split_speaker = m;
  split_speaker.entries.back().speaker = split_speaker.entries.front().speaker;
  CHECK_THROWS_WITH(split_speaker.validate(),
                    Catch::Matchers::ContainsSubstring("appears in sessions"));

  eval::DatasetManifest bad_label = m;
  bad_label.entries[0].label = "confused";
  CHECK_THROWS_WITH(bad_label.validate(),
                    Catch::Matchers::ContainsSubstring("confused"));
}

TEST_CASE("manifest files survive a write/read round trip", "[eval]") {
  eval::DatasetManifest m = tiny_manifest(2, 2, 4);
  const std::string path =
      (fs::temp_directory_path() / "emofuse_manifest_roundtrip.jsonl").string();
  eval::write_manifest(path, m);
  eval::DatasetManifest back = eval::read_manifest(path);
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].id == m.entries[i].id);
    CHECK(back.entries[i].transcript == m.entries[i].transcript);
    CHECK(back.entries[i].label == m.entries[i].label);
    CHECK(back.entries[i].session == m.entries[i].session);
    CHECK(back.entries[i].speaker == m.entries[i].speaker);
  }

  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": "a", "wav": "w", "transcript": "t", "label": "sad", "session": 1})"
        << "\n";
  }
  CHECK_THROWS_WITH(eval::read_manifest(path),
                    Catch::Matchers::ContainsSubstring(":1") &&
                        Catch::Matchers::ContainsSubstring("\"speaker\""));
  fs::remove(path);
}

TEST_CASE("leave-one-session-out folds partition the corpus with disjoint speakers",
          "[eval]") {
  eval::DatasetManifest m = tiny_manifest(4, 2, 4);
  std::vector<eval::FoldPlan> folds = eval::loso_folds(m);
  REQUIRE(folds.size() == 4);

  std::set<std::string> all_ids;
  for (const auto& e : m.entries) all_ids.insert(e.id);

  for (int i = 0; i < 4; ++i) {
    const eval::FoldPlan& f = folds[static_cast<std::size_t>(i)];
    CHECK(f.fold_index == i);
    CHECK(f.test_session == i + 1);  // sessions sorted ascending
    CHECK(f.validation_session == (i + 1) % 4 + 1);

    // Coverage: train + validation + test reproduce the corpus exactly.
    std::set<std::string> seen;
    for (const auto& id : f.train_ids) CHECK(seen.insert(id).second);
    for (const auto& id : f.validation_ids) CHECK(seen.insert(id).second);
    for (const auto& id : f.test_ids) CHECK(seen.insert(id).second);
    CHECK(seen == all_ids);

    // Speaker disjointness between test and the rest.
    std::set<int> test_speakers, other_speakers;
    for (const auto& id : f.test_ids) test_speakers.insert(m.by_id(id).speaker);
    for (const auto& id : f.train_ids) other_speakers.insert(m.by_id(id).speaker);
    for (const auto& id : f.validation_ids) other_speakers.insert(m.by_id(id).speaker);
    for (int s : test_speakers) CHECK(other_speakers.count(s) == 0);

    // Every test segment really belongs to the held-out session.
    for (const auto& id : f.test_ids) CHECK(m.by_id(id).session == f.test_session);
  }
}

TEST_CASE("two-session corpora fold without a validation split", "[eval]") {
  eval::DatasetManifest m = tiny_manifest(2, 2, 4);
  std::vector<eval::FoldPlan> folds = eval::loso_folds(m);
  REQUIRE(folds.size() == 2);
  for (const auto& f : folds) {
    CHECK(f.validation_session == 0);
    CHECK(f.validation_ids.empty());
    CHECK(f.train_ids.size() + f.test_ids.size() == m.entries.size());
  }

  eval::DatasetManifest one = tiny_manifest(1, 2, 4);
  CHECK_THROWS_WITH(eval::loso_folds(one),
                    Catch::Matchers::ContainsSubstring("at least 2 sessions"));
}

TEST_CASE("synthetic corpus generation is deterministic for a fixed seed", "[eval]") {
  eval::SynthSpec spec;
  spec.n_sessions = 2;
  spec.speakers_per_session = 2;
  spec.segments_per_speaker = 4;
  spec.seed = 97;
  spec.text_swap_prob = 0.2;
  spec.cross_modal_ambiguity = 0.3;

  const std::string dir_a = (fs::temp_directory_path() / "emofuse_synth_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "emofuse_synth_b").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  eval::DatasetManifest ma = eval::generate_synthetic_corpus(spec, dir_a);
  eval::DatasetManifest mb = eval::generate_synthetic_corpus(spec, dir_b);

  CHECK(slurp(dir_a + "/manifest.jsonl") == slurp(dir_b + "/manifest.jsonl"));
  REQUIRE(ma.entries.size() == mb.entries.size());
  for (const auto& e : ma.entries)
    CHECK(slurp(dir_a + "/" + e.wav) == slurp(dir_b + "/" + e.wav));

  // A different seed must change the audio.
  eval::SynthSpec other = spec;
  other.seed = 98;
  const std::string dir_c = (fs::temp_directory_path() / "emofuse_synth_c").string();
  fs::remove_all(dir_c);
  eval::generate_synthetic_corpus(other, dir_c);
  CHECK(slurp(dir_a + "/" + ma.entries[0].wav) !=
        slurp(dir_c + "/" + ma.entries[0].wav));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("synthetic corpus structure matches its spec", "[eval]") {
  eval::SynthSpec spec;
  spec.n_sessions = 3;
  spec.speakers_per_session = 2;
  spec.segments_per_speaker = 8;
  spec.seed = 1301;
  const std::string dir = (fs::temp_directory_path() / "emofuse_synth_shape").string();
  fs::remove_all(dir);
  eval::DatasetManifest m = eval::generate_synthetic_corpus(spec, dir);

  CHECK(m.entries.size() == 3u * 2u * 8u);
  CHECK(m.sessions() == std::vector<int>{1, 2, 3});

  std::map<std::string, int> label_counts;
  std::set<int> speakers;
  for (const auto& e : m.entries) {
    ++label_counts[e.label];
    speakers.insert(e.speaker);
    // Segment index cycles through the classes.
    const int u = std::stoi(e.id.substr(e.id.size() - 3));
    CHECK(eval::map_label(e.label) == u % 4);
  }
  CHECK(speakers.size() == 6);
  for (const auto& name : eval::class_names()) CHECK(label_counts[name] == 12);

  // Durations stay inside base_duration * [0.8, 1.3].
  for (const auto& e : m.entries) {
    emofuse::audio::WaveSegment w =
        emofuse::audio::read_wav(dir + "/" + e.wav, e.id);
    CHECK(w.sample_rate == 16000);
    const double seconds =
        static_cast<double>(w.samples.size()) / static_cast<double>(w.sample_rate);
    CHECK(seconds >= 0.8 * spec.base_duration_s - 1e-6);
    CHECK(seconds <= 1.3 * spec.base_duration_s + 1e-6);
  }

  // The on-disk manifest reloads to the same structure.
  eval::DatasetManifest back = eval::read_manifest(dir + "/manifest.jsonl");
  CHECK(back.entries.size() == m.entries.size());
  fs::remove_all(dir);
}

TEST_CASE("clean transcripts separate the classes by keyword counting", "[eval]") {
  eval::SynthSpec spec;
  spec.n_sessions = 2;
  spec.speakers_per_session = 2;
  spec.segments_per_speaker = 24;
  spec.seed = 555;
  spec.text_swap_prob = 0.0;
  spec.cross_modal_ambiguity = 0.0;
  const std::string dir = (fs::temp_directory_path() / "emofuse_synth_text").string();
  fs::remove_all(dir);
  eval::DatasetManifest m = eval::generate_synthetic_corpus(spec, dir);

  // Count matches against each class keyword inventory and take the argmax.
  int correct = 0;
  for (const auto& e : m.entries) {
    std::istringstream words(e.transcript);
    std::map<std::string, int> seen;
    std::string w;
    while (words >> w) ++seen[w];
    int best_cls = 0, best_hits = -1;
    for (int c = 0; c < 4; ++c) {
      int hits = 0;
      for (const auto& kw : eval::synth_detail::keyword_bank(c)) {
        auto it = seen.find(kw);
        if (it != seen.end()) hits += it->second;
      }
      if (hits > best_hits) { best_hits = hits; best_cls = c; }
    }
    if (best_cls == eval::map_label(e.label)) ++correct;
  }
  const double acc =
      static_cast<double>(correct) / static_cast<double>(m.entries.size());
  INFO("keyword accuracy " << acc);
  CHECK(acc >= 0.95);
  fs::remove_all(dir);
}

TEST_CASE("synthetic spec validation enforces its documented limits", "[eval]") {
  eval::SynthSpec spec;
  spec.n_sessions = 0;
  CHECK_THROWS_WITH(spec.validate(),
                    Catch::Matchers::ContainsSubstring("counts must be positive"));

  spec = eval::SynthSpec{};
  spec.n_sessions = 8;
  spec.speakers_per_session = 5;  // speakers 1..40 exceed the cap
  CHECK_THROWS_WITH(spec.validate(), Catch::Matchers::ContainsSubstring("exceeds 32"));

  spec = eval::SynthSpec{};
  spec.sample_rate = 8000;
  CHECK_THROWS_WITH(spec.validate(),
                    Catch::Matchers::ContainsSubstring("16000"));

  spec = eval::SynthSpec{};
  spec.cross_modal_ambiguity = 1.5;
  CHECK_THROWS_WITH(spec.validate(),
                    Catch::Matchers::ContainsSubstring("[0, 1]"));
}
