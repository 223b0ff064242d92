// emofuse/eval/manifest.hpp

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

#ifndef EMOFUSE_EVAL_MANIFEST_HPP_
#define EMOFUSE_EVAL_MANIFEST_HPP_

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emofuse/common.hpp"

namespace emofuse::eval {

// Emotion classes use fixed integer ids so score vectors line up everywhere:
// 0 angry, 1 happy (includes excited), 2 neutral, 3 sad.
inline const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names = {"angry", "happy", "neutral", "sad"};
  return names;
}

// Maps a raw label string to its class id. The merged spelling
// "happy_excited" and the raw constituents "happy"/"excited" all map to 1.
inline int map_label(const std::string& raw) {
  if (raw == "angry") return 0;
  if (raw == "happy" || raw == "excited" || raw == "happy_excited") return 1;
  if (raw == "neutral") return 2;
  if (raw == "sad") return 3;
  throw std::invalid_argument("unknown emotion label \"" + raw + "\"");
}

struct ManifestEntry {
  std::string id;
  std::string wav;         // path, relative to the manifest's directory or absolute
  std::string transcript;
  std::string label;       // raw label string; map_label() yields the class id
  int session = 0;
  int speaker = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  // Checks structural integrity: unique ids, positive sessions, and each
  // speaker confined to exactly one session (the leave-one-session-out
  // protocol relies on that).
  void validate() const {
    if (entries.empty()) throw std::invalid_argument("manifest: no entries");
    std::set<std::string> ids;
    std::map<int, int> speaker_session;
    for (const auto& e : entries) {
      if (e.id.empty()) throw std::invalid_argument("manifest: entry with empty id");
      if (!ids.insert(e.id).second)
        throw std::invalid_argument("manifest: duplicate segment id \"" + e.id + "\"");
      if (e.session < 1)
        throw std::invalid_argument("manifest: segment \"" + e.id + "\" has session " +
                                    std::to_string(e.session) + ", expected >= 1");
      map_label(e.label);  // throws on unknown labels
      auto [it, inserted] = speaker_session.emplace(e.speaker, e.session);
      if (!inserted && it->second != e.session)
        throw std::invalid_argument("manifest: speaker " + std::to_string(e.speaker) +
                                    " appears in sessions " + std::to_string(it->second) +
                                    " and " + std::to_string(e.session));
    }
  }

  std::vector<int> sessions() const {
    std::set<int> s;
    for (const auto& e : entries) s.insert(e.session);
    return {s.begin(), s.end()};
  }

  const ManifestEntry& by_id(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return e;
    throw std::invalid_argument("manifest: no segment with id \"" + id + "\"");
  }
};

inline void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["wav"] = e.wav;
    j["transcript"] = e.transcript;
    j["label"] = e.label;
    j["session"] = e.session;
    j["speaker"] = e.speaker;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed manifest record: " + e.what());
    }
    for (const char* key : {"id", "wav", "transcript", "label", "session", "speaker"})
      if (!j.contains(key))
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": manifest record missing \"" + key + "\"");
    ManifestEntry e;
    e.id = j["id"].get<std::string>();
    e.wav = j["wav"].get<std::string>();
    e.transcript = j["transcript"].get<std::string>();
    e.label = j["label"].get<std::string>();
    e.session = j["session"].get<int>();
    e.speaker = j["speaker"].get<int>();
    m.entries.push_back(std::move(e));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return m;
}

}  // namespace emofuse::eval

#endif  // EMOFUSE_EVAL_MANIFEST_HPP_
