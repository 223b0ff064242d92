// emofuse/text/vocab.hpp

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

#ifndef EMOFUSE_TEXT_VOCAB_HPP_
#define EMOFUSE_TEXT_VOCAB_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace emofuse::text {

constexpr int kPadId = 0;
constexpr int kClsId = 1;
constexpr int kSepId = 2;
constexpr int kUnkId = 3;

inline std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::istringstream ss(lowercase(text));
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

// Word vocabulary with single-character fallback. Words below min_freq
// decompose into character tokens; a fixed character inventory (a-z, 0-9,
// apostrophe) is always present so common words never collapse to [UNK].
class Vocabulary {
 public:
  Vocabulary() {
    for (const char* s : {"[PAD]", "[CLS]", "[SEP]", "[UNK]"}) push(s);
  }

  static Vocabulary build(const std::vector<std::string>& transcripts, int min_freq = 1) {
    if (transcripts.empty())
      throw std::invalid_argument("build_vocab: empty transcript corpus");
    std::map<std::string, std::int64_t> freq;
    for (const auto& line : transcripts)
      for (const auto& tok : whitespace_tokens(line)) ++freq[tok];

    // Stable id order: descending frequency, then lexicographic.
    std::vector<std::pair<std::string, std::int64_t>> accepted;
    for (const auto& [tok, n] : freq)
      if (n >= min_freq) accepted.emplace_back(tok, n);
    std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    Vocabulary v;
    for (const auto& [tok, n] : accepted) v.push(tok);
    for (char c = 'a'; c <= 'z'; ++c) v.push_if_absent(std::string(1, c));
    for (char c = '0'; c <= '9'; ++c) v.push_if_absent(std::string(1, c));
    v.push_if_absent("'");
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  int id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
  }

  const std::string& token_of(int id) const {
    if (id < 0 || id >= size())
      throw std::invalid_argument("vocabulary: id " + std::to_string(id) +
                                  " outside [0, " + std::to_string(size()) + ")");
    return tokens_[static_cast<std::size_t>(id)];
  }

  // Word id when known; otherwise per-character ids with [UNK] for characters
  // outside the inventory.
  std::vector<int> encode_word(const std::string& word) const {
    const int id = id_of(word);
    if (id >= 0) return {id};
    std::vector<int> out;
    for (char c : word) {
      const int cid = id_of(std::string(1, c));
      out.push_back(cid >= 0 ? cid : kUnkId);
    }
    if (out.empty()) out.push_back(kUnkId);
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot create vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << "\n";
    if (!out) throw std::runtime_error("short write to vocabulary file: " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    Vocabulary v;
    v.tokens_.clear();
    v.ids_.clear();
    std::string line;
    while (std::getline(in, line)) v.push(line);
    if (v.size() < 4 || v.tokens_[0] != "[PAD]" || v.tokens_[1] != "[CLS]" ||
        v.tokens_[2] != "[SEP]" || v.tokens_[3] != "[UNK]")
      throw std::runtime_error("vocabulary file missing special tokens: " + path);
    return v;
  }

 private:
  void push(const std::string& tok) {
    if (ids_.count(tok))
      throw std::invalid_argument("vocabulary: duplicate token '" + tok + "'");
    ids_[tok] = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
  }
  void push_if_absent(const std::string& tok) {
    if (!ids_.count(tok)) push(tok);
  }

  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

struct TokenSequence {
  std::vector<int> ids;            // length max_len
  std::vector<std::uint8_t> mask;  // 1 on real tokens
};

// [CLS] + word/char ids + [SEP], truncated so [SEP] stays the final real
// token, padded with [PAD] to max_len.
inline TokenSequence tokenize(const std::string& transcript, const Vocabulary& vocab,
                              int max_len) {
  if (max_len < 2)
    throw std::invalid_argument("tokenize: max_len " + std::to_string(max_len) +
                                " must leave room for [CLS] and [SEP]");
  std::vector<int> body;
  for (const auto& word : whitespace_tokens(transcript))
    for (int id : vocab.encode_word(word)) body.push_back(id);
  if (static_cast<int>(body.size()) > max_len - 2) body.resize(max_len - 2);

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  seq.ids.push_back(kSepId);
  const int real = static_cast<int>(seq.ids.size());
  seq.ids.resize(max_len, kPadId);
  seq.mask.assign(max_len, 0);
  std::fill(seq.mask.begin(), seq.mask.begin() + real, std::uint8_t{1});
  return seq;
}

}  // namespace emofuse::text

#endif  // EMOFUSE_TEXT_VOCAB_HPP_
