// emofuse/io/checkpoint.hpp

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

#ifndef EMOFUSE_IO_CHECKPOINT_HPP_
#define EMOFUSE_IO_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "emofuse/common.hpp"
#include "emofuse/nn/layers.hpp"
#include "emofuse/tensor.hpp"

namespace emofuse::io {

// Versioned little-endian container: model kind, config JSON, named parameter
// and buffer tensors, optimizer accumulators, schedule epoch, CRC32 trailer.
// Tensors are float32.
struct Checkpoint {
  std::string kind;
  std::string config_json;
  std::map<std::string, Tensor<float>> params;
  std::map<std::string, Tensor<float>> buffers;
  std::string opt_kind = "none";  // none | sgd | adam
  std::map<std::string, Tensor<float>> opt_m;  // sgd velocity or adam first moment
  std::map<std::string, Tensor<float>> opt_v;  // adam second moment
  std::int64_t opt_step = 0;
  std::int32_t epoch = 0;
};

namespace detail {

constexpr char kMagic[4] = {'E', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_str(std::vector<unsigned char>& b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b.insert(b.end(), s.begin(), s.end());
}
inline void put_tensor(std::vector<unsigned char>& b, const Tensor<float>& t) {
  put_u32(b, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape) put_u64(b, static_cast<std::uint64_t>(d));
  const std::size_t off = b.size();
  b.resize(off + t.data.size() * 4);
  if (!t.data.empty()) std::memcpy(b.data() + off, t.data.data(), t.data.size() * 4);
}
inline void put_tensor_map(std::vector<unsigned char>& b,
                           const std::map<std::string, Tensor<float>>& m) {
  put_u32(b, static_cast<std::uint32_t>(m.size()));
  for (const auto& [name, t] : m) {
    put_str(b, name);
    put_tensor(b, t);
  }
}

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw std::runtime_error("checkpoint file is truncated: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
  Tensor<float> tensor() {
    const std::uint32_t nd = u32();
    Shape shape(nd);
    for (std::uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<std::int64_t>(u64());
    Tensor<float> t(shape);
    need(t.data.size() * 4);
    if (!t.data.empty()) std::memcpy(t.data.data(), p, t.data.size() * 4);
    p += t.data.size() * 4;
    return t;
  }
  std::map<std::string, Tensor<float>> tensor_map() {
    const std::uint32_t n = u32();
    std::map<std::string, Tensor<float>> m;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = str();
      if (m.count(name))
        throw std::runtime_error("checkpoint has duplicate tensor '" + name + "': " + path);
      m[name] = tensor();
    }
    return m;
  }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::vector<unsigned char> payload;
  detail::put_u32(payload, detail::kVersion);
  detail::put_str(payload, ck.kind);
  detail::put_str(payload, ck.config_json);
  detail::put_tensor_map(payload, ck.params);
  detail::put_tensor_map(payload, ck.buffers);
  detail::put_str(payload, ck.opt_kind);
  detail::put_tensor_map(payload, ck.opt_m);
  detail::put_tensor_map(payload, ck.opt_v);
  detail::put_u64(payload, static_cast<std::uint64_t>(ck.opt_step));
  detail::put_u32(payload, static_cast<std::uint32_t>(ck.epoch));
  const std::uint32_t crc = crc32(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create checkpoint file: " + path);
  out.write(detail::kMagic, 4);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  unsigned char tail[4] = {static_cast<unsigned char>(crc),
                           static_cast<unsigned char>(crc >> 8),
                           static_cast<unsigned char>(crc >> 16),
                           static_cast<unsigned char>(crc >> 24)};
  out.write(reinterpret_cast<char*>(tail), 4);
  if (!out) throw std::runtime_error("short write to checkpoint file: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), detail::kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::size_t payload_len = bytes.size() - 8;
  std::uint32_t want = 0;
  for (int i = 0; i < 4; ++i)
    want |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  if (want != crc32(bytes.data() + 4, payload_len))
    throw std::runtime_error("checkpoint file is corrupt (checksum mismatch): " + path);

  detail::Reader r{bytes.data() + 4, bytes.data() + 4 + payload_len, path};
  const std::uint32_t version = r.u32();
  if (version != detail::kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             ": " + path);
  Checkpoint ck;
  ck.kind = r.str();
  ck.config_json = r.str();
  ck.params = r.tensor_map();
  ck.buffers = r.tensor_map();
  ck.opt_kind = r.str();
  ck.opt_m = r.tensor_map();
  ck.opt_v = r.tensor_map();
  ck.opt_step = static_cast<std::int64_t>(r.u64());
  ck.epoch = static_cast<std::int32_t>(r.u32());
  return ck;
}

// Snapshot of a module's parameters and buffers.
inline void pack_params(const nn::ParamSet<float>& ps, Checkpoint& ck) {
  for (const auto* p : ps.params) {
    if (ck.params.count(p->name))
      throw std::invalid_argument("duplicate parameter name '" + p->name + "'");
    ck.params[p->name] = p->value;
  }
  for (const auto* b : ps.buffers) {
    if (ck.buffers.count(b->name))
      throw std::invalid_argument("duplicate buffer name '" + b->name + "'");
    ck.buffers[b->name] = b->value;
  }
}

// Restores a module's tensors in place; names and shapes must match exactly.
inline void unpack_params(nn::ParamSet<float>& ps, const Checkpoint& ck) {
  for (auto* p : ps.params) {
    auto it = ck.params.find(p->name);
    if (it == ck.params.end())
      throw std::runtime_error("checkpoint missing parameter '" + p->name + "'");
    if (it->second.shape != p->value.shape)
      throw std::runtime_error("checkpoint parameter '" + p->name + "' has shape " +
                               shape_str(it->second.shape) + ", expected " +
                               shape_str(p->value.shape));
    p->value = it->second;
  }
  for (auto* b : ps.buffers) {
    auto it = ck.buffers.find(b->name);
    if (it == ck.buffers.end())
      throw std::runtime_error("checkpoint missing buffer '" + b->name + "'");
    if (it->second.shape != b->value.shape)
      throw std::runtime_error("checkpoint buffer '" + b->name + "' has shape " +
                               shape_str(it->second.shape) + ", expected " +
                               shape_str(b->value.shape));
    b->value = it->second;
  }
}

// CRC32 over a parameter set's raw bytes, in name order; used to verify
// freeze contracts.
inline std::uint32_t params_checksum(const nn::ParamSet<float>& ps) {
  std::map<std::string, const Tensor<float>*> sorted;
  for (const auto* p : ps.params) sorted[p->name] = &p->value;
  std::uint32_t crc = 0;
  for (const auto& [name, t] : sorted) {
    crc = crc32_update(crc, name.data(), name.size());
    if (!t->data.empty()) crc = crc32_update(crc, t->data.data(), t->data.size() * 4);
  }
  return crc;
}

}  // namespace emofuse::io

#endif  // EMOFUSE_IO_CHECKPOINT_HPP_
