// Copyright 2026 The BinauralForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BINAURALFORGE_NN_CHECKPOINT_HPP
#define BINAURALFORGE_NN_CHECKPOINT_HPP

#include <array>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "binauralforge/nn/layers.hpp"

namespace bf::nn {

// Versioned little-endian container: magic, version, config hash, step,
// name-length-prefixed parameter records, trailing CRC32 of everything
// before it. Parameters round-trip bitwise.

inline constexpr uint32_t kCheckpointMagic = 0x42464350;  // "PCFB" on disk
inline constexpr uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return ~crc;
}

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;
  explicit Reader(const std::vector<uint8_t>& b) : buf(b) {}
  void need(size_t n, const char* what) {
    if (pos + n > buf.size())
      throw RuntimeError(std::string("checkpoint: truncated (") + what + ")");
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace ckpt_detail

struct CheckpointMeta {
  uint64_t step = 0;
  uint64_t config_hash = 0;
};

template <class T>
void save_checkpoint(const ParamRegistry<T>& reg, const std::string& path,
                     CheckpointMeta meta = {}) {
  using namespace ckpt_detail;
  std::vector<uint8_t> buf;
  put_u32(buf, kCheckpointMagic);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, sizeof(T) == 4 ? 4 : 8);
  put_u64(buf, meta.step);
  put_u64(buf, meta.config_hash);
  put_u32(buf, static_cast<uint32_t>(reg.params.size()));
  for (const auto& [name, t] : reg.params) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) put_u64(buf, static_cast<uint64_t>(d));
    const auto& v = t.values();
    const size_t bytes = v.size() * sizeof(T);
    const size_t off = buf.size();
    buf.resize(off + bytes);
    std::memcpy(buf.data() + off, v.data(), bytes);
  }
  put_u32(buf, crc32(buf.data(), buf.size()));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("save_checkpoint: cannot open " + path);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw RuntimeError("save_checkpoint: write failed: " + path);
}

// Loads into an existing registry; every stored parameter must match an
// existing name and shape. Returns metadata (step, config hash).
template <class T>
CheckpointMeta load_checkpoint(ParamRegistry<T>& reg, const std::string& path) {
  using namespace ckpt_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("load_checkpoint: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 4)
    throw RuntimeError("load_checkpoint: truncated file: " + path);
  const uint32_t stored_crc =
      uint32_t(buf[buf.size() - 4]) | uint32_t(buf[buf.size() - 3]) << 8 |
      uint32_t(buf[buf.size() - 2]) << 16 | uint32_t(buf[buf.size() - 1]) << 24;
  if (crc32(buf.data(), buf.size() - 4) != stored_crc)
    throw RuntimeError("load_checkpoint: checksum mismatch (corrupt file): " +
                       path);
  Reader r(buf);
  if (r.u32("magic") != kCheckpointMagic)
    throw RuntimeError("load_checkpoint: bad magic: " + path);
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw RuntimeError("load_checkpoint: unsupported version " +
                       std::to_string(version) + ": " + path);
  const uint32_t dtype = r.u32("dtype");
  if (dtype != sizeof(T))
    throw RuntimeError("load_checkpoint: scalar width mismatch (file " +
                       std::to_string(dtype) + " bytes, expected " +
                       std::to_string(sizeof(T)) + "): " + path);
  CheckpointMeta meta;
  meta.step = r.u64("step");
  meta.config_hash = r.u64("config hash");
  const uint32_t count = r.u32("param count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(buf.data() + r.pos),
                     name_len);
    r.pos += name_len;
    const uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<int64_t>(r.u64("dim"));
    auto t = reg.find(name);
    if (t.shape() != shape)
      throw RuntimeError("load_checkpoint: shape mismatch for " + name +
                         ": file " + shape_str(shape) + " vs model " +
                         shape_str(t.shape()));
    const size_t bytes = static_cast<size_t>(numel(shape)) * sizeof(T);
    r.need(bytes, "parameter data");
    std::memcpy(t.values().data(), buf.data() + r.pos, bytes);
    r.pos += bytes;
  }
  return meta;
}

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_CHECKPOINT_HPP
