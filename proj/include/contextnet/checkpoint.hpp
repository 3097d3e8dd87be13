/* Copyright 2026 The ContextNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Checkpoint container: magic "CNCK", u32 version, u32 tensor count, then
// per tensor a u16 name length, the UTF-8 name, u8 rank, u32 dims, and
// row-major 32-bit little-endian floats.

#ifndef CONTEXTNET_CHECKPOINT_HPP_
#define CONTEXTNET_CHECKPOINT_HPP_

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "contextnet/params.hpp"

namespace contextnet {

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void ck_put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void ck_put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint16_t ck_get_u16(const std::string& b, std::size_t& p) {
  std::uint16_t v = static_cast<std::uint8_t>(b[p]) |
                    (static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[p + 1])) << 8);
  p += 2;
  return v;
}
inline std::uint32_t ck_get_u32(const std::string& b, std::size_t& p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[p + i])) << (8 * i);
  p += 4;
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& store) {
  std::string out;
  out += "CNCK";
  detail::ck_put_u32(out, kCheckpointVersion);
  detail::ck_put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    const auto& p = *e.param;
    if (p.name.size() > 0xffff) throw UsageError("parameter name too long: " + p.name);
    detail::ck_put_u16(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    out.push_back(static_cast<char>(p.value.rank()));
    for (std::int64_t i = 0; i < p.value.rank(); ++i) {
      detail::ck_put_u32(out, static_cast<std::uint32_t>(p.value.dim(i)));
    }
    for (std::int64_t i = 0; i < p.value.numel(); ++i) {
      const float v = static_cast<float>(p.value[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      detail::ck_put_u32(out, bits);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Fill an existing store from a checkpoint. The file must carry exactly the
// store's tensors (matched by name and shape).
template <typename S>
void load_checkpoint(const std::string& path, ParamStore<S>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t p = 0;
  if (buf.size() < 12 || buf.substr(0, 4) != "CNCK") {
    throw FormatError("missing CNCK magic: " + path);
  }
  p = 4;
  const std::uint32_t version = detail::ck_get_u32(buf, p);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = detail::ck_get_u32(buf, p);
  if (count != store.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(store.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    if (p + 2 > buf.size()) throw FormatError("truncated checkpoint: " + path);
    const std::uint16_t name_len = detail::ck_get_u16(buf, p);
    if (p + name_len + 1 > buf.size()) throw FormatError("truncated checkpoint: " + path);
    const std::string name = buf.substr(p, name_len);
    p += name_len;
    const int rank = static_cast<std::uint8_t>(buf[p++]);
    Shape shape(static_cast<std::size_t>(rank));
    if (p + static_cast<std::size_t>(rank) * 4 > buf.size()) throw FormatError("truncated checkpoint: " + path);
    for (int r = 0; r < rank; ++r) shape[static_cast<std::size_t>(r)] = detail::ck_get_u32(buf, p);
    Parameter<S>* param = store.find(name);
    if (param == nullptr) throw FormatError("checkpoint tensor '" + name + "' not in model");
    if (param->value.shape() != shape) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                        ", model expects " + shape_str(param->value.shape()));
    }
    const std::int64_t n = shape_numel(shape);
    if (p + static_cast<std::size_t>(n) * 4 > buf.size()) throw FormatError("truncated checkpoint: " + path);
    for (std::int64_t j = 0; j < n; ++j) {
      const std::uint32_t bits = detail::ck_get_u32(buf, p);
      float v;
      std::memcpy(&v, &bits, 4);
      param->value[j] = static_cast<S>(v);
    }
  }
}

}  // namespace contextnet

#endif  // CONTEXTNET_CHECKPOINT_HPP_
