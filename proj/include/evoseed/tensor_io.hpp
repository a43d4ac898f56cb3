// Copyright 2026 The evoseed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// EVT1 tensor files.
//
//   bytes 0-3   "EVT1"
//   byte  4     dtype tag, 0x01 = float32 little-endian
//   byte  5     rank r
//   4*r bytes   dims, uint32 little-endian
//   4*prod(dims) payload, row-major
//
// No padding, no checksum. Latents are rank 1, images rank 3 (H, W, C).

#ifndef EVOSEED_TENSOR_IO_HPP_
#define EVOSEED_TENSOR_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "evoseed/errors.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed::io {

inline constexpr char kMagic[4] = {'E', 'V', 'T', '1'};
inline constexpr std::uint8_t kDtypeFloat32 = 0x01;

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(std::span<const std::uint32_t> dims,
                                        std::span<const float> values) {
  if (dims.size() > 255) throw FormatError("EVT1 rank exceeds 255");
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != values.size()) {
    throw FormatError("EVT1 dims product " + std::to_string(count) + " != payload length " +
                      std::to_string(values.size()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * dims.size() + 4 * values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kDtypeFloat32);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) detail::put_u32(out, d);
  for (float v : values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline RawTensor decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6) throw FormatError("EVT1: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("EVT1: bad magic");
  if (bytes[4] != kDtypeFloat32) {
    throw FormatError("EVT1: unsupported dtype tag " + std::to_string(bytes[4]));
  }
  const std::size_t rank = bytes[5];
  std::size_t at = 6;
  if (bytes.size() < at + 4 * rank) throw FormatError("EVT1: truncated dims");
  RawTensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, at += 4) {
    t.dims.push_back(detail::get_u32(bytes, at));
    count *= t.dims.back();
  }
  const std::uint64_t payload = bytes.size() - at;
  if (payload != 4 * count) {
    throw FormatError("EVT1: dims product " + std::to_string(count) + " needs " +
                      std::to_string(4 * count) + " payload bytes, file has " +
                      std::to_string(payload));
  }
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i, at += 4) {
    t.values[i] = std::bit_cast<float>(detail::get_u32(bytes, at));
  }
  return t;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write(const std::filesystem::path& path, const LatentVector& z) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(z.size())};
  write_bytes(path, encode(dims, z.values()));
}

inline void write(const std::filesystem::path& path, const ImageTensor& x) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(x.height()),
                                static_cast<std::uint32_t>(x.width()),
                                static_cast<std::uint32_t>(x.channels())};
  write_bytes(path, encode(dims, x.data()));
}

inline RawTensor read(const std::filesystem::path& path) { return decode(read_bytes(path)); }

inline LatentVector read_latent(const std::filesystem::path& path) {
  auto t = read(path);
  if (t.dims.size() != 1) {
    throw FormatError(path.string() + ": expected rank-1 latent, got rank " +
                      std::to_string(t.dims.size()));
  }
  return LatentVector(std::move(t.values));
}

inline ImageTensor read_image(const std::filesystem::path& path) {
  auto t = read(path);
  if (t.dims.size() != 3) {
    throw FormatError(path.string() + ": expected rank-3 image, got rank " +
                      std::to_string(t.dims.size()));
  }
  return ImageTensor({t.dims[0], t.dims[1], t.dims[2]}, std::move(t.values));
}

}  // namespace evoseed::io

#endif  // EVOSEED_TENSOR_IO_HPP_
