/*
 * Copyright 2026 The aio-stereo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "aio/ftc.hpp"

#include <fstream>
#include <iterator>

#include "bytes.hpp"

namespace aio {

namespace {
constexpr char kMagic[4] = {'F', 'T', 'C', '1'};
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

std::vector<std::uint8_t> encode_ftc(const Tensor& t) {
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  const auto values = t.to_vector();
  for (double v : values) w.f32(static_cast<float>(v));
  return std::move(w.bytes());
}

Tensor decode_ftc(const std::vector<std::uint8_t>& bytes, std::size_t& offset) {
  io::ByteReader r(bytes, offset);
  const std::size_t start = offset;
  const std::string magic = r.raw(4, "FTC magic");
  if (magic != std::string(kMagic, 4)) throw FormatError("bad FTC magic", start);
  const std::size_t rank_at = r.pos();
  const std::uint32_t rank = r.u32("FTC rank");
  if (rank > kMaxRank) throw FormatError("FTC rank " + std::to_string(rank) + " exceeds limit", rank_at);
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32("FTC dims");
    shape.push_back(d);
    count *= d;
  }
  r.need(static_cast<std::size_t>(count) * 4, "FTC payload");
  std::vector<float> values(static_cast<std::size_t>(count));
  for (auto& v : values) v = r.f32("FTC payload");
  offset = r.pos();
  return Tensor::from_floats(std::move(shape), std::move(values));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_ftc(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_ftc(t)); }

Tensor read_ftc(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t offset = 0;
  Tensor t = decode_ftc(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after FTC payload", offset);
  return t;
}

}  // namespace aio
