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

#include "aio/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <string>

#include "aio/errors.hpp"
#include "aio/ftc.hpp"

namespace aio {

namespace {

// Tokenizer over a netpbm-style ASCII header.
class HeaderCursor {
 public:
  explicit HeaderCursor(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::size_t pos() const { return pos_; }

  void skip_space(bool comments) {
    while (pos_ < b_.size()) {
      if (comments && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(const char* what, bool comments) {
    skip_space(comments);
    const std::size_t start = pos_;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) ++pos_;
    if (start == pos_) throw FormatError(std::string("missing ") + what, pos_);
    return {reinterpret_cast<const char*>(b_.data() + start), pos_ - start};
  }

  std::int64_t positive_int(const char* what, bool comments) {
    skip_space(comments);
    const std::size_t at = pos_;
    const std::string t = token(what, comments);
    std::int64_t v = 0;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || end != t.data() + t.size() || v <= 0)
      throw FormatError(std::string("bad ") + what + " '" + t + "'", at);
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_of_header() {
    if (pos_ >= b_.size()) throw FormatError("truncated header", pos_);
    if (!std::isspace(b_[pos_])) throw FormatError("header not terminated by whitespace", pos_);
    ++pos_;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_pfm(const Tensor& map, bool little_endian) {
  if (map.ndim() != 2) throw DimensionError("PFM map must be [H,W], got " + shape_str(map.shape()));
  const auto h = map.dim(0), w = map.dim(1);
  const std::string header =
      "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + (little_endian ? "-1.0" : "1.0") + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto values = map.to_vector();
  out.reserve(out.size() + values.size() * 4);
  for (std::int64_t y = h - 1; y >= 0; --y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[y * w + x]));
      for (int i = 0; i < 4; ++i) {
        const int shift = little_endian ? 8 * i : 8 * (3 - i);
        out.push_back(static_cast<std::uint8_t>(bits >> shift));
      }
    }
  }
  return out;
}

Tensor decode_pfm(const std::vector<std::uint8_t>& bytes) {
  HeaderCursor cur(bytes);
  const std::string magic = cur.token("PFM magic", false);
  if (magic == "PF") throw FormatError("colour PFM not supported", 0);
  if (magic != "Pf") throw FormatError("bad PFM magic '" + magic + "'", 0);
  const std::int64_t w = cur.positive_int("PFM width", false);
  const std::int64_t h = cur.positive_int("PFM height", false);
  cur.skip_space(false);
  const std::size_t scale_at = cur.pos();
  const std::string scale_tok = cur.token("PFM scale", false);
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw FormatError("bad PFM scale '" + scale_tok + "'", scale_at);
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be finite and nonzero", scale_at);
  cur.end_of_header();
  const bool little = scale < 0.0;
  const std::size_t start = cur.pos();
  const std::size_t need = static_cast<std::size_t>(w * h) * 4;
  if (bytes.size() - start < need) throw FormatError("truncated PFM payload", bytes.size());
  std::vector<float> values(static_cast<std::size_t>(w * h));
  std::size_t p = start;
  for (std::int64_t y = h - 1; y >= 0; --y) {
    for (std::int64_t x = 0; x < w; ++x, p += 4) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) {
        const int shift = little ? 8 * i : 8 * (3 - i);
        bits |= static_cast<std::uint32_t>(bytes[p + i]) << shift;
      }
      values[static_cast<std::size_t>(y * w + x)] = std::bit_cast<float>(bits);
    }
  }
  if (p != bytes.size()) throw FormatError("trailing bytes after PFM payload", p);
  return Tensor::from_floats({h, w}, std::move(values));
}

void write_pfm(const std::filesystem::path& path, const Tensor& map, bool little_endian) {
  write_file_bytes(path, encode_pfm(map, little_endian));
}

Tensor read_pfm(const std::filesystem::path& path) {
  try {
    return decode_pfm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> encode_pgm(const Gray8& img) {
  if (static_cast<std::int64_t>(img.pixels.size()) != img.height * img.width)
    throw DimensionError("PGM pixel count does not match " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

Gray8 decode_pgm(const std::vector<std::uint8_t>& bytes) {
  HeaderCursor cur(bytes);
  const std::string magic = cur.token("PGM magic", true);
  if (magic != "P5") throw FormatError("bad PGM magic '" + magic + "'", 0);
  Gray8 img;
  img.width = cur.positive_int("PGM width", true);
  img.height = cur.positive_int("PGM height", true);
  cur.skip_space(true);
  const std::size_t max_at = cur.pos();
  const std::int64_t maxval = cur.positive_int("PGM maxval", true);
  if (maxval > 255) throw FormatError("16-bit PGM not supported", max_at);
  cur.end_of_header();
  const std::size_t start = cur.pos();
  const std::size_t need = static_cast<std::size_t>(img.width * img.height);
  if (bytes.size() - start < need) throw FormatError("truncated PGM payload", bytes.size());
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + need));
  if (maxval != 255)
    for (auto& p : img.pixels)
      p = static_cast<std::uint8_t>(std::lround(255.0 * std::min<double>(p, maxval) / static_cast<double>(maxval)));
  return img;
}

void write_pgm(const std::filesystem::path& path, const Gray8& img) { write_file_bytes(path, encode_pgm(img)); }

Gray8 read_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

Gray8 quantize_unit(const Tensor& map) {
  if (map.ndim() != 2) throw DimensionError("expected an [H,W] map, got " + shape_str(map.shape()));
  Gray8 img{map.dim(0), map.dim(1), {}};
  const auto values = map.to_vector();
  img.pixels.reserve(values.size());
  for (double v : values) img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return img;
}

Tensor gray_to_tensor(const Gray8& img, DType dtype) {
  std::vector<double> values(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), values.begin(), [](std::uint8_t p) { return p / 255.0; });
  return Tensor::from_vector({img.height, img.width}, values, dtype);
}

}  // namespace aio
