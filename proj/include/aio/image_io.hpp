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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

// Greyscale PFM: "Pf\n<W> <H>\n<scale>\n" followed by W*H f32 values, rows
// stored bottom-to-top. A negative scale marks a little-endian payload.

std::vector<std::uint8_t> encode_pfm(const Tensor& map, bool little_endian = true);
/// Returns an [H,W] f32 tensor. Malformed headers and short payloads raise
/// FormatError with the offending byte offset.
Tensor decode_pfm(const std::vector<std::uint8_t>& bytes);

void write_pfm(const std::filesystem::path& path, const Tensor& map, bool little_endian = true);
Tensor read_pfm(const std::filesystem::path& path);

/// 8-bit greyscale raster.
struct Gray8 {
  std::int64_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

std::vector<std::uint8_t> encode_pgm(const Gray8& img);
Gray8 decode_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm(const std::filesystem::path& path, const Gray8& img);
Gray8 read_pgm(const std::filesystem::path& path);

/// round(clamp(v,0,1) * 255) of an [H,W] map.
Gray8 quantize_unit(const Tensor& map);
/// [H,W] tensor of pixel/255.
Tensor gray_to_tensor(const Gray8& img, DType dtype = default_dtype());

}  // namespace aio
