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
#include <string>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

// FTC tensor container, one tensor per file:
//   "FTC1" | u32 ndim | ndim x u32 dims | prod(dims) x f32 payload
// All integers and floats little-endian.

std::vector<std::uint8_t> encode_ftc(const Tensor& t);

/// Decodes one FTC record starting at `offset`; advances `offset` past it.
/// Errors report absolute byte offsets within `bytes`.
Tensor decode_ftc(const std::vector<std::uint8_t>& bytes, std::size_t& offset);

void write_ftc(const std::filesystem::path& path, const Tensor& t);
Tensor read_ftc(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace aio
