/* Copyright 2026 The SBNN Authors. All Rights Reserved.

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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sbnn/model.hpp"

/// SBNN model container.
///
///   "SBNN" | version u16 | layer count u16 | layers... | CRC-32 u32
///
/// All integers little-endian, reals IEEE-754 binary64. The CRC covers every
/// byte before it. Binarized conv weights are stored as a kernel-class stream:
/// 2-bit codes (00 zero, 01 single, 10 dense) for every kernel, then a 4-bit tap
/// index per single kernel, then 9 raw bits per dense kernel, MSB-first and
/// zero-padded to a byte. See docs/model_format.md for the full layout.
namespace sbnn::model_io {

inline constexpr std::uint16_t kVersion = 1;

enum class LayerTag : std::uint8_t {
  FloatConv = 1,
  FloatLinear = 2,
  BinaryConv = 3,
  BinaryLinear = 4,
  MaxPool = 5,
};

class ModelIoError : public Error {
 public:
  enum class Kind { BadMagic, BadVersion, CrcMismatch, TruncatedStream, Corrupt };

  ModelIoError(Kind kind, std::size_t offset, const std::string& what);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

const char* to_string(ModelIoError::Kind kind);

struct Payload {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_length = 0;  // before byte padding
};

/// Weight payload of a binarized conv layer.
Payload encode_kernel_stream(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> decode_kernel_stream(std::span<const std::uint8_t> bytes,
                                               std::size_t kernels);

/// Weight payload bit length summed over every binarized layer.
std::uint64_t payload_bits(const model::QuantizedModel& model);

std::vector<std::uint8_t> encode(const model::QuantizedModel& model);
model::QuantizedModel decode(std::span<const std::uint8_t> bytes);

void save(const model::QuantizedModel& model, const std::filesystem::path& path);
model::QuantizedModel load(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace sbnn::model_io
