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

#include "sbnn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include <zlib.h>

#include "sbnn/kernels.hpp"

namespace sbnn::model_io {

using model::Activation;

ModelIoError::ModelIoError(Kind kind, std::size_t offset, const std::string& what)
    : Error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + what),
      kind_(kind),
      offset_(offset) {}

const char* to_string(ModelIoError::Kind kind) {
  switch (kind) {
    case ModelIoError::Kind::BadMagic: return "BadMagic";
    case ModelIoError::Kind::BadVersion: return "BadVersion";
    case ModelIoError::Kind::CrcMismatch: return "CrcMismatch";
    case ModelIoError::Kind::TruncatedStream: return "TruncatedStream";
    case ModelIoError::Kind::Corrupt: return "Corrupt";
  }
  return "Unknown";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed in chunks.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(bytes.size() - done, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

class BitWriter {
 public:
  void put(std::uint32_t value, int width) {
    for (int b = width - 1; b >= 0; --b) {
      if (bits_ % 8 == 0) bytes_.push_back(0);
      if ((value >> b) & 1U) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> (bits_ % 8));
      ++bits_;
    }
  }
  Payload finish() { return {std::move(bytes_), bits_}; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t get(int width) {
    std::uint32_t v = 0;
    for (int b = 0; b < width; ++b) {
      if (pos_ / 8 >= bytes_.size()) {
        throw ModelIoError(ModelIoError::Kind::TruncatedStream, pos_ / 8, "kernel stream ended");
      }
      v = (v << 1) | ((bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1U);
      ++pos_;
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(int v) {
    if (v < 0) throw ValidationError("encode: negative shape field");
    u32(static_cast<std::uint32_t>(v));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  [[nodiscard]] std::size_t offset() const { return pos_; }
  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw ModelIoError(ModelIoError::Kind::TruncatedStream, pos_,
                         std::string("stream ended reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  /// Shape field; values that cannot describe a real layer are corrupt.
  int dim(const char* what) {
    const std::size_t at = pos_;
    const std::uint32_t v = u32(what);
    if (v > (1U << 24)) {
      throw ModelIoError(ModelIoError::Kind::Corrupt, at, std::string("implausible ") + what);
    }
    return static_cast<int>(v);
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::vector<double> f64s(std::size_t n, const char* what) {
    need(n * 8, what);
    std::vector<double> out(n);
    for (auto& v : out) v = f64(what);
    return out;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_geometry(Writer& w, const model::ConvGeometry& g) {
  w.u32(g.in_channels);
  w.u32(g.out_channels);
  w.u32(g.in_height);
  w.u32(g.in_width);
  w.u32(g.stride);
  w.u32(g.padding);
}

model::ConvGeometry read_conv_geometry(Reader& r) {
  model::ConvGeometry g;
  g.in_channels = r.dim("in_channels");
  g.out_channels = r.dim("out_channels");
  g.in_height = r.dim("in_height");
  g.in_width = r.dim("in_width");
  g.stride = r.dim("stride");
  g.padding = r.dim("padding");
  return g;
}

void write_activation(Writer& w, Activation act, const model::BatchNorm& bn) {
  w.u8(static_cast<std::uint8_t>(act));
  if (act != Activation::BatchNormSign) return;
  w.f64(bn.eps);
  for (std::size_t c = 0; c < bn.channels(); ++c) {
    w.f64(bn.mean[c]);
    w.f64(bn.var[c]);
    w.f64(bn.gamma[c]);
    w.f64(bn.beta[c]);
  }
}

Activation read_activation(Reader& r, model::BatchNorm& bn, std::size_t channels) {
  const std::size_t at = r.offset();
  const std::uint8_t a = r.u8("activation");
  if (a > static_cast<std::uint8_t>(Activation::BatchNormSign)) {
    throw ModelIoError(ModelIoError::Kind::Corrupt, at, "unknown activation code");
  }
  const auto act = static_cast<Activation>(a);
  if (act == Activation::BatchNormSign) {
    bn.eps = r.f64("batchnorm eps");
    r.need(channels * 32, "batchnorm block");
    bn.mean.resize(channels);
    bn.var.resize(channels);
    bn.gamma.resize(channels);
    bn.beta.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      bn.mean[c] = r.f64("batchnorm");
      bn.var[c] = r.f64("batchnorm");
      bn.gamma[c] = r.f64("batchnorm");
      bn.beta[c] = r.f64("batchnorm");
    }
  }
  return act;
}

constexpr std::uint32_t kCodeZero = 0b00;
constexpr std::uint32_t kCodeSingle = 0b01;
constexpr std::uint32_t kCodeDense = 0b10;

std::size_t stream_bytes(std::uint64_t zero, std::uint64_t single, std::uint64_t dense) {
  const std::uint64_t bits = 2 * (zero + single + dense) + 4 * single + 9 * dense;
  return static_cast<std::size_t>((bits + 7) / 8);
}

void pack_raw_bits(Writer& w, const std::vector<std::uint8_t>& bits) {
  BitWriter bw;
  for (std::uint8_t b : bits) bw.put(b, 1);
  w.bytes(bw.finish().bytes);
}

}  // namespace

Payload encode_kernel_stream(std::span<const std::uint8_t> bits) {
  const KernelCensus census = classify_kernels(bits);
  BitWriter bw;
  for (const auto& k : census.classes) {
    switch (k.tag) {
      case KernelClass::Tag::Zero: bw.put(kCodeZero, 2); break;
      case KernelClass::Tag::Single: bw.put(kCodeSingle, 2); break;
      case KernelClass::Tag::Dense: bw.put(kCodeDense, 2); break;
    }
  }
  for (const auto& k : census.classes) {
    if (k.tag == KernelClass::Tag::Single) bw.put(static_cast<std::uint32_t>(k.index()), 4);
  }
  for (const auto& k : census.classes) {
    if (k.tag != KernelClass::Tag::Dense) continue;
    // Tap 0 first.
    for (int t = 0; t < kKernelTaps; ++t) bw.put((k.pattern >> t) & 1U, 1);
  }
  return bw.finish();
}

std::vector<std::uint8_t> decode_kernel_stream(std::span<const std::uint8_t> bytes,
                                               std::size_t kernels) {
  BitReader br(bytes);
  std::vector<std::uint32_t> codes(kernels);
  for (auto& c : codes) {
    c = br.get(2);
    if (c == 0b11) throw ModelIoError(ModelIoError::Kind::Corrupt, 0, "reserved kernel code 11");
  }
  std::vector<std::uint8_t> bits(kernels * kKernelTaps, 0);
  for (std::size_t k = 0; k < kernels; ++k) {
    if (codes[k] != kCodeSingle) continue;
    const std::uint32_t idx = br.get(4);
    if (idx >= static_cast<std::uint32_t>(kKernelTaps)) {
      throw ModelIoError(ModelIoError::Kind::Corrupt, 0, "single-kernel tap index out of range");
    }
    bits[k * kKernelTaps + idx] = 1;
  }
  for (std::size_t k = 0; k < kernels; ++k) {
    if (codes[k] != kCodeDense) continue;
    int hw = 0;
    for (int t = 0; t < kKernelTaps; ++t) {
      const auto b = static_cast<std::uint8_t>(br.get(1));
      bits[k * kKernelTaps + static_cast<std::size_t>(t)] = b;
      hw += b;
    }
    if (hw < 2) {
      throw ModelIoError(ModelIoError::Kind::Corrupt, 0, "dense kernel with Hamming weight < 2");
    }
  }
  return bits;
}

std::uint64_t payload_bits(const model::QuantizedModel& model) {
  std::uint64_t total = 0;
  for (const auto& layer : model.layers) {
    if (const auto* conv = std::get_if<model::BinaryConv>(&layer)) {
      total += encode_kernel_stream(conv->bits).bit_length;
    } else if (const auto* lin = std::get_if<model::BinaryLinear>(&layer)) {
      total += lin->bits.size();
    }
  }
  return total;
}

std::vector<std::uint8_t> encode(const model::QuantizedModel& model) {
  model::validate(model);
  if (model.layers.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ValidationError("encode: too many layers");
  }
  Writer w;
  for (char c : {'S', 'B', 'N', 'N'}) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, model::FloatConv>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::FloatConv));
            write_geometry(w, l.geom);
            write_activation(w, l.act, l.bn);
            for (double v : l.weights) w.f64(v);
            for (double v : l.bias) w.f64(v);
          } else if constexpr (std::is_same_v<T, model::FloatLinear>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::FloatLinear));
            w.u32(l.geom.in_features);
            w.u32(l.geom.out_features);
            write_activation(w, l.act, l.bn);
            for (double v : l.weights) w.f64(v);
            for (double v : l.bias) w.f64(v);
          } else if constexpr (std::is_same_v<T, model::BinaryConv>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::BinaryConv));
            write_geometry(w, l.geom);
            w.f64(l.omega.tau);
            w.f64(l.omega.phi);
            write_activation(w, l.act, l.bn);
            const KernelCensus census = classify_kernels(l.bits);
            w.u32(static_cast<std::uint32_t>(census.zero));
            w.u32(static_cast<std::uint32_t>(census.single));
            w.u32(static_cast<std::uint32_t>(census.dense));
            w.bytes(encode_kernel_stream(l.bits).bytes);
          } else if constexpr (std::is_same_v<T, model::BinaryLinear>) {
            w.u8(static_cast<std::uint8_t>(LayerTag::BinaryLinear));
            w.u32(l.geom.in_features);
            w.u32(l.geom.out_features);
            w.f64(l.omega.tau);
            w.f64(l.omega.phi);
            write_activation(w, l.act, l.bn);
            pack_raw_bits(w, l.bits);
          } else {
            w.u8(static_cast<std::uint8_t>(LayerTag::MaxPool));
            w.u32(l.channels);
            w.u32(l.in_height);
            w.u32(l.in_width);
          }
        },
        layer);
  }
  const std::uint32_t crc = crc32(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

model::QuantizedModel decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "SBNN", 4) != 0) {
    throw ModelIoError(ModelIoError::Kind::BadMagic, 0, "not an SBNN model file");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) {
    throw ModelIoError(ModelIoError::Kind::BadVersion, 4,
                       "unsupported version " + std::to_string(version));
  }
  const std::uint16_t count = r.u16("layer count");

  model::QuantizedModel m;
  m.layers.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t tag = r.u8("layer tag");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::FloatConv: {
        model::FloatConv l;
        l.geom = read_conv_geometry(r);
        l.act = read_activation(r, l.bn, static_cast<std::size_t>(l.geom.out_channels));
        l.weights = r.f64s(l.geom.weight_count(), "conv weights");
        l.bias = r.f64s(static_cast<std::size_t>(l.geom.out_channels), "conv bias");
        m.layers.emplace_back(std::move(l));
        break;
      }
      case LayerTag::FloatLinear: {
        model::FloatLinear l;
        l.geom.in_features = r.dim("in_features");
        l.geom.out_features = r.dim("out_features");
        l.act = read_activation(r, l.bn, static_cast<std::size_t>(l.geom.out_features));
        l.weights = r.f64s(l.geom.weight_count(), "linear weights");
        l.bias = r.f64s(static_cast<std::size_t>(l.geom.out_features), "linear bias");
        m.layers.emplace_back(std::move(l));
        break;
      }
      case LayerTag::BinaryConv: {
        model::BinaryConv l;
        l.geom = read_conv_geometry(r);
        l.omega.tau = r.f64("tau");
        l.omega.phi = r.f64("phi");
        l.act = read_activation(r, l.bn, static_cast<std::size_t>(l.geom.out_channels));
        const std::size_t counts_at = r.offset();
        const std::uint64_t zero = r.u32("kernel counts");
        const std::uint64_t single = r.u32("kernel counts");
        const std::uint64_t dense = r.u32("kernel counts");
        if (zero + single + dense != l.geom.kernel_count()) {
          throw ModelIoError(ModelIoError::Kind::Corrupt, counts_at,
                             "declared kernel counts do not match geometry");
        }
        const std::size_t stream_at = r.offset();
        const auto stream = r.take(stream_bytes(zero, single, dense), "kernel stream");
        try {
          l.bits = decode_kernel_stream(stream, l.geom.kernel_count());
        } catch (const ModelIoError& e) {
          throw ModelIoError(e.kind(), stream_at + e.offset(), e.what());
        }
        const KernelCensus census = classify_kernels(l.bits);
        if (census.zero != zero || census.single != single || census.dense != dense) {
          throw ModelIoError(ModelIoError::Kind::Corrupt, counts_at,
                             "declared kernel counts do not match stream contents");
        }
        m.layers.emplace_back(std::move(l));
        break;
      }
      case LayerTag::BinaryLinear: {
        model::BinaryLinear l;
        l.geom.in_features = r.dim("in_features");
        l.geom.out_features = r.dim("out_features");
        l.omega.tau = r.f64("tau");
        l.omega.phi = r.f64("phi");
        l.act = read_activation(r, l.bn, static_cast<std::size_t>(l.geom.out_features));
        const std::size_t n = l.geom.weight_count();
        const auto raw = r.take((n + 7) / 8, "linear bits");
        l.bits.resize(n);
        for (std::size_t k = 0; k < n; ++k) l.bits[k] = (raw[k / 8] >> (7 - k % 8)) & 1U;
        m.layers.emplace_back(std::move(l));
        break;
      }
      case LayerTag::MaxPool: {
        model::MaxPool l;
        l.channels = r.dim("channels");
        l.in_height = r.dim("in_height");
        l.in_width = r.dim("in_width");
        m.layers.emplace_back(l);
        break;
      }
      default:
        throw ModelIoError(ModelIoError::Kind::Corrupt, at,
                           "unknown layer tag " + std::to_string(tag));
    }
  }
  const std::size_t crc_at = r.offset();
  const std::uint32_t stored = r.u32("crc");
  if (r.remaining() != 0) {
    throw ModelIoError(ModelIoError::Kind::Corrupt, r.offset(), "trailing bytes after crc");
  }
  if (stored != crc32(bytes.first(crc_at))) {
    throw ModelIoError(ModelIoError::Kind::CrcMismatch, crc_at, "checksum does not match");
  }
  try {
    model::validate(m);
  } catch (const ValidationError& e) {
    throw ModelIoError(ModelIoError::Kind::Corrupt, crc_at, e.what());
  }
  return m;
}

void save(const model::QuantizedModel& model, const std::filesystem::path& path) {
  const auto bytes = encode(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

model::QuantizedModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace sbnn::model_io
