// SPDX-License-Identifier: Apache-2.0
#pragma once

// "BT58" model container. All integers little-endian.
//
//   magic          4 bytes  "BT58"
//   version        u32      1
//   config_len     u32      followed by config_len bytes of UTF-8 JSON
//   tensor_count   u32
//   tensor_count records:
//     name_len u32, name bytes (UTF-8)
//     dtype    u8   0 = packed_ternary, 1 = real32
//     rows     u32
//     cols     u32
//     weight_scale f32   (packed_ternary only)
//     offset   u64  absolute, multiple of 64
//     length   u64  rows*ceil(cols/4) for packed_ternary, 4*rows*cols for real32
//   zero padding, then payloads in record order, each 64-byte aligned.
//
// Packed payloads use the layout from pack.hpp; real32 payloads are
// row-major IEEE-754 binary32.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bitnet/config.hpp"
#include "bitnet/error.hpp"
#include "bitnet/matrix.hpp"
#include "bitnet/model.hpp"
#include "bitnet/pack.hpp"
#include "bitnet/quant.hpp"

namespace bitnet {

inline constexpr char kMagic[4] = {'B', 'T', '5', '8'};
inline constexpr uint32_t kFormatVersion = 1;
inline constexpr uint64_t kPayloadAlignment = 64;
inline constexpr std::size_t kFooterBytes = 4;  // CRC-32 of every preceding byte

enum class DType : uint8_t { kPackedTernary = 0, kReal32 = 1 };

using Tensor = std::variant<PackedTernaryTensor, MatrixF>;

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct TensorRecord {
  std::string name;
  DType dtype = DType::kReal32;
  uint32_t rows = 0;
  uint32_t cols = 0;
  float weight_scale = 0.0f;
  uint64_t offset = 0;
  uint64_t length = 0;
};

struct ModelFile {
  uint32_t version = kFormatVersion;
  ModelConfig config;
  std::vector<TensorRecord> records;
  std::vector<NamedTensor> tensors;  // same order as records
};

inline uint64_t payload_length(DType dtype, uint64_t rows, uint64_t cols) {
  return dtype == DType::kPackedTernary ? rows * ((cols + 3) / 4) : 4 * rows * cols;
}

// ---------------------------------------------------------------------------
// Canonical tensor names and order

namespace detail {

inline constexpr const char* kLayerFields[] = {"attn_norm", "wq",       "wk",   "wv",
                                               "attn_subln", "wo",      "ffn_norm",
                                               "w_up",      "ffn_subln", "w_down"};

struct NameKey {
  int group = 4;
  std::size_t layer = 0;
  std::size_t field = 0;
  std::string name;
  auto operator<=>(const NameKey&) const = default;
};

// Parses "layers.<i>.<field>" into (i, field).
inline std::optional<std::pair<std::size_t, std::string>> split_layer_name(const std::string& n) {
  constexpr std::string_view prefix = "layers.";
  if (n.rfind(prefix, 0) != 0) return std::nullopt;
  const auto dot = n.find('.', prefix.size());
  if (dot == std::string::npos || dot == prefix.size()) return std::nullopt;
  std::size_t idx = 0;
  for (std::size_t i = prefix.size(); i < dot; ++i) {
    if (n[i] < '0' || n[i] > '9' || dot - prefix.size() > 9) return std::nullopt;
    idx = idx * 10 + std::size_t(n[i] - '0');
  }
  return std::make_pair(idx, n.substr(dot + 1));
}

inline NameKey name_key(const std::string& n) {
  if (n == "tok_embeddings") return {0, 0, 0, n};
  if (n == "norm") return {2, 0, 0, n};
  if (n == "output") return {3, 0, 0, n};
  if (auto lf = split_layer_name(n)) {
    const auto* it = std::find(std::begin(kLayerFields), std::end(kLayerFields), lf->second);
    return {1, lf->first, std::size_t(it - std::begin(kLayerFields)), n};
  }
  return {4, 0, 0, n};
}

struct ExpectedShape {
  DType dtype;
  std::size_t rows, cols;
};

// Shape a known tensor name must have under `cfg`; nullopt for names the
// format does not interpret.
inline std::optional<ExpectedShape> expected_shape(const ModelConfig& cfg, const std::string& n) {
  const std::size_t d = cfg.d_model, kv = cfg.kv_dim(), ff = cfg.d_ff, v = cfg.vocab_size;
  if (n == "tok_embeddings" || n == "output") return ExpectedShape{DType::kReal32, v, d};
  if (n == "norm") return ExpectedShape{DType::kReal32, 1, d};
  const auto lf = split_layer_name(n);
  if (!lf) return std::nullopt;
  if (lf->first >= cfg.n_layers) {
    fail(ErrorKind::kShape, n + ": layer index beyond n_layers " + std::to_string(cfg.n_layers));
  }
  const auto& f = lf->second;
  if (f == "wq" || f == "wo") return ExpectedShape{DType::kPackedTernary, d, d};
  if (f == "wk" || f == "wv") return ExpectedShape{DType::kPackedTernary, kv, d};
  if (f == "w_up") return ExpectedShape{DType::kPackedTernary, ff, d};
  if (f == "w_down") return ExpectedShape{DType::kPackedTernary, d, ff};
  if (f == "attn_norm" || f == "ffn_norm" || f == "attn_subln") {
    return ExpectedShape{DType::kReal32, 1, d};
  }
  if (f == "ffn_subln") return ExpectedShape{DType::kReal32, 1, ff};
  return std::nullopt;
}

inline DType dtype_of(const Tensor& t) {
  return std::holds_alternative<PackedTernaryTensor>(t) ? DType::kPackedTernary : DType::kReal32;
}

inline std::pair<std::size_t, std::size_t> shape_of(const Tensor& t) {
  return std::visit([](const auto& x) { return std::make_pair(x.rows(), x.cols()); }, t);
}

inline MatrixF gain_tensor(const std::vector<float>& g) { return MatrixF(1, g.size(), g); }

}  // namespace detail

inline std::vector<NamedTensor> model_tensors(const Model& m) {
  std::vector<NamedTensor> out;
  out.push_back({"tok_embeddings", m.embedding});
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    out.push_back({p + "attn_norm", detail::gain_tensor(l.attn_norm)});
    out.push_back({p + "wq", l.wq});
    out.push_back({p + "wk", l.wk});
    out.push_back({p + "wv", l.wv});
    out.push_back({p + "attn_subln", detail::gain_tensor(l.attn_subln)});
    out.push_back({p + "wo", l.wo});
    out.push_back({p + "ffn_norm", detail::gain_tensor(l.ffn_norm)});
    out.push_back({p + "w_up", l.w_up});
    out.push_back({p + "ffn_subln", detail::gain_tensor(l.ffn_subln)});
    out.push_back({p + "w_down", l.w_down});
  }
  out.push_back({"norm", detail::gain_tensor(m.final_norm)});
  out.push_back({"output", m.lm_head});
  return out;
}

inline Model model_from_tensors(const ModelConfig& cfg, const std::vector<NamedTensor>& tensors) {
  cfg.validate();
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.tensor;
  auto find = [&](const std::string& n) -> const Tensor& {
    auto it = by_name.find(n);
    if (it == by_name.end()) fail(ErrorKind::kShape, "missing tensor " + n);
    return *it->second;
  };
  auto packed = [&](const std::string& n) {
    const auto* p = std::get_if<PackedTernaryTensor>(&find(n));
    if (!p) fail(ErrorKind::kShape, n + ": expected packed_ternary");
    return *p;
  };
  auto real = [&](const std::string& n) {
    const auto* p = std::get_if<MatrixF>(&find(n));
    if (!p) fail(ErrorKind::kShape, n + ": expected real32");
    return *p;
  };
  auto gain = [&](const std::string& n) { return real(n).values(); };

  Model m;
  m.config = cfg;
  m.embedding = real("tok_embeddings");
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    m.layers.push_back(LayerWeights{packed(p + "wq"), packed(p + "wk"), packed(p + "wv"),
                                    packed(p + "wo"), packed(p + "w_up"), packed(p + "w_down"),
                                    gain(p + "attn_norm"), gain(p + "ffn_norm"),
                                    gain(p + "attn_subln"), gain(p + "ffn_subln")});
  }
  m.final_norm = gain("norm");
  m.lm_head = real("output");
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace detail {

// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
inline uint32_t crc32(std::span<const uint8_t> bytes) noexcept {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (uint8_t b : bytes) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

class ByteWriter {
 public:
  void u8(uint8_t v) { bytes_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(uint8_t(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void pad_to(uint64_t alignment) {
    while (bytes_.size() % alignment != 0) bytes_.push_back(0);
  }
  std::size_t size() const noexcept { return bytes_.size(); }
  std::vector<uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> b) : b_(b) {}

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(ErrorKind::kTruncated, std::string("header truncated reading ") + what);
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b_[pos_++]) << (8 * i);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Serialises to bytes. Tensors are emitted in canonical order (embedding,
// then layer-major with a fixed per-layer field order, final norm, LM head,
// then any other names lexicographically), so equal inputs give equal bytes.
inline std::vector<uint8_t> serialize_model(const ModelConfig& cfg,
                                            std::vector<NamedTensor> tensors) {
  cfg.validate();
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) fail(ErrorKind::kDuplicateName, "duplicate tensor " + t.name);
    const auto [rows, cols] = detail::shape_of(t.tensor);
    if (rows == 0 || cols == 0 || rows > UINT32_MAX || cols > UINT32_MAX) {
      fail(ErrorKind::kShape, t.name + ": unsupported shape");
    }
    if (const auto want = detail::expected_shape(cfg, t.name)) {
      if (want->dtype != detail::dtype_of(t.tensor) || want->rows != rows || want->cols != cols) {
        fail(ErrorKind::kShape, t.name + ": shape/dtype inconsistent with config");
      }
    }
  }
  std::sort(tensors.begin(), tensors.end(), [](const NamedTensor& a, const NamedTensor& b) {
    return detail::name_key(a.name) < detail::name_key(b.name);
  });

  const std::string config_json = nlohmann::json(cfg).dump();

  // Header size is independent of the offsets, so lay out in one pass.
  uint64_t header = 4 + 4 + 4 + config_json.size() + 4;
  for (const auto& t : tensors) {
    header += 4 + t.name.size() + 1 + 4 + 4 + 8 + 8;
    if (detail::dtype_of(t.tensor) == DType::kPackedTernary) header += 4;
  }
  auto align = [](uint64_t v) { return (v + kPayloadAlignment - 1) / kPayloadAlignment * kPayloadAlignment; };

  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kFormatVersion);
  w.str(config_json);
  w.u32(static_cast<uint32_t>(tensors.size()));
  uint64_t offset = align(header);
  for (const auto& t : tensors) {
    const auto dtype = detail::dtype_of(t.tensor);
    const auto [rows, cols] = detail::shape_of(t.tensor);
    const uint64_t length = payload_length(dtype, rows, cols);
    w.str(t.name);
    w.u8(static_cast<uint8_t>(dtype));
    w.u32(static_cast<uint32_t>(rows));
    w.u32(static_cast<uint32_t>(cols));
    if (dtype == DType::kPackedTernary) w.f32(std::get<PackedTernaryTensor>(t.tensor).weight_scale());
    w.u64(offset);
    w.u64(length);
    offset = align(offset + length);
  }
  for (const auto& t : tensors) {
    w.pad_to(kPayloadAlignment);
    if (const auto* p = std::get_if<PackedTernaryTensor>(&t.tensor)) {
      w.raw(p->data().data(), p->data().size());
    } else {
      for (float v : std::get<MatrixF>(t.tensor).flat()) w.f32(v);
    }
  }
  w.u32(detail::crc32(w.bytes()));
  return std::move(w.bytes());
}

inline void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::kIo, "read failed for " + path.string());
  return bytes;
}

inline void write_model(const std::filesystem::path& path, const ModelConfig& cfg,
                        std::vector<NamedTensor> tensors) {
  write_file(path, serialize_model(cfg, std::move(tensors)));
}

inline void save_model(const std::filesystem::path& path, const Model& model) {
  model.validate();
  write_model(path, model.config, model_tensors(model));
}

// Parses and fully validates a container. Throws an Error whose kind names
// the first violated rule; nothing partially parsed is returned.
inline ModelFile parse_model(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kBadMagic, "not a BT58 model file");
  }
  // The footer is checked last so structural errors keep their specific kind.
  const auto body = bytes.size() >= 4 + kFooterBytes ? bytes.first(bytes.size() - kFooterBytes)
                                                     : bytes;
  detail::ByteReader r(body.subspan(4));
  ModelFile file;
  file.version = r.u32("version");
  if (file.version != kFormatVersion) {
    fail(ErrorKind::kUnsupportedVersion, "format version " + std::to_string(file.version));
  }
  const std::string config_json = r.str("config");
  try {
    file.config = nlohmann::json::parse(config_json).get<ModelConfig>();
    file.config.validate();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kMalformedHeader, std::string("config JSON: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kMalformedHeader, e.what());
  }

  const uint32_t count = r.u32("tensor count");
  // smallest record: 4 (name len) + 1 + 4 + 4 + 8 + 8
  if (uint64_t(count) * 29 > r.remaining()) {
    fail(ErrorKind::kTruncated, "header truncated: " + std::to_string(count) + " records declared");
  }
  std::set<std::string> names;
  for (uint32_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.name = r.str("tensor name");
    const uint8_t dt = r.u8("dtype");
    if (dt > 1) fail(ErrorKind::kMalformedHeader, rec.name + ": unknown dtype " + std::to_string(dt));
    rec.dtype = static_cast<DType>(dt);
    rec.rows = r.u32("rows");
    rec.cols = r.u32("cols");
    if (rec.dtype == DType::kPackedTernary) rec.weight_scale = r.f32("weight scale");
    rec.offset = r.u64("offset");
    rec.length = r.u64("length");
    if (!names.insert(rec.name).second) fail(ErrorKind::kDuplicateName, "duplicate tensor " + rec.name);
    if (rec.rows == 0 || rec.cols == 0) fail(ErrorKind::kMalformedHeader, rec.name + ": empty shape");
    if (uint64_t(rec.rows) * rec.cols > (uint64_t{1} << 60)) {
      fail(ErrorKind::kMalformedHeader, rec.name + ": shape too large");
    }
    if (rec.length != payload_length(rec.dtype, rec.rows, rec.cols)) {
      fail(ErrorKind::kMalformedHeader, rec.name + ": payload length does not match shape");
    }
    if (rec.offset % kPayloadAlignment != 0) {
      fail(ErrorKind::kMalformedHeader, rec.name + ": payload offset not 64-byte aligned");
    }
    if (rec.dtype == DType::kPackedTernary &&
        (!std::isfinite(rec.weight_scale) || rec.weight_scale < 0.0f)) {
      fail(ErrorKind::kMalformedHeader, rec.name + ": invalid weight scale");
    }
    file.records.push_back(std::move(rec));
  }
  const uint64_t header_end = 4 + r.pos();

  std::vector<const TensorRecord*> by_offset;
  for (const auto& rec : file.records) by_offset.push_back(&rec);
  std::sort(by_offset.begin(), by_offset.end(),
            [](const TensorRecord* a, const TensorRecord* b) { return a->offset < b->offset; });
  uint64_t cursor = header_end;
  for (const auto* rec : by_offset) {
    if (rec->offset < cursor) {
      fail(ErrorKind::kOverlappingRecords, rec->name + ": payload overlaps header or another tensor");
    }
    cursor = rec->offset + rec->length;
  }

  for (const auto& rec : file.records) {
    if (rec.offset > body.size() || rec.length > body.size() - rec.offset) {
      fail(ErrorKind::kTruncated, rec.name + ": payload runs past end of file");
    }
    const auto payload = body.subspan(rec.offset, rec.length);
    if (rec.dtype == DType::kPackedTernary) {
      if (const auto at = find_reserved_code(payload, rec.rows, rec.cols); at != std::string::npos) {
        fail(ErrorKind::kReservedCode,
             rec.name + ": reserved ternary code at payload byte " + std::to_string(at));
      }
      file.tensors.push_back({rec.name, PackedTernaryTensor::from_bytes(
                                            rec.rows, rec.cols, rec.weight_scale,
                                            std::vector<uint8_t>(payload.begin(), payload.end()))});
    } else {
      std::vector<float> values(std::size_t(rec.rows) * rec.cols);
      for (std::size_t i = 0; i < values.size(); ++i) {
        uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= uint32_t(payload[4 * i + b]) << (8 * b);
        values[i] = std::bit_cast<float>(u);
      }
      file.tensors.push_back({rec.name, MatrixF(rec.rows, rec.cols, std::move(values))});
    }
  }
  if (body.size() == bytes.size()) fail(ErrorKind::kTruncated, "missing checksum footer");
  uint32_t stored = 0;
  for (std::size_t i = 0; i < kFooterBytes; ++i) stored |= uint32_t(bytes[body.size() + i]) << (8 * i);
  if (stored != detail::crc32(body)) fail(ErrorKind::kChecksumMismatch, "file checksum does not match contents");
  return file;
}

inline ModelFile read_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

inline Model load_model(const std::filesystem::path& path) {
  const ModelFile f = read_model(path);
  return model_from_tensors(f.config, f.tensors);
}

// ---------------------------------------------------------------------------
// Checkpoint conversion

struct ConversionEntry {
  std::string name;
  std::string role;  // quantize | keep-real
  std::size_t rows = 0, cols = 0;
  float weight_scale = 0.0f;
  double clipping_fraction = 0.0;
  uint64_t stored_bytes = 0;
};

struct ConversionReport {
  ModelConfig config;
  std::vector<ConversionEntry> tensors;
};

inline void to_json(nlohmann::json& j, const ConversionEntry& e) {
  j = {{"name", e.name},
       {"role", e.role},
       {"rows", e.rows},
       {"cols", e.cols},
       {"weight_scale", e.weight_scale},
       {"clipping_fraction", e.clipping_fraction},
       {"stored_bytes", e.stored_bytes}};
}

inline void to_json(nlohmann::json& j, const ConversionReport& r) {
  j = {{"config", r.config}, {"tensors", r.tensors}};
}

inline MatrixF read_raw_f32(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing tensor file " + path.string());
  const auto bytes = read_file(path);
  if (bytes.size() != rows * cols * 4) {
    fail(ErrorKind::kShape, path.string() + ": " + std::to_string(bytes.size()) +
                                " bytes, expected " + std::to_string(rows * cols * 4) + " for " +
                                std::to_string(rows) + "x" + std::to_string(cols) + " float32");
  }
  std::vector<float> v(rows * cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= uint32_t(bytes[4 * i + b]) << (8 * b);
    v[i] = std::bit_cast<float>(u);
  }
  return MatrixF(rows, cols, std::move(v));
}

// Manifest: {"config": {...}, "tensors": [{"name", "file", "rows", "cols",
// "role"}]}. Tensor files are raw little-endian float32, resolved relative
// to the manifest's directory.
inline ConversionReport convert_checkpoint(const std::filesystem::path& manifest_path,
                                           const std::filesystem::path& output_path) {
  nlohmann::json manifest;
  {
    const auto bytes = read_file(manifest_path);
    try {
      manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kInvalidInput, std::string("manifest: ") + e.what());
    }
  }
  ConversionReport report;
  std::vector<NamedTensor> tensors;
  try {
    report.config = manifest.at("config").get<ModelConfig>();
    report.config.validate();
    const auto base = manifest_path.parent_path();
    for (const auto& entry : manifest.at("tensors")) {
      ConversionEntry e;
      e.name = entry.at("name").get<std::string>();
      e.role = entry.at("role").get<std::string>();
      e.rows = entry.at("rows").get<std::size_t>();
      e.cols = entry.at("cols").get<std::size_t>();
      if (e.rows == 0 || e.cols == 0) fail(ErrorKind::kShape, e.name + ": empty shape");
      const MatrixF w = read_raw_f32(base / entry.at("file").get<std::string>(), e.rows, e.cols);
      if (e.role == "quantize") {
        const TernaryWeights tw = absmean_quantize_weights(w);
        e.weight_scale = tw.weight_scale;
        e.clipping_fraction = clipping_fraction(w, tw.weight_scale);
        e.stored_bytes = packed_size_bytes(e.rows, e.cols);
        tensors.push_back({e.name, pack_ternary(tw)});
      } else if (e.role == "keep-real") {
        check_finite(w.flat(), e.name.c_str());
        e.stored_bytes = 4 * e.rows * e.cols;
        tensors.push_back({e.name, w});
      } else {
        fail(ErrorKind::kInvalidInput, e.name + ": unknown role '" + e.role + "'");
      }
      report.tensors.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("manifest: ") + e.what());
  }
  write_model(output_path, report.config, std::move(tensors));
  return report;
}

}  // namespace bitnet
