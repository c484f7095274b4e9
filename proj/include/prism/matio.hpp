#pragma once

// Matrix interchange files and variant manifests.
//
// MatrixFile layout (all integers little-endian, 26-byte header):
//
//   offset  size  field
//   0       4     magic "PRSM"
//   4       2     version (u16, currently 1)
//   6       2     dtype (u16: 1 = f32, 2 = f64)
//   8       2     reserved (u16, written as 0, ignored on read)
//   10      8     rows (u64)
//   18      8     cols (u64)
//   26      ...   rows*cols IEEE-754 values, row-major, little-endian
//
// Manifests are JSON documents; see docs/manifest.md.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/error.hpp"
#include "prism/types.hpp"

namespace prism::matio {

enum class Dtype : std::uint16_t { kF32 = 1, kF64 = 2 };

inline constexpr std::array<char, 4> kMagic{'P', 'R', 'S', 'M'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 26;

inline std::size_t dtype_width(Dtype dt) { return dt == Dtype::kF32 ? 4 : 8; }

inline Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return Dtype::kF32;
  if (s == "f64") return Dtype::kF64;
  detail::fail(ErrorCode::kInvalidArgument, "unknown dtype '" + s + "'");
}

struct ReadResult {
  Matrix values;
  Dtype stored = Dtype::kF64;
  std::uint16_t version = kVersion;
  /// True when the payload was f32 and has been widened to f64.
  bool widened = false;
};

namespace detail {

template <typename UInt>
void put_le(std::vector<unsigned char>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Serializes to an in-memory buffer. f64 -> f32 narrowing rounds to nearest.
inline std::vector<unsigned char> encode_matrix(const Matrix& m, Dtype dtype = Dtype::kF64) {
  const auto rows = static_cast<std::uint64_t>(m.rows());
  const auto cols = static_cast<std::uint64_t>(m.cols());
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + rows * cols * dtype_width(dtype));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_le<std::uint16_t>(out, kVersion);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(dtype));
  detail::put_le<std::uint16_t>(out, 0);
  detail::put_le<std::uint64_t>(out, rows);
  detail::put_le<std::uint64_t>(out, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (dtype == Dtype::kF64) {
        detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(r, c)));
      } else {
        detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
      }
    }
  }
  return out;
}

inline ReadResult decode_matrix(const unsigned char* data, std::size_t size) {
  using prism::detail::require;
  require(size >= kHeaderBytes, ErrorCode::kTruncated,
          "header needs " + std::to_string(kHeaderBytes) + " bytes, have " + std::to_string(size));
  require(std::memcmp(data, kMagic.data(), kMagic.size()) == 0, ErrorCode::kBadMagic,
          "expected magic 'PRSM'");
  ReadResult res;
  res.version = detail::get_le<std::uint16_t>(data + 4);
  require(res.version == kVersion, ErrorCode::kInvalidArgument,
          "unsupported version " + std::to_string(res.version));
  const auto dt = detail::get_le<std::uint16_t>(data + 6);
  require(dt == 1 || dt == 2, ErrorCode::kInvalidArgument, "unknown dtype code " + std::to_string(dt));
  res.stored = static_cast<Dtype>(dt);
  res.widened = res.stored == Dtype::kF32;
  const auto rows = detail::get_le<std::uint64_t>(data + 10);
  const auto cols = detail::get_le<std::uint64_t>(data + 18);

  constexpr auto kMaxIndex = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max());
  const std::size_t width = dtype_width(res.stored);
  require(rows <= kMaxIndex && cols <= kMaxIndex, ErrorCode::kShapeOverflow, "dimension too large");
  require(cols == 0 || rows <= std::numeric_limits<std::uint64_t>::max() / cols / width,
          ErrorCode::kShapeOverflow,
          "shape " + std::to_string(rows) + "x" + std::to_string(cols) + " overflows");
  const std::uint64_t payload = rows * cols * width;
  const std::size_t available = size - kHeaderBytes;
  require(available >= payload, ErrorCode::kTruncated,
          "declared " + std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
              std::to_string(payload) + " payload bytes, have " + std::to_string(available));
  require(available == payload, ErrorCode::kIo,
          std::to_string(available - payload) + " trailing bytes after payload");

  res.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const unsigned char* p = data + kHeaderBytes;
  for (Eigen::Index r = 0; r < res.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < res.values.cols(); ++c, p += width) {
      res.values(r, c) = res.stored == Dtype::kF64
                             ? std::bit_cast<double>(detail::get_le<std::uint64_t>(p))
                             : static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(p)));
    }
  }
  return res;
}

inline void write_matrix(const Matrix& m, const std::filesystem::path& path, Dtype dtype = Dtype::kF64) {
  const auto bytes = encode_matrix(m, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  prism::detail::require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  prism::detail::require(static_cast<bool>(out), ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

inline ReadResult read_matrix_ex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  prism::detail::require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_matrix(bytes.data(), bytes.size());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline Matrix read_matrix(const std::filesystem::path& path) { return read_matrix_ex(path).values; }

// ---------------------------------------------------------------------------
// Manifests

struct VariantRecord {
  std::string variant_id;
  std::string family;
  std::string method;
  std::filesystem::path feature_path;
  std::optional<std::filesystem::path> head_path;
  std::optional<double> empirical_gap;
};

struct VariantManifest {
  std::string target_id;
  std::string benchmark_id;
  std::filesystem::path target_feature_path;
  std::optional<std::filesystem::path> target_head_path;
  std::vector<VariantRecord> variants;
};

namespace detail {

inline std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
  prism::detail::require(j.contains(key) && j.at(key).is_string(), ErrorCode::kManifest,
                         where + ": missing string field '" + key + "'");
  return j.at(key).get<std::string>();
}

inline std::string optional_string(const nlohmann::json& j, const char* key) {
  return j.contains(key) && j.at(key).is_string() ? j.at(key).get<std::string>() : std::string{};
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Parses a manifest document. Relative paths are resolved against `base_dir`.
inline VariantManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using prism::detail::require;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    prism::detail::fail(ErrorCode::kManifest, std::string("parse error: ") + e.what());
  }
  require(doc.is_object(), ErrorCode::kManifest, "top level must be an object");

  VariantManifest m;
  m.target_id = detail::required_string(doc, "target_id", "manifest");
  m.benchmark_id = detail::required_string(doc, "benchmark_id", "manifest");
  m.target_feature_path = detail::resolve(base_dir, detail::required_string(doc, "target_feature_path", "manifest"));
  if (auto head = detail::optional_string(doc, "target_head_path"); !head.empty()) {
    m.target_head_path = detail::resolve(base_dir, head);
  }
  require(doc.contains("variants") && doc["variants"].is_array(), ErrorCode::kManifest,
          "manifest: 'variants' must be a list");

  std::set<std::string> seen;
  for (const auto& v : doc["variants"]) {
    require(v.is_object(), ErrorCode::kManifest, "variant entries must be objects");
    VariantRecord rec;
    rec.variant_id = detail::required_string(v, "variant_id", "variant");
    const std::string where = "variant '" + rec.variant_id + "'";
    require(seen.insert(rec.variant_id).second, ErrorCode::kManifest, "duplicate variant_id '" + rec.variant_id + "'");
    rec.family = detail::optional_string(v, "family");
    rec.method = detail::optional_string(v, "method");
    rec.feature_path = detail::resolve(base_dir, detail::required_string(v, "feature_path", where));
    if (auto head = detail::optional_string(v, "head_path"); !head.empty()) {
      rec.head_path = detail::resolve(base_dir, head);
    }
    if (v.contains("empirical_gap") && !v["empirical_gap"].is_null()) {
      require(v["empirical_gap"].is_number(), ErrorCode::kManifest, where + ": empirical_gap must be a number");
      const double gap = v["empirical_gap"].get<double>();
      require(gap >= 0.0, ErrorCode::kManifest, where + ": empirical_gap must be >= 0");
      rec.empirical_gap = gap;
    }
    m.variants.push_back(std::move(rec));
  }
  return m;
}

inline VariantManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  prism::detail::require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, path.parent_path());
}

}  // namespace prism::matio
