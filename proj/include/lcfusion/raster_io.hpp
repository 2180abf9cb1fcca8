#pragma once

// Raster exchange format: a JSON sidecar header (name.json) next to a raw
// band-sequential little-endian payload (name.bin).
//
//   {"width":W, "height":H, "bands":B, "dtype":"f32"|"u8",
//    "class_names":[...], "nodata":255|null, "byte_order":"little"}

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcfusion/error.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/text.hpp"

namespace lcfusion {

struct RasterHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  std::string dtype;
  std::vector<std::string> class_names;
  std::optional<int> nodata;
  std::string byte_order = "little";
};

inline std::filesystem::path payload_path(const std::filesystem::path& header_path) {
  auto p = header_path;
  p.replace_extension(".bin");
  return p;
}

inline nlohmann::json header_to_json(const RasterHeader& h) {
  nlohmann::json j;
  j["width"] = h.width;
  j["height"] = h.height;
  j["bands"] = h.bands;
  j["dtype"] = h.dtype;
  j["class_names"] = h.class_names;
  j["nodata"] = h.nodata ? nlohmann::json(*h.nodata) : nlohmann::json(nullptr);
  j["byte_order"] = h.byte_order;
  return j;
}

inline RasterHeader read_header(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed header '" + path.string() + "': " + e.what());
  }
  RasterHeader h;
  try {
    h.width = j.at("width").get<std::size_t>();
    h.height = j.at("height").get<std::size_t>();
    h.bands = j.at("bands").get<std::size_t>();
    h.dtype = j.at("dtype").get<std::string>();
    h.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("nodata") && !j.at("nodata").is_null()) {
      h.nodata = j.at("nodata").get<int>();
    }
    h.byte_order = j.value("byte_order", std::string("little"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed header '" + path.string() + "': " + e.what());
  }
  detail::require(h.dtype == "f32" || h.dtype == "u8", "malformed header: unsupported dtype '" + h.dtype + "'");
  detail::require(h.byte_order == "little", "malformed header: only little-endian payloads are supported");
  detail::require(h.width >= 1 && h.height >= 1 && h.bands >= 1, "malformed header: empty dimensions");
  return h;
}

namespace detail {

inline std::size_t dtype_size(const std::string& dtype) { return dtype == "f32" ? 4 : 1; }

inline std::vector<char> read_payload(const std::filesystem::path& header_path, const RasterHeader& h) {
  const auto bin = payload_path(header_path);
  std::ifstream in(bin, std::ios::binary | std::ios::ate);
  if (!in) {
    throw IoError("cannot open payload '" + bin.string() + "'");
  }
  const auto size = static_cast<std::size_t>(in.tellg());
  const std::size_t expected = h.width * h.height * h.bands * dtype_size(h.dtype);
  if (size != expected) {
    throw ValidationError("dimension mismatch: payload '" + bin.string() + "' has " + std::to_string(size) +
                          " bytes, header implies " + std::to_string(expected));
  }
  std::vector<char> bytes(size);
  in.seekg(0);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (!in) {
    throw IoError("failed reading payload '" + bin.string() + "'");
  }
  return bytes;
}

inline void write_raster_files(const std::filesystem::path& header_path, const RasterHeader& h,
                               const std::vector<char>& payload) {
  if (header_path.empty()) {
    throw IoError("empty output path");
  }
  write_text_file(header_path, header_to_json(h).dump(2) + "\n");
  const auto bin = payload_path(header_path);
  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + bin.string() + "' for writing");
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) {
    throw IoError("failed writing '" + bin.string() + "'");
  }
}

inline float load_f32_le(const char* src) {
  std::uint32_t bits;
  std::memcpy(&bits, src, 4);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  return std::bit_cast<float>(bits);
}

inline void store_f32_le(char* dst, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  std::memcpy(dst, &bits, 4);
}

// Writes a band-sequential f32 stack. `values` is pixel-interleaved with
// `bands` components per pixel.
inline void save_f32_stack(const std::filesystem::path& path, const GridShape& shape, std::size_t bands,
                           const std::vector<double>& values) {
  const std::size_t n = shape.pixel_count();
  std::vector<char> payload(n * bands * 4);
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      store_f32_le(payload.data() + (b * n + i) * 4, static_cast<float>(values[i * bands + b]));
    }
  }
  RasterHeader h{shape.width(), shape.height(), bands, "f32", shape.class_names(), std::nullopt, "little"};
  write_raster_files(path, h, payload);
}

// Reads an f32 stack into pixel-interleaved doubles; rejects NaN/Inf.
inline std::vector<double> load_f32_stack(const std::filesystem::path& path, const RasterHeader& h) {
  detail::require(h.dtype == "f32", "expected an f32 raster in '" + path.string() + "'");
  const auto bytes = read_payload(path, h);
  const std::size_t n = h.width * h.height;
  std::vector<double> values(n * h.bands);
  for (std::size_t b = 0; b < h.bands; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = load_f32_le(bytes.data() + (b * n + i) * 4);
      detail::require(std::isfinite(v), "raster '" + path.string() + "' contains NaN or Inf");
      values[i * h.bands + b] = v;
    }
  }
  return values;
}

}  // namespace detail

inline ProbabilityRaster load_probability_raster(const std::filesystem::path& path,
                                                 double epsilon = kDefaultEpsilon) {
  const auto h = read_header(path);
  detail::require(h.bands == h.class_names.size(),
                  "dimension mismatch: header declares " + std::to_string(h.class_names.size()) +
                      " classes but " + std::to_string(h.bands) + " bands");
  GridShape shape(h.width, h.height, h.class_names);
  auto values = detail::load_f32_stack(path, h);
  for (double v : values) {
    detail::require(v >= 0.0, "raster '" + path.string() + "' contains negative probabilities");
  }
  return ProbabilityRaster(std::move(shape), std::move(values), epsilon);
}

inline void save_probability_raster(const ProbabilityRaster& raster, const std::filesystem::path& path) {
  detail::save_f32_stack(path, raster.shape(), raster.shape().n_classes(), raster.values());
}

inline LabelRaster load_label_raster(const std::filesystem::path& path) {
  const auto h = read_header(path);
  detail::require(h.dtype == "u8" && h.bands == 1, "label raster '" + path.string() + "' must be u8 with one band");
  detail::require(!h.nodata || *h.nodata == kNoData, "label raster nodata must be 255 or null");
  GridShape shape(h.width, h.height, h.class_names);
  auto bytes = detail::read_payload(path, h);
  std::vector<std::uint8_t> values(bytes.size());
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return LabelRaster(std::move(shape), std::move(values));
}

inline void save_label_raster(const LabelRaster& raster, const std::filesystem::path& path) {
  const auto& v = raster.values();
  std::vector<char> payload(v.size());
  std::memcpy(payload.data(), v.data(), v.size());
  RasterHeader h{raster.shape().width(), raster.shape().height(), 1, "u8", raster.shape().class_names(), kNoData,
                 "little"};
  detail::write_raster_files(path, h, payload);
}

inline void save_entropy_raster(const EntropyRaster& raster, const std::filesystem::path& path) {
  detail::save_f32_stack(path, raster.shape(), 1, raster.values());
}

inline EntropyRaster load_entropy_raster(const std::filesystem::path& path) {
  const auto h = read_header(path);
  detail::require(h.bands == 1, "entropy raster '" + path.string() + "' must have one band");
  GridShape shape(h.width, h.height, h.class_names);
  auto values = detail::load_f32_stack(path, h);
  // f32 rounding can lift log2(C) by one ulp of float.
  const double upper = std::log2(static_cast<double>(shape.n_classes()));
  for (double& v : values) {
    v = std::clamp(v, 0.0, upper);
  }
  return EntropyRaster(std::move(shape), std::move(values));
}

}  // namespace lcfusion
