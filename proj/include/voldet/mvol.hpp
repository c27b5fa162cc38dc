#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voldet/volume.hpp"

// MVOL on-disk format: a <stem>.json header describing shape/spacing/origin/
// dtype/kind plus a <stem>.raw payload holding the voxels in (z,y,x) order,
// x fastest-varying, little-endian regardless of host byte order.

namespace voldet {

namespace detail {

inline std::string mvol_stem(const std::string& path) {
  auto ends_with = [&](const char* suf) {
    const std::string s(suf);
    return path.size() > s.size() &&
           path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".json")) return path.substr(0, path.size() - 5);
  if (ends_with(".raw")) return path.substr(0, path.size() - 4);
  return path;
}

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::u8: return 1;
    default: return 2;
  }
}

inline Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return Dtype::f32;
  if (s == "u8") return Dtype::u8;
  if (s == "u16") return Dtype::u16;
  throw std::runtime_error("mvol: unknown dtype \"" + s + "\"");
}

inline VoxelKind parse_kind(const std::string& s) {
  if (s == "image") return VoxelKind::image;
  if (s == "label") return VoxelKind::label;
  throw std::runtime_error("mvol: unknown kind \"" + s + "\"");
}

inline void push_le(std::vector<unsigned char>& buf, std::uint32_t v,
                    int bytes) {
  for (int i = 0; i < bytes; ++i)
    buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

}  // namespace detail

/// Writes <stem>.json and <stem>.raw. The stem is `path` with a trailing
/// .json or .raw stripped. Integer dtypes require integral in-range data.
inline void save_volume(const Volume& vol, const std::string& path) {
  validate(vol);
  const std::string stem = detail::mvol_stem(path);

  nlohmann::ordered_json h;
  h["shape"] = vol.shape;
  h["spacing"] = vol.spacing;
  h["origin"] = vol.origin;
  h["dtype"] = to_string(vol.dtype);
  h["kind"] = to_string(vol.kind);
  h["byte_order"] = "little";
  h["axes"] = "zyx";

  std::vector<unsigned char> payload;
  payload.reserve(vol.data.size() * detail::dtype_size(vol.dtype));
  for (float f : vol.data) {
    switch (vol.dtype) {
      case Dtype::f32:
        detail::push_le(payload, std::bit_cast<std::uint32_t>(f), 4);
        break;
      case Dtype::u8: {
        if (f < 0.0f || f > 255.0f || f != std::floor(f))
          throw std::invalid_argument("mvol: value not representable as u8");
        detail::push_le(payload, static_cast<std::uint32_t>(f), 1);
        break;
      }
      case Dtype::u16: {
        if (f < 0.0f || f > 65535.0f || f != std::floor(f))
          throw std::invalid_argument("mvol: value not representable as u16");
        detail::push_le(payload, static_cast<std::uint32_t>(f), 2);
        break;
      }
    }
  }

  {
    std::ofstream out(stem + ".json", std::ios::binary);
    if (!out) throw std::runtime_error("mvol: cannot write " + stem + ".json");
    out << h.dump(2) << "\n";
    if (!out) throw std::runtime_error("mvol: write failed: " + stem + ".json");
  }
  {
    std::ofstream out(stem + ".raw", std::ios::binary);
    if (!out) throw std::runtime_error("mvol: cannot write " + stem + ".raw");
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("mvol: write failed: " + stem + ".raw");
  }
}

inline Volume load_volume(const std::string& path) {
  const std::string stem = detail::mvol_stem(path);

  std::ifstream hin(stem + ".json", std::ios::binary);
  if (!hin) throw std::runtime_error("mvol: missing header " + stem + ".json");
  nlohmann::json h;
  try {
    hin >> h;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("mvol: corrupt header " + stem + ".json: " +
                             e.what());
  }

  Volume v;
  try {
    h.at("shape").get_to(v.shape);
    h.at("spacing").get_to(v.spacing);
    h.at("origin").get_to(v.origin);
    v.dtype = detail::parse_dtype(h.at("dtype").get<std::string>());
    v.kind = detail::parse_kind(h.at("kind").get<std::string>());
    if (h.at("byte_order").get<std::string>() != "little")
      throw std::runtime_error("mvol: unsupported byte order");
    if (h.contains("axes") && h.at("axes").get<std::string>() != "zyx")
      throw std::runtime_error("mvol: unsupported axis order");
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("mvol: corrupt header " + stem + ".json: " +
                             e.what());
  }
  for (int i = 0; i < 3; ++i) {
    if (v.shape[i] <= 0)
      throw std::runtime_error("mvol: header shape must be positive");
    if (!(v.spacing[i] > 0.0))
      throw std::runtime_error("mvol: header spacing must be positive");
  }

  std::ifstream rin(stem + ".raw", std::ios::binary | std::ios::ate);
  if (!rin) throw std::runtime_error("mvol: missing payload " + stem + ".raw");
  const auto size = static_cast<std::size_t>(rin.tellg());
  const std::size_t want = static_cast<std::size_t>(v.voxel_count()) *
                           detail::dtype_size(v.dtype);
  if (size != want)
    throw std::runtime_error(
        "mvol: payload length mismatch in " + stem + ".raw: expected " +
        std::to_string(want) + " bytes, found " + std::to_string(size));
  std::vector<unsigned char> raw(size);
  rin.seekg(0);
  rin.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(size));
  if (!rin) throw std::runtime_error("mvol: read failed: " + stem + ".raw");

  v.data.resize(static_cast<std::size_t>(v.voxel_count()));
  const std::size_t step = detail::dtype_size(v.dtype);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < step; ++b)
      bits |= static_cast<std::uint32_t>(raw[i * step + b]) << (8 * b);
    v.data[i] = v.dtype == Dtype::f32 ? std::bit_cast<float>(bits)
                                      : static_cast<float>(bits);
  }
  validate(v);
  return v;
}

}  // namespace voldet
