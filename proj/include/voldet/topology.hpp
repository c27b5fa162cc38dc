#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "voldet/types.hpp"

namespace voldet {

struct EncoderLevel {
  Index3 spatial_size{};
  int channels = 0;
  Index3 stride_from_previous{1, 1, 1};
};

struct DecoderLevel {
  Index3 spatial_size{};
  int channels = 0;
  std::string upsample_mode = "transposed_conv";
};

struct TopologyPlan {
  std::vector<EncoderLevel> levels;
  std::vector<DecoderLevel> decoder_levels;
  std::vector<int> heads_on_levels;
};

/// Deterministic encoder/decoder shape arithmetic. Level l gets
/// min(round(base_channels * widen_factor) * 2^l, max_channels) channels
/// (max_channels <= 0 disables the cap). Each level halves every axis whose
/// size is even; odd axes keep stride 1. The decoder mirrors the encoder
/// with transposed-convolution upsampling. Head placement is caller-chosen;
/// the default puts heads on the three highest-resolution levels.
inline TopologyPlan plan_topology(const Index3& patch_size,
                                  int base_channels = 32,
                                  double widen_factor = 1.5,
                                  int max_channels = 384, int n_levels = 6,
                                  std::vector<int> heads = {0, 1, 2}) {
  if (n_levels < 2)
    throw std::invalid_argument("plan_topology: need at least 2 levels");
  for (int i = 0; i < 3; ++i) {
    if (patch_size[i] <= 0)
      throw std::invalid_argument("plan_topology: patch size must be positive");
  }
  if (base_channels < 1 || !(widen_factor > 0.0))
    throw std::invalid_argument("plan_topology: invalid channel parameters");
  const std::int64_t widened =
      std::llround(static_cast<double>(base_channels) * widen_factor);
  if (widened < 1)
    throw std::invalid_argument("plan_topology: widened base under 1 channel");

  TopologyPlan plan;
  Index3 size = patch_size;
  std::int64_t c = widened;
  for (int l = 0; l < n_levels; ++l) {
    EncoderLevel level;
    if (l > 0) {
      for (int i = 0; i < 3; ++i) {
        if (size[i] % 2 == 0 && size[i] > 1) {
          level.stride_from_previous[i] = 2;
          size[i] /= 2;
        } else {
          level.stride_from_previous[i] = 1;
        }
      }
    }
    level.spatial_size = size;
    level.channels = static_cast<int>(
        max_channels > 0 ? std::min<std::int64_t>(c, max_channels) : c);
    plan.levels.push_back(level);
    c *= 2;
  }
  for (int l = n_levels - 2; l >= 0; --l) {
    DecoderLevel d;
    d.spatial_size = plan.levels[static_cast<std::size_t>(l)].spatial_size;
    d.channels = plan.levels[static_cast<std::size_t>(l)].channels;
    plan.decoder_levels.push_back(d);
  }
  for (int h : heads) {
    if (h < 0 || h >= n_levels)
      throw std::invalid_argument("plan_topology: head level out of range");
  }
  plan.heads_on_levels = std::move(heads);
  return plan;
}

/// Stable JSON rendering of a plan; identical plans yield identical bytes.
inline std::string plan_summary(const TopologyPlan& plan) {
  if (plan.levels.empty())
    throw std::invalid_argument("plan_summary: empty plan");
  nlohmann::ordered_json j;
  j["levels"] = nlohmann::ordered_json::array();
  for (const EncoderLevel& l : plan.levels) {
    nlohmann::ordered_json e;
    e["spatial_size"] = l.spatial_size;
    e["channels"] = l.channels;
    e["stride_from_previous"] = l.stride_from_previous;
    j["levels"].push_back(e);
  }
  j["decoder_levels"] = nlohmann::ordered_json::array();
  for (const DecoderLevel& l : plan.decoder_levels) {
    nlohmann::ordered_json e;
    e["spatial_size"] = l.spatial_size;
    e["channels"] = l.channels;
    e["upsample_mode"] = l.upsample_mode;
    j["decoder_levels"].push_back(e);
  }
  j["heads_on_levels"] = plan.heads_on_levels;
  return j.dump(2) + "\n";
}

}  // namespace voldet
