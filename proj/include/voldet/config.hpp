#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "voldet/froc.hpp"
#include "voldet/types.hpp"

namespace voldet {

struct DetectorConfig {
  double intensity_threshold = 0.5;
  std::int64_t min_voxels = 8;
};

/// One config drives a whole pipeline run. Defaults give the published
/// operating point: 1.40/1.43/1.43 mm target spacing with a 5% tolerance,
/// [192,192,192] patches, evaluation at IoU 0.1 and 0.3 with seven
/// FP-per-image targets. One detector entry runs a single model; two entries
/// run both and fuse them.
struct PipelineConfig {
  Vec3 target_spacing{1.40, 1.43, 1.43};
  double spacing_tolerance = 0.05;
  Index3 patch_size{192, 192, 192};
  std::string augmentation_scheme = "A";
  double tile_overlap = 0.5;
  double stitch_iou = 0.5;
  double ensemble_iou = 0.5;
  std::vector<double> eval_iou{0.1, 0.3};
  std::vector<double> fp_points = default_fp_targets();
  std::uint64_t seed = 0;
  bool write_pseudo_masks = false;
  std::vector<DetectorConfig> detectors{DetectorConfig{}};
};

inline void validate(const PipelineConfig& c) {
  for (int i = 0; i < 3; ++i) {
    if (!(c.target_spacing[i] > 0.0))
      throw std::invalid_argument("config: target_spacing must be positive");
    if (c.patch_size[i] <= 0)
      throw std::invalid_argument("config: patch_size must be positive");
  }
  if (c.spacing_tolerance < 0.0)
    throw std::invalid_argument("config: spacing_tolerance must be >= 0");
  if (c.augmentation_scheme != "A" && c.augmentation_scheme != "B")
    throw std::invalid_argument("config: augmentation_scheme must be A or B");
  if (!(c.tile_overlap >= 0.0 && c.tile_overlap < 1.0))
    throw std::invalid_argument("config: tile_overlap must be in [0,1)");
  for (double v : {c.stitch_iou, c.ensemble_iou}) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("config: iou thresholds must be in [0,1]");
  }
  if (c.eval_iou.empty())
    throw std::invalid_argument("config: eval_iou must not be empty");
  for (double v : c.eval_iou) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("config: eval_iou values must be in [0,1]");
  }
  for (double v : c.fp_points) {
    if (!(v > 0.0))
      throw std::invalid_argument("config: fp_points must be positive");
  }
  if (c.detectors.empty() || c.detectors.size() > 2)
    throw std::invalid_argument("config: need 1 or 2 detectors");
  for (const DetectorConfig& d : c.detectors) {
    if (!(d.intensity_threshold > 0.0) || d.min_voxels < 1)
      throw std::invalid_argument("config: invalid detector parameters");
  }
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["target_spacing"] = c.target_spacing;
  j["spacing_tolerance"] = c.spacing_tolerance;
  j["patch_size"] = c.patch_size;
  j["augmentation_scheme"] = c.augmentation_scheme;
  j["tile_overlap"] = c.tile_overlap;
  j["stitch_iou"] = c.stitch_iou;
  j["ensemble_iou"] = c.ensemble_iou;
  j["eval_iou"] = c.eval_iou;
  j["fp_points"] = c.fp_points;
  j["seed"] = c.seed;
  j["write_pseudo_masks"] = c.write_pseudo_masks;
  j["detectors"] = nlohmann::ordered_json::array();
  for (const DetectorConfig& d : c.detectors) {
    nlohmann::ordered_json e;
    e["intensity_threshold"] = d.intensity_threshold;
    e["min_voxels"] = d.min_voxels;
    j["detectors"].push_back(e);
  }
  return j;
}

/// Missing fields keep their defaults; present fields are taken verbatim.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.contains("target_spacing")) j.at("target_spacing").get_to(c.target_spacing);
  if (j.contains("spacing_tolerance"))
    c.spacing_tolerance = j.at("spacing_tolerance").get<double>();
  if (j.contains("patch_size")) j.at("patch_size").get_to(c.patch_size);
  if (j.contains("augmentation_scheme"))
    c.augmentation_scheme = j.at("augmentation_scheme").get<std::string>();
  if (j.contains("tile_overlap"))
    c.tile_overlap = j.at("tile_overlap").get<double>();
  if (j.contains("stitch_iou")) c.stitch_iou = j.at("stitch_iou").get<double>();
  if (j.contains("ensemble_iou"))
    c.ensemble_iou = j.at("ensemble_iou").get<double>();
  if (j.contains("eval_iou"))
    c.eval_iou = j.at("eval_iou").get<std::vector<double>>();
  if (j.contains("fp_points"))
    c.fp_points = j.at("fp_points").get<std::vector<double>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("write_pseudo_masks"))
    c.write_pseudo_masks = j.at("write_pseudo_masks").get<bool>();
  if (j.contains("detectors")) {
    c.detectors.clear();
    for (const auto& e : j.at("detectors")) {
      DetectorConfig d;
      if (e.contains("intensity_threshold"))
        d.intensity_threshold = e.at("intensity_threshold").get<double>();
      if (e.contains("min_voxels"))
        d.min_voxels = e.at("min_voxels").get<std::int64_t>();
      c.detectors.push_back(d);
    }
  }
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const PipelineConfig& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_json(c).dump(2) << "\n";
  if (!out) throw std::runtime_error("config: write failed: " + path);
}

}  // namespace voldet
