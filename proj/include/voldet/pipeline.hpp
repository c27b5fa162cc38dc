#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voldet/config.hpp"
#include "voldet/csv.hpp"
#include "voldet/detect.hpp"
#include "voldet/froc.hpp"
#include "voldet/mask.hpp"
#include "voldet/mvol.hpp"
#include "voldet/sampler.hpp"
#include "voldet/volume.hpp"

namespace voldet {

struct ManifestImage {
  std::string id;
  std::string path;  // MVOL stem
};

struct Manifest {
  std::vector<ManifestImage> images;
  std::string gt_csv;
};

/// Manifest JSON: {"images":[{"id":...,"path":...},...],"gt_csv":...}.
/// Relative paths resolve against the manifest's directory.
inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest: parse error in " + path + ": " +
                             e.what());
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  Manifest m;
  std::set<std::string> ids;
  try {
    for (const auto& e : j.at("images")) {
      ManifestImage img;
      img.id = e.at("id").get<std::string>();
      img.path = resolve(e.at("path").get<std::string>());
      if (!ids.insert(img.id).second)
        throw std::runtime_error("manifest: duplicate image id " + img.id);
      m.images.push_back(std::move(img));
    }
    m.gt_csv = resolve(j.at("gt_csv").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest: bad structure in " + path + ": " +
                             e.what());
  }
  if (m.images.empty())
    throw std::runtime_error("manifest: no images listed in " + path);
  return m;
}

/// End-to-end run: preprocess each volume to the target spacing (5% rule),
/// optionally emit pseudo-masks, tile, detect per tile with each configured
/// detector, stitch per image, fuse the two detectors when both are present,
/// then evaluate FROC at every configured IoU. All artifacts land in run_dir
/// and are a pure function of (config, inputs): reruns are byte-identical.
/// Ground-truth coordinates must be voxel coordinates of the preprocessed
/// volumes. Any stage failure aborts with the stage named.
inline nlohmann::ordered_json run_pipeline(const PipelineConfig& config,
                                           const Manifest& manifest,
                                           const std::string& run_dir) {
  validate(config);
  const std::filesystem::path out(run_dir);

  std::string stage = "setup";
  try {
    std::filesystem::create_directories(out / "preprocessed");
    if (config.write_pseudo_masks)
      std::filesystem::create_directories(out / "masks");
    save_config(config, (out / "config.json").string());

    stage = "load-ground-truth";
    const auto gt_rows = load_boxes_csv(manifest.gt_csv);
    auto gt_by_image = group_by_image(gt_rows);
    {
      std::set<std::string> known;
      for (const ManifestImage& img : manifest.images) known.insert(img.id);
      for (const auto& [id, boxes] : gt_by_image) {
        if (!known.count(id))
          throw std::runtime_error("ground truth references unknown image " +
                                   id);
      }
    }

    const std::size_t n_models = config.detectors.size();
    std::vector<std::vector<AnnotationRow>> model_rows(n_models);
    std::vector<DetectionSet> final_sets;
    nlohmann::ordered_json images_report = nlohmann::ordered_json::array();

    for (const ManifestImage& img : manifest.images) {
      stage = "preprocess";
      Volume vol = load_volume(img.path);
      const bool resampled = needs_resampling(vol.spacing, config.target_spacing,
                                              config.spacing_tolerance);
      if (resampled) vol = resample(vol, config.target_spacing);
      save_volume(vol, (out / "preprocessed" / img.id).string());

      if (config.write_pseudo_masks) {
        stage = "pseudomask";
        const auto it = gt_by_image.find(img.id);
        const std::vector<BoxF> boxes =
            it == gt_by_image.end() ? std::vector<BoxF>{} : it->second;
        const Volume mask = ellipsoid_mask(boxes, vol.shape);
        save_volume(mask, (out / "masks" / img.id).string());
      }

      stage = "tile";
      const auto tiles =
          tile_volume(vol.shape, config.patch_size, config.tile_overlap);

      std::vector<DetectionSet> per_model_sets;
      for (std::size_t d = 0; d < n_models; ++d) {
        stage = "detect";
        const DetectorConfig& det = config.detectors[d];
        std::vector<std::pair<PatchSpec, DetectionSet>> per_patch;
        for (const PatchSpec& tile : tiles) {
          const Volume patch = extract_patch(vol, tile, 0.0f);
          per_patch.emplace_back(
              tile, blob_detect(patch, det.intensity_threshold, det.min_voxels,
                                img.id));
        }
        stage = "stitch";
        DetectionSet stitched =
            stitch(per_patch, config.stitch_iou, vol.shape, img.id);
        for (const BoxF& b : stitched.boxes)
          model_rows[d].push_back(AnnotationRow{img.id, b});
        per_model_sets.push_back(std::move(stitched));
      }

      stage = "ensemble";
      DetectionSet final_set =
          n_models == 2
              ? ensemble_fuse(per_model_sets[0], per_model_sets[1],
                              config.ensemble_iou)
              : per_model_sets[0];

      nlohmann::ordered_json ir;
      ir["id"] = img.id;
      ir["shape"] = vol.shape;
      ir["resampled"] = resampled;
      ir["tiles"] = tiles.size();
      ir["detections"] = final_set.boxes.size();
      images_report.push_back(ir);
      final_sets.push_back(std::move(final_set));
    }

    stage = "write-predictions";
    for (std::size_t d = 0; d < n_models; ++d) {
      save_boxes_csv(
          (out / ("predictions_model_" + std::to_string(d) + ".csv")).string(),
          model_rows[d], true);
    }
    {
      std::vector<AnnotationRow> final_rows;
      for (const DetectionSet& s : final_sets)
        for (const BoxF& b : s.boxes)
          final_rows.push_back(AnnotationRow{s.image_id, b});
      save_boxes_csv((out / "predictions.csv").string(), final_rows, true);
    }

    stage = "eval-froc";
    nlohmann::ordered_json froc_report = nlohmann::ordered_json::array();
    for (double iou_thr : config.eval_iou) {
      std::vector<std::pair<DetectionSet, std::vector<BoxF>>> per_image;
      for (std::size_t i = 0; i < manifest.images.size(); ++i) {
        const auto it = gt_by_image.find(manifest.images[i].id);
        per_image.emplace_back(final_sets[i],
                               it == gt_by_image.end() ? std::vector<BoxF>{}
                                                       : it->second);
      }
      const FrocCurve curve = froc_curve(per_image, iou_thr, config.fp_points);
      nlohmann::ordered_json fr;
      fr["iou"] = iou_thr;
      fr["score"] = curve.score;
      fr["operating_points"] = curve.operating_points;
      fr["sensitivities"] = curve.operating_sensitivities;
      nlohmann::ordered_json pts = nlohmann::ordered_json::array();
      for (const FrocPoint& p : curve.points)
        pts.push_back({{"fp_per_image", p.fp_per_image},
                       {"sensitivity", p.sensitivity}});
      fr["curve"] = pts;
      froc_report.push_back(fr);
    }

    stage = "write-report";
    nlohmann::ordered_json report;
    report["config"] = config_to_json(config);
    report["images"] = images_report;
    report["froc"] = froc_report;
    {
      std::ofstream rep(out / "report.json", std::ios::binary);
      if (!rep) throw std::runtime_error("cannot write report.json");
      rep << report.dump(2) << "\n";
      if (!rep) throw std::runtime_error("write failed: report.json");
    }
    return report;
  } catch (const std::exception& e) {
    throw std::runtime_error("pipeline stage \"" + stage + "\" failed: " +
                             e.what());
  }
}

}  // namespace voldet
