// Command-line front end. Every subcommand exits 0 on success and prints a
// machine-readable JSON document to stdout when --json is given.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voldet/voldet.hpp"

namespace {

using nlohmann::ordered_json;

voldet::Index3 parse_index3(const std::string& s, const std::string& what) {
  voldet::Index3 out{};
  std::stringstream ss(s);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw std::runtime_error(what + ": expected 3 integers");
    out[i++] = std::stoll(item);
  }
  if (i != 3) throw std::runtime_error(what + ": expected 3 integers");
  return out;
}

voldet::Vec3 parse_vec3(const std::string& s, const std::string& what) {
  voldet::Vec3 out{};
  std::stringstream ss(s);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw std::runtime_error(what + ": expected 3 numbers");
    out[i++] = std::stod(item);
  }
  if (i != 3) throw std::runtime_error(what + ": expected 3 numbers");
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<std::string> read_id_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.find(',') != std::string::npos)
      throw std::runtime_error("id contains a comma in " + path + ": " + line);
    ids.push_back(line);
  }
  return ids;
}

ordered_json box_to_json(const voldet::BoxF& b) {
  ordered_json j;
  j["min"] = b.min;
  j["max"] = b.max;
  if (b.score) j["score"] = *b.score;
  if (b.label) j["label"] = *b.label;
  return j;
}

ordered_json params_to_json(const voldet::AugParams& p) {
  constexpr double rad2deg = 180.0 / 3.14159265358979323846;
  ordered_json j;
  if (p.rotation_rad) {
    j["rotation_deg"] = voldet::Vec3{(*p.rotation_rad)[0] * rad2deg,
                                     (*p.rotation_rad)[1] * rad2deg,
                                     (*p.rotation_rad)[2] * rad2deg};
  }
  if (p.scale) j["scale"] = *p.scale;
  if (p.transpose_perm) j["transpose"] = *p.transpose_perm;
  if (p.rot90) {
    j["rotation90"] = {{"plane", {p.rot90->axis_a, p.rot90->axis_b}},
                       {"quarter_turns", p.rot90->quarter_turns}};
  }
  j["mirror"] = p.mirror_axes;
  if (p.noise_sigma_rel) j["gaussian_noise_sigma_rel"] = *p.noise_sigma_rel;
  if (p.blur_sigma) j["gaussian_blur_sigma"] = *p.blur_sigma;
  if (p.median_filter) j["median_filter"] = true;
  if (p.brightness_factor) j["brightness_factor"] = *p.brightness_factor;
  if (p.brightness_gradient) {
    j["brightness_gradient"] = {
        {"amplitude_rel", p.brightness_gradient->amplitude_rel},
        {"direction", p.brightness_gradient->direction}};
  }
  if (p.contrast_factor) j["contrast_factor"] = *p.contrast_factor;
  if (p.lowres_factor) j["low_resolution_factor"] = *p.lowres_factor;
  if (p.gamma_exponent) j["gamma_exponent"] = *p.gamma_exponent;
  if (p.inverse_gamma_exponent)
    j["inverse_gamma_exponent"] = *p.inverse_gamma_exponent;
  if (p.local_gamma) {
    j["local_gamma"] = {{"center_rel", p.local_gamma->center_rel},
                        {"radius_rel", p.local_gamma->radius_rel},
                        {"exponent", p.local_gamma->exponent}};
  }
  if (p.sharpen_amount) j["sharpen_amount"] = *p.sharpen_amount;
  return j;
}

std::string zero_pad(std::size_t n, int width) {
  std::string s = std::to_string(n);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

struct PhantomGenArgs {
  std::string out_dir;
  std::size_t count = 4;
  std::string shape = "64,64,64";
  std::string spacing = "1.4,1.43,1.43";
  std::uint64_t seed = 1;
  int lesions_max = 3;
  double radius_min = 4.0;
  double radius_max = 12.0;
  double intensity = 1.0;
  double noise = 0.02;
};

/// Draws lesion geometry with a pairwise gap of at least 3 voxels on some
/// axis so components never merge; a placement that cannot be separated
/// after 100 tries is dropped.
int cmd_phantom_gen(const PhantomGenArgs& a, bool as_json) {
  namespace fs = std::filesystem;
  const voldet::Index3 shape = parse_index3(a.shape, "--shape");
  const voldet::Vec3 spacing = parse_vec3(a.spacing, "--spacing");
  if (a.lesions_max < 1) throw std::runtime_error("--lesions-max must be >= 1");
  if (!(a.radius_min > 0.0) || a.radius_max < a.radius_min)
    throw std::runtime_error("bad radius range");
  fs::create_directories(a.out_dir);

  voldet::Rng rng(a.seed);
  std::vector<voldet::AnnotationRow> gt;
  ordered_json manifest;
  manifest["images"] = ordered_json::array();
  std::size_t total_lesions = 0;

  for (std::size_t i = 0; i < a.count; ++i) {
    const std::string id = "phantom_" + zero_pad(i, 3);
    voldet::PhantomSpec spec;
    spec.shape = shape;
    spec.spacing = spacing;
    spec.background_noise_sigma = a.noise;
    spec.seed = rng();
    const std::int64_t n_lesions = voldet::uniform_int(rng, 1, a.lesions_max);
    for (std::int64_t k = 0; k < n_lesions; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        voldet::Lesion l;
        l.intensity = a.intensity;
        bool fits = true;
        for (int ax = 0; ax < 3; ++ax) {
          l.radii[ax] = voldet::uniform_real(rng, a.radius_min, a.radius_max);
          const double lo = l.radii[ax] + 1.0;
          const double hi = static_cast<double>(shape[ax]) - l.radii[ax] - 1.0;
          if (lo >= hi) {
            fits = false;
            break;
          }
          l.center[ax] = voldet::uniform_real(rng, lo, hi);
        }
        if (!fits)
          throw std::runtime_error("volume too small for the radius range");
        bool separated = true;
        for (const voldet::Lesion& other : spec.lesions) {
          bool gap = false;
          for (int ax = 0; ax < 3; ++ax) {
            if (std::abs(l.center[ax] - other.center[ax]) >=
                l.radii[ax] + other.radii[ax] + 3.0) {
              gap = true;
              break;
            }
          }
          if (!gap) {
            separated = false;
            break;
          }
        }
        if (separated) {
          spec.lesions.push_back(l);
          placed = true;
        }
      }
    }
    auto [vol, boxes] = voldet::generate_phantom(spec);
    voldet::save_volume(vol, (fs::path(a.out_dir) / id).string());
    for (const voldet::BoxF& b : boxes) gt.push_back({id, b});
    total_lesions += boxes.size();
    manifest["images"].push_back({{"id", id}, {"path", id}});
  }

  voldet::save_boxes_csv((fs::path(a.out_dir) / "gt.csv").string(), gt, false);
  manifest["gt_csv"] = "gt.csv";
  {
    std::ofstream mf(fs::path(a.out_dir) / "manifest.json", std::ios::binary);
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("cannot write manifest.json");
  }

  if (as_json) {
    ordered_json j;
    j["dir"] = a.out_dir;
    j["count"] = a.count;
    j["lesions"] = total_lesions;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "wrote " << a.count << " phantoms (" << total_lesions
              << " lesions) to " << a.out_dir << "\n";
  }
  return 0;
}

int run_app(int argc, char** argv) {
  CLI::App app{"Volumetric detection pipeline toolkit"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable JSON on stdout");

  // phantom-gen
  auto* sc_phantom = app.add_subcommand(
      "phantom-gen", "generate synthetic phantoms with known lesions");
  PhantomGenArgs pg;
  sc_phantom->add_option("--out", pg.out_dir, "output directory")->required();
  sc_phantom->add_option("--count", pg.count, "number of phantoms");
  sc_phantom->add_option("--shape", pg.shape, "volume shape z,y,x");
  sc_phantom->add_option("--spacing", pg.spacing, "voxel spacing z,y,x (mm)");
  sc_phantom->add_option("--seed", pg.seed, "random seed");
  sc_phantom->add_option("--lesions-max", pg.lesions_max,
                         "max lesions per phantom");
  sc_phantom->add_option("--radius-min", pg.radius_min, "min radius (voxels)");
  sc_phantom->add_option("--radius-max", pg.radius_max, "max radius (voxels)");
  sc_phantom->add_option("--intensity", pg.intensity, "lesion intensity");
  sc_phantom->add_option("--noise", pg.noise, "background noise sigma");

  // preprocess
  auto* sc_pre = app.add_subcommand(
      "preprocess", "resample a volume to the target spacing (5% rule)");
  std::string pre_in, pre_out, pre_target = "1.4,1.43,1.43";
  double pre_tol = 0.05;
  sc_pre->add_option("--in", pre_in, "input MVOL stem")->required();
  sc_pre->add_option("--out", pre_out, "output MVOL stem")->required();
  sc_pre->add_option("--target", pre_target, "target spacing z,y,x (mm)");
  sc_pre->add_option("--tolerance", pre_tol, "relative spacing tolerance");

  // pseudomask
  auto* sc_mask = app.add_subcommand(
      "pseudomask", "rasterize ellipsoid pseudo-masks from box annotations");
  std::string pm_boxes, pm_id, pm_shape, pm_like, pm_out;
  sc_mask->add_option("--boxes", pm_boxes, "annotation CSV")->required();
  sc_mask->add_option("--image-id", pm_id, "image id to select")->required();
  sc_mask->add_option("--shape", pm_shape, "mask shape z,y,x");
  sc_mask->add_option("--like", pm_like, "take shape from this MVOL stem");
  sc_mask->add_option("--out", pm_out, "output MVOL stem")->required();

  // sample-patches
  auto* sc_sample = app.add_subcommand(
      "sample-patches", "draw training patches with the 70% offset rule");
  std::string sp_boxes, sp_id, sp_shape, sp_patch = "192,192,192";
  std::uint64_t sp_seed = 0;
  std::size_t sp_count = 1;
  sc_sample->add_option("--boxes", sp_boxes, "annotation CSV")->required();
  sc_sample->add_option("--image-id", sp_id, "image id to select")->required();
  sc_sample->add_option("--shape", sp_shape, "volume shape z,y,x")->required();
  sc_sample->add_option("--patch", sp_patch, "patch size z,y,x");
  sc_sample->add_option("--seed", sp_seed, "random seed");
  sc_sample->add_option("--count", sp_count, "number of draws");

  // tile
  auto* sc_tile =
      app.add_subcommand("tile", "sliding-window tiling of a volume");
  std::string tl_shape, tl_patch = "192,192,192";
  double tl_overlap = 0.5;
  sc_tile->add_option("--shape", tl_shape, "volume shape z,y,x")->required();
  sc_tile->add_option("--patch", tl_patch, "patch size z,y,x");
  sc_tile->add_option("--overlap", tl_overlap, "overlap fraction [0,1)");

  // augment
  auto* sc_aug = app.add_subcommand(
      "augment", "apply a sampled augmentation to an image + mask/boxes");
  std::string ag_image, ag_mask, ag_boxes, ag_id, ag_scheme = "A", ag_prefix;
  std::uint64_t ag_seed = 0;
  sc_aug->add_option("--image", ag_image, "input image MVOL stem")->required();
  sc_aug->add_option("--mask", ag_mask, "input mask MVOL stem");
  sc_aug->add_option("--boxes", ag_boxes,
                     "annotation CSV (mask synthesized when no --mask)");
  sc_aug->add_option("--image-id", ag_id, "image id for --boxes");
  sc_aug->add_option("--scheme", ag_scheme, "augmentation scheme A|B");
  sc_aug->add_option("--seed", ag_seed, "random seed");
  sc_aug->add_option("--out-prefix", ag_prefix, "output prefix")->required();

  // plan-topology
  auto* sc_topo =
      app.add_subcommand("plan-topology", "print the architecture plan");
  std::string tp_patch = "192,192,192", tp_heads = "0,1,2";
  int tp_base = 32, tp_cap = 384, tp_levels = 6;
  double tp_widen = 1.5;
  sc_topo->add_option("--patch", tp_patch, "patch size z,y,x");
  sc_topo->add_option("--base", tp_base, "base channels");
  sc_topo->add_option("--widen", tp_widen, "channel widening factor");
  sc_topo->add_option("--cap", tp_cap, "channel cap (<=0 disables)");
  sc_topo->add_option("--levels", tp_levels, "encoder levels");
  sc_topo->add_option("--heads", tp_heads, "head level indices");

  // detect
  auto* sc_det = app.add_subcommand(
      "detect", "run the intensity-blob detector on a volume");
  std::string dt_in, dt_id = "image", dt_out;
  double dt_thr = 0.5;
  std::int64_t dt_minvox = 8;
  sc_det->add_option("--in", dt_in, "input MVOL stem")->required();
  sc_det->add_option("--threshold", dt_thr, "intensity threshold");
  sc_det->add_option("--min-voxels", dt_minvox, "minimum component size");
  sc_det->add_option("--image-id", dt_id, "image id for the output rows");
  sc_det->add_option("--out", dt_out, "prediction CSV path");

  // stitch
  auto* sc_stitch = app.add_subcommand(
      "stitch", "merge per-tile predictions into global coordinates");
  std::string st_pred, st_tiles, st_shape, st_id, st_out;
  double st_iou = 0.5;
  sc_stitch->add_option("--pred", st_pred,
                        "tiled prediction CSV (image_id = <id>#<tile>)")
      ->required();
  sc_stitch->add_option("--tiles", st_tiles, "tile JSONL from `tile`")
      ->required();
  sc_stitch->add_option("--shape", st_shape, "volume shape z,y,x")->required();
  sc_stitch->add_option("--iou", st_iou, "suppression IoU threshold");
  sc_stitch->add_option("--image-id", st_id, "image id")->required();
  sc_stitch->add_option("--out", st_out, "output prediction CSV")->required();

  // ensemble
  auto* sc_ens = app.add_subcommand(
      "ensemble", "fuse two models' prediction CSVs");
  std::string en_a, en_b, en_out;
  double en_iou = 0.5;
  sc_ens->add_option("--a", en_a, "model A prediction CSV")->required();
  sc_ens->add_option("--b", en_b, "model B prediction CSV")->required();
  sc_ens->add_option("--iou", en_iou, "clustering IoU threshold");
  sc_ens->add_option("--out", en_out, "output prediction CSV")->required();

  // eval-froc
  auto* sc_eval = app.add_subcommand("eval-froc", "FROC evaluation");
  std::string ev_gt, ev_pred, ev_fp = "0.125,0.25,0.5,1,2,4,8";
  std::string ev_images, ev_curve;
  double ev_iou = 0.3;
  sc_eval->add_option("--gt", ev_gt, "ground-truth CSV")->required();
  sc_eval->add_option("--pred", ev_pred, "prediction CSV")->required();
  sc_eval->add_option("--iou", ev_iou, "matching IoU threshold");
  sc_eval->add_option("--fp-points", ev_fp, "FP-per-image targets");
  sc_eval->add_option("--images", ev_images,
                      "file listing all image ids (one per line)");
  sc_eval->add_option("--curve", ev_curve, "write curve TSV here");

  // split-folds
  auto* sc_folds = app.add_subcommand("split-folds", "seeded k-fold split");
  std::string fl_ids, fl_out;
  int fl_folds = 5;
  std::uint64_t fl_seed = 0;
  sc_folds->add_option("--ids", fl_ids, "file with one image id per line")
      ->required();
  sc_folds->add_option("--folds", fl_folds, "number of folds");
  sc_folds->add_option("--seed", fl_seed, "random seed");
  sc_folds->add_option("--out", fl_out, "output CSV (default stdout)");

  // run
  auto* sc_run = app.add_subcommand("run", "full pipeline run");
  std::string rn_config, rn_manifest, rn_out;
  sc_run->add_option("--config", rn_config, "pipeline config JSON")->required();
  sc_run->add_option("--manifest", rn_manifest, "input manifest JSON")
      ->required();
  sc_run->add_option("--out", rn_out, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (sc_phantom->parsed()) return cmd_phantom_gen(pg, as_json);

  if (sc_pre->parsed()) {
    voldet::Volume vol = voldet::load_volume(pre_in);
    const voldet::Vec3 target = parse_vec3(pre_target, "--target");
    const bool resampled =
        voldet::needs_resampling(vol.spacing, target, pre_tol);
    if (resampled) vol = voldet::resample(vol, target);
    voldet::save_volume(vol, pre_out);
    ordered_json j;
    j["resampled"] = resampled;
    j["shape"] = vol.shape;
    j["spacing"] = vol.spacing;
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << (resampled ? "resampled to " : "kept at ") << "spacing ["
                << vol.spacing[0] << "," << vol.spacing[1] << ","
                << vol.spacing[2] << "]\n";
    return 0;
  }

  if (sc_mask->parsed()) {
    voldet::Index3 shape;
    if (!pm_like.empty()) {
      shape = voldet::load_volume(pm_like).shape;
    } else if (!pm_shape.empty()) {
      shape = parse_index3(pm_shape, "--shape");
    } else {
      throw std::runtime_error("pseudomask: need --shape or --like");
    }
    std::vector<voldet::BoxF> boxes;
    for (const auto& row : voldet::load_boxes_csv(pm_boxes)) {
      if (row.image_id == pm_id) boxes.push_back(row.box);
    }
    const voldet::Volume mask = voldet::ellipsoid_mask(boxes, shape);
    voldet::save_volume(mask, pm_out);
    std::int64_t fg = 0;
    for (float f : mask.data) fg += f != 0.0f;
    ordered_json j;
    j["instances"] = boxes.size();
    j["foreground_voxels"] = fg;
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << boxes.size() << " instances, " << fg
                << " foreground voxels\n";
    return 0;
  }

  if (sc_sample->parsed()) {
    const voldet::Index3 shape = parse_index3(sp_shape, "--shape");
    const voldet::Index3 patch = parse_index3(sp_patch, "--patch");
    std::vector<voldet::BoxF> boxes;
    for (const auto& row : voldet::load_boxes_csv(sp_boxes)) {
      if (row.image_id == sp_id) boxes.push_back(row.box);
    }
    if (boxes.empty())
      throw std::runtime_error("no boxes for image id " + sp_id);
    voldet::Rng rng(sp_seed);
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < sp_count; ++i) {
      const std::size_t target = i % boxes.size();
      const voldet::PatchSpec spec =
          voldet::sample_training_patch(shape, boxes[target], patch, rng);
      ordered_json j;
      j["origin"] = spec.origin;
      j["size"] = spec.size;
      j["target_index"] = target;
      if (as_json)
        arr.push_back(j);
      else
        std::cout << j.dump() << "\n";
    }
    if (as_json) std::cout << arr.dump(2) << "\n";
    return 0;
  }

  if (sc_tile->parsed()) {
    const auto tiles = voldet::tile_volume(parse_index3(tl_shape, "--shape"),
                                           parse_index3(tl_patch, "--patch"),
                                           tl_overlap);
    ordered_json arr = ordered_json::array();
    for (const voldet::PatchSpec& t : tiles) {
      ordered_json j;
      j["origin"] = t.origin;
      j["size"] = t.size;
      if (as_json)
        arr.push_back(j);
      else
        std::cout << j.dump() << "\n";
    }
    if (as_json) std::cout << arr.dump(2) << "\n";
    return 0;
  }

  if (sc_aug->parsed()) {
    voldet::Sample sample;
    sample.image = voldet::load_volume(ag_image);
    if (!ag_mask.empty()) {
      sample.mask = voldet::load_volume(ag_mask);
    } else if (!ag_boxes.empty()) {
      if (ag_id.empty())
        throw std::runtime_error("augment: --boxes needs --image-id");
      std::vector<voldet::BoxF> boxes;
      for (const auto& row : voldet::load_boxes_csv(ag_boxes)) {
        if (row.image_id == ag_id) boxes.push_back(row.box);
      }
      sample.mask = voldet::ellipsoid_mask(boxes, sample.image.shape);
    } else {
      throw std::runtime_error("augment: need --mask or --boxes");
    }
    for (const auto& [id, box] : voldet::boxes_from_mask(sample.mask))
      sample.boxes.push_back(box);

    const voldet::AugParams params =
        voldet::draw_params(voldet::scheme_table(ag_scheme), ag_seed);
    const voldet::Sample out = voldet::apply_augmentation(sample, params);
    voldet::save_volume(out.image, ag_prefix + "_image");
    voldet::save_volume(out.mask, ag_prefix + "_mask");
    std::vector<voldet::AnnotationRow> rows;
    const std::string out_id = ag_id.empty() ? "augmented" : ag_id;
    for (const voldet::BoxF& b : out.boxes) rows.push_back({out_id, b});
    voldet::save_boxes_csv(ag_prefix + "_boxes.csv", rows, false);

    ordered_json j;
    j["scheme"] = ag_scheme;
    j["seed"] = ag_seed;
    j["params"] = params_to_json(params);
    j["shape"] = out.image.shape;
    j["instances"] = out.boxes.size();
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << "augmented with scheme " << ag_scheme << ", "
                << out.boxes.size() << " instances kept\n";
    return 0;
  }

  if (sc_topo->parsed()) {
    const voldet::TopologyPlan plan = voldet::plan_topology(
        parse_index3(tp_patch, "--patch"), tp_base, tp_widen, tp_cap,
        tp_levels, parse_ints(tp_heads));
    std::cout << voldet::plan_summary(plan);
    return 0;
  }

  if (sc_det->parsed()) {
    const voldet::Volume vol = voldet::load_volume(dt_in);
    const voldet::DetectionSet dets =
        voldet::blob_detect(vol, dt_thr, dt_minvox, dt_id);
    if (!dt_out.empty()) {
      std::vector<voldet::AnnotationRow> rows;
      for (const voldet::BoxF& b : dets.boxes) rows.push_back({dt_id, b});
      voldet::save_boxes_csv(dt_out, rows, true);
    }
    ordered_json j;
    j["image_id"] = dt_id;
    j["detections"] = dets.boxes.size();
    ordered_json arr = ordered_json::array();
    for (const voldet::BoxF& b : dets.boxes) arr.push_back(box_to_json(b));
    j["boxes"] = arr;
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << dets.boxes.size() << " detections\n";
    return 0;
  }

  if (sc_stitch->parsed()) {
    std::vector<voldet::PatchSpec> tiles;
    {
      std::ifstream in(st_tiles, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + st_tiles);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        voldet::PatchSpec t;
        j.at("origin").get_to(t.origin);
        j.at("size").get_to(t.size);
        tiles.push_back(t);
      }
    }
    std::map<std::size_t, voldet::DetectionSet> by_tile;
    for (const auto& row : voldet::load_boxes_csv(st_pred)) {
      const auto hash = row.image_id.rfind('#');
      if (hash == std::string::npos)
        throw std::runtime_error("stitch: row image_id \"" + row.image_id +
                                 "\" lacks a #<tile> suffix");
      const std::string base = row.image_id.substr(0, hash);
      if (base != st_id)
        throw std::runtime_error("stitch: row for unexpected image " + base);
      const std::size_t k = std::stoull(row.image_id.substr(hash + 1));
      if (k >= tiles.size())
        throw std::runtime_error("stitch: tile index out of range");
      by_tile[k].image_id = st_id;
      by_tile[k].boxes.push_back(row.box);
    }
    std::vector<std::pair<voldet::PatchSpec, voldet::DetectionSet>> per_patch;
    for (auto& [k, set] : by_tile) per_patch.emplace_back(tiles[k], set);
    const voldet::DetectionSet global = voldet::stitch(
        per_patch, st_iou, parse_index3(st_shape, "--shape"), st_id);
    std::vector<voldet::AnnotationRow> rows;
    for (const voldet::BoxF& b : global.boxes) rows.push_back({st_id, b});
    voldet::save_boxes_csv(st_out, rows, true);
    ordered_json j;
    j["image_id"] = st_id;
    j["detections"] = global.boxes.size();
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << global.boxes.size() << " detections after stitching\n";
    return 0;
  }

  if (sc_ens->parsed()) {
    const auto a = voldet::group_by_image(voldet::load_boxes_csv(en_a));
    const auto b = voldet::group_by_image(voldet::load_boxes_csv(en_b));
    std::set<std::string> ids;
    for (const auto& [id, _] : a) ids.insert(id);
    for (const auto& [id, _] : b) ids.insert(id);
    std::vector<voldet::AnnotationRow> rows;
    for (const std::string& id : ids) {
      voldet::DetectionSet sa{id, {}}, sb{id, {}};
      if (auto it = a.find(id); it != a.end()) sa.boxes = it->second;
      if (auto it = b.find(id); it != b.end()) sb.boxes = it->second;
      const voldet::DetectionSet fused = voldet::ensemble_fuse(sa, sb, en_iou);
      for (const voldet::BoxF& box : fused.boxes) rows.push_back({id, box});
    }
    voldet::save_boxes_csv(en_out, rows, true);
    ordered_json j;
    j["images"] = ids.size();
    j["detections"] = rows.size();
    if (as_json)
      std::cout << j.dump(2) << "\n";
    else
      std::cout << rows.size() << " fused detections over " << ids.size()
                << " images\n";
    return 0;
  }

  if (sc_eval->parsed()) {
    const auto gt = voldet::group_by_image(voldet::load_boxes_csv(ev_gt));
    const auto pred = voldet::group_by_image(voldet::load_boxes_csv(ev_pred));
    std::vector<std::string> ids;
    if (!ev_images.empty()) {
      ids = read_id_lines(ev_images);
      std::set<std::string> known(ids.begin(), ids.end());
      for (const auto& [id, _] : gt) {
        if (!known.count(id))
          throw std::runtime_error("gt references image not in --images: " + id);
      }
      for (const auto& [id, _] : pred) {
        if (!known.count(id))
          throw std::runtime_error("pred references image not in --images: " +
                                   id);
      }
    } else {
      std::set<std::string> u;
      for (const auto& [id, _] : gt) u.insert(id);
      for (const auto& [id, _] : pred) u.insert(id);
      ids.assign(u.begin(), u.end());
    }
    std::vector<std::pair<voldet::DetectionSet, std::vector<voldet::BoxF>>>
        per_image;
    for (const std::string& id : ids) {
      voldet::DetectionSet dets{id, {}};
      if (auto it = pred.find(id); it != pred.end()) dets.boxes = it->second;
      std::vector<voldet::BoxF> gts;
      if (auto it = gt.find(id); it != gt.end()) gts = it->second;
      per_image.emplace_back(std::move(dets), std::move(gts));
    }
    const voldet::FrocCurve curve =
        voldet::froc_curve(per_image, ev_iou, parse_doubles(ev_fp));

    if (!ev_curve.empty()) {
      std::ofstream tsv(ev_curve, std::ios::binary);
      if (!tsv) throw std::runtime_error("cannot write " + ev_curve);
      tsv << "fp_per_image\tsensitivity\n";
      for (const voldet::FrocPoint& p : curve.points)
        tsv << p.fp_per_image << "\t" << p.sensitivity << "\n";
    }

    ordered_json j;
    j["iou"] = ev_iou;
    j["score"] = curve.score;
    ordered_json pts = ordered_json::array();
    for (std::size_t i = 0; i < curve.operating_points.size(); ++i) {
      pts.push_back({{"fp_per_image", curve.operating_points[i]},
                     {"sensitivity", curve.operating_sensitivities[i]}});
    }
    j["points"] = pts;
    ordered_json per = ordered_json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      per.push_back({{"id", ids[i]},
                     {"ground_truths", per_image[i].second.size()},
                     {"predictions", per_image[i].first.boxes.size()}});
    }
    j["per_image"] = per;
    if (as_json) {
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "FROC score at IoU " << ev_iou << ": " << curve.score
                << "\n";
      for (std::size_t i = 0; i < curve.operating_points.size(); ++i)
        std::cout << "  sensitivity at " << curve.operating_points[i]
                  << " FP/image: " << curve.operating_sensitivities[i] << "\n";
    }
    return 0;
  }

  if (sc_folds->parsed()) {
    const std::vector<std::string> ids = read_id_lines(fl_ids);
    const std::vector<int> fold = voldet::split_folds(ids, fl_folds, fl_seed);
    std::ostringstream body;
    body << "image_id,fold\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
      body << ids[i] << "," << fold[i] << "\n";
    if (!fl_out.empty()) {
      std::ofstream out(fl_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + fl_out);
      out << body.str();
    }
    if (as_json) {
      ordered_json j = ordered_json::array();
      for (std::size_t i = 0; i < ids.size(); ++i)
        j.push_back({{"image_id", ids[i]}, {"fold", fold[i]}});
      std::cout << j.dump(2) << "\n";
    } else if (fl_out.empty()) {
      std::cout << body.str();
    }
    return 0;
  }

  if (sc_run->parsed()) {
    const voldet::PipelineConfig config = voldet::load_config(rn_config);
    const voldet::Manifest manifest = voldet::load_manifest(rn_manifest);
    const ordered_json report =
        voldet::run_pipeline(config, manifest, rn_out);
    if (as_json) {
      std::cout << report.dump(2) << "\n";
    } else {
      for (const auto& fr : report.at("froc"))
        std::cout << "FROC score at IoU " << fr.at("iou").get<double>() << ": "
                  << fr.at("score").get<double>() << "\n";
      std::cout << "artifacts in " << rn_out << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
