#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support/cli.hpp"
#include "support/tmpdir.hpp"
#include "voldet/csv.hpp"
#include "voldet/mvol.hpp"
#include "voldet/phantom.hpp"
#include "voldet/pipeline.hpp"
#include "voldet/topology.hpp"

using testsupport::CliResult;
using testsupport::run_cli;
using testsupport::TmpDir;

namespace {

bool exists(const std::string& p) { return std::filesystem::exists(p); }

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("phantom-gen writes volumes, ground truth and a manifest") {
  TmpDir dir("cli");
  const CliResult r = run_cli(
      dir.str(), "phantom-gen --out " + dir.str("data") +
                     " --count 2 --shape 48,48,48 --seed 3 --radius-min 4"
                     " --radius-max 8");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(exists(dir.str("data/phantom_000.json")));
  CHECK(exists(dir.str("data/phantom_000.raw")));
  CHECK(exists(dir.str("data/phantom_001.json")));
  CHECK(exists(dir.str("data/gt.csv")));
  CHECK(exists(dir.str("data/manifest.json")));

  const voldet::Manifest m = voldet::load_manifest(dir.str("data/manifest.json"));
  REQUIRE(m.images.size() == 2);
  CHECK(m.images[0].id == "phantom_000");
  const auto rows = voldet::load_boxes_csv(m.gt_csv);
  CHECK(!rows.empty());
  const voldet::Volume vol = voldet::load_volume(m.images[0].path);
  CHECK(vol.shape == voldet::Index3{48, 48, 48});
}

TEST_CASE("tile prints one JSON line per window") {
  TmpDir dir("cli");
  const CliResult r = run_cli(
      dir.str(), "tile --shape 256,192,192 --patch 192,192,192 --overlap 0.5");
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  const auto first = nlohmann::json::parse(lines[0]);
  const auto second = nlohmann::json::parse(lines[1]);
  CHECK(first.at("origin") == nlohmann::json::array({0, 0, 0}));
  CHECK(second.at("origin") == nlohmann::json::array({64, 0, 0}));
  CHECK(first.at("size") == nlohmann::json::array({192, 192, 192}));
}

TEST_CASE("plan-topology prints the library plan verbatim") {
  TmpDir dir("cli");
  const CliResult r = run_cli(dir.str(), "plan-topology");
  REQUIRE(r.exit_code == 0);
  const voldet::TopologyPlan plan =
      voldet::plan_topology({192, 192, 192}, 32, 1.5, 384, 6, {0, 1, 2});
  CHECK(r.out == voldet::plan_summary(plan));
}

TEST_CASE("detect recovers a phantom lesion through the CLI") {
  TmpDir dir("cli");
  voldet::PhantomSpec spec;
  spec.shape = {48, 48, 48};
  spec.background_noise_sigma = 0.02;
  spec.seed = 5;
  spec.lesions.push_back({{24.0, 24.0, 24.0}, {7.0, 6.0, 5.0}, 1.0});
  const auto [image, boxes] = voldet::generate_phantom(spec);
  voldet::save_volume(image, dir.str("scan"));

  const CliResult r = run_cli(
      dir.str(), "detect --in " + dir.str("scan") +
                     " --threshold 0.5 --min-voxels 3 --image-id scan --out " +
                     dir.str("pred.csv"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const auto rows = voldet::load_boxes_csv(dir.str("pred.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].image_id == "scan");
  CHECK(rows[0].box.min == boxes[0].min);
  CHECK(rows[0].box.max == boxes[0].max);
  REQUIRE(rows[0].box.score.has_value());
  CHECK(*rows[0].box.score == 1.0);
}

TEST_CASE("eval-froc reproduces the half-sensitivity example") {
  TmpDir dir("cli");
  write_text(dir.str("gt.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x\n"
             "a,0,0,0,4,4,4\n"
             "b,0,0,0,4,4,4\n");
  write_text(dir.str("pred.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "a,0,0,0,4,4,4,0.9\n"
             "b,20,20,20,24,24,24,0.8\n");
  const CliResult r = run_cli(
      dir.str(), "--json eval-froc --gt " + dir.str("gt.csv") + " --pred " +
                     dir.str("pred.csv") + " --iou 0.1 --curve " +
                     dir.str("curve.tsv"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("score").get<double>() == 0.5);
  CHECK(j.at("iou").get<double>() == 0.1);
  REQUIRE(j.at("points").size() == 7);
  for (const auto& p : j.at("points"))
    CHECK(p.at("sensitivity").get<double>() == 0.5);

  const std::vector<std::string> tsv =
      lines_of(testsupport::read_all(dir.str("curve.tsv")));
  REQUIRE(tsv.size() == 3);
  CHECK(tsv[0] == "fp_per_image\tsensitivity");

  // Text mode reports the same score.
  const CliResult text = run_cli(
      dir.str(), "eval-froc --gt " + dir.str("gt.csv") + " --pred " +
                     dir.str("pred.csv") + " --iou 0.1");
  REQUIRE(text.exit_code == 0);
  CHECK(text.out.find("FROC score") != std::string::npos);
  CHECK(text.out.find("0.5") != std::string::npos);
}

TEST_CASE("eval-froc validates ids against the universe file") {
  TmpDir dir("cli");
  write_text(dir.str("gt.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x\n"
             "a,0,0,0,4,4,4\n");
  write_text(dir.str("pred.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "a,0,0,0,4,4,4,0.9\n");
  write_text(dir.str("ids.txt"), "b\n");
  const CliResult r = run_cli(
      dir.str(), "eval-froc --gt " + dir.str("gt.csv") + " --pred " +
                     dir.str("pred.csv") + " --images " + dir.str("ids.txt"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("not in --images") != std::string::npos);
}

TEST_CASE("split-folds balances ids into a csv") {
  TmpDir dir("cli");
  std::string ids;
  for (int i = 0; i < 10; ++i) ids += "im" + std::to_string(i) + "\n";
  write_text(dir.str("ids.txt"), ids);
  const CliResult r = run_cli(
      dir.str(), "split-folds --ids " + dir.str("ids.txt") +
                     " --folds 5 --seed 3 --out " + dir.str("folds.csv"));
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines =
      lines_of(testsupport::read_all(dir.str("folds.csv")));
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "image_id,fold");
  int count[5] = {0, 0, 0, 0, 0};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto comma = lines[i].rfind(',');
    REQUIRE(comma != std::string::npos);
    const int f = std::stoi(lines[i].substr(comma + 1));
    REQUIRE((f >= 0 && f < 5));
    ++count[f];
  }
  for (int c : count) CHECK(c == 2);
}

TEST_CASE("preprocess resamples only when the spacing is off tolerance") {
  TmpDir dir("cli");
  voldet::Volume vol = voldet::Volume::zeros({16, 16, 16});
  vol.spacing = {2.0, 1.43, 1.43};
  for (std::size_t i = 0; i < vol.data.size(); ++i)
    vol.data[i] = static_cast<float>(i % 7);
  voldet::save_volume(vol, dir.str("in"));

  const CliResult r = run_cli(
      dir.str(), "preprocess --in " + dir.str("in") + " --out " +
                     dir.str("out") + " --target 1.4,1.43,1.43");
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const voldet::Volume out = voldet::load_volume(dir.str("out"));
  CHECK(out.spacing == voldet::Vec3{1.4, 1.43, 1.43});
  CHECK(out.shape[0] == 23);  // round(16 * 2.0 / 1.4)
  CHECK(out.shape[1] == 16);

  // Within tolerance: copied through bit-exact.
  vol.spacing = {1.42, 1.43, 1.43};
  voldet::save_volume(vol, dir.str("in2"));
  const CliResult r2 = run_cli(
      dir.str(), "preprocess --in " + dir.str("in2") + " --out " +
                     dir.str("out2") + " --target 1.4,1.43,1.43");
  REQUIRE(r2.exit_code == 0);
  const voldet::Volume out2 = voldet::load_volume(dir.str("out2"));
  CHECK(out2.spacing == vol.spacing);
  CHECK(out2.data == vol.data);
}

TEST_CASE("pseudomask renders csv boxes into a label volume") {
  TmpDir dir("cli");
  write_text(dir.str("gt.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x\n"
             "scan,4,4,4,12,12,12\n"
             "other,0,0,0,2,2,2\n");
  const CliResult r = run_cli(
      dir.str(), "pseudomask --boxes " + dir.str("gt.csv") +
                     " --image-id scan --shape 16,16,16 --out " +
                     dir.str("mask"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const voldet::Volume mask = voldet::load_volume(dir.str("mask"));
  CHECK(mask.kind == voldet::VoxelKind::label);
  CHECK(mask.shape == voldet::Index3{16, 16, 16});
  CHECK(mask.at(8, 8, 8) == 1.0f);  // ellipsoid center
  CHECK(mask.at(0, 0, 0) == 0.0f);
}

TEST_CASE("augment writes the transformed image, mask and boxes") {
  TmpDir dir("cli");
  voldet::PhantomSpec spec;
  spec.shape = {24, 24, 24};
  spec.lesions.push_back({{12.0, 12.0, 12.0}, {5.0, 5.0, 5.0}, 1.0});
  const auto [image, boxes] = voldet::generate_phantom(spec);
  voldet::save_volume(image, dir.str("scan"));
  std::vector<voldet::AnnotationRow> rows;
  for (const voldet::BoxF& b : boxes) rows.push_back({"scan", b});
  voldet::save_boxes_csv(dir.str("gt.csv"), rows, false);

  const CliResult r = run_cli(
      dir.str(), "augment --image " + dir.str("scan") + " --boxes " +
                     dir.str("gt.csv") + " --image-id scan --scheme A"
                     " --seed 42 --out-prefix " + dir.str("aug"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(exists(dir.str("aug_image.json")));
  CHECK(exists(dir.str("aug_mask.json")));
  CHECK(exists(dir.str("aug_boxes.csv")));
  const voldet::Volume out = voldet::load_volume(dir.str("aug_image"));
  CHECK(out.kind == voldet::VoxelKind::image);
}

TEST_CASE("stitch merges tile-local predictions into volume space") {
  TmpDir dir("cli");
  write_text(dir.str("tiles.jsonl"),
             R"({"origin":[0,0,0],"size":[32,32,32]})" "\n"
             R"({"origin":[0,0,8],"size":[32,32,32]})" "\n");
  write_text(dir.str("pred.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "img#0,10,10,10,20,20,20,0.9\n"
             "img#1,10,10,2,20,20,12,0.7\n");
  const CliResult r = run_cli(
      dir.str(), "stitch --pred " + dir.str("pred.csv") + " --tiles " +
                     dir.str("tiles.jsonl") +
                     " --shape 40,40,40 --iou 0.5 --image-id img --out " +
                     dir.str("global.csv"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const auto rows = voldet::load_boxes_csv(dir.str("global.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].box.min == std::array<double, 3>{10.0, 10.0, 10.0});
  CHECK(*rows[0].box.score == 0.9);

  // A row whose id does not carry a tile suffix is rejected.
  write_text(dir.str("bad.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "img,10,10,10,20,20,20,0.9\n");
  const CliResult bad = run_cli(
      dir.str(), "stitch --pred " + dir.str("bad.csv") + " --tiles " +
                     dir.str("tiles.jsonl") +
                     " --shape 40,40,40 --image-id img --out " +
                     dir.str("x.csv"));
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("#<tile>") != std::string::npos);
}

TEST_CASE("ensemble halves solo detections from either model") {
  TmpDir dir("cli");
  write_text(dir.str("a.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "img,0,0,0,8,8,8,0.8\n");
  write_text(dir.str("b.csv"),
             "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score\n"
             "img,20,20,20,28,28,28,0.6\n");
  const CliResult r = run_cli(
      dir.str(), "ensemble --a " + dir.str("a.csv") + " --b " +
                     dir.str("b.csv") + " --iou 0.5 --out " +
                     dir.str("fused.csv"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const auto rows = voldet::load_boxes_csv(dir.str("fused.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(*rows[0].box.score == 0.4);
  CHECK(*rows[1].box.score == 0.3);
}

TEST_CASE("run produces a full artifact tree and a perfect-score report") {
  TmpDir dir("cli");
  const CliResult gen = run_cli(
      dir.str(), "phantom-gen --out " + dir.str("data") +
                     " --count 2 --shape 48,48,48 --seed 11 --radius-min 4"
                     " --radius-max 7 --noise 0.02");
  REQUIRE(gen.exit_code == 0);

  nlohmann::ordered_json cfg;
  cfg["patch_size"] = {48, 48, 48};
  cfg["seed"] = 1;
  write_text(dir.str("config.json"), cfg.dump(2) + "\n");

  const CliResult r = run_cli(
      dir.str(), "--json run --config " + dir.str("config.json") +
                     " --manifest " + dir.str("data/manifest.json") +
                     " --out " + dir.str("run"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(exists(dir.str("run/report.json")));
  CHECK(exists(dir.str("run/config.json")));
  const auto report = nlohmann::json::parse(r.out);
  REQUIRE(report.contains("froc"));
  // Whole 48-voxel patches cover each phantom in one tile, so detection is
  // exact and every operating point saturates.
  for (const auto& fr : report.at("froc"))
    CHECK(fr.at("score").get<double>() == 1.0);
}

TEST_CASE("bad invocations fail with a clear error") {
  TmpDir dir("cli");
  const CliResult missing = run_cli(
      dir.str(), "detect --in " + dir.str("absent") + " --image-id x");
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("error:") != std::string::npos);

  const CliResult unknown = run_cli(dir.str(), "no-such-command");
  CHECK(unknown.exit_code != 0);

  const CliResult none = run_cli(dir.str(), "");
  CHECK(none.exit_code != 0);

  const CliResult badshape = run_cli(
      dir.str(), "tile --shape 1,2 --patch 192,192,192");
  CHECK(badshape.exit_code == 1);
  CHECK(badshape.err.find("--shape") != std::string::npos);
}
