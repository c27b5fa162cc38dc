#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <utility>
#include <vector>

#include "support/oracles.hpp"
#include "voldet/froc.hpp"
#include "voldet/rng.hpp"

using voldet::BoxF;
using voldet::DetectionSet;
using voldet::FrocCurve;

namespace {

BoxF scored(std::array<double, 3> lo, std::array<double, 3> hi, double s) {
  BoxF b;
  b.min = lo;
  b.max = hi;
  b.score = s;
  return b;
}

BoxF plain(std::array<double, 3> lo, std::array<double, 3> hi) {
  BoxF b;
  b.min = lo;
  b.max = hi;
  return b;
}

}  // namespace

TEST_CASE("a perfect prediction matches its ground truth") {
  DetectionSet preds{"img", {scored({0, 0, 0}, {4, 4, 4}, 0.9)}};
  const std::vector<BoxF> gts{plain({0, 0, 0}, {4, 4, 4})};
  const voldet::MatchResult m = voldet::match_detections(preds, gts, 0.5);
  REQUIRE(m.pred_is_tp.size() == 1);
  CHECK(m.pred_is_tp[0]);
  CHECK(m.gt_hit[0]);
}

TEST_CASE("a consumed ground truth cannot match twice") {
  DetectionSet preds{"img",
                     {scored({0, 0, 0}, {4, 4, 4}, 0.9),
                      scored({0, 0, 0}, {4, 4, 4}, 0.8)}};
  const std::vector<BoxF> gts{plain({0, 0, 0}, {4, 4, 4})};
  const voldet::MatchResult m = voldet::match_detections(preds, gts, 0.5);
  CHECK(m.pred_is_tp[0]);
  CHECK_FALSE(m.pred_is_tp[1]);
}

TEST_CASE("matching respects the IoU threshold") {
  // Quarter-volume overlap: inter 16, union 64, IoU exactly 0.25.
  DetectionSet preds{"img", {scored({0, 0, 0}, {4, 4, 2}, 0.9)}};
  const std::vector<BoxF> gts{plain({0, 0, 1}, {4, 4, 4})};
  REQUIRE(voldet::iou(preds.boxes[0], gts[0]) == 0.25);
  CHECK_FALSE(voldet::match_detections(preds, gts, 0.3).pred_is_tp[0]);
  CHECK(voldet::match_detections(preds, gts, 0.25).pred_is_tp[0]);
  CHECK(voldet::match_detections(preds, gts, 0.1).pred_is_tp[0]);
}

TEST_CASE("perfect detection scores a full curve") {
  std::vector<std::pair<DetectionSet, std::vector<BoxF>>> per_image;
  for (int i = 0; i < 3; ++i) {
    const double z = 4.0 * i;
    DetectionSet d{"img", {scored({z, 0, 0}, {z + 4, 4, 4}, 0.9)}};
    per_image.push_back({d, {plain({z, 0, 0}, {z + 4, 4, 4})}});
  }
  const FrocCurve c = voldet::froc_curve(per_image, 0.3);
  CHECK(c.score == 1.0);
  for (double s : c.operating_sensitivities) CHECK(s == 1.0);
}

TEST_CASE("no predictions means zero sensitivity everywhere") {
  std::vector<std::pair<DetectionSet, std::vector<BoxF>>> per_image{
      {DetectionSet{"img", {}}, {plain({0, 0, 0}, {4, 4, 4})}}};
  const FrocCurve c = voldet::froc_curve(per_image, 0.3);
  CHECK(c.score == 0.0);
  CHECK(c.points.empty());
}

TEST_CASE("the two-image half-sensitivity example lands on one half") {
  // Image 1: the lone prediction is a perfect hit. Image 2: the prediction
  // misses its ground truth entirely. One TP at 0.9, one FP at 0.8, two GTs.
  std::vector<std::pair<DetectionSet, std::vector<BoxF>>> per_image;
  per_image.push_back({DetectionSet{"a", {scored({0, 0, 0}, {4, 4, 4}, 0.9)}},
                       {plain({0, 0, 0}, {4, 4, 4})}});
  per_image.push_back({DetectionSet{"b", {scored({20, 20, 20}, {24, 24, 24}, 0.8)}},
                       {plain({0, 0, 0}, {4, 4, 4})}});
  const FrocCurve c = voldet::froc_curve(per_image, 0.1);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].fp_per_image == 0.0);
  CHECK(c.points[0].sensitivity == 0.5);
  CHECK(c.points[1].fp_per_image == 0.5);
  CHECK(c.points[1].sensitivity == 0.5);
  // Every default operating point admits the 0.5-sensitivity point.
  CHECK(c.score == 0.5);
}

TEST_CASE("curves agree with per-threshold rematching on random instances") {
  voldet::Rng rng(21);
  for (int iter = 0; iter < 200; ++iter) {
    const int n_images = static_cast<int>(voldet::uniform_int(rng, 1, 5));
    std::vector<std::pair<DetectionSet, std::vector<BoxF>>> per_image;
    std::int64_t total_gts = 0;
    for (int im = 0; im < n_images; ++im) {
      DetectionSet dets{"img" + std::to_string(im), {}};
      std::vector<BoxF> gts;
      const int n_pred = static_cast<int>(voldet::uniform_int(rng, 0, 6));
      const int n_gt = static_cast<int>(voldet::uniform_int(rng, 0, 4));
      for (int i = 0; i < n_pred; ++i) {
        const double z = static_cast<double>(voldet::uniform_int(rng, 0, 12));
        const double y = static_cast<double>(voldet::uniform_int(rng, 0, 12));
        // Coarse score grid forces plenty of exact ties.
        const double s =
            static_cast<double>(voldet::uniform_int(rng, 1, 4)) / 4.0;
        dets.boxes.push_back(scored({z, y, 0}, {z + 4, y + 4, 4}, s));
      }
      for (int i = 0; i < n_gt; ++i) {
        const double z = static_cast<double>(voldet::uniform_int(rng, 0, 12));
        const double y = static_cast<double>(voldet::uniform_int(rng, 0, 12));
        gts.push_back(plain({z, y, 0}, {z + 4, y + 4, 4}));
      }
      total_gts += n_gt;
      per_image.push_back({dets, gts});
    }
    if (total_gts == 0) continue;

    const FrocCurve fast = voldet::froc_curve(per_image, 0.25);
    const FrocCurve brute =
        oracle::brute_froc(per_image, 0.25, voldet::default_fp_targets());
    REQUIRE(fast.points.size() == brute.points.size());
    for (std::size_t i = 0; i < fast.points.size(); ++i) {
      CHECK(fast.points[i].fp_per_image == brute.points[i].fp_per_image);
      CHECK(fast.points[i].sensitivity == brute.points[i].sensitivity);
    }
    REQUIRE(fast.operating_sensitivities.size() ==
            brute.operating_sensitivities.size());
    for (std::size_t i = 0; i < fast.operating_sensitivities.size(); ++i)
      CHECK(fast.operating_sensitivities[i] ==
            brute.operating_sensitivities[i]);
    CHECK(fast.score == brute.score);
  }
}

TEST_CASE("curve computation rejects malformed inputs") {
  CHECK_THROWS(voldet::froc_curve({}, 0.3));
  std::vector<std::pair<DetectionSet, std::vector<BoxF>>> no_gt{
      {DetectionSet{"a", {scored({0, 0, 0}, {2, 2, 2}, 0.5)}}, {}}};
  CHECK_THROWS(voldet::froc_curve(no_gt, 0.3));
  std::vector<std::pair<DetectionSet, std::vector<BoxF>>> ok{
      {DetectionSet{"a", {}}, {plain({0, 0, 0}, {2, 2, 2})}}};
  CHECK_THROWS(voldet::froc_curve(ok, 0.3, {0.5, 0.0}));
  CHECK_THROWS(voldet::froc_curve(ok, 0.3, {-1.0}));
}

TEST_CASE("folds balance to within one id") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("im" + std::to_string(i));
  const std::vector<int> fold = voldet::split_folds(ids, 5, 3);
  REQUIRE(fold.size() == 10);
  int count[5] = {0, 0, 0, 0, 0};
  for (int f : fold) {
    REQUIRE((f >= 0 && f < 5));
    ++count[f];
  }
  for (int c : count) CHECK(c == 2);
}

TEST_CASE("large fold splits stay exactly balanced") {
  std::vector<std::string> ids;
  for (int i = 0; i < 880; ++i) ids.push_back("im" + std::to_string(i));
  const std::vector<int> fold = voldet::split_folds(ids, 5, 9);
  int count[5] = {0, 0, 0, 0, 0};
  for (int f : fold) ++count[f];
  for (int c : count) CHECK(c == 176);
}

TEST_CASE("fold assignment is a pure function of the seed") {
  std::vector<std::string> ids;
  for (int i = 0; i < 23; ++i) ids.push_back("im" + std::to_string(i));
  CHECK(voldet::split_folds(ids, 5, 7) == voldet::split_folds(ids, 5, 7));
  CHECK(voldet::split_folds(ids, 5, 7) != voldet::split_folds(ids, 5, 8));
}

TEST_CASE("fold splitting validates its arguments") {
  std::vector<std::string> ids{"a", "b", "c"};
  CHECK_THROWS(voldet::split_folds(ids, 1, 0));
  CHECK_THROWS(voldet::split_folds(ids, 4, 0));
}
