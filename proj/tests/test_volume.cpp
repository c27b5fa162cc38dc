#include <catch2/catch_amalgamated.hpp>

#include "voldet/volume.hpp"

using voldet::Dtype;
using voldet::Index3;
using voldet::Vec3;
using voldet::Volume;
using voldet::VoxelKind;

TEST_CASE("zeros builds a validated empty grid") {
  const Volume v = Volume::zeros({2, 3, 4});
  REQUIRE(v.voxel_count() == 24);
  REQUIRE(v.data.size() == 24);
  CHECK(v.at(1, 2, 3) == 0.0f);
  CHECK_NOTHROW(voldet::validate(v));
  CHECK_THROWS_AS(Volume::zeros({0, 3, 4}), std::invalid_argument);
}

TEST_CASE("flat_index is x-fastest") {
  Volume v = Volume::zeros({2, 2, 2});
  v.at(0, 0, 1) = 1.0f;
  v.at(1, 0, 0) = 2.0f;
  CHECK(v.data[1] == 1.0f);
  CHECK(v.data[4] == 2.0f);
}

TEST_CASE("validate rejects malformed volumes") {
  Volume v = Volume::zeros({2, 2, 2});
  v.data.pop_back();
  CHECK_THROWS_AS(voldet::validate(v), std::invalid_argument);

  Volume bad_spacing = Volume::zeros({2, 2, 2});
  bad_spacing.spacing = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(voldet::validate(bad_spacing), std::invalid_argument);

  Volume lab = Volume::zeros({2, 2, 2}, VoxelKind::label, Dtype::u8);
  lab.data[3] = 1.5f;
  CHECK_THROWS_AS(voldet::validate(lab), std::invalid_argument);
  lab.data[3] = -1.0f;
  CHECK_THROWS_AS(voldet::validate(lab), std::invalid_argument);
  lab.data[3] = 2.0f;
  CHECK_NOTHROW(voldet::validate(lab));
}

TEST_CASE("needs_resampling applies the relative tolerance per axis") {
  const Vec3 target{1.40, 1.43, 1.43};
  CHECK_FALSE(voldet::needs_resampling({1.40, 1.43, 1.43}, target));
  // |1.60 - 1.43| / 1.43 is about 11.9%.
  CHECK(voldet::needs_resampling({1.40, 1.43, 1.60}, target));
  // |1.45 - 1.40| / 1.40 is about 3.6%.
  CHECK_FALSE(voldet::needs_resampling({1.45, 1.43, 1.43}, target));

  CHECK_THROWS_AS(voldet::needs_resampling({1, 1, 1}, {1, 0, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(voldet::needs_resampling({1, 1, 1}, {1, 1, 1}, -0.1),
                  std::invalid_argument);
}

TEST_CASE("resampling a constant volume stays constant") {
  Volume v = Volume::zeros({9, 7, 5});
  for (float& f : v.data) f = 3.25f;
  v.spacing = {2.0, 1.0, 0.5};
  const Volume out = voldet::resample(v, {1.0, 1.0, 1.0});
  REQUIRE(out.shape == Index3{18, 7, 3});  // round(9*2), round(7), round(5/2)
  for (float f : out.data) CHECK(f == 3.25f);
  CHECK(out.spacing == Vec3{1.0, 1.0, 1.0});
}

TEST_CASE("resample shape follows round(shape * spacing / target)") {
  Volume v = Volume::zeros({64, 64, 64});
  v.spacing = {0.715, 0.715, 0.715};
  const Volume out = voldet::resample(v, {1.43, 1.43, 1.43});
  CHECK(out.shape == Index3{32, 32, 32});
}

TEST_CASE("resample at identical spacing is bit-exact") {
  Volume v = Volume::zeros({6, 5, 4});
  for (std::size_t i = 0; i < v.data.size(); ++i)
    v.data[i] = static_cast<float>(i) * 0.37f;
  v.spacing = {1.40, 1.43, 1.43};
  const Volume out = voldet::resample(v, {1.40, 1.43, 1.43});
  REQUIRE(out.shape == v.shape);
  CHECK(out.data == v.data);
}

TEST_CASE("label resampling is closed over the input label set") {
  Volume lab = Volume::zeros({8, 8, 8}, VoxelKind::label, Dtype::u8);
  for (std::int64_t z = 2; z < 6; ++z)
    for (std::int64_t y = 2; y < 6; ++y)
      for (std::int64_t x = 2; x < 6; ++x) lab.at(z, y, x) = 1.0f;
  lab.spacing = {1.0, 1.0, 1.0};
  const Volume out = voldet::resample(lab, {0.6, 0.6, 0.6});
  REQUIRE(out.shape == Index3{13, 13, 13});
  for (float f : out.data) CHECK((f == 0.0f || f == 1.0f));
  CHECK_NOTHROW(voldet::validate(out));
}

TEST_CASE("resample validates its inputs") {
  Volume v = Volume::zeros({4, 4, 4});
  CHECK_THROWS_AS(voldet::resample(v, {0.0, 1.0, 1.0}), std::invalid_argument);
  v.data.clear();
  CHECK_THROWS_AS(voldet::resample(v, {1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("trilinear sampling clamps at the edges") {
  Volume v = Volume::zeros({2, 2, 2});
  v.at(0, 0, 0) = 1.0f;
  v.at(0, 0, 1) = 3.0f;
  CHECK(voldet::detail::sample_trilinear(v, {0.0, 0.0, 0.5}) == 2.0f);
  CHECK(voldet::detail::sample_trilinear(v, {0.0, 0.0, -5.0}) == 1.0f);
  CHECK(voldet::detail::sample_trilinear(v, {-1.0, -1.0, 9.0}) == 3.0f);
}

TEST_CASE("nearest sampling rounds halfway coordinates up") {
  Volume v = Volume::zeros({1, 1, 4}, VoxelKind::label, Dtype::u8);
  v.at(0, 0, 0) = 0.0f;
  v.at(0, 0, 1) = 1.0f;
  v.at(0, 0, 2) = 2.0f;
  v.at(0, 0, 3) = 3.0f;
  CHECK(voldet::detail::sample_nearest(v, {0, 0, 0.49}) == 0.0f);
  CHECK(voldet::detail::sample_nearest(v, {0, 0, 0.5}) == 1.0f);
  CHECK(voldet::detail::sample_nearest(v, {0, 0, 1.6}) == 2.0f);
  CHECK(voldet::detail::sample_nearest(v, {0, 0, 99.0}) == 3.0f);
  CHECK(voldet::detail::sample_nearest(v, {0, 0, -99.0}) == 0.0f);
}
