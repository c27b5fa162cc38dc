#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voldet/box.hpp"
#include "voldet/mask.hpp"
#include "voldet/numeric.hpp"
#include "voldet/rng.hpp"
#include "voldet/types.hpp"
#include "voldet/volume.hpp"

namespace voldet {

enum class Transform {
  rotation,
  scaling,
  rotation90,
  transpose_axes,
  gaussian_noise,
  gaussian_blur,
  median_filter,
  brightness,
  brightness_gradient,
  contrast,
  low_resolution,
  gamma,
  inverse_gamma,
  local_gamma,
  sharpening,
  mirror,
};

inline std::string to_string(Transform t) {
  switch (t) {
    case Transform::rotation: return "rotation";
    case Transform::scaling: return "scaling";
    case Transform::rotation90: return "rotation90";
    case Transform::transpose_axes: return "transpose";
    case Transform::gaussian_noise: return "gaussian_noise";
    case Transform::gaussian_blur: return "gaussian_blur";
    case Transform::median_filter: return "median_filter";
    case Transform::brightness: return "brightness";
    case Transform::brightness_gradient: return "brightness_gradient";
    case Transform::contrast: return "contrast";
    case Transform::low_resolution: return "low_resolution";
    case Transform::gamma: return "gamma";
    case Transform::inverse_gamma: return "inverse_gamma";
    case Transform::local_gamma: return "local_gamma";
    case Transform::sharpening: return "sharpening";
    default: return "mirror";
  }
}

inline Transform transform_from_string(const std::string& s) {
  static const std::array<Transform, 16> all{
      Transform::rotation,       Transform::scaling,
      Transform::rotation90,     Transform::transpose_axes,
      Transform::gaussian_noise, Transform::gaussian_blur,
      Transform::median_filter,  Transform::brightness,
      Transform::brightness_gradient, Transform::contrast,
      Transform::low_resolution, Transform::gamma,
      Transform::inverse_gamma,  Transform::local_gamma,
      Transform::sharpening,     Transform::mirror};
  for (Transform t : all)
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown transform \"" + s + "\"");
}

/// One row of a scheme table: inclusion probability plus, where meaningful,
/// the uniform range its magnitude is drawn from. Spatial rows carry the
/// published magnitudes; intensity-row ranges are this library's defaults.
struct SchemeEntry {
  Transform id;
  double p = 0.0;
  std::optional<std::array<double, 2>> magnitude;
};

struct AugScheme {
  std::string name;
  std::vector<SchemeEntry> entries;
};

/// The two published augmentation schemes. Magnitude semantics by row:
/// rotation = degrees per axis, scaling = isotropic factor, gaussian_noise =
/// sigma relative to the image intensity std, gaussian_blur = sigma in
/// voxels, brightness/contrast = multiplicative factor, brightness_gradient
/// = amplitude relative to intensity std, low_resolution = downsample
/// factor, gamma rows = exponent, sharpening = unsharp-mask amount. The
/// mirror probability applies independently per axis.
inline AugScheme scheme_table(const std::string& name) {
  using T = Transform;
  auto row = [](T id, double p,
                std::optional<std::array<double, 2>> m = std::nullopt) {
    return SchemeEntry{id, p, m};
  };
  if (name == "A") {
    return AugScheme{
        "A",
        {
            row(T::rotation, 0.3, {{-30.0, 30.0}}),
            row(T::scaling, 0.2, {{0.7, 1.4}}),
            row(T::gaussian_noise, 0.1, {{0.0, 0.1}}),
            row(T::gaussian_blur, 0.2, {{0.5, 1.5}}),
            row(T::brightness, 0.15, {{0.75, 1.25}}),
            row(T::contrast, 0.15, {{0.75, 1.25}}),
            row(T::gamma, 0.3, {{0.7, 1.5}}),
            row(T::inverse_gamma, 0.1, {{0.7, 1.5}}),
            row(T::mirror, 0.5),
        }};
  }
  if (name == "B") {
    return AugScheme{
        "B",
        {
            row(T::rotation, 0.1, {{-10.0, 10.0}}),
            row(T::scaling, 0.3, {{0.65, 1.6}}),
            row(T::rotation90, 0.5),
            row(T::transpose_axes, 0.5),
            row(T::gaussian_noise, 0.1, {{0.0, 0.1}}),
            row(T::gaussian_blur, 0.2, {{0.5, 1.5}}),
            row(T::median_filter, 0.2),
            row(T::brightness_gradient, 0.3, {{-0.3, 0.3}}),
            row(T::contrast, 0.2, {{0.75, 1.25}}),
            row(T::low_resolution, 0.15, {{1.0, 2.0}}),
            row(T::gamma, 0.1, {{0.7, 1.5}}),
            row(T::inverse_gamma, 0.1, {{0.7, 1.5}}),
            row(T::local_gamma, 0.3, {{0.7, 1.5}}),
            row(T::sharpening, 0.2, {{0.5, 1.5}}),
            row(T::mirror, 0.5),
        }};
  }
  throw std::invalid_argument("scheme_table: unknown scheme \"" + name + "\"");
}

inline nlohmann::ordered_json scheme_to_json(const AugScheme& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["entries"] = nlohmann::ordered_json::array();
  for (const SchemeEntry& e : s.entries) {
    nlohmann::ordered_json row;
    row["transform"] = to_string(e.id);
    row["p"] = e.p;
    if (e.magnitude) row["magnitude"] = *e.magnitude;
    j["entries"].push_back(row);
  }
  return j;
}

inline AugScheme scheme_from_json(const nlohmann::json& j) {
  AugScheme s;
  s.name = j.at("name").get<std::string>();
  for (const auto& row : j.at("entries")) {
    SchemeEntry e;
    e.id = transform_from_string(row.at("transform").get<std::string>());
    e.p = row.at("p").get<double>();
    if (e.p < 0.0 || e.p > 1.0)
      throw std::invalid_argument("scheme: probability outside [0,1]");
    if (row.contains("magnitude"))
      e.magnitude = row.at("magnitude").get<std::array<double, 2>>();
    s.entries.push_back(e);
  }
  return s;
}

struct Rot90Params {
  int axis_a = 0;  // plane axes, axis_a < axis_b
  int axis_b = 1;
  int quarter_turns = 1;  // 1..3
};

struct GradientParams {
  double amplitude_rel = 0.0;  // times the image intensity std
  Vec3 direction{0, 0, 1};     // unit vector
};

struct LocalGammaParams {
  Vec3 center_rel{0.5, 0.5, 0.5};  // relative position in the volume
  double radius_rel = 0.25;        // times the smallest extent
  double exponent = 1.0;
};

/// Concrete sampled parameters for one augmentation call. Empty optionals
/// and false flags mean the transform is skipped.
struct AugParams {
  std::optional<Vec3> rotation_rad;  // per-axis angles (about z, y, x)
  std::optional<double> scale;       // isotropic
  std::optional<std::array<int, 3>> transpose_perm;
  std::optional<Rot90Params> rot90;
  std::array<bool, 3> mirror_axes{false, false, false};

  std::optional<double> noise_sigma_rel;
  std::uint64_t noise_seed = 0;
  std::optional<double> blur_sigma;
  bool median_filter = false;
  std::optional<double> brightness_factor;
  std::optional<GradientParams> brightness_gradient;
  std::optional<double> contrast_factor;
  std::optional<double> lowres_factor;
  std::optional<double> gamma_exponent;
  std::optional<double> inverse_gamma_exponent;
  std::optional<LocalGammaParams> local_gamma;
  std::optional<double> sharpen_amount;

  bool has_spatial() const {
    return rotation_rad || scale || transpose_perm || rot90 ||
           mirror_axes[0] || mirror_axes[1] || mirror_axes[2];
  }
};

/// Sample parameters for every scheme row: each transform is included
/// independently with its p (mirror per axis), magnitudes drawn uniformly
/// from the row's range, all in table order from one seeded stream.
inline AugParams draw_params(const AugScheme& scheme, std::uint64_t seed) {
  Rng rng(seed);
  AugParams out;
  auto range = [](const SchemeEntry& e) {
    if (!e.magnitude)
      throw std::invalid_argument("draw_params: row \"" + to_string(e.id) +
                                  "\" needs a magnitude range");
    return *e.magnitude;
  };
  constexpr double deg = 3.14159265358979323846 / 180.0;
  for (const SchemeEntry& e : scheme.entries) {
    if (e.p < 0.0 || e.p > 1.0)
      throw std::invalid_argument("draw_params: probability outside [0,1]");
    if (e.id == Transform::mirror) {
      for (int i = 0; i < 3; ++i) out.mirror_axes[i] = coin(rng, e.p);
      continue;
    }
    if (!coin(rng, e.p)) continue;
    switch (e.id) {
      case Transform::rotation: {
        const auto m = range(e);
        Vec3 ang;
        for (int i = 0; i < 3; ++i)
          ang[i] = uniform_real(rng, m[0], m[1]) * deg;
        out.rotation_rad = ang;
        break;
      }
      case Transform::scaling: {
        const auto m = range(e);
        out.scale = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::rotation90: {
        static constexpr std::array<std::array<int, 2>, 3> planes{
            {{0, 1}, {0, 2}, {1, 2}}};
        const auto plane = planes[uniform_below(rng, 3)];
        Rot90Params r;
        r.axis_a = plane[0];
        r.axis_b = plane[1];
        r.quarter_turns = static_cast<int>(uniform_int(rng, 1, 3));
        out.rot90 = r;
        break;
      }
      case Transform::transpose_axes: {
        static constexpr std::array<std::array<int, 3>, 5> perms{{{0, 2, 1},
                                                                  {1, 0, 2},
                                                                  {1, 2, 0},
                                                                  {2, 0, 1},
                                                                  {2, 1, 0}}};
        out.transpose_perm = perms[uniform_below(rng, 5)];
        break;
      }
      case Transform::gaussian_noise: {
        const auto m = range(e);
        out.noise_sigma_rel = uniform_real(rng, m[0], m[1]);
        out.noise_seed = rng();
        break;
      }
      case Transform::gaussian_blur: {
        const auto m = range(e);
        out.blur_sigma = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::median_filter:
        out.median_filter = true;
        break;
      case Transform::brightness: {
        const auto m = range(e);
        out.brightness_factor = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::brightness_gradient: {
        const auto m = range(e);
        GradientParams g;
        g.amplitude_rel = uniform_real(rng, m[0], m[1]);
        NormalSampler normal(rng);
        double norm = 0.0;
        do {
          for (int i = 0; i < 3; ++i) g.direction[i] = normal();
          norm = std::sqrt(g.direction[0] * g.direction[0] +
                           g.direction[1] * g.direction[1] +
                           g.direction[2] * g.direction[2]);
        } while (norm < 1e-12);
        for (int i = 0; i < 3; ++i) g.direction[i] /= norm;
        out.brightness_gradient = g;
        break;
      }
      case Transform::contrast: {
        const auto m = range(e);
        out.contrast_factor = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::low_resolution: {
        const auto m = range(e);
        out.lowres_factor = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::gamma: {
        const auto m = range(e);
        out.gamma_exponent = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::inverse_gamma: {
        const auto m = range(e);
        out.inverse_gamma_exponent = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::local_gamma: {
        const auto m = range(e);
        LocalGammaParams l;
        for (int i = 0; i < 3; ++i) l.center_rel[i] = uniform_unit(rng);
        l.radius_rel = uniform_real(rng, 0.1, 0.4);
        l.exponent = uniform_real(rng, m[0], m[1]);
        out.local_gamma = l;
        break;
      }
      case Transform::sharpening: {
        const auto m = range(e);
        out.sharpen_amount = uniform_real(rng, m[0], m[1]);
        break;
      }
      case Transform::mirror:
        break;  // handled above
    }
  }
  return out;
}

struct Sample {
  Volume image;
  Volume mask;  // label volume, instance ids 1..k
  std::vector<BoxF> boxes;
};

namespace detail {

/// Affine coordinate map x = L*y + t in index space (voxel v at coordinate
/// v). Used as the inverse map: y is an output voxel, x the input position.
struct Affine {
  std::array<std::array<double, 3>, 3> L{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 t{0, 0, 0};
};

inline Vec3 apply(const Affine& a, const Vec3& y) {
  Vec3 x;
  for (int i = 0; i < 3; ++i)
    x[i] = a.L[i][0] * y[0] + a.L[i][1] * y[1] + a.L[i][2] * y[2] + a.t[i];
  return x;
}

/// Composition (a . b)(y) = a(b(y)).
inline Affine compose(const Affine& a, const Affine& b) {
  Affine c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c.L[i][j] =
          a.L[i][0] * b.L[0][j] + a.L[i][1] * b.L[1][j] + a.L[i][2] * b.L[2][j];
    }
    c.t[i] = a.L[i][0] * b.t[0] + a.L[i][1] * b.t[1] + a.L[i][2] * b.t[2] +
             a.t[i];
  }
  return c;
}

inline Vec3 grid_center(const Index3& shape) {
  return {(static_cast<double>(shape[0]) - 1.0) / 2.0,
          (static_cast<double>(shape[1]) - 1.0) / 2.0,
          (static_cast<double>(shape[2]) - 1.0) / 2.0};
}

/// 3x3 rotation from per-axis angles, applied x-axis first, then y, then z.
/// "About axis i" rotates the plane of the other two axes in (z,y,x) order.
inline std::array<std::array<double, 3>, 3> rotation_matrix(const Vec3& rad) {
  auto mul = [](const std::array<std::array<double, 3>, 3>& a,
                const std::array<std::array<double, 3>, 3>& b) {
    std::array<std::array<double, 3>, 3> c{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    return c;
  };
  auto plane_rot = [](int u, int v, double th) {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    m[u][u] = std::cos(th);
    m[u][v] = -std::sin(th);
    m[v][u] = std::sin(th);
    m[v][v] = std::cos(th);
    return m;
  };
  const auto rz = plane_rot(1, 2, rad[0]);  // about z: rotates (y,x)
  const auto ry = plane_rot(0, 2, rad[1]);  // about y: rotates (z,x)
  const auto rx = plane_rot(0, 1, rad[2]);  // about x: rotates (z,y)
  return mul(rz, mul(ry, rx));
}

/// Mask sampling for spatial transforms: nearest voxel, background 0 outside
/// the grid. Right-angle maps land exactly on voxel coordinates, so lookup
/// is exact there.
inline float sample_mask(const Volume& m, const Vec3& p) {
  Index3 idx;
  for (int a = 0; a < 3; ++a) {
    const std::int64_t i = static_cast<std::int64_t>(std::floor(p[a] + 0.5));
    if (i < 0 || i >= m.shape[a]) return 0.0f;
    idx[a] = i;
  }
  return m.at(idx[0], idx[1], idx[2]);
}

}  // namespace detail

/// Apply the sampled spatial transforms in one resampling pass. Forward
/// order: scaling, rotation (about the grid center), transpose, rotation by
/// 90 degrees, mirror; the composed inverse map is evaluated once per output
/// voxel. Axis permutations permute the output shape and spacing. The image
/// interpolates trilinearly (edge clamp), the mask nearest-neighbor with
/// background outside. Boxes are re-derived from the transformed mask;
/// instances that vanish are dropped and the rest relabeled consecutively.
/// Mirror/transpose/rotation-90 compositions are exact: they map voxel
/// coordinates to voxel coordinates with no interpolation error, so the
/// re-derived boxes equal the analytically transformed ones.
inline Sample apply_spatial(const Sample& sample, const AugParams& params) {
  if (sample.image.shape != sample.mask.shape)
    throw std::invalid_argument("apply_spatial: image/mask shape mismatch");
  if (sample.mask.kind != VoxelKind::label)
    throw std::invalid_argument("apply_spatial: mask must be a label volume");
  if (!params.has_spatial()) return sample;

  const Index3 in_shape = sample.image.shape;
  const Vec3 c_in = detail::grid_center(in_shape);

  // Walk the permutation stages forward to find the output shape/spacing.
  Index3 shape = in_shape;
  Vec3 spacing = sample.image.spacing;
  if (params.transpose_perm) {
    const auto& perm = *params.transpose_perm;
    Index3 s = shape;
    Vec3 sp = spacing;
    for (int i = 0; i < 3; ++i) {
      shape[i] = s[perm[i]];
      spacing[i] = sp[perm[i]];
    }
  }
  std::vector<Index3> rot90_in_shapes;
  if (params.rot90) {
    for (int k = 0; k < params.rot90->quarter_turns; ++k) {
      rot90_in_shapes.push_back(shape);
      std::swap(shape[params.rot90->axis_a], shape[params.rot90->axis_b]);
      std::swap(spacing[params.rot90->axis_a], spacing[params.rot90->axis_b]);
    }
  }
  const Index3 out_shape = shape;

  // Inverse map, built by composing stage inverses in reverse stage order.
  detail::Affine inv;  // starts as the identity, consumes output coordinates
  if (params.mirror_axes[0] || params.mirror_axes[1] || params.mirror_axes[2]) {
    detail::Affine m;
    const Vec3 c = detail::grid_center(out_shape);
    for (int i = 0; i < 3; ++i) {
      if (!params.mirror_axes[i]) continue;
      m.L[i][i] = -1.0;
      m.t[i] = 2.0 * c[i];
    }
    inv = detail::compose(m, inv);
  }
  if (params.rot90) {
    const int a = params.rot90->axis_a;
    const int b = params.rot90->axis_b;
    for (int k = params.rot90->quarter_turns - 1; k >= 0; --k) {
      // Forward turn about the grid center: p'_a = -p_b, p'_b = p_a.
      const Vec3 cT = detail::grid_center(rot90_in_shapes[static_cast<std::size_t>(k)]);
      detail::Affine r;
      r.L[a][a] = 0.0;
      r.L[b][b] = 0.0;
      r.L[a][b] = 1.0;
      r.t[a] = 0.0;
      r.L[b][a] = -1.0;
      r.t[b] = 2.0 * cT[b];
      inv = detail::compose(r, inv);
    }
  }
  if (params.transpose_perm) {
    const auto& perm = *params.transpose_perm;
    detail::Affine p;
    p.L = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
    // Forward: y_i = x_perm[i]; inverse: x_j = y_i where perm[i] == j.
    for (int i = 0; i < 3; ++i) p.L[perm[i]][i] = 1.0;
    inv = detail::compose(p, inv);
  }
  if (params.rotation_rad) {
    const auto r = detail::rotation_matrix(*params.rotation_rad);
    detail::Affine a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a.L[i][j] = r[j][i];  // transpose
    for (int i = 0; i < 3; ++i)
      a.t[i] = c_in[i] - (a.L[i][0] * c_in[0] + a.L[i][1] * c_in[1] +
                          a.L[i][2] * c_in[2]);
    inv = detail::compose(a, inv);
  }
  if (params.scale) {
    if (!(*params.scale > 0.0))
      throw std::invalid_argument("apply_spatial: scale must be positive");
    detail::Affine s;
    const double k = 1.0 / *params.scale;
    for (int i = 0; i < 3; ++i) {
      s.L[i][i] = k;
      s.t[i] = c_in[i] - k * c_in[i];
    }
    inv = detail::compose(s, inv);
  }

  Sample out;
  out.image = Volume::zeros(out_shape, VoxelKind::image, sample.image.dtype);
  out.image.spacing = spacing;
  out.image.origin = sample.image.origin;
  out.mask = Volume::zeros(out_shape, VoxelKind::label, sample.mask.dtype);
  out.mask.spacing = spacing;
  out.mask.origin = sample.mask.origin;

  std::size_t o = 0;
  for (std::int64_t z = 0; z < out_shape[0]; ++z)
    for (std::int64_t y = 0; y < out_shape[1]; ++y)
      for (std::int64_t x = 0; x < out_shape[2]; ++x, ++o) {
        const Vec3 p = detail::apply(inv, {static_cast<double>(z),
                                           static_cast<double>(y),
                                           static_cast<double>(x)});
        out.image.data[o] = detail::sample_trilinear(sample.image, p);
        out.mask.data[o] = detail::sample_mask(sample.mask, p);
      }

  // Re-derive boxes and relabel surviving instances to consecutive ids.
  const auto derived = boxes_from_mask(out.mask);
  std::vector<float> remap(
      derived.empty() ? 1 : static_cast<std::size_t>(derived.back().first) + 1,
      0.0f);
  bool contiguous = true;
  int next = 0;
  for (const auto& [id, box] : derived) {
    ++next;
    if (id != next) contiguous = false;
    remap[static_cast<std::size_t>(id)] = static_cast<float>(next);
    BoxF b = box;
    b.label = next;
    out.boxes.push_back(b);
  }
  if (!contiguous) {
    for (float& f : out.mask.data) {
      if (f != 0.0f) f = remap[static_cast<std::size_t>(f)];
    }
  }
  return out;
}

/// Additive zero-mean Gaussian noise with absolute sigma; the field is a
/// pure function of the seed.
inline Volume add_gaussian_noise(const Volume& vol, double sigma,
                                 std::uint64_t seed) {
  if (sigma < 0.0)
    throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  Volume out = vol;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  NormalSampler normal(rng);
  for (float& f : out.data)
    f = static_cast<float>(static_cast<double>(f) + normal() * sigma);
  return out;
}

/// Separable Gaussian blur, kernel radius ceil(3*sigma), edge replicate.
inline Volume gaussian_blur(const Volume& vol, double sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("gaussian_blur: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    ksum += w;
  }
  for (double& w : kernel) w /= ksum;

  Volume cur = vol;
  for (int axis = 0; axis < 3; ++axis) {
    Volume next = cur;
    const Index3 s = cur.shape;
    for (std::int64_t z = 0; z < s[0]; ++z)
      for (std::int64_t y = 0; y < s[1]; ++y)
        for (std::int64_t x = 0; x < s[2]; ++x) {
          Index3 idx{z, y, x};
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            Index3 n = idx;
            n[axis] = std::clamp<std::int64_t>(n[axis] + k, 0, s[axis] - 1);
            acc += kernel[static_cast<std::size_t>(k + radius)] *
                   static_cast<double>(cur.at(n[0], n[1], n[2]));
          }
          next.at(z, y, x) = static_cast<float>(acc);
        }
    cur = std::move(next);
  }
  return cur;
}

/// 3x3x3 median filter with edge replicate.
inline Volume median_filter3(const Volume& vol) {
  Volume out = vol;
  const Index3 s = vol.shape;
  std::array<float, 27> window;
  for (std::int64_t z = 0; z < s[0]; ++z)
    for (std::int64_t y = 0; y < s[1]; ++y)
      for (std::int64_t x = 0; x < s[2]; ++x) {
        int n = 0;
        for (std::int64_t dz = -1; dz <= 1; ++dz)
          for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
              const std::int64_t cz = std::clamp<std::int64_t>(z + dz, 0, s[0] - 1);
              const std::int64_t cy = std::clamp<std::int64_t>(y + dy, 0, s[1] - 1);
              const std::int64_t cx = std::clamp<std::int64_t>(x + dx, 0, s[2] - 1);
              window[static_cast<std::size_t>(n++)] = vol.at(cz, cy, cx);
            }
        std::nth_element(window.begin(), window.begin() + 13, window.end());
        out.at(z, y, x) = window[13];
      }
  return out;
}

/// Resize to an explicit shape with trilinear sampling (spacing-style
/// coordinate mapping); an unchanged shape is the identity.
inline Volume resize_trilinear(const Volume& vol, const Index3& new_shape) {
  for (int i = 0; i < 3; ++i) {
    if (new_shape[i] <= 0)
      throw std::invalid_argument("resize_trilinear: shape must be positive");
  }
  if (new_shape == vol.shape) return vol;
  Volume out = Volume::zeros(new_shape, vol.kind, vol.dtype);
  out.spacing = vol.spacing;
  out.origin = vol.origin;
  double scale[3];
  for (int i = 0; i < 3; ++i)
    scale[i] = static_cast<double>(vol.shape[i]) /
               static_cast<double>(new_shape[i]);
  std::size_t o = 0;
  for (std::int64_t z = 0; z < new_shape[0]; ++z) {
    const double pz = (static_cast<double>(z) + 0.5) * scale[0] - 0.5;
    for (std::int64_t y = 0; y < new_shape[1]; ++y) {
      const double py = (static_cast<double>(y) + 0.5) * scale[1] - 0.5;
      for (std::int64_t x = 0; x < new_shape[2]; ++x, ++o) {
        const double px = (static_cast<double>(x) + 0.5) * scale[2] - 0.5;
        out.data[o] = detail::sample_trilinear(vol, {pz, py, px});
      }
    }
  }
  return out;
}

namespace detail {

inline void minmax_of(const Volume& v, double& lo, double& hi) {
  lo = static_cast<double>(v.data[0]);
  hi = lo;
  for (float f : v.data) {
    lo = std::min(lo, static_cast<double>(f));
    hi = std::max(hi, static_cast<double>(f));
  }
}

}  // namespace detail

/// Apply the sampled intensity transforms in table row order: noise, blur,
/// median filter, brightness, brightness gradient, contrast, low resolution,
/// gamma, inverse gamma, local gamma, sharpening. Mask and boxes are never
/// touched by intensity transforms.
inline Volume apply_intensity(const Volume& image, const AugParams& params) {
  if (image.kind != VoxelKind::image)
    throw std::invalid_argument("apply_intensity: expects an image volume");
  Volume v = image;

  if (params.noise_sigma_rel) {
    const double sigma = *params.noise_sigma_rel * detail::stddev_of(v.data);
    v = add_gaussian_noise(v, sigma, params.noise_seed);
  }
  if (params.blur_sigma) v = gaussian_blur(v, *params.blur_sigma);
  if (params.median_filter) v = median_filter3(v);
  if (params.brightness_factor) {
    const double f = *params.brightness_factor;
    for (float& x : v.data) x = static_cast<float>(static_cast<double>(x) * f);
  }
  if (params.brightness_gradient) {
    const GradientParams& g = *params.brightness_gradient;
    const double amp = g.amplitude_rel * detail::stddev_of(v.data);
    const Vec3 c = detail::grid_center(v.shape);
    const double half_diag = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    const double norm = half_diag > 0.0 ? half_diag : 1.0;
    std::size_t o = 0;
    for (std::int64_t z = 0; z < v.shape[0]; ++z)
      for (std::int64_t y = 0; y < v.shape[1]; ++y)
        for (std::int64_t x = 0; x < v.shape[2]; ++x, ++o) {
          const double ramp = (g.direction[0] * (static_cast<double>(z) - c[0]) +
                               g.direction[1] * (static_cast<double>(y) - c[1]) +
                               g.direction[2] * (static_cast<double>(x) - c[2])) /
                              norm;
          v.data[o] =
              static_cast<float>(static_cast<double>(v.data[o]) + amp * ramp);
        }
  }
  if (params.contrast_factor) {
    const double m = detail::mean_of(v.data);
    const double f = *params.contrast_factor;
    for (float& x : v.data)
      x = static_cast<float>(m + f * (static_cast<double>(x) - m));
  }
  if (params.lowres_factor) {
    const double f = *params.lowres_factor;
    if (!(f >= 1.0))
      throw std::invalid_argument("apply_intensity: lowres factor must be >= 1");
    Index3 small;
    for (int i = 0; i < 3; ++i) {
      small[i] = std::max<std::int64_t>(
          1, std::llround(static_cast<double>(v.shape[i]) / f));
    }
    v = resize_trilinear(resize_trilinear(v, small), v.shape);
  }
  auto gamma_map = [&](double exponent, bool inverse,
                       const LocalGammaParams* local) {
    double lo, hi;
    detail::minmax_of(v, lo, hi);
    if (hi - lo < 1e-12) return;
    const Vec3 c = local
                       ? Vec3{local->center_rel[0] *
                                  (static_cast<double>(v.shape[0]) - 1.0),
                              local->center_rel[1] *
                                  (static_cast<double>(v.shape[1]) - 1.0),
                              local->center_rel[2] *
                                  (static_cast<double>(v.shape[2]) - 1.0)}
                       : Vec3{0, 0, 0};
    double radius2 = 0.0;
    if (local) {
      const double min_extent = static_cast<double>(
          std::min({v.shape[0], v.shape[1], v.shape[2]}));
      const double r = local->radius_rel * min_extent;
      radius2 = r * r;
    }
    std::size_t o = 0;
    for (std::int64_t z = 0; z < v.shape[0]; ++z)
      for (std::int64_t y = 0; y < v.shape[1]; ++y)
        for (std::int64_t x = 0; x < v.shape[2]; ++x, ++o) {
          if (local) {
            const double dz = static_cast<double>(z) - c[0];
            const double dy = static_cast<double>(y) - c[1];
            const double dx = static_cast<double>(x) - c[2];
            if (dz * dz + dy * dy + dx * dx > radius2) continue;
          }
          const double u = (static_cast<double>(v.data[o]) - lo) / (hi - lo);
          const double w = inverse ? 1.0 - std::pow(1.0 - u, exponent)
                                   : std::pow(u, exponent);
          v.data[o] = static_cast<float>(lo + (hi - lo) * w);
        }
  };
  if (params.gamma_exponent) gamma_map(*params.gamma_exponent, false, nullptr);
  if (params.inverse_gamma_exponent)
    gamma_map(*params.inverse_gamma_exponent, true, nullptr);
  if (params.local_gamma)
    gamma_map(params.local_gamma->exponent, false, &*params.local_gamma);
  if (params.sharpen_amount) {
    const Volume blurred = gaussian_blur(v, 1.0);
    const double a = *params.sharpen_amount;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
      v.data[i] = static_cast<float>(
          static_cast<double>(v.data[i]) +
          a * (static_cast<double>(v.data[i]) -
               static_cast<double>(blurred.data[i])));
    }
  }
  return v;
}

/// Full augmentation of one sample: spatial pass, then intensity pass on the
/// image only.
inline Sample apply_augmentation(const Sample& sample, const AugParams& params) {
  Sample out = apply_spatial(sample, params);
  out.image = apply_intensity(out.image, params);
  return out;
}

}  // namespace voldet
