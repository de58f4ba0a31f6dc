#pragma once

/// Analytic test scene: a textured cylindrical room seen by pinhole cameras
/// placed on a small ring around the room axis, looking outward at equal
/// azimuth spacing. Every view is rendered exactly (image, camera-frame
/// points, confidence 1, pose), together with the ground-truth equidistant
/// cylindrical panorama from the mean camera center.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "panolift/core.hpp"
#include "panolift/io.hpp"
#include "panolift/projection.hpp"

namespace panolift {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  int views = 8;
  int image_size = 512;  // square images
  double fov_deg = 90.0;  // horizontal (and vertical) field of view
  double room_radius = 4.0;
  double ring_radius = 0.1;
  int canvas_width = 2048;
  int canvas_height = 1024;

  void validate() const {
    if (views < 1) throw Error(ErrorCode::ValidationError, "need at least one view");
    if (image_size < 2) throw Error(ErrorCode::ValidationError, "image size must be >= 2");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw Error(ErrorCode::ValidationError, "fov must lie in (0, 180)");
    if (!(room_radius > ring_radius && ring_radius >= 0.0)) throw Error(ErrorCode::ValidationError, "cameras must be inside the room");
    if (canvas_width < 2 || canvas_height < 2) throw Error(ErrorCode::ValidationError, "canvas must be at least 2x2");
  }
};

/// Smooth seeded wall texture f(theta, h): a sum of sinusoids that are
/// 2*pi-periodic in azimuth.
class WallTexture {
 public:
  explicit WallTexture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (auto& channel : terms_)
      for (Term& t : channel) {
        t.amplitude = uniform(0.03, 0.09);
        t.theta_freq = 1 + static_cast<int>(rng() % 24);
        t.height_freq = uniform(-4.0, 4.0);
        t.phase = uniform(0.0, 2.0 * std::numbers::pi);
      }
  }

  Rgb operator()(double theta, double h) const {
    Rgb c{0.5, 0.5, 0.5};
    for (int ch = 0; ch < 3; ++ch)
      for (const Term& t : terms_[static_cast<std::size_t>(ch)])
        c[ch] += t.amplitude * std::sin(t.theta_freq * theta + t.height_freq * h + t.phase);
    return c;
  }

  Rgb at(const Vec3& wall_point) const { return (*this)(std::atan2(wall_point.y, wall_point.x), wall_point.z); }

 private:
  struct Term {
    double amplitude = 0.0;
    int theta_freq = 1;
    double height_freq = 0.0;
    double phase = 0.0;
  };
  std::array<std::array<Term, 5>, 3> terms_{};
};

struct SyntheticScene {
  std::vector<LiftedView> views;
  ProjectionCenter center;
  Grid2<Rgb> truth;  // ground-truth panorama
  Mask truth_holes;  // 1 where no view sees the wall
};

namespace detail {

/// Positive ray parameter t with |(origin + t dir)_xy| = radius; origin inside.
inline double ray_cylinder(const Vec3& origin, const Vec3& dir, double radius) {
  const double a = dir.x * dir.x + dir.y * dir.y;
  const double b = 2.0 * (origin.x * dir.x + origin.y * dir.y);
  const double c = origin.x * origin.x + origin.y * origin.y - radius * radius;
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

struct Pinhole {
  RigidTransform pose;
  double focal = 0.0;
  int size = 0;

  /// True if the unified-frame point projects inside the image.
  bool sees(const Vec3& p) const {
    const Vec3 c = pose.rotation().transposed() * (p - pose.translation());
    if (c.z <= 0.0) return false;
    const double u = focal * c.x / c.z + size / 2.0;
    const double v = focal * c.y / c.z + size / 2.0;
    return u >= 0.0 && u < size && v >= 0.0 && v < size;
  }
};

inline Pinhole make_camera(const SyntheticConfig& cfg, int i) {
  const double az = 2.0 * std::numbers::pi * i / cfg.views;
  const double ca = std::cos(az), sa = std::sin(az);
  // Camera frame: x right, y down, z forward; columns are those axes in the world.
  const Mat3 r = Mat3::from_rows({sa, 0.0, ca,  //
                                  -ca, 0.0, sa,  //
                                  0.0, -1.0, 0.0});
  const Vec3 center{cfg.ring_radius * ca, cfg.ring_radius * sa, 0.0};
  const double focal = (cfg.image_size / 2.0) / std::tan(cfg.fov_deg * std::numbers::pi / 360.0);
  return {RigidTransform(r, center), focal, cfg.image_size};
}

}  // namespace detail

inline SyntheticScene generate_synthetic(const SyntheticConfig& cfg, int threads = 1) {
  cfg.validate();
  const WallTexture texture(cfg.seed);
  SyntheticScene scene;
  std::vector<detail::Pinhole> cams;
  std::vector<Vec3> centers;
  for (int i = 0; i < cfg.views; ++i) {
    cams.push_back(detail::make_camera(cfg, i));
    centers.push_back(cams.back().pose.translation());
  }
  scene.center = projection_center(centers);

  const int n = cfg.image_size;
  for (const auto& cam : cams) {
    LiftedView view{Grid2<Rgb>(n, n), Grid2<Vec3>(n, n), Grid2<double>(n, n, 1.0), cam.pose};
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t vv = b; vv < e; ++vv) {
        const int v = static_cast<int>(vv);
        for (int u = 0; u < n; ++u) {
          const Vec3 dc{(u + 0.5 - n / 2.0) / cam.focal, (v + 0.5 - n / 2.0) / cam.focal, 1.0};
          const Vec3 dw = cam.pose.rotation() * dc;
          const double t = detail::ray_cylinder(cam.pose.translation(), dw, cfg.room_radius);
          const Vec3 p = cam.pose.translation() + dw * t;
          view.points(u, v) = dc * t;
          view.image(u, v) = texture.at(p);
        }
      }
    });
    scene.views.push_back(std::move(view));
  }

  const CanvasSpec spec{cfg.canvas_width, cfg.canvas_height};
  scene.truth = Grid2<Rgb>(spec.width, spec.height);
  scene.truth_holes = Mask(spec.width, spec.height);
  parallel_for(static_cast<std::size_t>(spec.height), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t yy = b; yy < e; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < spec.width; ++x) {
        const Vec3 d = canvas_pixel_direction(spec, x + 0.5, y + 0.5);
        const Vec3 p = scene.center.origin + d * detail::ray_cylinder(scene.center.origin, d, cfg.room_radius);
        scene.truth(x, y) = texture.at(p);
        bool seen = false;
        for (const auto& cam : cams) seen = seen || cam.sees(p);
        scene.truth_holes(x, y) = seen ? 0 : 1;
      }
    }
  });
  return scene;
}

/// Writes view_<i>.{ppm,lpm,pose}, truth_pano.ppm, truth_mask.pgm and
/// manifest.json into `dir`. Returns the manifest path.
inline fs::path write_synthetic(const fs::path& dir, const SyntheticScene& scene, const SyntheticConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create directory '" + dir.string() + "'");
  SceneManifest m;
  m.canvas_width = cfg.canvas_width;
  m.canvas_height = cfg.canvas_height;
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const std::string stem = "view_" + std::to_string(i);
    ViewFiles f{dir / (stem + ".ppm"), dir / (stem + ".lpm"), dir / (stem + ".pose")};
    const LiftedView& v = scene.views[i];
    write_image(f.image_path, v.image);
    write_lpm(f.points_path, v.points, v.confidence);
    write_pose(f.pose_path, v.pose);
    m.views.push_back(f);
  }
  write_image(dir / "truth_pano.ppm", scene.truth);
  write_mask(dir / "truth_mask.pgm", scene.truth_holes);
  const fs::path manifest = dir / "manifest.json";
  detail::write_file(manifest, format_manifest(m, dir));
  return manifest;
}

}  // namespace panolift
