#pragma once

/// Unified projection center and the equidistant cylindrical map from 3D
/// directions to panoramic canvas coordinates.
///
/// Canvas convention: x in [0, W) grows with azimuth theta, wrapping at the
/// seam theta = +-pi; y in [0, H) grows downward from the zenith.

#include <cmath>
#include <numbers>
#include <vector>

#include "panolift/core.hpp"

namespace panolift {

struct ProjectionCenter {
  Vec3 origin;
};

struct CanvasSpec {
  int width = 0;
  int height = 0;

  void validate() const {
    if (width < 2 || height < 2) throw Error(ErrorCode::ValidationError, "canvas must be at least 2x2");
  }
};

struct AngularCoords {
  double theta = 0.0;  // azimuth, (-pi, pi]
  double phi = 0.0;    // elevation, [-pi/2, pi/2]
};

struct CanvasPoint {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr double kDegenerateDistance = 1e-12;

/// Mean of all camera centers.
inline ProjectionCenter projection_center(const std::vector<Vec3>& centers) {
  if (centers.empty()) throw Error(ErrorCode::EmptyList, "no camera centers");
  Vec3 sum{};
  for (const Vec3& c : centers) sum += c;
  return {sum / static_cast<double>(centers.size())};
}

namespace detail {

inline Vec3 direction_or_throw(const ProjectionCenter& o, const Vec3& x) {
  const Vec3 d = x - o.origin;
  if (!(norm(d) >= kDegenerateDistance))
    throw Error(ErrorCode::DegenerateDirection, "point coincides with the projection center");
  return d;
}

inline AngularCoords angles_of(const Vec3& d) {
  const double rho = std::hypot(d.x, d.y);
  // atan2(0, 0) is left undefined upstream; straight up/down rays get theta = 0.
  const double theta = (d.x == 0.0 && d.y == 0.0) ? 0.0 : std::atan2(d.y, d.x);
  return {theta == -std::numbers::pi ? std::numbers::pi : theta, std::atan2(d.z, rho)};
}

}  // namespace detail

inline AngularCoords direction_angles(const ProjectionCenter& o, const Vec3& x) {
  return detail::angles_of(detail::direction_or_throw(o, x));
}

struct CylinderHit {
  Vec3 point;
  double height = 0.0;  // axial height above O
};

/// Intersection of the ray O + alpha (X - O) with the cylinder of radius R
/// about the vertical axis through O, alpha = R / (|d_xy| + epsilon).
inline CylinderHit cylinder_intersection(const ProjectionCenter& o, const Vec3& x, double radius, double epsilon = 1e-8) {
  if (!(radius > 0.0)) throw Error(ErrorCode::ValidationError, "cylinder radius must be > 0");
  const Vec3 d = detail::direction_or_throw(o, x);
  const double alpha = radius / (std::hypot(d.x, d.y) + epsilon);
  return {o.origin + d * alpha, alpha * d.z};
}

/// Canvas coordinates of an angular direction, wrapped to [0, W) and clamped to [0, H).
inline CanvasPoint angles_to_canvas(const CanvasSpec& spec, const AngularCoords& a) {
  const double w = spec.width, h = spec.height;
  double x = w / (2.0 * std::numbers::pi) * (a.theta + std::numbers::pi);
  x = std::fmod(x, w);
  if (x < 0.0) x += w;
  if (x >= w) x = 0.0;
  double y = h / std::numbers::pi * (std::numbers::pi / 2.0 - a.phi);
  y = std::clamp(y, 0.0, std::nextafter(h, 0.0));
  return {x, y};
}

/// Equidistant cylindrical projection of a unified-frame point.
inline CanvasPoint project(const ProjectionCenter& o, const CanvasSpec& spec, const Vec3& x) {
  return angles_to_canvas(spec, direction_angles(o, x));
}

/// Unit direction for the center of canvas pixel (col, row); inverse of project().
inline Vec3 canvas_pixel_direction(const CanvasSpec& spec, double x, double y) {
  const double theta = 2.0 * std::numbers::pi * x / spec.width - std::numbers::pi;
  const double phi = std::numbers::pi / 2.0 - std::numbers::pi * y / spec.height;
  return {std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
}

}  // namespace panolift
