#pragma once

/// Closed-form distortion analysis of a planar homography.
///
/// Rotating the source coordinates by beta = atan2(-h8, -h7) removes the
/// v-dependence of the projective denominator, giving
///
///   H_rot = [[h1 h2 h3] [h4 h5 h6] [-c 0 1]] = H_A * H_P,
///   H_A   = [[h1 + c h3, h2, h3] [h4 + c h6, h5, h6] [0 0 1]],
///   H_P   = [[1 0 0] [0 1 0] [-c 0 1]],
///
/// with c = sqrt(h7^2 + h8^2). The area scaling of (u, v) -> (x', y') is then
/// det J(u, v) = s_A / (1 - c u)^3 with the constant affine part
/// s_A = (h1 + c h3) h5 - (h4 + c h6) h2.

#include <cmath>
#include <limits>

#include "panolift/core.hpp"

namespace panolift {

/// Non-singular 3x3 projective map scaled so that h[2][2] = 1.
class Homography {
 public:
  explicit Homography(const Mat3& h) {
    if (!(std::abs(h(2, 2)) >= 1e-12))
      throw Error(ErrorCode::SingularHomography, "h[2][2] is zero; cannot normalize");
    Mat3 n = h;
    for (auto& row : n.m)
      for (double& x : row) x /= h(2, 2);
    n(2, 2) = 1.0;
    for (const auto& row : n.m)
      for (double x : row)
        if (!std::isfinite(x)) throw Error(ErrorCode::SingularHomography, "homography has non-finite entries");
    if (!(std::abs(n.determinant()) > 1e-12)) throw Error(ErrorCode::SingularHomography, "homography is singular");
    h_ = n;
  }

  const Mat3& matrix() const { return h_; }

  /// Maps (x, y) to (x', y'); the caller must stay off the line where w = 0.
  std::pair<double, double> apply(double x, double y) const {
    const double w = h_(2, 0) * x + h_(2, 1) * y + 1.0;
    return {(h_(0, 0) * x + h_(0, 1) * y + h_(0, 2)) / w, (h_(1, 0) * x + h_(1, 1) * y + h_(1, 2)) / w};
  }

 private:
  Mat3 h_;
};

struct NormalizedHomography {
  double beta = 0.0;
  double c = 0.0;
  Mat3 h_rot;  // homography acting on rotated coordinates (u, v)
  double s_a = 1.0;

  /// Maps rotated coordinates (u, v) to source coordinates (x, y).
  std::pair<double, double> to_source(double u, double v) const {
    const double cb = std::cos(beta), sb = std::sin(beta);
    return {cb * u - sb * v, sb * u + cb * v};
  }
};

inline NormalizedHomography normalize_rotation(const Homography& hom) {
  const Mat3& h = hom.matrix();
  NormalizedHomography n;
  n.c = std::hypot(h(2, 0), h(2, 1));
  n.beta = n.c < 1e-12 ? 0.0 : std::atan2(-h(2, 1), -h(2, 0));
  const double cb = std::cos(n.beta), sb = std::sin(n.beta);
  const Mat3 rot = Mat3::from_rows({cb, -sb, 0, sb, cb, 0, 0, 0, 1});
  n.h_rot = h * rot;
  const Mat3& r = n.h_rot;
  n.s_a = (r(0, 0) + n.c * r(0, 2)) * r(1, 1) - (r(1, 0) + n.c * r(1, 2)) * r(0, 1);
  return n;
}

struct AffineProjectiveFactors {
  Mat3 affine;      // H_A
  Mat3 projective;  // H_P
};

inline AffineProjectiveFactors factor_affine_projective(const NormalizedHomography& n) {
  const Mat3& r = n.h_rot;
  const double c = n.c;
  return {Mat3::from_rows({r(0, 0) + c * r(0, 2), r(0, 1), r(0, 2),  //
                           r(1, 0) + c * r(1, 2), r(1, 1), r(1, 2),  //
                           0.0, 0.0, 1.0}),
          Mat3::from_rows({1, 0, 0, 0, 1, 0, -c, 0, 1})};
}

/// s_A / (1 - c u)^3; throws HorizonSingularity within 1e-9 of the horizon line.
inline double jacobian_det(const NormalizedHomography& n, double u, double v) {
  (void)v;
  const double d = 1.0 - n.c * u;
  if (!(std::abs(d) > 1e-9))
    throw Error(ErrorCode::HorizonSingularity, "point lies on the projective horizon (1 - c u = 0)");
  return n.s_a / (d * d * d);
}

/// |det J| at pixel centers (u + 0.5, v + 0.5) of the rotated frame. Horizon
/// pixels take the largest finite value in the field.
inline Grid2<double> distortion_field(const NormalizedHomography& n, int width, int height, int threads = 1) {
  if (width < 1 || height < 1) throw Error(ErrorCode::ValidationError, "distortion field needs at least 1x1");
  Grid2<double> field(width, height);
  parallel_for(static_cast<std::size_t>(height), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v)
      for (int u = 0; u < width; ++u) {
        const double d = 1.0 - n.c * (u + 0.5);
        double val = std::numeric_limits<double>::infinity();
        if (std::abs(d) > 1e-9) val = std::abs(n.s_a / (d * d * d));
        if (!std::isfinite(val)) val = std::numeric_limits<double>::infinity();
        field(u, static_cast<int>(v)) = val;
      }
  });
  double finite_max = 0.0;
  for (double x : field)
    if (std::isfinite(x)) finite_max = std::max(finite_max, x);
  for (double& x : field)
    if (!std::isfinite(x)) x = finite_max;
  return field;
}

}  // namespace panolift
