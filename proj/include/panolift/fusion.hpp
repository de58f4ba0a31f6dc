#pragma once

/// Cross-view fusion: confidence filtering, local geometric variation of the
/// world-frame point map, robust fusion weights and assembly of the global
/// weighted colored point set.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "panolift/core.hpp"
#include "panolift/io.hpp"

namespace panolift {

struct WeightedColoredPoint {
  Vec3 position;
  Rgb color;
  double weight = 0.0;
};

struct WeightedColoredPointSet {
  std::vector<WeightedColoredPoint> points;
  /// Camera centers t_i of the contributing views, in manifest order.
  std::vector<Vec3> source_centers;
};

/// Monotonically decreasing robust function with rho(0) = 1.
class RobustFunction {
 public:
  enum class Kind { Exp, Reciprocal };

  static RobustFunction exp(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::ValidationError, "Exp robust function needs sigma > 0");
    return RobustFunction(Kind::Exp, sigma);
  }
  static RobustFunction reciprocal() { return RobustFunction(Kind::Reciprocal, 1.0); }

  Kind kind() const { return kind_; }
  double sigma() const { return sigma_; }

  double operator()(double s) const {
    return kind_ == Kind::Exp ? std::exp(-s / sigma_) : 1.0 / (1.0 + s);
  }

 private:
  RobustFunction(Kind kind, double sigma) : kind_(kind), sigma_(sigma) {}
  Kind kind_;
  double sigma_;
};

inline double robust_weight(const RobustFunction& rho, double s) { return rho(s); }

/// Robust function choice before per-view resolution; an Exp without sigma
/// uses the median variation of each view's valid pixels (floored at 1e-6).
struct RobustChoice {
  RobustFunction::Kind kind = RobustFunction::Kind::Exp;
  std::optional<double> sigma;

  static RobustChoice exp_auto() { return {}; }
  static RobustChoice exp(double sigma) { return {RobustFunction::Kind::Exp, sigma}; }
  static RobustChoice reciprocal() { return {RobustFunction::Kind::Reciprocal, std::nullopt}; }
};

inline Mask valid_pixels(const Grid2<double>& confidence, double tau_c) {
  Mask valid(confidence.width(), confidence.height());
  for (std::size_t i = 0; i < confidence.size(); ++i) valid[i] = confidence[i] >= tau_c ? 1 : 0;
  return valid;
}

/// Frobenius norm of [dP/du, dP/dv], central differences in the interior and
/// one-sided differences on the border.
inline Grid2<double> geometric_variation(const Grid2<Vec3>& p) {
  const int w = p.width(), h = p.height();
  if (w < 2 || h < 2) throw Error(ErrorCode::GridTooSmall, "geometric variation needs at least a 2x2 grid");
  Grid2<double> s(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      Vec3 du, dv;
      if (u == 0) du = p(1, v) - p(0, v);
      else if (u == w - 1) du = p(u, v) - p(u - 1, v);
      else du = (p(u + 1, v) - p(u - 1, v)) * 0.5;
      if (v == 0) dv = p(u, 1) - p(u, 0);
      else if (v == h - 1) dv = p(u, v) - p(u, v - 1);
      else dv = (p(u, v + 1) - p(u, v - 1)) * 0.5;
      s(u, v) = std::sqrt(dot(du, du) + dot(dv, dv));
    }
  }
  return s;
}

/// Median (upper middle element) of s over valid pixels, floored at 1e-6.
/// Returns 1e-6 when nothing is valid.
inline double auto_sigma(const Grid2<double>& s, const Mask& valid) {
  std::vector<double> vals;
  vals.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    if (valid[i]) vals.push_back(s[i]);
  if (vals.empty()) return 1e-6;
  auto mid = vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2);
  std::nth_element(vals.begin(), mid, vals.end());
  return std::max(*mid, 1e-6);
}

inline RobustFunction resolve_robust(const RobustChoice& choice, const Grid2<double>& s, const Mask& valid) {
  if (choice.kind == RobustFunction::Kind::Reciprocal) return RobustFunction::reciprocal();
  return RobustFunction::exp(choice.sigma ? *choice.sigma : auto_sigma(s, valid));
}

/// Points of one view, transformed to the unified frame and weighted.
inline std::vector<WeightedColoredPoint> fuse_view(const LiftedView& view, double tau_c, const RobustChoice& choice) {
  view.validate();
  Grid2<Vec3> world(view.width(), view.height());
  for (std::size_t i = 0; i < world.size(); ++i) world[i] = transform_point(view.pose, view.points[i]);
  const Grid2<double> s = geometric_variation(world);
  const Mask valid = valid_pixels(view.confidence, tau_c);
  const RobustFunction rho = resolve_robust(choice, s, valid);

  std::vector<WeightedColoredPoint> out;
  out.reserve(count_set(valid));
  for (std::size_t i = 0; i < world.size(); ++i) {
    if (!valid[i]) continue;
    out.push_back({world[i], view.image[i], view.confidence[i] * rho(s[i])});
  }
  return out;
}

/// Union over views in input order, pixels row-major within a view. Views
/// are processed in parallel; output order does not depend on `threads`.
inline WeightedColoredPointSet build_point_set(const std::vector<LiftedView>& views, double tau_c,
                                               const RobustChoice& choice, int threads = 1) {
  if (views.empty()) throw Error(ErrorCode::EmptyList, "no views to fuse");
  if (!(tau_c >= 0.0 && tau_c <= 1.0)) throw Error(ErrorCode::ValidationError, "tau_c must lie in [0,1]");
  if (choice.kind == RobustFunction::Kind::Exp && choice.sigma && !(*choice.sigma > 0.0))
    throw Error(ErrorCode::ValidationError, "Exp robust function needs sigma > 0");
  for (const auto& v : views) {
    v.validate();
    if (v.width() < 2 || v.height() < 2) throw Error(ErrorCode::GridTooSmall, "views must be at least 2x2");
  }

  std::vector<std::vector<WeightedColoredPoint>> per_view(views.size());
  parallel_for(views.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) per_view[i] = fuse_view(views[i], tau_c, choice);
  });

  WeightedColoredPointSet q;
  std::size_t total = 0;
  for (const auto& pv : per_view) total += pv.size();
  if (total == 0) throw Error(ErrorCode::EmptyResult, "no pixel in any view passes the confidence threshold");
  q.points.reserve(total);
  for (const auto& pv : per_view) q.points.insert(q.points.end(), pv.begin(), pv.end());
  for (const auto& v : views) q.source_centers.push_back(v.pose.translation());
  return q;
}

}  // namespace panolift
