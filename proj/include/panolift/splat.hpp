#pragma once

/// Normalized kernel-weighted accumulation of the point set onto the
/// panoramic canvas, the support field Z and the derived hole mask.
///
/// A point projected to (x, y) touches the pixels whose column/row lie
/// within `radius_px` of floor(x)/floor(y); kernel offsets are measured from
/// pixel centers (i + 0.5, j + 0.5). Columns wrap modulo W, rows do not.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "panolift/core.hpp"
#include "panolift/fusion.hpp"
#include "panolift/projection.hpp"

namespace panolift {

class SplatKernel {
 public:
  enum class Kind { Gaussian, Nearest };

  static SplatKernel gaussian(double sigma_px = 0.8, int radius_px = 2) {
    if (!(sigma_px > 0.0) || !std::isfinite(sigma_px)) throw Error(ErrorCode::ValidationError, "kernel sigma must be > 0");
    if (radius_px < 0) throw Error(ErrorCode::ValidationError, "kernel radius must be >= 0");
    return SplatKernel(Kind::Gaussian, sigma_px, radius_px);
  }
  static SplatKernel nearest() { return SplatKernel(Kind::Nearest, 0.0, 0); }

  Kind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  int radius() const { return radius_; }

  double operator()(double dx, double dy) const {
    if (kind_ == Kind::Nearest) return 1.0;
    return std::exp(-(dx * dx + dy * dy) * inv_two_sigma2_);
  }

 private:
  SplatKernel(Kind kind, double sigma, int radius)
      : kind_(kind), sigma_(sigma), radius_(radius), inv_two_sigma2_(sigma > 0 ? 1.0 / (2.0 * sigma * sigma) : 0.0) {}

  Kind kind_;
  double sigma_;
  int radius_;
  double inv_two_sigma2_;
};

struct PanoCanvas {
  CanvasSpec spec;
  Grid2<Rgb> color;       // Y
  Grid2<double> support;  // Z
  Mask mask;              // M, 1 = hole
  double tau = 0.0;

  double hole_fraction() const {
    return mask.empty() ? 0.0 : static_cast<double>(count_set(mask)) / static_cast<double>(mask.size());
  }
};

struct SplatParams {
  SplatKernel kernel = SplatKernel::gaussian();
  double epsilon = 1e-8;
  double tau = 1e-3;
  int threads = 1;
};

struct SplatResult {
  PanoCanvas canvas;
  std::size_t skipped = 0;  // points coinciding with the projection center
};

inline Mask hole_mask(const Grid2<double>& support, double tau) {
  Mask m(support.width(), support.height());
  for (std::size_t i = 0; i < support.size(); ++i) m[i] = support[i] < tau ? 1 : 0;
  return m;
}

namespace detail {

inline constexpr int kSplatBandRows = 32;

/// Calls fn(column, row, kernel_value) for every pixel a point at (x, y) touches.
template <typename Fn>
void for_each_footprint(const SplatKernel& k, const CanvasSpec& spec, double x, double y, int row_begin, int row_end,
                        Fn&& fn) {
  const int cx = static_cast<int>(std::floor(x));
  const int cy = static_cast<int>(std::floor(y));
  const int r = k.radius();
  for (int row = std::max(cy - r, row_begin); row <= std::min(cy + r, row_end - 1); ++row) {
    const double oy = row + 0.5 - y;
    for (int col = cx - r; col <= cx + r; ++col) {
      const double ox = col + 0.5 - x;
      int wc = col % spec.width;
      if (wc < 0) wc += spec.width;
      fn(wc, row, k(ox, oy));
    }
  }
}

}  // namespace detail

/// Y(q) = sum(w K c) / (sum(w K) + eps), Z(q) = sum(w K), M(q) = Z(q) < tau.
///
/// Points are binned into horizontal bands first; each band is reduced by
/// one worker in point-index order, so the result is bitwise identical for
/// any thread count.
inline SplatResult splat(const WeightedColoredPointSet& q, const ProjectionCenter& o, const CanvasSpec& spec,
                         const SplatParams& params) {
  spec.validate();
  if (!(params.tau > 0.0)) throw Error(ErrorCode::ValidationError, "tau must be > 0");
  if (!(params.epsilon > 0.0)) throw Error(ErrorCode::ValidationError, "epsilon must be > 0");
  for (const auto& p : q.points)
    if (!is_finite(p.position) || !is_finite(p.color) || !(p.weight >= 0.0) || !std::isfinite(p.weight))
      throw Error(ErrorCode::NonFiniteValue, "point set contains a non-finite point or negative weight");

  const std::size_t n = q.points.size();
  std::vector<CanvasPoint> projected(n);
  std::vector<std::uint8_t> ok(n, 0);
  parallel_for(n, params.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vec3 d = q.points[i].position - o.origin;
      if (!(norm(d) >= kDegenerateDistance)) continue;
      projected[i] = angles_to_canvas(spec, detail::angles_of(d));
      ok[i] = 1;
    }
  });

  const int band_rows = detail::kSplatBandRows;
  const int bands = (spec.height + band_rows - 1) / band_rows;
  const int r = params.kernel.radius();
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(bands));
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      ++skipped;
      continue;
    }
    const int cy = static_cast<int>(std::floor(projected[i].y));
    const int b0 = std::max(0, (cy - r) / band_rows);
    const int b1 = std::min(bands - 1, std::max(0, cy + r) / band_rows);
    for (int b = b0; b <= b1; ++b) bins[static_cast<std::size_t>(b)].push_back(static_cast<std::uint32_t>(i));
  }

  SplatResult result;
  PanoCanvas& canvas = result.canvas;
  canvas.spec = spec;
  canvas.tau = params.tau;
  canvas.color = Grid2<Rgb>(spec.width, spec.height);
  canvas.support = Grid2<double>(spec.width, spec.height);
  Grid2<Rgb>& numer = canvas.color;

  parallel_for(static_cast<std::size_t>(bands), params.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t band = b; band < e; ++band) {
      const int row_begin = static_cast<int>(band) * band_rows;
      const int row_end = std::min(spec.height, row_begin + band_rows);
      for (std::uint32_t idx : bins[band]) {
        const WeightedColoredPoint& p = q.points[idx];
        detail::for_each_footprint(params.kernel, spec, projected[idx].x, projected[idx].y, row_begin, row_end,
                                   [&](int col, int row, double k) {
                                     const double wk = p.weight * k;
                                     numer(col, row) += p.color * wk;
                                     canvas.support(col, row) += wk;
                                   });
      }
    }
  });

  for (std::size_t i = 0; i < numer.size(); ++i) numer[i] = numer[i] / (canvas.support[i] + params.epsilon);
  canvas.mask = hole_mask(canvas.support, params.tau);
  result.skipped = skipped;
  return result;
}

/// Histogram of Z over [min Z, max Z]; counts sum to W*H. Each entry is
/// (lower bin edge, count).
inline std::vector<std::pair<double, std::size_t>> support_histogram(const PanoCanvas& canvas, int bins) {
  if (bins < 1) throw Error(ErrorCode::ValidationError, "bins must be >= 1");
  std::vector<std::pair<double, std::size_t>> hist(static_cast<std::size_t>(bins));
  if (canvas.support.empty()) return hist;
  const auto [lo_it, hi_it] = std::minmax_element(canvas.support.begin(), canvas.support.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) hist[static_cast<std::size_t>(b)].first = lo + b * width;
  for (double z : canvas.support) {
    int b = width > 0.0 ? static_cast<int>((z - lo) / width) : 0;
    b = std::clamp(b, 0, bins - 1);
    ++hist[static_cast<std::size_t>(b)].second;
  }
  return hist;
}

}  // namespace panolift
