#pragma once

/// PSNR and SSIM restricted to the overlap of two warped images.
///
/// PSNR uses peak 1.0 over overlap pixels x 3 channels. SSIM runs on luma
/// with uniform 8x8 windows (stride 1) that lie fully inside the overlap and
/// the usual constants C1 = 0.01^2, C2 = 0.03^2.

#include <cmath>
#include <limits>
#include <vector>

#include "panolift/core.hpp"

namespace panolift {

inline constexpr int kSsimWindow = 8;

/// 1 where both images are observed (both hole masks are 0).
inline Mask overlap_mask(const Mask& holes_a, const Mask& holes_b) {
  require_same_shape(holes_a, holes_b, "overlap_mask");
  Mask out(holes_a.width(), holes_a.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (!holes_a[i] && !holes_b[i]) ? 1 : 0;
  return out;
}

/// Returns +inf for identical images.
inline double psnr(const Grid2<Rgb>& a, const Grid2<Rgb>& b, const Mask& overlap) {
  require_same_shape(a, b, "psnr");
  require_same_shape(a, overlap, "psnr");
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!overlap[i]) continue;
    const Rgb d = a[i] - b[i];
    sse += d.r * d.r + d.g * d.g + d.b * d.b;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyOverlap, "overlap region is empty");
  const double mse = sse / (3.0 * static_cast<double>(n));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

/// Summed-area table with a zero first row/column.
class Integral {
 public:
  template <typename F>
  Integral(int w, int h, F&& value) : w_(w + 1), sums_(static_cast<std::size_t>(w + 1) * (h + 1), 0.0) {
    for (int v = 0; v < h; ++v) {
      double row = 0.0;
      for (int u = 0; u < w; ++u) {
        row += value(u, v);
        at(u + 1, v + 1) = at(u + 1, v) + row;
      }
    }
  }

  /// Sum over [u0, u0 + n) x [v0, v0 + n).
  double box(int u0, int v0, int n) const {
    return at(u0 + n, v0 + n) - at(u0, v0 + n) - at(u0 + n, v0) + at(u0, v0);
  }

 private:
  double& at(int u, int v) { return sums_[static_cast<std::size_t>(v) * w_ + u]; }
  double at(int u, int v) const { return sums_[static_cast<std::size_t>(v) * w_ + u]; }
  std::size_t w_;
  std::vector<double> sums_;
};

}  // namespace detail

inline double ssim(const Grid2<Rgb>& a, const Grid2<Rgb>& b, const Mask& overlap, int threads = 1) {
  require_same_shape(a, b, "ssim");
  require_same_shape(a, overlap, "ssim");
  if (count_set(overlap) == 0) throw Error(ErrorCode::EmptyOverlap, "overlap region is empty");
  const int w = a.width(), h = a.height(), n = kSsimWindow;
  if (w < n || h < n) throw Error(ErrorCode::NoValidWindows, "image smaller than the SSIM window");

  Grid2<double> la(w, h), lb(w, h);
  for (std::size_t i = 0; i < a.size(); ++i) {
    la[i] = a[i].luma();
    lb[i] = b[i].luma();
  }
  const detail::Integral cnt(w, h, [&](int u, int v) { return overlap(u, v) ? 1.0 : 0.0; });

  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double inv = 1.0 / (n * n);
  const int rows = h - n + 1, cols = w - n + 1;
  std::vector<double> row_sum(static_cast<std::size_t>(rows), 0.0);
  std::vector<std::size_t> row_cnt(static_cast<std::size_t>(rows), 0);
  parallel_for(static_cast<std::size_t>(rows), threads, [&](std::size_t b0, std::size_t e0) {
    for (std::size_t vv = b0; vv < e0; ++vv) {
      const int v0 = static_cast<int>(vv);
      for (int u0 = 0; u0 < cols; ++u0) {
        if (cnt.box(u0, v0, n) != n * n) continue;
        double sa = 0, sb = 0;
        for (int v = v0; v < v0 + n; ++v)
          for (int u = u0; u < u0 + n; ++u) {
            sa += la(u, v);
            sb += lb(u, v);
          }
        const double ma = sa * inv, mb = sb * inv;
        // Centered second moments: identical inputs give va == vb == cov exactly.
        double saa = 0, sbb = 0, sab = 0;
        for (int v = v0; v < v0 + n; ++v)
          for (int u = u0; u < u0 + n; ++u) {
            const double x = la(u, v) - ma, y = lb(u, v) - mb;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
          }
        const double va = saa * inv, vb = sbb * inv, cov = sab * inv;
        row_sum[vv] += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++row_cnt[vv];
      }
    }
  });
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t i = 0; i < row_sum.size(); ++i) {
    total += row_sum[i];
    windows += row_cnt[i];
  }
  if (windows == 0) throw Error(ErrorCode::NoValidWindows, "no 8x8 window lies fully inside the overlap");
  return total / static_cast<double>(windows);
}

}  // namespace panolift
