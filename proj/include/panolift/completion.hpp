#pragma once

/// Canvas-domain hole completion: masked input construction, pluggable
/// completion operators, observed/hole fusion, the self-supervised joint
/// mask machinery and its L1 losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "panolift/core.hpp"
#include "panolift/io.hpp"

namespace panolift {

struct CompletionInput {
  Grid2<Rgb> masked_canvas;  // Y_in, zero on holes
  Mask mask;                 // 1 = hole
};

struct CompletionOperator {
  enum class Method { Diffusion, PullPush, External };

  Method method = Method::Diffusion;
  int max_iters = 5000;
  double tol = 1e-5;
  /// Treat column 0 and column W-1 as neighbours (360 degree canvases).
  bool wrap_x = false;
  /// Shell command for External; runs inside the exchange directory.
  std::string command;
  /// Exchange directory for External; a fresh temp directory when empty.
  fs::path work_dir;
  int threads = 1;

  static CompletionOperator diffusion(int max_iters = 5000, double tol = 1e-5) {
    CompletionOperator op;
    op.max_iters = max_iters;
    op.tol = tol;
    return op;
  }
  static CompletionOperator pull_push() {
    CompletionOperator op;
    op.method = Method::PullPush;
    return op;
  }
  static CompletionOperator external(std::string command) {
    CompletionOperator op;
    op.method = Method::External;
    op.command = std::move(command);
    return op;
  }

  void validate() const {
    if (max_iters < 1) throw Error(ErrorCode::ValidationError, "max_iters must be >= 1");
    if (!(tol > 0.0)) throw Error(ErrorCode::ValidationError, "tol must be > 0");
    if (method == Method::External && command.empty()) throw Error(ErrorCode::ValidationError, "external operator needs a command");
  }
};

struct CompletionResult {
  Grid2<Rgb> image;
  /// Set when the input had no observed pixel and a flat mid-gray canvas was returned.
  bool no_observed_pixels = false;
  int iterations = 0;
};

inline CompletionInput make_input(const Grid2<Rgb>& y, const Mask& m) {
  require_same_shape(y, m, "make_input");
  CompletionInput in{y, m};
  for (std::size_t i = 0; i < y.size(); ++i)
    if (m[i]) in.masked_canvas[i] = Rgb{};
  return in;
}

/// Y* = (1 - M) Y + M Yhat; observed pixels are copied bitwise from Y.
inline Grid2<Rgb> fuse(const Grid2<Rgb>& y, const Grid2<Rgb>& yhat, const Mask& m) {
  require_same_shape(y, yhat, "fuse");
  require_same_shape(y, m, "fuse");
  Grid2<Rgb> out = y;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (m[i]) out[i] = yhat[i];
  return out;
}

inline Mask joint_mask(const Mask& m, const Mask& r) {
  require_same_shape(m, r, "joint_mask");
  Mask out(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] || r[i]) ? 1 : 0;
  return out;
}

namespace detail {

inline double masked_l1(const Grid2<Rgb>& a, const Grid2<Rgb>& b, const Mask& m, bool select_set) {
  require_same_shape(a, b, "loss");
  require_same_shape(a, m, "loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((m[i] != 0) != select_set) continue;
    const Rgb d = a[i] - b[i];
    sum += std::abs(d.r) + std::abs(d.g) + std::abs(d.b);
  }
  return sum;
}

}  // namespace detail

/// Sum over R of channel-wise |Ytilde - Y|.
inline double loss_rec(const Grid2<Rgb>& ytilde, const Grid2<Rgb>& y, const Mask& r) {
  return detail::masked_l1(ytilde, y, r, true);
}

/// Sum over the observed region (M = 0) of channel-wise |Ytilde - Y|.
inline double loss_obs(const Grid2<Rgb>& ytilde, const Grid2<Rgb>& y, const Mask& m) {
  return detail::masked_l1(ytilde, y, m, false);
}

inline double loss_total(double l_rec, double l_obs, double lambda = 1.0) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ValidationError, "lambda must be >= 0");
  return l_rec + lambda * l_obs;
}

// ---------------------------------------------------------------------------
// Occlusion sampler
// ---------------------------------------------------------------------------

/// Random axis-aligned rectangles restricted to the observed region, added
/// until `coverage` of the observed pixels is occluded. Side lengths are
/// uniform in [4, max(4, W/4)]. The last rectangle is filled row-major only
/// up to the target count.
struct OcclusionSampler {
  std::uint64_t seed = 0;
  double coverage = 0.2;
  int max_rects = 100000;
};

inline Mask sample_occlusion(const OcclusionSampler& sampler, const Mask& m) {
  if (!(sampler.coverage > 0.0 && sampler.coverage < 1.0))
    throw Error(ErrorCode::ValidationError, "occlusion coverage must lie in (0,1)");
  const std::size_t observed = m.size() - count_set(m);
  if (observed == 0) throw Error(ErrorCode::NoObservedPixels, "no observed pixels to occlude");
  const auto target = static_cast<std::size_t>(std::llround(sampler.coverage * static_cast<double>(observed)));

  Mask r(m.width(), m.height());
  std::mt19937_64 rng(sampler.seed);
  auto uniform_int = [&rng](int lo, int hi) {  // inclusive, libstdc++-independent
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(rng() % span);
  };
  const int max_side = std::max(4, m.width() / 4);
  std::size_t count = 0;
  for (int k = 0; k < sampler.max_rects && count < target; ++k) {
    const int rw = std::min(m.width(), uniform_int(4, max_side));
    const int rh = std::min(m.height(), uniform_int(4, max_side));
    const int x0 = uniform_int(0, m.width() - rw);
    const int y0 = uniform_int(0, m.height() - rh);
    for (int v = y0; v < y0 + rh && count < target; ++v)
      for (int u = x0; u < x0 + rw && count < target; ++u)
        if (!m(u, v) && !r(u, v)) {
          r(u, v) = 1;
          ++count;
        }
  }
  for (std::size_t i = 0; i < r.size() && count < target; ++i)
    if (!m[i] && !r[i]) {
      r[i] = 1;
      ++count;
    }
  return r;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

namespace detail {

struct Level {
  Grid2<Rgb> values;
  Mask fixed;  // 1 = known value (boundary condition)
};

/// 2x averaging of known pixels; a coarse pixel is known if any child is.
inline Level downsample(const Level& fine) {
  const int w = (fine.values.width() + 1) / 2, h = (fine.values.height() + 1) / 2;
  Level coarse{Grid2<Rgb>(w, h), Mask(w, h)};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      Rgb sum{};
      int n = 0;
      for (int dv = 0; dv < 2; ++dv)
        for (int du = 0; du < 2; ++du) {
          const int fu = 2 * u + du, fv = 2 * v + dv;
          if (fine.values.contains(fu, fv) && fine.fixed(fu, fv)) {
            sum += fine.values(fu, fv);
            ++n;
          }
        }
      if (n > 0) {
        coarse.values(u, v) = sum / n;
        coarse.fixed(u, v) = 1;
      }
    }
  return coarse;
}

/// Red-black Gauss-Seidel sweeps over free pixels (4-neighbour mean) until
/// the largest per-channel update drops below tol. Each half-sweep only reads
/// the other colour, so rows can be split across threads without changing
/// the result. Returns the number of sweeps.
inline int relax(Level& level, int max_iters, double tol, bool wrap_x, int threads) {
  Grid2<Rgb>& cur = level.values;
  const int w = cur.width(), h = cur.height();
  const bool wraps = wrap_x && w >= 3;
  std::vector<double> row_max(static_cast<std::size_t>(h));
  int it = 0;
  while (it < max_iters) {
    ++it;
    double sweep_max = 0.0;
    for (int color = 0; color < 2; ++color) {
      parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t vv = b; vv < e; ++vv) {
          const int v = static_cast<int>(vv);
          double m = 0.0;
          for (int u = (v + color) & 1; u < w; u += 2) {
            if (level.fixed(u, v)) continue;
            Rgb sum{};
            int n = 0;
            if (u > 0) sum += cur(u - 1, v), ++n;
            else if (wraps) sum += cur(w - 1, v), ++n;
            if (u + 1 < w) sum += cur(u + 1, v), ++n;
            else if (wraps) sum += cur(0, v), ++n;
            if (v > 0) sum += cur(u, v - 1), ++n;
            if (v + 1 < h) sum += cur(u, v + 1), ++n;
            if (n == 0) continue;
            const Rgb nv = sum / n;
            const Rgb d = nv - cur(u, v);
            m = std::max({m, std::abs(d.r), std::abs(d.g), std::abs(d.b)});
            cur(u, v) = nv;
          }
          row_max[vv] = m;
        }
      });
      sweep_max = std::max(sweep_max, *std::max_element(row_max.begin(), row_max.end()));
    }
    if (sweep_max < tol) break;
  }
  return it;
}

inline Rgb mean_of_fixed(const Level& level) {
  Rgb sum{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < level.values.size(); ++i)
    if (level.fixed[i]) {
      sum += level.values[i];
      ++n;
    }
  return n ? sum / static_cast<double>(n) : Rgb{0.5, 0.5, 0.5};
}

/// Coarse-to-fine relaxation: each level is initialised from its parent so the
/// finest solve starts near the harmonic solution.
inline CompletionResult diffuse(const CompletionInput& in, const CompletionOperator& op) {
  std::vector<Level> pyramid;
  pyramid.push_back({in.masked_canvas, Mask(in.mask.width(), in.mask.height())});
  for (std::size_t i = 0; i < in.mask.size(); ++i) pyramid[0].fixed[i] = in.mask[i] ? 0 : 1;
  while (pyramid.back().values.width() > 16 && pyramid.back().values.height() > 16)
    pyramid.push_back(downsample(pyramid.back()));

  Level& top = pyramid.back();
  const Rgb mean = mean_of_fixed(top);
  for (std::size_t i = 0; i < top.values.size(); ++i)
    if (!top.fixed[i]) top.values[i] = mean;

  int iterations = 0;
  for (std::size_t l = pyramid.size(); l-- > 0;) {
    Level& level = pyramid[l];
    if (l + 1 < pyramid.size()) {
      const Level& parent = pyramid[l + 1];
      for (int v = 0; v < level.values.height(); ++v)
        for (int u = 0; u < level.values.width(); ++u)
          if (!level.fixed(u, v)) level.values(u, v) = parent.values(u / 2, v / 2);
    }
    iterations = relax(level, op.max_iters, op.tol, op.wrap_x, op.threads);
  }
  return {std::move(pyramid[0].values), false, iterations};
}

/// Pull: support-weighted 2x averages until a level has no hole.
/// Push: fill each level's holes by bilinear interpolation of the level above.
inline CompletionResult pull_push(const CompletionInput& in) {
  std::vector<Level> pyramid;
  pyramid.push_back({in.masked_canvas, Mask(in.mask.width(), in.mask.height())});
  for (std::size_t i = 0; i < in.mask.size(); ++i) pyramid[0].fixed[i] = in.mask[i] ? 0 : 1;
  std::vector<Grid2<double>> support;
  support.emplace_back(in.mask.width(), in.mask.height());
  for (std::size_t i = 0; i < in.mask.size(); ++i) support[0][i] = in.mask[i] ? 0.0 : 1.0;

  auto has_hole = [](const Level& l) { return std::any_of(l.fixed.begin(), l.fixed.end(), [](auto f) { return !f; }); };
  while (has_hole(pyramid.back()) && (pyramid.back().values.width() > 1 || pyramid.back().values.height() > 1)) {
    const Level& fine = pyramid.back();
    const Grid2<double>& fs = support.back();
    const int w = (fine.values.width() + 1) / 2, h = (fine.values.height() + 1) / 2;
    Level coarse{Grid2<Rgb>(w, h), Mask(w, h)};
    Grid2<double> cs(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        Rgb sum{};
        double wsum = 0.0;
        for (int dv = 0; dv < 2; ++dv)
          for (int du = 0; du < 2; ++du) {
            const int fu = 2 * u + du, fv = 2 * v + dv;
            if (!fine.values.contains(fu, fv) || !fine.fixed(fu, fv)) continue;
            sum += fine.values(fu, fv) * fs(fu, fv);
            wsum += fs(fu, fv);
          }
        if (wsum > 0.0) {
          coarse.values(u, v) = sum / wsum;
          coarse.fixed(u, v) = 1;
          cs(u, v) = wsum;
        }
      }
    pyramid.push_back(std::move(coarse));
    support.push_back(std::move(cs));
  }

  for (std::size_t l = pyramid.size() - 1; l-- > 0;) {
    Level& level = pyramid[l];
    const Grid2<Rgb>& parent = pyramid[l + 1].values;
    const int pw = parent.width(), ph = parent.height();
    for (int v = 0; v < level.values.height(); ++v)
      for (int u = 0; u < level.values.width(); ++u) {
        if (level.fixed(u, v)) continue;
        // Parent pixel p is centered at continuous fine coordinate 2p + 1.
        const double px = std::clamp((u - 0.5) / 2.0, 0.0, pw - 1.0);
        const double py = std::clamp((v - 0.5) / 2.0, 0.0, ph - 1.0);
        const int x0 = static_cast<int>(px), y0 = static_cast<int>(py);
        const int x1 = std::min(x0 + 1, pw - 1), y1 = std::min(y0 + 1, ph - 1);
        const double fx = px - x0, fy = py - y0;
        level.values(u, v) = (parent(x0, y0) * (1 - fx) + parent(x1, y0) * fx) * (1 - fy) +
                             (parent(x0, y1) * (1 - fx) + parent(x1, y1) * fx) * fy;
      }
  }
  return {std::move(pyramid[0].values), false, static_cast<int>(pyramid.size())};
}

inline CompletionResult run_external(const CompletionInput& in, const CompletionOperator& op) {
  fs::path dir = op.work_dir;
  bool owned = false;
  if (dir.empty()) {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("panolift-ext-" + std::to_string(rd()) + std::to_string(rd()));
    owned = true;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ExternalFailed, "cannot create exchange directory '" + dir.string() + "'");

  write_image(dir / "input.ppm", in.masked_canvas);
  write_mask(dir / "mask.pgm", in.mask);
  fs::remove(dir / "output.ppm", ec);

  std::string quoted = dir.string();
  std::string escaped = "'";
  for (char c : quoted) escaped += (c == '\'') ? std::string("'\\''") : std::string(1, c);
  escaped += "'";
  const std::string cmd = "cd " + escaped + " && " + op.command;
  const int rc = std::system(cmd.c_str());
  auto cleanup = [&] {
    if (owned) fs::remove_all(dir, ec);
  };
  if (rc != 0) {
    cleanup();
    throw Error(ErrorCode::ExternalFailed, "external command exited with status " + std::to_string(rc));
  }
  Grid2<Rgb> out;
  try {
    out = read_image(dir / "output.ppm");
  } catch (const Error& e) {
    cleanup();
    throw Error(ErrorCode::ExternalFailed, std::string("unreadable external output: ") + e.what());
  }
  cleanup();
  if (!out.same_shape(in.masked_canvas)) throw Error(ErrorCode::ExternalFailed, "external output has the wrong size");
  return {std::move(out), false, 0};
}

}  // namespace detail

/// Runs the completion operator. Inputs without any observed pixel yield a
/// flat (0.5, 0.5, 0.5) canvas with `no_observed_pixels` set.
inline CompletionResult complete(const CompletionOperator& op, const CompletionInput& in) {
  op.validate();
  require_same_shape(in.masked_canvas, in.mask, "complete");
  if (op.method == CompletionOperator::Method::External) return detail::run_external(in, op);

  const std::size_t holes = count_set(in.mask);
  if (holes == 0) return {in.masked_canvas, false, 0};
  if (holes == in.mask.size())
    return {Grid2<Rgb>(in.mask.width(), in.mask.height(), Rgb{0.5, 0.5, 0.5}), true, 0};
  return op.method == CompletionOperator::Method::Diffusion ? detail::diffuse(in, op) : detail::pull_push(in);
}

}  // namespace panolift
