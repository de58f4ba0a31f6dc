#pragma once

/// End-to-end stitch: fuse lifted views, splat through the unified center,
/// complete holes and fuse the completion back into the observed canvas.

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "panolift/completion.hpp"
#include "panolift/fusion.hpp"
#include "panolift/io.hpp"
#include "panolift/projection.hpp"
#include "panolift/splat.hpp"

namespace panolift {

struct StageTimes {
  double fusion = 0.0;
  double splat = 0.0;
  double completion = 0.0;
};

struct StitchReport {
  std::size_t views_loaded = 0;
  std::size_t points_emitted = 0;
  std::size_t points_skipped = 0;
  double hole_fraction_before = 0.0;
  double hole_fraction_after = 0.0;
  bool completion_warning = false;
  double load_seconds = 0.0;
  StageTimes seconds;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["views_loaded"] = views_loaded;
    j["points_emitted"] = points_emitted;
    j["points_skipped"] = points_skipped;
    j["hole_fraction_before"] = hole_fraction_before;
    j["hole_fraction_after"] = hole_fraction_after;
    j["completion_warning"] = completion_warning;
    j["wall_time"] = {{"load", load_seconds},
                      {"fusion", seconds.fusion},
                      {"splat", seconds.splat},
                      {"completion", seconds.completion}};
    return j;
  }
};

struct StitchOptions {
  CanvasSpec canvas;
  SceneParams params;
  int threads = 1;
};

inline StitchOptions options_from_manifest(const SceneManifest& m, int threads = 1) {
  return {CanvasSpec{m.canvas_width, m.canvas_height}, m.params, threads};
}

inline RobustChoice robust_choice(const SceneParams& p) {
  if (p.rho_kind == "reciprocal") return RobustChoice::reciprocal();
  return RobustChoice{RobustFunction::Kind::Exp, p.rho_sigma};
}

inline SplatKernel splat_kernel(const SceneParams& p) {
  return p.kernel_kind == "nearest" ? SplatKernel::nearest() : SplatKernel::gaussian(p.kernel_sigma, p.kernel_radius);
}

/// nullopt for "none".
inline std::optional<CompletionOperator> completion_operator(const std::string& fill, int threads) {
  std::optional<CompletionOperator> op;
  if (fill == "none") return op;
  if (fill == "diffusion") op = CompletionOperator::diffusion();
  else if (fill == "pullpush") op = CompletionOperator::pull_push();
  else if (fill.rfind("external:", 0) == 0 && fill.size() > 9) op = CompletionOperator::external(fill.substr(9));
  else throw Error(ErrorCode::ValidationError, "unknown fill method '" + fill + "'");
  op->wrap_x = true;
  op->threads = threads;
  return op;
}

struct StitchResult {
  PanoCanvas canvas;      // raw splat: Y, Z, M
  Grid2<Rgb> panorama;    // Y*
  StitchReport report;
};

inline StitchResult stitch(const std::vector<LiftedView>& views, const StitchOptions& opt) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };
  opt.canvas.validate();
  opt.params.validate();

  StitchResult out;
  out.report.views_loaded = views.size();

  auto t0 = clock::now();
  const WeightedColoredPointSet q = build_point_set(views, opt.params.tau_c, robust_choice(opt.params), opt.threads);
  out.report.seconds.fusion = seconds_since(t0);

  t0 = clock::now();
  const ProjectionCenter center = projection_center(q.source_centers);
  SplatParams sp{splat_kernel(opt.params), opt.params.epsilon, opt.params.tau, opt.threads};
  SplatResult splatted = splat(q, center, opt.canvas, sp);
  out.report.seconds.splat = seconds_since(t0);
  out.report.points_emitted = q.points.size();
  out.report.points_skipped = splatted.skipped;
  out.canvas = std::move(splatted.canvas);
  out.report.hole_fraction_before = out.canvas.hole_fraction();

  t0 = clock::now();
  const auto op = completion_operator(opt.params.fill_method, opt.threads);
  if (op) {
    const CompletionResult filled = complete(*op, make_input(out.canvas.color, out.canvas.mask));
    out.panorama = fuse(out.canvas.color, filled.image, out.canvas.mask);
    out.report.completion_warning = filled.no_observed_pixels;
    out.report.hole_fraction_after = 0.0;
  } else {
    out.panorama = out.canvas.color;
    out.report.hole_fraction_after = out.report.hole_fraction_before;
  }
  out.report.seconds.completion = seconds_since(t0);
  return out;
}

/// Writes <prefix>_pano.ppm, _raw.ppm, _mask.pgm, _support.pfm and _report.json.
inline void write_stitch_outputs(const std::string& prefix, const StitchResult& r) {
  write_image(prefix + "_pano.ppm", r.panorama);
  write_image(prefix + "_raw.ppm", r.canvas.color);
  write_mask(prefix + "_mask.pgm", r.canvas.mask);
  write_pfm(prefix + "_support.pfm", r.canvas.support);
  detail::write_file(prefix + "_report.json", r.report.to_json().dump(2) + "\n");
}

}  // namespace panolift
