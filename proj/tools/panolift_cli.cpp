// panolift command-line driver.
//
//   panolift stitch <manifest.json> <out_prefix> [flags]
//   panolift analyze-homography (<h1> ... <h9> | --file F) --out <prefix>
//   panolift evaluate <a.ppm> <b.ppm> <a_mask.pgm> <b_mask.pgm>
//   panolift gen-synthetic <out_dir> [--seed --views --size --fov]
//
// Exit codes: 0 success, 2 input/validation error, 3 empty result.
// Diagnostics go to stderr as a single line "error: <code>: <message>".

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "panolift/panolift.hpp"

namespace {

using namespace panolift;

constexpr int kExitInput = 2;
constexpr int kExitEmpty = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyResult:
    case ErrorCode::EmptyOverlap:
    case ErrorCode::NoValidWindows:
      return kExitEmpty;
    default:
      return kExitInput;
  }
}

struct StitchFlags {
  std::string manifest;
  std::string prefix;
  std::optional<double> tau, tau_c, kernel_sigma;
  std::optional<int> kernel_radius, width, height;
  std::optional<std::string> fill;
  int threads = default_thread_count();
};

int run_stitch(const StitchFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Scene scene = load_scene(f.manifest);
  const double load_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  StitchOptions opt = options_from_manifest(scene.manifest, f.threads);
  if (f.tau) opt.params.tau = *f.tau;
  if (f.tau_c) opt.params.tau_c = *f.tau_c;
  if (f.kernel_sigma) opt.params.kernel_sigma = *f.kernel_sigma;
  if (f.kernel_radius) opt.params.kernel_radius = *f.kernel_radius;
  if (f.fill) opt.params.fill_method = *f.fill;
  if (f.width) opt.canvas.width = *f.width;
  if (f.height) opt.canvas.height = *f.height;

  StitchResult r = stitch(scene.views, opt);
  r.report.load_seconds = load_s;
  write_stitch_outputs(f.prefix, r);
  if (r.report.completion_warning) std::cerr << "warning: completion had no observed pixels; filled with mid-gray\n";
  std::cout << r.report.to_json().dump(2) << "\n";
  return 0;
}

std::string format_matrix(const Mat3& m) {
  std::ostringstream out;
  out << std::setprecision(12);
  for (int i = 0; i < 3; ++i) out << "  " << m(i, 0) << ' ' << m(i, 1) << ' ' << m(i, 2) << '\n';
  return out.str();
}

int run_analyze(const std::vector<double>& values, const std::string& file, const std::string& prefix, int width,
                int height, int threads) {
  std::vector<double> h = values;
  if (!file.empty()) {
    std::istringstream in(detail::read_file(file));
    h.clear();
    std::string tok;
    while (in >> tok) {
      try {
        h.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad homography value '" + tok + "'");
      }
    }
  }
  if (h.size() != 9) throw Error(ErrorCode::ParseError, "expected 9 homography values, got " + std::to_string(h.size()));

  std::array<double, 9> a{};
  std::copy(h.begin(), h.end(), a.begin());
  const NormalizedHomography n = normalize_rotation(Homography(Mat3::from_rows(a)));
  const AffineProjectiveFactors f = factor_affine_projective(n);
  const Grid2<double> field = distortion_field(n, width, height, threads);
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());

  std::ostringstream report;
  report << std::setprecision(12);
  report << "beta: " << n.beta << "\n"
         << "c: " << n.c << "\n"
         << "s_A: " << n.s_a << "\n"
         << "H_rot:\n" << format_matrix(n.h_rot)
         << "H_A:\n" << format_matrix(f.affine)
         << "H_P:\n" << format_matrix(f.projective)
         << "field: " << width << "x" << height << " min " << *lo << " max " << *hi << "\n";
  write_pfm(prefix + "_detj.pfm", field);
  detail::write_file(prefix + "_report.txt", report.str());
  std::cout << report.str();
  return 0;
}

int run_evaluate(const std::string& a_path, const std::string& b_path, const std::string& ma_path,
                 const std::string& mb_path, int threads) {
  const Grid2<Rgb> a = read_image(a_path);
  const Grid2<Rgb> b = read_image(b_path);
  const Mask overlap = overlap_mask(read_mask(ma_path), read_mask(mb_path));
  require_same_shape(a, b, "evaluate images");
  require_same_shape(a, overlap, "evaluate image/mask");
  const double p = psnr(a, b, overlap);
  const double s = ssim(a, b, overlap, threads);
  std::cout << std::setprecision(10);
  std::cout << "psnr: ";
  if (std::isinf(p)) std::cout << "inf";
  else std::cout << p;
  std::cout << "\nssim: " << s << "\noverlap_pixels: " << count_set(overlap) << "\n";
  return 0;
}

int run_gen_synthetic(const std::string& dir, const SyntheticConfig& cfg, int threads) {
  const SyntheticScene scene = generate_synthetic(cfg, threads);
  const fs::path manifest = write_synthetic(dir, scene, cfg);
  std::cout << manifest.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panolift: lifted-point panorama stitching tools"};
  app.require_subcommand(1);

  StitchFlags sf;
  auto* stitch_cmd = app.add_subcommand("stitch", "Fuse, splat and complete a scene manifest");
  stitch_cmd->add_option("manifest", sf.manifest, "Scene manifest (JSON)")->required();
  stitch_cmd->add_option("out_prefix", sf.prefix, "Output prefix")->required();
  stitch_cmd->add_option("--tau", sf.tau, "Hole threshold on accumulated support");
  stitch_cmd->add_option("--tau-c", sf.tau_c, "Confidence threshold");
  stitch_cmd->add_option("--kernel-sigma", sf.kernel_sigma, "Gaussian splat sigma (px)");
  stitch_cmd->add_option("--kernel-radius", sf.kernel_radius, "Splat truncation radius (px)");
  stitch_cmd->add_option("--fill", sf.fill, "diffusion|pullpush|none|external:<cmd>");
  stitch_cmd->add_option("--width", sf.width, "Canvas width");
  stitch_cmd->add_option("--height", sf.height, "Canvas height");
  stitch_cmd->add_option("--threads", sf.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::vector<double> hvals;
  std::string hfile, hprefix = "homography";
  int hw = 512, hh = 512, hthreads = default_thread_count();
  auto* analyze_cmd = app.add_subcommand("analyze-homography", "Distortion analysis of a 3x3 homography");
  analyze_cmd->add_option("values", hvals, "Nine row-major entries")->expected(9);
  analyze_cmd->add_option("--file", hfile, "File with nine whitespace-separated entries");
  analyze_cmd->add_option("--out", hprefix, "Output prefix");
  analyze_cmd->add_option("--width", hw, "Heatmap width")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--height", hh, "Heatmap height")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--threads", hthreads, "Worker threads")->check(CLI::PositiveNumber);

  std::string ea, eb, ema, emb;
  int ethreads = default_thread_count();
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM over the overlap of two images");
  eval_cmd->add_option("image_a", ea)->required();
  eval_cmd->add_option("image_b", eb)->required();
  eval_cmd->add_option("mask_a", ema)->required();
  eval_cmd->add_option("mask_b", emb)->required();
  eval_cmd->add_option("--threads", ethreads, "Worker threads")->check(CLI::PositiveNumber);

  std::string gdir;
  SyntheticConfig gcfg;
  int gthreads = default_thread_count();
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write an analytic cylindrical-room test scene");
  gen_cmd->add_option("out_dir", gdir)->required();
  gen_cmd->add_option("--seed", gcfg.seed, "Texture seed");
  gen_cmd->add_option("--views", gcfg.views, "Number of views")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--size", gcfg.image_size, "Square image size (px)");
  gen_cmd->add_option("--fov", gcfg.fov_deg, "Horizontal field of view (degrees)");
  gen_cmd->add_option("--width", gcfg.canvas_width, "Canvas width for the manifest and truth panorama");
  gen_cmd->add_option("--height", gcfg.canvas_height, "Canvas height for the manifest and truth panorama");
  gen_cmd->add_option("--threads", gthreads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*stitch_cmd) return run_stitch(sf);
    if (*analyze_cmd) {
      if (hvals.empty() == hfile.empty())
        throw Error(ErrorCode::ParseError, "give either nine values or --file");
      return run_analyze(hvals, hfile, hprefix, hw, hh, hthreads);
    }
    if (*eval_cmd) return run_evaluate(ea, eb, ema, emb, ethreads);
    if (*gen_cmd) return run_gen_synthetic(gdir, gcfg, gthreads);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
