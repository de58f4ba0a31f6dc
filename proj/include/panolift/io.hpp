#pragma once

/// Readers and writers for everything that crosses the process boundary:
/// lifted point maps (LPM), pose text files, 8-bit PPM/PGM, 32-bit PFM
/// and the JSON scene manifest.
///
/// LPM layout (all little-endian):
///   "LPM1" | u32 width | u32 height | u32 reserved (0)
///   width*height * (x, y, z) f32, row-major
///   width*height * confidence f32, row-major
///
/// Masks are P5 PGM with 0 = observed, 255 = hole. PFM follows the usual
/// convention of bottom-to-top scanlines with a negative (little-endian) scale.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "panolift/core.hpp"

namespace panolift {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Byte helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to '" + path.string() + "'");
}

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  v = byteswap_if_big(v);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return byteswap_if_big(v);
}

/// Cursor over a netpbm-style header: whitespace separated tokens with
/// '#' comments, terminated by exactly one whitespace byte.
class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (start == pos_) throw Error(ErrorCode::TruncatedFile, "header ended early");
    return std::string(bytes_.substr(start, pos_ - start));
  }

  int positive_int() {
    const std::string t = token();
    int v = 0;
    try {
      std::size_t used = 0;
      v = std::stoi(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw Error(ErrorCode::UnsupportedFormat, "bad header integer '" + t + "'");
    }
    if (v <= 0) throw Error(ErrorCode::UnsupportedFormat, "non-positive header value " + t);
    return v;
  }

  /// Consumes the single whitespace byte that separates header and payload.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_]))
      throw Error(ErrorCode::TruncatedFile, "missing header terminator");
    return pos_ + 1;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\v' || c == '\f'; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline void check_payload(std::string_view bytes, std::size_t offset, std::size_t expected) {
  if (bytes.size() < offset + expected)
    throw Error(ErrorCode::TruncatedFile, "payload has " + std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                                              " bytes, expected " + std::to_string(expected));
  if (bytes.size() > offset + expected) throw Error(ErrorCode::TrailingBytes, "unexpected bytes after payload");
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LPM
// ---------------------------------------------------------------------------

struct PointMap {
  Grid2<Vec3> points;
  Grid2<double> confidence;
};

inline std::string encode_lpm(const Grid2<Vec3>& points, const Grid2<double>& confidence) {
  require_same_shape(points, confidence, "LPM points/confidence");
  std::string out;
  out.reserve(16 + points.size() * 16);
  out.append("LPM1", 4);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.width()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.height()));
  detail::put_le<std::uint32_t>(out, 0);
  for (const Vec3& p : points) {
    detail::put_le<float>(out, static_cast<float>(p.x));
    detail::put_le<float>(out, static_cast<float>(p.y));
    detail::put_le<float>(out, static_cast<float>(p.z));
  }
  for (double c : confidence) detail::put_le<float>(out, static_cast<float>(c));
  return out;
}

inline PointMap decode_lpm(std::string_view bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "LPM shorter than its magic");
  if (bytes.substr(0, 4) != "LPM1") throw Error(ErrorCode::BadMagic, "not an LPM1 file");
  if (bytes.size() < 16) throw Error(ErrorCode::TruncatedFile, "LPM header truncated");
  const auto w = detail::get_le<std::uint32_t>(bytes, 4);
  const auto h = detail::get_le<std::uint32_t>(bytes, 8);
  const auto reserved = detail::get_le<std::uint32_t>(bytes, 12);
  if (reserved != 0) throw Error(ErrorCode::UnsupportedFormat, "LPM reserved field is not zero");
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw Error(ErrorCode::UnsupportedFormat, "LPM dimensions out of range");
  const std::size_t n = std::size_t{w} * h;
  detail::check_payload(bytes, 16, n * 16);

  PointMap map{Grid2<Vec3>(static_cast<int>(w), static_cast<int>(h)),
               Grid2<double>(static_cast<int>(w), static_cast<int>(h))};
  std::size_t off = 16;
  for (std::size_t i = 0; i < n; ++i, off += 12) {
    const Vec3 p{detail::get_le<float>(bytes, off), detail::get_le<float>(bytes, off + 4),
                 detail::get_le<float>(bytes, off + 8)};
    if (!is_finite(p)) throw Error(ErrorCode::NonFiniteValue, "non-finite point at index " + std::to_string(i));
    map.points[i] = p;
  }
  for (std::size_t i = 0; i < n; ++i, off += 4) {
    const double c = detail::get_le<float>(bytes, off);
    if (!std::isfinite(c)) throw Error(ErrorCode::NonFiniteValue, "non-finite confidence at index " + std::to_string(i));
    if (c < 0.0 || c > 1.0)
      throw Error(ErrorCode::ConfidenceOutOfRange, "confidence " + std::to_string(c) + " at index " + std::to_string(i));
    map.confidence[i] = c;
  }
  return map;
}

inline PointMap read_lpm(const fs::path& path) { return decode_lpm(detail::read_file(path)); }

inline void write_lpm(const fs::path& path, const Grid2<Vec3>& points, const Grid2<double>& confidence) {
  detail::write_file(path, encode_lpm(points, confidence));
}

// ---------------------------------------------------------------------------
// Pose text
// ---------------------------------------------------------------------------

/// Parses 12 whitespace-separated reals, row-major [R | t].
inline RigidTransform parse_pose(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::array<double, 12> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::string tok;
    if (!(in >> tok)) throw Error(ErrorCode::ParseError, "pose has " + std::to_string(i) + " values, expected 12");
    try {
      std::size_t used = 0;
      v[i] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad pose value '" + tok + "'");
    }
    if (!std::isfinite(v[i])) throw Error(ErrorCode::ParseError, "non-finite pose value");
  }
  std::string extra;
  if (in >> extra) throw Error(ErrorCode::ParseError, "pose has more than 12 values");
  const Mat3 r = Mat3::from_rows({v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]});
  return RigidTransform(r, Vec3{v[3], v[7], v[11]}, 1e-6);
}

inline RigidTransform read_pose(const fs::path& path) { return parse_pose(detail::read_file(path)); }

inline std::string format_pose(const RigidTransform& t) {
  std::ostringstream out;
  out << std::setprecision(17);
  const Mat3& r = t.rotation();
  const double tr[3] = {t.translation().x, t.translation().y, t.translation().z};
  for (int i = 0; i < 3; ++i) out << r(i, 0) << ' ' << r(i, 1) << ' ' << r(i, 2) << ' ' << tr[i] << '\n';
  return out.str();
}

inline void write_pose(const fs::path& path, const RigidTransform& t) { detail::write_file(path, format_pose(t)); }

// ---------------------------------------------------------------------------
// PPM / PGM
// ---------------------------------------------------------------------------

inline std::string encode_ppm(const Grid2<Rgb>& image) {
  std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size() * 3);
  for (const Rgb& c : image) {
    out.push_back(static_cast<char>(detail::to_byte(c.r)));
    out.push_back(static_cast<char>(detail::to_byte(c.g)));
    out.push_back(static_cast<char>(detail::to_byte(c.b)));
  }
  return out;
}

inline Grid2<Rgb> decode_ppm(std::string_view bytes) {
  detail::HeaderReader hdr(bytes);
  if (hdr.token() != "P6") throw Error(ErrorCode::UnsupportedFormat, "only binary P6 PPM is supported");
  const int w = hdr.positive_int();
  const int h = hdr.positive_int();
  if (hdr.positive_int() != 255) throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PPM (maxval 255) is supported");
  const std::size_t off = hdr.payload_offset();
  Grid2<Rgb> image(w, h);
  detail::check_payload(bytes, off, image.size() * 3);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  for (std::size_t i = 0; i < image.size(); ++i, p += 3) image[i] = Rgb{p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
  return image;
}

inline Grid2<Rgb> read_image(const fs::path& path) { return decode_ppm(detail::read_file(path)); }
inline void write_image(const fs::path& path, const Grid2<Rgb>& image) { detail::write_file(path, encode_ppm(image)); }

inline std::string encode_pgm_mask(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  for (std::uint8_t m : mask) out.push_back(static_cast<char>(m ? 255 : 0));
  return out;
}

/// Any non-zero sample is read as a hole.
inline Mask decode_pgm_mask(std::string_view bytes) {
  detail::HeaderReader hdr(bytes);
  if (hdr.token() != "P5") throw Error(ErrorCode::UnsupportedFormat, "only binary P5 PGM is supported for masks");
  const int w = hdr.positive_int();
  const int h = hdr.positive_int();
  if (hdr.positive_int() != 255) throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PGM (maxval 255) is supported");
  const std::size_t off = hdr.payload_offset();
  Mask mask(w, h);
  detail::check_payload(bytes, off, mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = bytes[off + i] != 0 ? 1 : 0;
  return mask;
}

inline Mask read_mask(const fs::path& path) { return decode_pgm_mask(detail::read_file(path)); }
inline void write_mask(const fs::path& path, const Mask& mask) { detail::write_file(path, encode_pgm_mask(mask)); }

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

namespace detail {

inline std::string pfm_header(char kind, int w, int h) {
  return std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
}

/// Returns (channels, width, height, payload offset).
inline std::tuple<int, int, int, std::size_t> parse_pfm_header(std::string_view bytes) {
  HeaderReader hdr(bytes);
  const std::string magic = hdr.token();
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw Error(ErrorCode::UnsupportedFormat, "not a PFM file");
  const int w = hdr.positive_int();
  const int h = hdr.positive_int();
  const std::string scale_tok = hdr.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw Error(ErrorCode::UnsupportedFormat, "bad PFM scale '" + scale_tok + "'");
  }
  if (!(scale < 0.0)) throw Error(ErrorCode::UnsupportedFormat, "big-endian PFM (positive scale) is not supported");
  return {channels, w, h, hdr.payload_offset()};
}

}  // namespace detail

inline std::string encode_pfm(const Grid2<double>& field) {
  std::string out = detail::pfm_header('f', field.width(), field.height());
  for (int v = field.height() - 1; v >= 0; --v)
    for (int u = 0; u < field.width(); ++u) detail::put_le<float>(out, static_cast<float>(field(u, v)));
  return out;
}

inline std::string encode_pfm(const Grid2<Rgb>& image) {
  std::string out = detail::pfm_header('F', image.width(), image.height());
  for (int v = image.height() - 1; v >= 0; --v)
    for (int u = 0; u < image.width(); ++u)
      for (int ch = 0; ch < 3; ++ch) detail::put_le<float>(out, static_cast<float>(image(u, v)[ch]));
  return out;
}

inline Grid2<double> decode_pfm_gray(std::string_view bytes) {
  const auto [channels, w, h, off] = detail::parse_pfm_header(bytes);
  if (channels != 1) throw Error(ErrorCode::UnsupportedFormat, "expected single-channel Pf");
  Grid2<double> field(w, h);
  detail::check_payload(bytes, off, field.size() * 4);
  std::size_t p = off;
  for (int v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u, p += 4) {
      const double x = detail::get_le<float>(bytes, p);
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "non-finite PFM sample");
      field(u, v) = x;
    }
  return field;
}

inline Grid2<Rgb> decode_pfm_rgb(std::string_view bytes) {
  const auto [channels, w, h, off] = detail::parse_pfm_header(bytes);
  if (channels != 3) throw Error(ErrorCode::UnsupportedFormat, "expected three-channel PF");
  Grid2<Rgb> image(w, h);
  detail::check_payload(bytes, off, image.size() * 12);
  std::size_t p = off;
  for (int v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u)
      for (int ch = 0; ch < 3; ++ch, p += 4) {
        const double x = detail::get_le<float>(bytes, p);
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "non-finite PFM sample");
        image(u, v)[ch] = x;
      }
  return image;
}

inline Grid2<double> read_pfm(const fs::path& path) { return decode_pfm_gray(detail::read_file(path)); }
inline Grid2<Rgb> read_pfm_rgb(const fs::path& path) { return decode_pfm_rgb(detail::read_file(path)); }
inline void write_pfm(const fs::path& path, const Grid2<double>& field) { detail::write_file(path, encode_pfm(field)); }
inline void write_pfm(const fs::path& path, const Grid2<Rgb>& image) { detail::write_file(path, encode_pfm(image)); }

// ---------------------------------------------------------------------------
// Lifted views and scene manifest
// ---------------------------------------------------------------------------

/// One input view: color image, camera-frame point map, confidence map and
/// the camera-to-unified pose.
struct LiftedView {
  Grid2<Rgb> image;
  Grid2<Vec3> points;
  Grid2<double> confidence;
  RigidTransform pose;

  int width() const { return image.width(); }
  int height() const { return image.height(); }

  void validate() const {
    require_same_shape(image, points, "view image/points");
    require_same_shape(image, confidence, "view image/confidence");
    for (double c : confidence)
      if (!(c >= 0.0 && c <= 1.0)) throw Error(ErrorCode::ConfidenceOutOfRange, "confidence outside [0,1]");
  }
};

struct ViewFiles {
  fs::path image_path;
  fs::path points_path;
  fs::path pose_path;
};

struct SceneParams {
  double tau_c = 0.5;
  std::string rho_kind = "exp";          // "exp" | "reciprocal"
  std::optional<double> rho_sigma;       // nullopt = per-view auto
  std::string kernel_kind = "gaussian";  // "gaussian" | "nearest"
  double kernel_sigma = 0.8;
  int kernel_radius = 2;
  double tau = 1e-3;
  double epsilon = 1e-8;
  std::string fill_method = "diffusion";  // diffusion | pullpush | none | external:<cmd>

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); };
    if (!(tau_c >= 0.0 && tau_c <= 1.0)) fail("tau_c must lie in [0,1]");
    if (rho_kind != "exp" && rho_kind != "reciprocal") fail("rho_kind must be 'exp' or 'reciprocal'");
    if (rho_sigma && !(*rho_sigma > 0.0 && std::isfinite(*rho_sigma))) fail("rho_sigma must be > 0 or \"auto\"");
    if (kernel_kind != "gaussian" && kernel_kind != "nearest") fail("kernel_kind must be 'gaussian' or 'nearest'");
    if (kernel_kind == "gaussian" && !(kernel_sigma > 0.0 && std::isfinite(kernel_sigma))) fail("kernel_sigma must be > 0");
    if (kernel_radius < 0) fail("kernel_radius must be >= 0");
    if (!(tau > 0.0 && std::isfinite(tau))) fail("tau must be > 0");
    if (!(epsilon > 0.0 && std::isfinite(epsilon))) fail("epsilon must be > 0");
    if (fill_method != "diffusion" && fill_method != "pullpush" && fill_method != "none" &&
        !(fill_method.rfind("external:", 0) == 0 && fill_method.size() > 9))
      fail("fill_method must be diffusion|pullpush|none|external:<cmd>");
  }
};

struct SceneManifest {
  std::vector<ViewFiles> views;
  int canvas_width = 0;
  int canvas_height = 0;
  SceneParams params;

  void validate() const {
    if (views.empty()) throw Error(ErrorCode::ValidationError, "manifest has no views");
    if (canvas_width < 2 || canvas_height < 2) throw Error(ErrorCode::ValidationError, "canvas must be at least 2x2");
    params.validate();
  }
};

/// Relative view paths are resolved against `base_dir`.
inline SceneManifest parse_manifest(std::string_view text, const fs::path& base_dir = {}) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest is not valid JSON: ") + e.what());
  }
  SceneManifest m;
  try {
    for (const auto& v : j.at("views")) {
      auto resolve = [&](const char* key) {
        fs::path p = v.at(key).get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
      };
      m.views.push_back({resolve("image_path"), resolve("points_path"), resolve("pose_path")});
    }
    m.canvas_width = j.at("canvas").at("width").get<int>();
    m.canvas_height = j.at("canvas").at("height").get<int>();
    if (j.contains("params")) {
      const json& p = j.at("params");
      SceneParams& s = m.params;
      s.tau_c = p.value("tau_c", s.tau_c);
      s.rho_kind = p.value("rho_kind", s.rho_kind);
      if (p.contains("rho_sigma")) {
        const json& sigma = p.at("rho_sigma");
        if (sigma.is_string()) {
          if (sigma.get<std::string>() != "auto") throw Error(ErrorCode::ValidationError, "rho_sigma must be a number or \"auto\"");
          s.rho_sigma.reset();
        } else {
          s.rho_sigma = sigma.get<double>();
        }
      }
      s.kernel_kind = p.value("kernel_kind", s.kernel_kind);
      s.kernel_sigma = p.value("kernel_sigma", s.kernel_sigma);
      s.kernel_radius = p.value("kernel_radius", s.kernel_radius);
      s.tau = p.value("tau", s.tau);
      s.epsilon = p.value("epsilon", s.epsilon);
      s.fill_method = p.value("fill_method", s.fill_method);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

/// Paths are written relative to `base_dir` when they live below it.
inline std::string format_manifest(const SceneManifest& m, const fs::path& base_dir = {}) {
  using nlohmann::ordered_json;
  auto rel = [&](const fs::path& p) {
    if (base_dir.empty()) return p.generic_string();
    const fs::path r = p.lexically_relative(base_dir);
    return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
  };
  ordered_json j;
  j["views"] = ordered_json::array();
  for (const auto& v : m.views)
    j["views"].push_back({{"image_path", rel(v.image_path)}, {"points_path", rel(v.points_path)}, {"pose_path", rel(v.pose_path)}});
  j["canvas"] = {{"width", m.canvas_width}, {"height", m.canvas_height}};
  const SceneParams& p = m.params;
  ordered_json params;
  params["tau_c"] = p.tau_c;
  params["rho_kind"] = p.rho_kind;
  if (p.rho_sigma) params["rho_sigma"] = *p.rho_sigma;
  else params["rho_sigma"] = "auto";
  params["kernel_kind"] = p.kernel_kind;
  params["kernel_sigma"] = p.kernel_sigma;
  params["kernel_radius"] = p.kernel_radius;
  params["tau"] = p.tau;
  params["epsilon"] = p.epsilon;
  params["fill_method"] = p.fill_method;
  j["params"] = params;
  return j.dump(2) + "\n";
}

inline LiftedView load_view(const ViewFiles& files) {
  PointMap map = read_lpm(files.points_path);
  LiftedView view{read_image(files.image_path), std::move(map.points), std::move(map.confidence), read_pose(files.pose_path)};
  try {
    view.validate();
  } catch (const Error& e) {
    throw Error(e.code(), e.what() + std::string(" (") + files.points_path.string() + ")");
  }
  return view;
}

struct Scene {
  SceneManifest manifest;
  std::vector<LiftedView> views;
};

inline Scene load_scene(const fs::path& manifest_path) {
  Scene scene;
  scene.manifest = parse_manifest(detail::read_file(manifest_path), manifest_path.parent_path());
  scene.views.reserve(scene.manifest.views.size());
  for (const auto& files : scene.manifest.views) scene.views.push_back(load_view(files));
  return scene;
}

}  // namespace panolift
