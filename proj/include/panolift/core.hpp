#pragma once

/// Geometry and image primitives shared by every stage of the stitcher:
/// 3-vectors, 3x3 matrices, rigid transforms, dense row-major grids and
/// the typed exception used throughout the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace panolift {

enum class ErrorCode {
  BadMagic,
  TruncatedFile,
  TrailingBytes,
  NonFiniteValue,
  ConfidenceOutOfRange,
  ParseError,
  NotARotation,
  UnsupportedFormat,
  DimensionMismatch,
  ValidationError,
  IoError,
  GridTooSmall,
  EmptyResult,
  EmptyList,
  DegenerateDirection,
  NoObservedPixels,
  ExternalFailed,
  SingularHomography,
  HorizonSingularity,
  EmptyOverlap,
  NoValidWindows,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::NoObservedPixels: return "NoObservedPixels";
    case ErrorCode::ExternalFailed: return "ExternalFailed";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::HorizonSingularity: return "HorizonSingularity";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::NoValidWindows: return "NoValidWindows";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Vec3 / Mat3
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{};

  static constexpr Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  static constexpr Mat3 from_rows(std::array<double, 9> v) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = v[3 * i + j];
    return r;
  }

  constexpr double operator()(int r, int c) const { return m[r][c]; }
  constexpr double& operator()(int r, int c) { return m[r][c]; }

  constexpr Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    return r;
  }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  constexpr Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  constexpr double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  constexpr bool operator==(const Mat3&) const = default;
};

/// Largest absolute element-wise difference.
inline double max_abs_diff(const Mat3& a, const Mat3& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a.m[i][j] - b.m[i][j]));
  return d;
}

/// Rotation about +z by `angle` radians.
inline Mat3 rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Mat3::from_rows({c, -s, 0, s, c, 0, 0, 0, 1});
}

/// Orthonormality error max|RᵀR - I| together with det(R).
inline std::pair<double, double> rotation_defect(const Mat3& r) {
  return {max_abs_diff(r.transposed() * r, Mat3::identity()), r.determinant()};
}

// ---------------------------------------------------------------------------
// RigidTransform
// ---------------------------------------------------------------------------

/// Element of SE(3) mapping camera-frame points into the unified frame.
class RigidTransform {
 public:
  RigidTransform() = default;

  /// Throws NotARotation if `rotation` is not orthonormal with det +1 within `tol`.
  RigidTransform(const Mat3& rotation, const Vec3& translation, double tol = 1e-9)
      : rotation_(rotation), translation_(translation) {
    const auto [ortho, det] = rotation_defect(rotation);
    if (!(ortho <= tol) || !(std::abs(det - 1.0) <= tol))
      throw Error(ErrorCode::NotARotation,
                  "rotation is not orthonormal (|RtR-I|=" + std::to_string(ortho) +
                      ", det=" + std::to_string(det) + ")");
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation_ = rotation_.transposed();
    inv.translation_ = inv.rotation_ * (translation_ * -1.0);
    return inv;
  }

  RigidTransform operator*(const RigidTransform& o) const {
    RigidTransform r;
    r.rotation_ = rotation_ * o.rotation_;
    r.translation_ = rotation_ * o.translation_ + translation_;
    return r;
  }

 private:
  Mat3 rotation_ = Mat3::identity();
  Vec3 translation_{};
};

inline Vec3 transform_point(const RigidTransform& t, const Vec3& xc) { return t.apply(xc); }

// ---------------------------------------------------------------------------
// Rgb
// ---------------------------------------------------------------------------

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  constexpr Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
  constexpr Rgb operator-(const Rgb& o) const { return {r - o.r, g - o.g, b - o.b}; }
  constexpr Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
  constexpr Rgb operator/(double s) const { return {r / s, g / s, b / s}; }
  constexpr Rgb& operator+=(const Rgb& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    return *this;
  }
  constexpr double& operator[](int ch) { return ch == 0 ? r : (ch == 1 ? g : b); }
  constexpr double operator[](int ch) const { return ch == 0 ? r : (ch == 1 ? g : b); }
  constexpr bool operator==(const Rgb&) const = default;

  Rgb clamped() const {
    return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
  }
  double luma() const { return 0.299 * r + 0.587 * g + 0.114 * b; }
};

inline bool is_finite(const Rgb& c) {
  return std::isfinite(c.r) && std::isfinite(c.g) && std::isfinite(c.b);
}

// ---------------------------------------------------------------------------
// Grid2
// ---------------------------------------------------------------------------

/// Dense row-major 2D buffer; (u, v) = (column, row), origin top-left.
template <typename T>
class Grid2 {
 public:
  Grid2() = default;
  Grid2(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width)) * static_cast<std::size_t>(checked(height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const { return u >= 0 && u < width_ && v >= 0 && v < height_; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }
  std::pair<int, int> coords(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(width_)),
            static_cast<int>(i / static_cast<std::size_t>(width_))};
  }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int u, int v) {
    if (!contains(u, v)) throw std::out_of_range("Grid2::at");
    return (*this)(u, v);
  }
  const T& at(int u, int v) const {
    if (!contains(u, v)) throw std::out_of_range("Grid2::at");
    return (*this)(u, v);
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  template <typename U>
  bool same_shape(const Grid2<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Grid2&) const = default;

 private:
  static int checked(int n) {
    if (n < 0) throw Error(ErrorCode::ValidationError, "negative grid dimension");
    return n;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Binary per-pixel flag grid; 1 = set. Used for hole masks (1 = hole),
/// validity maps and overlap masks.
using Mask = Grid2<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid2<A>& a, const Grid2<B>& b, std::string_view what) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

inline std::size_t count_set(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

inline int default_thread_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// fn(begin, end) on each. Chunks must write disjoint outputs.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

}  // namespace panolift
