#include <algorithm>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "panolift/splat.hpp"

namespace panolift {
namespace {

constexpr double kPi = std::numbers::pi;
const ProjectionCenter kOrigin{};

/// Unit direction that lands exactly on canvas coordinate (x, y).
Vec3 toward(const CanvasSpec& spec, double x, double y) {
  const double theta = 2 * kPi * x / spec.width - kPi;
  const double phi = kPi / 2 - kPi * y / spec.height;
  return {std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
}

WeightedColoredPoint point_at(const CanvasSpec& spec, double x, double y, Rgb c, double w) {
  return {toward(spec, x, y) * 3.0, c, w};
}

WeightedColoredPointSet random_set(std::mt19937_64& rng, const CanvasSpec& spec, std::size_t n) {
  std::uniform_real_distribution<double> ux(0, spec.width), uy(0, spec.height), u(0, 1);
  WeightedColoredPointSet q;
  for (std::size_t i = 0; i < n; ++i) q.points.push_back(point_at(spec, ux(rng), uy(rng), {u(rng), u(rng), u(rng)}, u(rng)));
  return q;
}

SplatParams params_with(SplatKernel k, int threads = 1) {
  SplatParams p;
  p.kernel = k;
  p.threads = threads;
  return p;
}

/// Brute-force accumulation: for every pixel, scan every point and every
/// wrapped stencil column that can land on it.
struct Oracle {
  Grid2<Rgb> numer;
  Grid2<double> z;
};

Oracle brute_force(const WeightedColoredPointSet& q, const CanvasSpec& spec, double sigma, int r) {
  Oracle o{Grid2<Rgb>(spec.width, spec.height), Grid2<double>(spec.width, spec.height)};
  for (const auto& p : q.points) {
    const Vec3 d = p.position;
    const double theta = std::atan2(d.y, d.x);
    const double phi = std::atan2(d.z, std::hypot(d.x, d.y));
    double x = spec.width / (2 * kPi) * (theta + kPi);
    if (x >= spec.width) x -= spec.width;
    const double y = std::min(spec.height / kPi * (kPi / 2 - phi), std::nextafter(double(spec.height), 0.0));
    for (int row = 0; row < spec.height; ++row)
      for (int col = 0; col < spec.width; ++col)
        for (int k = -r; k <= r; ++k) {
          const int c = static_cast<int>(std::floor(x)) + k;
          if (((c % spec.width) + spec.width) % spec.width != col) continue;
          if (std::abs(row - static_cast<int>(std::floor(y))) > r) continue;
          const double dx = c + 0.5 - x, dy = row + 0.5 - y;
          const double wk = p.weight * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          o.numer(col, row) += p.color * wk;
          o.z(col, row) += wk;
        }
  }
  return o;
}

TEST(Splat, EmptySetIsAllHoles) {
  const CanvasSpec spec{16, 8};
  const SplatResult r = splat({}, kOrigin, spec, SplatParams{});
  EXPECT_EQ(count_set(r.canvas.mask), r.canvas.mask.size());
  for (double z : r.canvas.support) EXPECT_EQ(z, 0.0);
  for (const Rgb& c : r.canvas.color) EXPECT_EQ(c, Rgb{});
  EXPECT_EQ(r.canvas.hole_fraction(), 1.0);
}

TEST(Splat, SinglePointNearest) {
  const CanvasSpec spec{16, 8};
  WeightedColoredPointSet q;
  q.points.push_back(point_at(spec, 5.5, 3.5, {1, 0, 0}, 1.0));
  const SplatResult r = splat(q, kOrigin, spec, params_with(SplatKernel::nearest()));
  EXPECT_NEAR(r.canvas.color(5, 3).r, 1.0 / (1.0 + 1e-8), 1e-12);
  EXPECT_EQ(r.canvas.support(5, 3), 1.0);
  EXPECT_EQ(r.canvas.mask(5, 3), 0);
  EXPECT_EQ(count_set(r.canvas.mask), spec.width * spec.height - 1u);
}

TEST(Splat, TwoPointsAverage) {
  const CanvasSpec spec{16, 8};
  WeightedColoredPointSet q;
  q.points.push_back(point_at(spec, 5.5, 3.5, {1, 0, 0}, 1.0));
  q.points.push_back(point_at(spec, 5.5, 3.5, {0, 0, 1}, 1.0));
  const SplatResult r = splat(q, kOrigin, spec, params_with(SplatKernel::nearest()));
  EXPECT_NEAR(r.canvas.color(5, 3).r, 0.5, 1e-8);
  EXPECT_NEAR(r.canvas.color(5, 3).b, 0.5, 1e-8);
  EXPECT_EQ(r.canvas.support(5, 3), 2.0);
}

TEST(Splat, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  const CanvasSpec spec{40, 20};
  const auto q = random_set(rng, spec, 150);
  const SplatResult r = splat(q, kOrigin, spec, params_with(SplatKernel::gaussian(0.8, 2), 3));
  const Oracle o = brute_force(q, spec, 0.8, 2);
  for (std::size_t i = 0; i < r.canvas.support.size(); ++i) {
    ASSERT_NEAR(r.canvas.support[i], o.z[i], 1e-12);
    const Rgb y = o.numer[i] / (o.z[i] + 1e-8);
    ASSERT_NEAR(r.canvas.color[i].r, y.r, 1e-12);
    ASSERT_NEAR(r.canvas.color[i].g, y.g, 1e-12);
    ASSERT_NEAR(r.canvas.color[i].b, y.b, 1e-12);
    ASSERT_EQ(r.canvas.mask[i], o.z[i] < 1e-3 ? 1 : 0);
  }
}

TEST(Splat, ConstantColorBound) {
  std::mt19937_64 rng(5);
  const CanvasSpec spec{64, 32};
  auto q = random_set(rng, spec, 400);
  const Rgb c{0.2, 0.6, 0.9};
  for (auto& p : q.points) p.color = c;
  const SplatResult r = splat(q, kOrigin, spec, SplatParams{});
  for (std::size_t i = 0; i < r.canvas.color.size(); ++i) {
    if (r.canvas.mask[i]) continue;
    // Y = c Z / (Z + eps), so |Y - c| <= eps / tau.
    EXPECT_LE(std::abs(r.canvas.color[i].g - c.g), 1e-8 / 1e-3);
    EXPECT_LE(r.canvas.color[i].b, c.b);
  }
}

TEST(Splat, WeightScaling) {
  std::mt19937_64 rng(6);
  const CanvasSpec spec{64, 32};
  const auto q = random_set(rng, spec, 300);
  auto scaled = q;
  for (auto& p : scaled.points) p.weight *= 4.0;
  const SplatResult a = splat(q, kOrigin, spec, SplatParams{});
  const SplatResult b = splat(scaled, kOrigin, spec, SplatParams{});
  for (std::size_t i = 0; i < a.canvas.support.size(); ++i) {
    EXPECT_NEAR(b.canvas.support[i], 4.0 * a.canvas.support[i], 1e-12);
    // Only the eps regularizer distinguishes the two: |dY| <= eps / Z.
    if (a.canvas.support[i] > 1e-3) { EXPECT_LE(std::abs(b.canvas.color[i].r - a.canvas.color[i].r), 1e-8 / a.canvas.support[i]); }
  }
}

TEST(Splat, AddingPointsNeverCreatesHoles) {
  std::mt19937_64 rng(7);
  const CanvasSpec spec{64, 32};
  const auto q = random_set(rng, spec, 100);
  auto more = q;
  const auto extra = random_set(rng, spec, 100);
  more.points.insert(more.points.end(), extra.points.begin(), extra.points.end());
  const Mask a = splat(q, kOrigin, spec, SplatParams{}).canvas.mask;
  const Mask b = splat(more, kOrigin, spec, SplatParams{}).canvas.mask;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i], a[i]);
}

TEST(Splat, PermutationInvariant) {
  std::mt19937_64 rng(8);
  const CanvasSpec spec{64, 32};
  const auto q = random_set(rng, spec, 500);
  auto shuffled = q;
  std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
  const SplatResult a = splat(q, kOrigin, spec, SplatParams{});
  const SplatResult b = splat(shuffled, kOrigin, spec, SplatParams{});
  for (std::size_t i = 0; i < a.canvas.support.size(); ++i) {
    EXPECT_NEAR(a.canvas.support[i], b.canvas.support[i], 1e-12);
    EXPECT_NEAR(a.canvas.color[i].r, b.canvas.color[i].r, 1e-12);
  }
}

TEST(Splat, SeamWrapColumns) {
  const CanvasSpec spec{32, 16};
  WeightedColoredPointSet q;
  q.points.push_back(point_at(spec, spec.width - 0.25, 8.5, {1, 1, 1}, 1.0));
  const SplatResult r = splat(q, kOrigin, spec, SplatParams{});
  std::vector<int> touched;
  for (int col = 0; col < spec.width; ++col)
    if (r.canvas.support(col, 8) > 0.0) touched.push_back(col);
  EXPECT_EQ(touched, (std::vector<int>{0, 1, 29, 30, 31}));
}

TEST(Splat, MassConservedAcrossSeam) {
  const CanvasSpec spec{32, 16};
  auto total_for = [&](double x) {
    WeightedColoredPointSet q;
    q.points.push_back(point_at(spec, x, 8.25, {1, 1, 1}, 0.7));
    const SplatResult r = splat(q, kOrigin, spec, SplatParams{});
    double total = 0.0;
    for (double z : r.canvas.support) total += z;
    return total;
  };
  // Same fractional offset, one copy straddling the seam.
  EXPECT_NEAR(total_for(spec.width - 0.25), total_for(15.75), 1e-9);
  EXPECT_NEAR(total_for(0.1), total_for(10.1), 1e-9);
}

TEST(Splat, BitwiseDeterministicAcrossThreads) {
  std::mt19937_64 rng(9);
  const CanvasSpec spec{128, 100};
  const auto q = random_set(rng, spec, 5000);
  const SplatResult a = splat(q, kOrigin, spec, params_with(SplatKernel::gaussian(), 1));
  for (int t : {2, 5, 8}) {
    const SplatResult b = splat(q, kOrigin, spec, params_with(SplatKernel::gaussian(), t));
    EXPECT_TRUE(a.canvas.color == b.canvas.color);
    EXPECT_TRUE(a.canvas.support == b.canvas.support);
    EXPECT_TRUE(a.canvas.mask == b.canvas.mask);
  }
}

TEST(Splat, SkipsPointsAtCenterAndRejectsBadWeights) {
  const CanvasSpec spec{16, 8};
  WeightedColoredPointSet q;
  q.points.push_back({{0, 0, 0}, {1, 1, 1}, 1.0});
  q.points.push_back(point_at(spec, 3.5, 3.5, {1, 1, 1}, 1.0));
  EXPECT_EQ(splat(q, kOrigin, spec, SplatParams{}).skipped, 1u);
  q.points[1].weight = -1.0;
  try {
    splat(q, kOrigin, spec, SplatParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
  }
}

TEST(SupportHistogram, TwoValues) {
  PanoCanvas c;
  c.support = Grid2<double>(2, 1);
  c.support[0] = 1.0;
  c.support[1] = 2.0;
  const auto h = support_histogram(c, 2);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].second, 1u);
  EXPECT_EQ(h[1].second, 1u);
  EXPECT_EQ(h[0].first, 1.0);
  EXPECT_EQ(h[1].first, 1.5);
}

TEST(SupportHistogram, CountsSumToPixels) {
  std::mt19937_64 rng(12);
  const CanvasSpec spec{50, 30};
  const SplatResult r = splat(random_set(rng, spec, 200), kOrigin, spec, SplatParams{});
  std::size_t total = 0;
  for (const auto& [edge, count] : support_histogram(r.canvas, 7)) total += count;
  EXPECT_EQ(total, 1500u);
  PanoCanvas flat;
  flat.support = Grid2<double>(3, 3, 0.5);
  EXPECT_EQ(support_histogram(flat, 4)[0].second, 9u);
}

}  // namespace
}  // namespace panolift
