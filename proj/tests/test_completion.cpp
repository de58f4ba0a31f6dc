#include <random>

#include <gtest/gtest.h>

#include "panolift/completion.hpp"

namespace panolift {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected panolift::Error";
  return ErrorCode::IoError;
}

Grid2<Rgb> random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0, 1);
  Grid2<Rgb> img(w, h);
  for (Rgb& c : img) c = {u(rng), u(rng), u(rng)};
  return img;
}

Mask random_mask(std::mt19937_64& rng, int w, int h, double p) {
  std::bernoulli_distribution b(p);
  Mask m(w, h);
  for (auto& x : m) x = b(rng) ? 1 : 0;
  return m;
}

/// Gauss-Seidel on the 4-neighbour Laplace equation, run far past convergence.
Grid2<Rgb> harmonic_oracle(const Grid2<Rgb>& y, const Mask& m, bool wrap_x) {
  Grid2<Rgb> x = y;
  const int w = y.width(), h = y.height();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (m[i]) x[i] = Rgb{0.5, 0.5, 0.5};
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double change = 0.0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!m(u, v)) continue;
        Rgb sum{};
        int n = 0;
        const int nu[4] = {u - 1, u + 1, u, u};
        const int nv[4] = {v, v, v - 1, v + 1};
        for (int k = 0; k < 4; ++k) {
          int a = nu[k];
          const int b = nv[k];
          if (b < 0 || b >= h) continue;
          if (a < 0 || a >= w) {
            if (!wrap_x) continue;
            a = (a + w) % w;
          }
          sum += x(a, b);
          ++n;
        }
        const Rgb nv_ = sum / n;
        change = std::max(change, std::abs(nv_.r - x(u, v).r));
        x(u, v) = nv_;
      }
    if (change < 1e-14) break;
  }
  return x;
}

TEST(MakeInput, ZeroesHoles) {
  Grid2<Rgb> y(2, 1, Rgb{0.3, 0.4, 0.5});
  Mask m(2, 1);
  m[1] = 1;
  const CompletionInput in = make_input(y, m);
  EXPECT_EQ(in.masked_canvas[0], y[0]);
  EXPECT_EQ(in.masked_canvas[1], Rgb{});
  EXPECT_EQ(code_of([&] { make_input(y, Mask(3, 1)); }), ErrorCode::DimensionMismatch);
}

TEST(Fuse, SelectsByMask) {
  Grid2<Rgb> y(3, 1, Rgb{1, 1, 1}), yhat(3, 1, Rgb{0, 0, 0});
  Mask m(3, 1);
  m[2] = 1;
  const Grid2<Rgb> f = fuse(y, yhat, m);
  EXPECT_EQ(f[0], y[0]);
  EXPECT_EQ(f[1], y[1]);
  EXPECT_EQ(f[2], yhat[2]);
  EXPECT_TRUE(fuse(y, yhat, Mask(3, 1)) == y);
}

TEST(JointMask, IsUnion) {
  Mask m(4, 1), r(4, 1);
  m[0] = 1;
  m[1] = 1;
  r[1] = 1;
  r[2] = 1;
  const Mask j = joint_mask(m, r);
  EXPECT_EQ(j[0], 1);
  EXPECT_EQ(j[1], 1);
  EXPECT_EQ(j[2], 1);
  EXPECT_EQ(j[3], 0);
}

TEST(Losses, Examples) {
  Grid2<Rgb> y(4, 2, Rgb{0, 0, 0}), yt(4, 2, Rgb{1, 1, 1});
  Mask r(4, 2);
  r[0] = r[3] = r[5] = 1;
  EXPECT_EQ(loss_rec(yt, y, r), 9.0);

  Grid2<Rgb> a(2, 1), b(2, 1);
  a[0] = {0.5, 0, 0};
  Mask m(2, 1);
  EXPECT_EQ(loss_obs(a, b, m), 0.5);
  m[0] = 1;
  EXPECT_EQ(loss_obs(a, b, m), 0.0);

  EXPECT_EQ(loss_total(2.0, 3.0), 5.0);
  EXPECT_EQ(loss_total(2.0, 3.0, 0.5), 3.5);
  EXPECT_EQ(loss_total(2.0, 3.0, 0.0), 2.0);
  EXPECT_EQ(code_of([] { loss_total(1.0, 1.0, -1.0); }), ErrorCode::ValidationError);
}

TEST(Diffusion, SingleHoleTakesNeighbourValue) {
  const Rgb c{0.25, 0.5, 0.75};
  Grid2<Rgb> y(5, 5, c);
  Mask m(5, 5);
  m(2, 2) = 1;
  const CompletionResult r = complete(CompletionOperator::diffusion(), make_input(y, m));
  EXPECT_NEAR(r.image(2, 2).r, c.r, 1e-12);
  EXPECT_NEAR(r.image(2, 2).g, c.g, 1e-12);
  EXPECT_NEAR(r.image(2, 2).b, c.b, 1e-12);
}

TEST(Diffusion, NoHolesIsIdentity) {
  std::mt19937_64 rng(1);
  const Grid2<Rgb> y = random_image(rng, 9, 7);
  const CompletionResult r = complete(CompletionOperator::diffusion(), make_input(y, Mask(9, 7)));
  EXPECT_TRUE(r.image == y);
}

TEST(Diffusion, LinearProfileBetweenFixedColumns) {
  // Column 0 is 0, column 7 is 1, everything between is a hole: the
  // discrete harmonic solution is u / 7 on every row.
  Grid2<Rgb> y(8, 8);
  Mask m(8, 8);
  for (int v = 0; v < 8; ++v) {
    y(7, v) = {1, 1, 1};
    for (int u = 1; u < 7; ++u) m(u, v) = 1;
  }
  const CompletionResult r = complete(CompletionOperator::diffusion(100000, 1e-13), make_input(y, m));
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) EXPECT_NEAR(r.image(u, v).g, u / 7.0, 1e-9);
}

TEST(Diffusion, MatchesGaussSeidelOracle) {
  std::mt19937_64 rng(2);
  for (bool wrap : {false, true}) {
    const Grid2<Rgb> y = random_image(rng, 40, 24);
    const Mask m = random_mask(rng, 40, 24, 0.6);
    CompletionOperator op = CompletionOperator::diffusion(200000, 1e-12);
    op.wrap_x = wrap;
    const CompletionResult r = complete(op, make_input(y, m));
    const Grid2<Rgb> o = harmonic_oracle(y, m, wrap);
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_NEAR(r.image[i].r, o[i].r, 1e-8);
      ASSERT_NEAR(r.image[i].b, o[i].b, 1e-8);
    }
  }
}

TEST(Diffusion, MaximumPrinciple) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid2<Rgb> y = random_image(rng, 33, 21);
    const Mask m = random_mask(rng, 33, 21, 0.7);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!m[i]) {
        lo = std::min(lo, y[i].r);
        hi = std::max(hi, y[i].r);
      }
    if (lo > hi) continue;
    const CompletionResult r = complete(CompletionOperator::diffusion(), make_input(y, m));
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_GE(r.image[i].r, lo - 1e-12);
      ASSERT_LE(r.image[i].r, hi + 1e-12);
      if (!m[i]) { ASSERT_EQ(r.image[i], y[i]); }
    }
  }
}

TEST(PullPush, ConstantFillAndBounds) {
  const Rgb c{0.1, 0.2, 0.3};
  std::mt19937_64 rng(4);
  const Mask m = random_mask(rng, 50, 30, 0.8);
  const CompletionResult r = complete(CompletionOperator::pull_push(), make_input(Grid2<Rgb>(50, 30, c), m));
  for (const Rgb& p : r.image) {
    EXPECT_NEAR(p.r, c.r, 1e-12);
    EXPECT_NEAR(p.b, c.b, 1e-12);
  }
  const Grid2<Rgb> y = random_image(rng, 50, 30);
  const CompletionResult s = complete(CompletionOperator::pull_push(), make_input(y, m));
  for (std::size_t i = 0; i < y.size(); ++i) {
    ASSERT_GE(s.image[i].g, 0.0);
    ASSERT_LE(s.image[i].g, 1.0);
    if (!m[i]) { ASSERT_EQ(s.image[i], y[i]); }
  }
}

TEST(PullPush, LargeHoleIsFilled) {
  Grid2<Rgb> y(64, 64, Rgb{0.8, 0.8, 0.8});
  Mask m(64, 64);
  for (int v = 8; v < 56; ++v)
    for (int u = 8; u < 56; ++u) m(u, v) = 1;
  const CompletionResult r = complete(CompletionOperator::pull_push(), make_input(y, m));
  EXPECT_NEAR(r.image(32, 32).r, 0.8, 1e-12);
}

TEST(Completion, AllHolesGivesGrayWithWarning) {
  const Mask m(6, 4, 1);
  for (const auto& op : {CompletionOperator::diffusion(), CompletionOperator::pull_push()}) {
    const CompletionResult r = complete(op, make_input(Grid2<Rgb>(6, 4), m));
    EXPECT_TRUE(r.no_observed_pixels);
    for (const Rgb& c : r.image) EXPECT_EQ(c, (Rgb{0.5, 0.5, 0.5}));
  }
}

TEST(External, CopyCommandRoundTrips) {
  std::mt19937_64 rng(5);
  const Grid2<Rgb> y = random_image(rng, 12, 8);
  const Mask m = random_mask(rng, 12, 8, 0.3);
  const CompletionInput in = make_input(y, m);
  const CompletionResult r = complete(CompletionOperator::external("cp input.ppm output.ppm"), in);
  ASSERT_TRUE(r.image.same_shape(y));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(r.image[i].r, in.masked_canvas[i].r, 0.5 / 255 + 1e-12);
}

TEST(External, FailuresAreReported) {
  const CompletionInput in = make_input(Grid2<Rgb>(4, 4), Mask(4, 4));
  EXPECT_EQ(code_of([&] { complete(CompletionOperator::external("exit 3"), in); }), ErrorCode::ExternalFailed);
  EXPECT_EQ(code_of([&] { complete(CompletionOperator::external("true"), in); }), ErrorCode::ExternalFailed);
  EXPECT_EQ(code_of([&] { complete(CompletionOperator::external("echo junk > output.ppm"), in); }),
            ErrorCode::ExternalFailed);
  EXPECT_EQ(code_of([&] { complete(CompletionOperator::external(""), in); }), ErrorCode::ValidationError);
}

TEST(OcclusionSampler, DeterministicPerSeed) {
  std::mt19937_64 rng(6);
  const Mask m = random_mask(rng, 64, 48, 0.3);
  const Mask a = sample_occlusion({42, 0.2}, m), b = sample_occlusion({42, 0.2}, m);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == sample_occlusion({43, 0.2}, m));
}

TEST(OcclusionSampler, CoverageAndSubsetOfObserved) {
  std::mt19937_64 rng(7);
  Mask m(256, 256);
  for (int v = 100; v < 140; ++v)
    for (int u = 0; u < 256; ++u) m(u, v) = 1;
  const std::size_t observed = m.size() - count_set(m);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Mask r = sample_occlusion({seed, 0.2}, m);
    const double frac = static_cast<double>(count_set(r)) / static_cast<double>(observed);
    EXPECT_GE(frac, 0.16);
    EXPECT_LE(frac, 0.24);
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r[i]) { ASSERT_EQ(m[i], 0); }
  }
  EXPECT_EQ(code_of([&] { sample_occlusion({1, 0.0}, m); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { sample_occlusion({1, 1.0}, m); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { sample_occlusion({1, 0.2}, Mask(8, 8, 1)); }), ErrorCode::NoObservedPixels);
}

TEST(SelfSupervised, ConstantCanvasHasZeroLoss) {
  const Grid2<Rgb> y(96, 48, Rgb{0.4, 0.5, 0.6});
  std::mt19937_64 rng(8);
  const Mask m = random_mask(rng, 96, 48, 0.2);
  const Mask r = sample_occlusion({9, 0.2}, m);
  const Mask joint = joint_mask(m, r);
  for (const auto& op : {CompletionOperator::diffusion(), CompletionOperator::pull_push()}) {
    const Grid2<Rgb> yhat = complete(op, make_input(y, joint)).image;
    const Grid2<Rgb> ytilde = fuse(y, yhat, joint);
    EXPECT_LT(loss_rec(ytilde, y, r), 1e-6 * static_cast<double>(count_set(r)));
    EXPECT_EQ(loss_obs(ytilde, y, joint), 0.0);
  }
}

}  // namespace
}  // namespace panolift
