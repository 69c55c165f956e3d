#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "siproj/core.hpp"

using namespace siproj;

TEST(Vec, RejectsNonFinite) {
  EXPECT_THROW(Vec({1.0, std::numeric_limits<double>::quiet_NaN()}), NonFinite);
  EXPECT_THROW(Vec({std::numeric_limits<double>::infinity()}), NonFinite);
  EXPECT_THROW(Vec(std::vector<double>{0.0, -std::numeric_limits<double>::infinity()}), NonFinite);
}

TEST(Vec, ArithmeticChecksShapes) {
  EXPECT_THROW(Vec({1, 2}) + Vec({1}), ShapeMismatch);
  EXPECT_THROW(dot(Vec({1, 2}), Vec({1, 2, 3})), ShapeMismatch);
  EXPECT_EQ(Vec({1, 2}) - Vec({0.5, 4}), Vec({0.5, -2}));
  EXPECT_EQ(2.0 * Vec({1, -3}), Vec({2, -6}));
}

TEST(Vec, OverflowingArithmeticIsRejected) {
  const double big = std::numeric_limits<double>::max();
  EXPECT_THROW(Vec({big}) + Vec({big}), NonFinite);
}

TEST(L2Norm, Examples) {
  EXPECT_EQ(l2_norm(Vec({3, 4})), 5.0);
  EXPECT_EQ(l2_norm(Vec({0, 0, 0})), 0.0);
}

TEST(L2Norm, MatchesCompensatedOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
    Rng rng(seed);
    const Vec v = rng.normal_vec(1000);
    EXPECT_LE(oracle::rel_err(l2_norm(v), oracle::norm(v.values())), 1e-12) << "seed " << seed;
  }
}

TEST(L2Norm, NoOverflowOrUnderflowForExtremeScales) {
  EXPECT_DOUBLE_EQ(l2_norm(Vec({3e200, 4e200})), 5e200);
  EXPECT_DOUBLE_EQ(l2_norm(Vec({3e-200, 4e-200})), 5e-200);
}

TEST(Unit, Examples) {
  EXPECT_EQ(unit(Vec({0, 2})), Vec({0, 1}));
  const Vec u = unit(Vec({1, 1}));
  EXPECT_NEAR(u[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(u[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(unit(Vec({0, 0})), ZeroNorm);
}

TEST(Unit, HasUnitNorm) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vec v = std::pow(10.0, rng.uniform(-50, 50)) * rng.normal_vec(1 + i % 17);
    EXPECT_NEAR(l2_norm(unit(v)), 1.0, 1e-12);
  }
}

TEST(CosineAbs, Examples) {
  EXPECT_EQ(cosine_abs(Vec({1, 0}), Vec({0, 1})), 0.0);
  EXPECT_EQ(cosine_abs(Vec({1, 0}), Vec({-2, 0})), 1.0);
  EXPECT_NEAR(cosine_abs(Vec({1, 1}), Vec({1, 0})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(cosine_abs(Vec({0, 0}), Vec({1, 0})), ZeroNorm);
  EXPECT_THROW(cosine_abs(Vec({1, 0}), Vec({0, 0})), ZeroNorm);
}

TEST(CosineAbs, StaysInUnitInterval) {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const Vec a = rng.normal_vec(7);
    const double c = rng.uniform(-5, 5);
    const Vec b = (c == 0.0 ? 1.0 : c) * a;
    const double cos = cosine_abs(a, b);
    EXPECT_GE(cos, 0.0);
    EXPECT_LE(cos, 1.0);
    EXPECT_NEAR(cos, 1.0, 1e-15);
  }
}

TEST(ProjectOut, Examples) {
  EXPECT_EQ(project_out(Vec({1, 0}), Vec({3, 5})), Vec({0, 5}));
  EXPECT_EQ(project_out(Vec({2, 0}), Vec({7, 0})), Vec({0, 0}));
  const Vec tangent({1, -2, 1});
  const Vec p = project_out(Vec({1, 1, 1}), tangent);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], tangent[i], 1e-12);
  EXPECT_THROW(project_out(Vec({0, 0}), Vec({1, 0})), ZeroNorm);
}

TEST(ProjectOut, OrthogonalToW) {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const Vec w = rng.normal_vec(2 + i % 30);
    const Vec x = rng.normal_vec(w.size());
    const Vec p = project_out(w, x);
    EXPECT_LE(std::abs(dot(p, w)), 1e-10 * l2_norm(p) * l2_norm(w) + 1e-300);
  }
}

TEST(ProjectOut, Idempotent) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const Vec w = rng.normal_vec(2 + i % 20);
    const Vec x = rng.normal_vec(w.size());
    const Vec once = project_out(w, x);
    const Vec twice = project_out(w, once);
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(twice[k], once[k], 1e-12);
  }
}

TEST(ProjectOut, NeverIncreasesNorm) {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const Vec w = rng.normal_vec(2 + i % 20);
    const Vec x = rng.normal_vec(w.size());
    EXPECT_LE(l2_norm(project_out(w, x)), l2_norm(x));
  }
}

TEST(ProjectOut, Pythagoras) {
  Rng rng(10);
  for (int i = 0; i < 500; ++i) {
    const Vec w = rng.normal_vec(2 + i % 20);
    const Vec x = rng.normal_vec(w.size());
    const double radial = oracle::dot(w.values(), x.values()) / oracle::norm(w.values());
    const double lhs = squared_norm(x);
    const double rhs = squared_norm(project_out(w, x)) + radial * radial;
    EXPECT_LE(oracle::rel_err(rhs, lhs), 1e-10);
  }
}

TEST(ProjectOut, IndependentOfWScale) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec w = rng.normal_vec(2 + i % 10);
    const Vec x = rng.normal_vec(w.size());
    const Vec base = project_out(w, x);
    for (double c : {0.5, 3.0, 100.0}) {
      const Vec scaled = project_out(c * w, x);
      for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(scaled[k], base[k], 1e-12);
    }
  }
}

TEST(Scope, WholeTensorIsOneSlice) {
  const ParamBlock b("w", Vec({1, 2, 3}));
  ASSERT_EQ(b.slices().size(), 1u);
  EXPECT_EQ(b.slices()[0], (IndexRange{0, 3}));
}

TEST(Scope, PerChannelPartition) {
  const ParamBlock b("w", Vec({1, 2, 3, 4, 5}), PerChannel{{{2, 5}, {0, 2}}});
  ASSERT_EQ(b.slices().size(), 2u);
  EXPECT_EQ(b.slices()[0], (IndexRange{0, 2}));
  EXPECT_EQ(b.slices()[1], (IndexRange{2, 5}));
  EXPECT_EQ(PerChannel::uniform(3, 2).channels.back(), (IndexRange{4, 6}));
}

TEST(Scope, RejectsBadPartitions) {
  const Vec v({1, 2, 3, 4});
  EXPECT_THROW(ParamBlock("gap", v, PerChannel{{{0, 2}}}), InvalidScope);
  EXPECT_THROW(ParamBlock("overlap", v, PerChannel{{{0, 3}, {2, 4}}}), InvalidScope);
  EXPECT_THROW(ParamBlock("single", v, PerChannel{{{0, 3}, {3, 4}}}), InvalidScope);
  EXPECT_THROW(ParamBlock("past-end", v, PerChannel{{{0, 2}, {2, 5}}}), InvalidScope);
  EXPECT_THROW(ParamBlock("empty", v, PerChannel{}), InvalidScope);
  EXPECT_THROW(ParamBlock("none", Vec(std::vector<double>{})), InvalidScope);
}

TEST(ParamBlock, SetValuesKeepsShape) {
  ParamBlock b("w", Vec({1, 2}));
  EXPECT_THROW(b.set_values(Vec({1, 2, 3})), ShapeMismatch);
  b.set_values(Vec({5, 6}));
  EXPECT_EQ(b.values(), Vec({5, 6}));
  EXPECT_EQ(b.with_values(Vec({7, 8})).values(), Vec({7, 8}));
  EXPECT_EQ(b.values(), Vec({5, 6}));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs = differs || x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformInRangeAndNormalMoments) {
  Rng rng(99);
  std::vector<double> draws;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    draws.push_back(rng.normal());
  }
  const auto ms = oracle::mean_std(draws);
  EXPECT_NEAR(ms.mean, 0.0, 0.01);
  EXPECT_NEAR(ms.std, 1.0, 0.01);
}
