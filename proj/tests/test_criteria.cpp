#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/trapezoidal.hpp>

#include "traplab/criteria.hpp"

using namespace traplab;
using namespace traplab::criteria;

namespace {

// Direct inner integral ∫_1^x exp(r^b - x^b) dr by a fine midpoint rule in r.
double horn_inner_direct(double b, double x) {
  const int n = 200000;
  const double h = (x - 1.0) / n, xb = std::pow(x, b);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = 1.0 + (i + 0.5) * h;
    s += std::exp(std::pow(r, b) - xb);
  }
  return s * h;
}

// Raw-form corner integrand, only safe for moderate z.
double corner_raw(double gamma, double z) {
  const double pi = std::numbers::pi;
  if (z == 0.0) return 4.0 * (pi - gamma) / pi;
  return 4.0 * std::sinh((pi - gamma) * z) / (std::sinh(pi * z) * std::cosh(gamma * z));
}

}  // namespace

TEST(Criteria, HornVerdictsAtSettledExponents) {
  EXPECT_EQ(horn_trap_classifier(1.0).verdict, Verdict::Trap);
  EXPECT_EQ(horn_trap_classifier(2.0).verdict, Verdict::Trap);
  EXPECT_EQ(horn_trap_classifier(3.0).verdict, Verdict::NonTrap);
}

TEST(Criteria, HornInnerIntegralMatchesDirectQuadrature) {
  for (double b : {0.5, 1.0, 2.0, 3.0})
    for (double x : {1.5, 3.0, 6.0}) {
      double direct = horn_inner_direct(b, x);
      EXPECT_NEAR(detail::horn_integrand(b, x), direct, 1e-8 * std::max(1.0, direct)) << b << " " << x;
    }
}

TEST(Criteria, HornIntegrandTailIsPowerLaw) {
  // g(x) ~ x^{1-b}/b for large x
  for (double b : {1.0, 2.0, 3.0}) {
    double x = 100.0;
    EXPECT_NEAR(detail::horn_integrand(b, x) * b * std::pow(x, b - 1.0), 1.0, 2e-2) << b;
  }
  auto v = horn_trap_classifier(1.0);
  EXPECT_NEAR(v.statistic, 0.0, 0.01);
  // partial integrals linear in the cap for b = 1
  EXPECT_NEAR(v.evidence[2] - v.evidence[1], 2.0 * (v.evidence[1] - v.evidence[0]), 0.05 * v.evidence[2]);
}

TEST(Criteria, HornEvidenceIsNondecreasing) {
  for (double b : {0.5, 1.5, 2.5, 3.5}) {
    auto v = horn_trap_classifier(b);
    ASSERT_EQ(v.evidence.size(), 3u);
    for (std::size_t i = 1; i < v.evidence.size(); ++i) EXPECT_GE(v.evidence[i], v.evidence[i - 1]);
    EXPECT_FALSE(v.threshold_note.empty());
  }
}

TEST(Criteria, HornVerdictsMonotoneInExponent) {
  bool seen_nontrap = false;
  for (double b = 0.5; b <= 3.5 + 1e-9; b += 0.25) {
    auto v = horn_trap_classifier(b).verdict;
    if (v == Verdict::NonTrap) seen_nontrap = true;
    if (seen_nontrap) EXPECT_EQ(v, Verdict::NonTrap) << b;
    EXPECT_EQ(v == Verdict::Trap, b <= 2.0) << b;
  }
}

TEST(Criteria, HornRejectsBadInput) {
  EXPECT_THROW(horn_trap_classifier(0.0), Error);
  EXPECT_THROW(horn_trap_classifier(2.0, 5.0), Error);
}

TEST(Criteria, ModifiedKochVerdicts) {
  EXPECT_EQ(modified_koch_classifier(1.5, 1.0 / 3.0).verdict, Verdict::NonTrap);
  auto two = modified_koch_classifier(2.0, 1.0 / 3.0);
  EXPECT_EQ(two.verdict, Verdict::Trap);
  for (std::size_t k = 0; k < two.evidence.size(); ++k) EXPECT_DOUBLE_EQ(two.evidence[k], k + 1.0);
  EXPECT_EQ(modified_koch_classifier(3.0, 0.9).verdict, Verdict::Trap);
  EXPECT_THROW(modified_koch_classifier(2.0, 1.0), Error);
}

TEST(Criteria, ModifiedKochIsPureThresholdAtTwo) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(1e-3, 1.0 - 1e-3), ug(0.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    double a = ua(rng), g = ug(rng);
    auto v = modified_koch_classifier(g, a, 10);
    EXPECT_EQ(v.verdict == Verdict::Trap, g >= 2.0);
    EXPECT_EQ(v.statistic >= 1.0, g >= 2.0);
    for (std::size_t k = 1; k < v.evidence.size(); ++k) EXPECT_GE(v.evidence[k], v.evidence[k - 1]);
  }
}

TEST(Criteria, CornerCoefficientSpecialValues) {
  EXPECT_EQ(corner_coefficient(std::numbers::pi), 0.0);
  EXPECT_NEAR(corner_coefficient(std::numbers::pi / 2.0), 4.0 / std::numbers::pi, 1e-8);
  EXPECT_GT(corner_coefficient(std::numbers::pi / 3.0), corner_coefficient(std::numbers::pi / 2.0));
  EXPECT_THROW(corner_coefficient(0.0), Error);
  EXPECT_THROW(corner_coefficient(2.0 * std::numbers::pi), Error);
}

TEST(Criteria, CornerHalfRightAngleSech) {
  // integrand at γ = π/2 is 2 sech²(πz/2)
  for (double z : {0.0, 0.3, 1.0, 4.0}) {
    double s = 1.0 / std::cosh(std::numbers::pi * z / 2.0);
    EXPECT_NEAR(detail::corner_integrand(std::numbers::pi / 2.0, z), 2.0 * s * s, 1e-14);
  }
}

TEST(Criteria, CornerIntegrandStableFormMatchesRaw) {
  for (double g : {0.3, 1.0, 2.5, 4.0, 6.0})
    for (double z : {1e-6, 0.01, 0.5, 2.0, 8.0})
      EXPECT_NEAR(detail::corner_integrand(g, z), corner_raw(g, z), 1e-12 * std::max(1.0, std::abs(corner_raw(g, z))));
}

TEST(Criteria, CornerCoefficientMatchesTrapezoidOracle) {
  for (double g : {0.5, 1.0, 2.0, 2.8, 4.0, 5.5}) {
    double L = 40.0 / std::min(g, std::numbers::pi);
    double oracle = boost::math::quadrature::trapezoidal([&](double z) { return corner_raw(g, z); }, 0.0,
                                                         std::min(L, 60.0), 1e-12, 20);
    EXPECT_NEAR(corner_coefficient(g), oracle, 1e-8) << g;
  }
}

TEST(Criteria, CornerCoefficientDecreasingOnGrid) {
  double prev = corner_coefficient(0.05);
  for (int i = 2; i <= 62; ++i) {
    double g = 0.05 * i;
    double c = corner_coefficient(std::min(g, std::numbers::pi));
    EXPECT_LT(c, prev) << g;
    if (g < std::numbers::pi) EXPECT_LT(std::abs(corner_coefficient(g + 1e-7) - c), 1e-4 * std::max(1.0, c)) << g;
    prev = c;
  }
  EXPECT_LT(corner_coefficient(4.0), 0.0);
}

TEST(Criteria, KochExponent) {
  const double l4 = std::log(4.0);
  EXPECT_NEAR(koch_heat_exponent(3.0), (2.0 - l4 / std::log(3.0)) / 2.0, 1e-15);
  EXPECT_NEAR(koch_heat_exponent(3.0), 0.36907, 5e-6);
  EXPECT_NEAR(koch_heat_exponent(2.5), 0.24353, 5e-6);
  EXPECT_DOUBLE_EQ(koch_heat_exponent(4.0), 0.5);
  EXPECT_THROW(koch_heat_exponent(2.0), Error);
}

TEST(Criteria, FractionalDiskExponentMatchesKoch) {
  for (double alpha : {2.2, 2.5, 3.0, 3.7}) EXPECT_NEAR(koch_matching_beta(alpha) / 2.0, koch_heat_exponent(alpha), 1e-15);
  EXPECT_NEAR(koch_matching_beta(3.0), 0.73814, 5e-6);
}
