#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "traplab/criteria.hpp"
#include "traplab/estimators.hpp"

using namespace traplab;
using namespace traplab::estimators;

namespace {

const double kPi = std::numbers::pi;

// Heat content of the unit interval for u_t = u_xx by the sine series.
double interval_heat_content(double t) {
  double s = 0.0;
  for (int k = 1; k < 20001; k += 2) s += 8.0 / (kPi * kPi * k * k) * std::exp(-k * k * kPi * kPi * t);
  return s;
}

BatchConfig batch(std::uint64_t seed, unsigned workers = 1) { return BatchConfig{seed, workers, 64}; }

}  // namespace

TEST(Estimators, PowerLawFitRecoversPlantedExponents) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double e : {0.25, 0.37, 0.5}) {
    auto t = dyadic_grid(1e-5, 8);
    std::vector<double> y, se;
    for (double x : t) {
      double v = 3.0 * std::pow(x, e);
      y.push_back(v * (1.0 + noise(rng)));
      se.push_back(0.01 * v);
    }
    auto f = fit_power_law(t, y, se);
    EXPECT_NEAR(f.exponent, e, 0.02);
    EXPECT_NEAR(f.coefficient, 3.0, 0.3);
    EXPECT_GE(f.r_squared, 0.0);
    EXPECT_LE(f.r_squared, 1.0);
    EXPECT_LT(f.t_window.first, f.t_window.second);
  }
  auto exact = fit_power_law({1, 2, 4, 8}, {2, 2 * std::pow(2, 0.25), 2 * std::pow(4, 0.25), 2 * std::pow(8, 0.25)});
  EXPECT_NEAR(exact.exponent, 0.25, 1e-14);
  EXPECT_NEAR(exact.coefficient, 2.0, 1e-13);
  EXPECT_NEAR(exact.r_squared, 1.0, 1e-12);
  EXPECT_THROW(fit_power_law({1, 2}, {1, -1}), Error);
}

TEST(Estimators, LinearFitThroughOrigin) {
  auto f = fit_linear_through_origin({1, 2, 3}, {2, 4, 6}, {0.1, 0.1, 0.1});
  EXPECT_NEAR(f.coefficient, 2.0, 1e-14);
}

TEST(Estimators, HeatContentAtZeroIsArea) {
  PathConfig cfg;
  auto d = geometry::make_disk(1.0);
  auto r = heat_content_mc(d, {0.0, 1e-3}, 500, cfg, batch(2));
  EXPECT_EQ(r.q_hat[0], d.area());
  EXPECT_EQ(r.std_err[0], 0.0);
  EXPECT_LT(r.q_hat[1], d.area());
}

TEST(Estimators, IntervalHeatContentMatchesSeries) {
  auto d = geometry::make_interval(1.0);
  PathConfig cfg;
  std::vector<double> t{1e-3, 4e-3, 1.6e-2, 6.4e-2};
  auto r = heat_content_mc(d, t, 20000, cfg, batch(3));
  for (std::size_t j = 0; j < t.size(); ++j)
    EXPECT_NEAR(r.q_hat[j], interval_heat_content(t[j]), 4.0 * r.std_err[j]) << t[j];
  // the series oracle itself against the small-time law 1 - 4 sqrt(t/π)
  EXPECT_NEAR(interval_heat_content(1e-3), 1.0 - 4.0 * std::sqrt(1e-3 / kPi), 1e-12);
}

TEST(Estimators, SquareHeatContentMatchesProductOracle) {
  auto d = geometry::make_unit_square();
  PathConfig cfg;
  std::vector<double> t{2e-3, 8e-3, 3.2e-2};
  auto r = heat_content_mc(d, t, 20000, cfg, batch(4));
  for (std::size_t j = 0; j < t.size(); ++j) {
    double q1 = interval_heat_content(t[j]);
    EXPECT_NEAR(r.q_hat[j], q1 * q1, 4.0 * r.std_err[j]) << t[j];
  }
}

TEST(Estimators, HeatContentNonIncreasing) {
  auto d = geometry::build_koch_snowflake(3.0, 2);
  PathConfig cfg;
  auto t = dyadic_grid(1e-4, 6);
  auto r = heat_content_mc(d, t, 4000, cfg, batch(5));
  for (std::size_t j = 1; j < t.size(); ++j) EXPECT_LE(r.q_hat[j], r.q_hat[j - 1] + 2.0 * r.std_err[j]);
  EXPECT_EQ(r.censor_rate, 0.0);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Estimators, IdentityClockReproducesHeatContent) {
  auto d = geometry::make_disk(1.0);
  PathConfig cfg;
  auto t = dyadic_grid(1e-4, 4);
  auto a = heat_content_mc(d, t, 3000, cfg, batch(6));
  auto b = fractional_heat_content_mc(d, subordination::BernsteinFunction::identity(), t, 3000, cfg, batch(6));
  EXPECT_EQ(a.q_hat, b.q_hat);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_THROW(fractional_heat_content_mc(d, subordination::BernsteinFunction::gamma(1, 1), t, 10, cfg, batch(6)),
               Error);
}

TEST(Estimators, HeatContentIndependentOfWorkers) {
  auto d = geometry::make_unit_square();
  PathConfig cfg;
  auto t = dyadic_grid(1e-3, 3);
  auto a = fractional_heat_content_mc(d, subordination::BernsteinFunction::stable(0.5), t, 2000, cfg, batch(7, 1));
  auto b = fractional_heat_content_mc(d, subordination::BernsteinFunction::stable(0.5), t, 2000, cfg, batch(7, 4));
  EXPECT_EQ(a.q_hat, b.q_hat);
}

TEST(Estimators, HeatContentRejectsGridBeyondHorizon) {
  PathConfig cfg;
  cfg.h = 1e-4;
  cfg.max_steps = 10;
  EXPECT_THROW(heat_content_mc(geometry::make_disk(1.0), {1e-2}, 10, cfg, batch(8)), Error);
}

TEST(Estimators, FractionalDiskExponentIsHalfBeta) {
  auto d = geometry::make_disk(1.0);
  PathConfig cfg;
  for (double beta : {0.3, 0.5, 0.8}) {
    // thresholds (t/S)^β between roughly 1e-5 and 1e-3
    auto t = dyadic_grid(std::pow(1e-5, 1.0 / beta), 7, std::pow(100.0, 1.0 / (6.0 * beta)));
    auto r = fractional_heat_content_mc(d, subordination::BernsteinFunction::stable(beta), t, 20000, cfg, batch(9));
    auto f = heat_loss_exponent_fit(r, d.area());
    EXPECT_NEAR(f.fit.exponent, beta / 2.0, 0.03) << beta;
    EXPECT_FALSE(f.inconclusive);
  }
}

TEST(Estimators, HeatLossFitOnExactDiskData) {
  HeatContentResult r;
  r.area = kPi;
  r.t = dyadic_grid(1e-5, 7, std::pow(100.0, 1.0 / 6.0));
  for (double t : r.t) {
    r.q_hat.push_back(kPi - (4.0 * std::sqrt(kPi * t) - kPi * t));
    r.std_err.push_back(0.0);
  }
  auto f = heat_loss_exponent_fit(r, kPi);
  EXPECT_NEAR(f.fit.exponent, 0.5, 0.02);
  EXPECT_NEAR(f.fit.coefficient, 4.0 * std::sqrt(kPi), 0.07 * 4.0 * std::sqrt(kPi));
  EXPECT_FALSE(f.inconclusive);
  r.q_hat[3] = r.q_hat[1] + 1e-3;  // heat content rising
  EXPECT_TRUE(heat_loss_exponent_fit(r, kPi).inconclusive);
  EXPECT_THROW(heat_loss_exponent_fit(r, kPi, 1e-3, 1e-2), Error);
}

TEST(Estimators, SpearmanRho) {
  EXPECT_DOUBLE_EQ(spearman_rho({1, 2, 3, 4}), 1.0);
  EXPECT_DOUBLE_EQ(spearman_rho({4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman_rho({1, 3, 2, 4}), 0.8);
}

TEST(Estimators, TrapClassificationRule) {
  TrapScan s;
  TrapScanOptions opt;
  double ratio, rho;
  s.mean_hitting_times = {1, 3, 9, 27};
  s.censor_rates = {0, 0, 0, 0};
  EXPECT_EQ(classify_trap_scan(s, opt, &ratio, &rho), TrapClass::Growing);
  s.mean_hitting_times = {1, 1.2, 1.1, 1.3};
  EXPECT_EQ(classify_trap_scan(s, opt, &ratio, &rho), TrapClass::Bounded);
  s.mean_hitting_times = {1, 30, 2, 6};  // large ratio without a monotone trend
  EXPECT_EQ(classify_trap_scan(s, opt, &ratio, &rho), TrapClass::Bounded);
  s.censor_rates = {0, 0, 0.25, 0};
  EXPECT_EQ(classify_trap_scan(s, opt, &ratio, &rho), TrapClass::Inconclusive);
}

TEST(Estimators, SquareTrapScanIsBoundedAndStable) {
  auto d = geometry::make_unit_square();
  std::vector<LabeledStart> starts;
  for (double q : {0.15, 0.25, 0.33, 0.42}) starts.push_back({std::to_string(q), {q, q}});
  PathConfig cfg;
  cfg.h = 1e-4;
  cfg.max_steps = 200000;
  paths::TargetBall ball{{0.5, 0.5}, 0.1};
  auto a = trap_scan(d, ball, starts, 200, cfg.horizon(), cfg, batch(10));
  EXPECT_EQ(a.classification, TrapClass::Bounded);
  for (double c : a.censor_rates) EXPECT_EQ(c, 0.0);
  auto b = trap_scan(d, ball, starts, 400, cfg.horizon(), cfg, batch(10));
  EXPECT_EQ(b.classification, a.classification);
}

TEST(Estimators, TrapScanCensoringIsInconclusive) {
  auto d = geometry::make_unit_square();
  std::vector<LabeledStart> starts{{"a", {0.05, 0.05}}, {"b", {0.1, 0.1}}};
  PathConfig cfg;
  cfg.h = 1e-4;
  cfg.max_steps = 20;
  auto s = trap_scan(d, {{0.5, 0.5}, 0.1}, starts, 50, cfg.horizon(), cfg, batch(11));
  EXPECT_EQ(s.classification, TrapClass::Inconclusive);
  EXPECT_THROW(trap_scan(d, {{0.5, 0.5}, 0.6}, starts, 50, 1.0, cfg, batch(11)), Error);
}

TEST(Estimators, StickyExitMeans) {
  PathConfig cfg;
  cfg.h = 1e-4;
  cfg.max_steps = 100000000;
  auto g = sticky_exit_mean(1.0, 0.0, subordination::BernsteinFunction::gamma(2.0, 1.0), 1.0, 4000, cfg, batch(12));
  EXPECT_DOUBLE_EQ(g.closed_form, 2.5);
  EXPECT_NEAR(g.estimate, 2.5, 4.0 * g.std_err);
  EXPECT_FALSE(g.non_convergent);
  auto end = sticky_exit_mean(1.0, 1.0, subordination::BernsteinFunction::identity(), 1.0, 10, cfg, batch(12));
  EXPECT_EQ(end.estimate, 0.0);
  EXPECT_EQ(end.closed_form, 0.0);
  auto st = sticky_exit_mean(1.0, 0.0, subordination::BernsteinFunction::stable(0.5), 1.0, 1024, cfg, batch(13));
  EXPECT_TRUE(st.non_convergent);
  EXPECT_TRUE(std::isinf(st.closed_form));
  EXPECT_EQ(st.running_mean.back().first, 1024u);
}

TEST(Estimators, MsdFitWindow) {
  paths::MsdSeries s;
  for (int k = 0; k < 12; ++k) {
    double t = std::pow(2.0, k);
    s.times.push_back(t);
    s.msd.push_back(1e-4 * std::pow(t, 0.8));
    s.std_err.push_back(1e-6);
  }
  auto f = msd_fit(s, 1.0, 2.0);
  EXPECT_NEAR(f.exponent, 0.8, 1e-12);
  EXPECT_EQ(f.t_window.first, 2.0);
  EXPECT_THROW(msd_fit(s, 0.02, 2.0), Error);
}
