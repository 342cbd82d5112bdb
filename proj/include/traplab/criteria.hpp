#pragma once

// Closed-form side of the trap experiments: the horn integral test, the
// modified-Koch series test, polygon corner coefficients and the Koch
// heat-loss exponent.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "traplab/core.hpp"

namespace traplab::criteria {

inline constexpr const char* kModule = "criteria";

enum class Verdict { Trap, NonTrap };

inline const char* to_string(Verdict v) { return v == Verdict::Trap ? "Trap" : "NonTrap"; }

struct TrapVerdict {
  Verdict verdict = Verdict::NonTrap;
  std::vector<double> evidence;  // partial sums or partial integrals, nondecreasing
  std::string threshold_note;
  double statistic = 0.0;  // the quantity compared against the threshold
};

// ---------------------------------------------------------------------------
// Horn {x > 1, |y| < f(x)}, f(x) = exp(-x^b)

// Tail exponent threshold: the integrand decays like x^{1-b}, so divergence of
// its integral is declared when the fitted exponent is >= -1 - kHornSlack.
inline constexpr double kHornSlack = 0.01;

namespace detail {

// g(x) = f(x) ∫_1^x dr / f(r) = ∫_1^x exp(r^b - x^b) dr. With u = x^b - r^b
// this is ∫_0^{x^b-1} e^{-u} / (b r(u)^{b-1}) du, smooth and bounded.
inline double horn_integrand(double b, double x) {
  if (x <= 1.0) return 0.0;
  const double xb = std::pow(x, b);
  const double U = xb - 1.0;
  auto f = [&](double u) {
    double r = std::pow(std::max(xb - u, 1.0), 1.0 / b);
    return std::exp(-u) / (b * std::pow(r, b - 1.0));
  };
  double err = 0.0;
  const double top = std::min(U, 80.0);
  double val = 0.0;
  // split at the e^{-u} scale so the kronrod rule sees smooth pieces
  double lo = 0.0;
  for (double hi : {1.0, 4.0, 16.0, 80.0}) {
    double end = std::min(hi, top);
    if (end > lo) {
      val += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, end, 12, 1e-13, &err);
      lo = end;
    }
  }
  require(std::isfinite(val), kModule, ErrorCode::Numerical, "horn inner integral failed");
  return val;
}

}  // namespace detail

inline TrapVerdict horn_trap_classifier(double b, double x_cap = 100.0) {
  require(b > 0.0, kModule, ErrorCode::InvalidArgument, "horn exponent b must be positive");
  require(x_cap >= 10.0, kModule, ErrorCode::InvalidArgument, "x_cap must be >= 10");
  auto g = [b](double x) { return detail::horn_integrand(b, x); };
  TrapVerdict out;
  const std::vector<double> caps{x_cap / 4.0, x_cap / 2.0, x_cap};
  double acc = 0.0, lo = 1.0, err = 0.0;
  for (double c : caps) {
    acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, lo, c, 15, 1e-11, &err);
    lo = c;
    out.evidence.push_back(acc);
  }
  // least-squares tail exponent of the integrand through the three caps
  double mx = 0, my = 0;
  std::vector<double> lx, ly;
  for (double c : caps) {
    double v = g(c);
    require(v > 0.0 && std::isfinite(v), kModule, ErrorCode::Numerical, "horn integrand not positive at cap");
    lx.push_back(std::log(c));
    ly.push_back(std::log(v));
    mx += lx.back() / 3.0;
    my += ly.back() / 3.0;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  out.statistic = sxy / sxx;
  out.verdict = out.statistic >= -1.0 - kHornSlack ? Verdict::Trap : Verdict::NonTrap;
  out.threshold_note = "integrand tail exponent " + std::to_string(out.statistic) + " vs -1 (slack 0.01)";
  return out;
}

// ---------------------------------------------------------------------------
// Modified Koch: Σ n|D_n| behaves like Σ (a^{2-γ})^k

inline TrapVerdict modified_koch_classifier(double gamma, double a, int terms = 40) {
  require(a > 0.0 && a < 1.0, kModule, ErrorCode::InvalidArgument, "scale a must lie in (0,1)");
  require(terms >= 1, kModule, ErrorCode::InvalidArgument, "need at least one term");
  TrapVerdict out;
  const double ratio = std::pow(a, 2.0 - gamma);
  double s = 0.0, term = 1.0;
  for (int k = 1; k <= terms; ++k) {
    term *= ratio;
    s += term;
    out.evidence.push_back(s);
  }
  out.statistic = ratio;
  // a < 1, so ratio >= 1 exactly when 2 - γ <= 0
  out.verdict = gamma >= 2.0 ? Verdict::Trap : Verdict::NonTrap;
  out.threshold_note = "geometric ratio a^(2-gamma) = " + std::to_string(ratio) + " vs 1";
  return out;
}

// ---------------------------------------------------------------------------
// Corner coefficient c(γ) = 4 ∫_0^∞ sinh((π-γ)z) / (sinh(πz) cosh(γz)) dz

namespace detail {

inline double corner_integrand(double gamma, double z) {
  const double pi = std::numbers::pi;
  const double a = pi - gamma;
  if (a == 0.0) return 0.0;
  if (z == 0.0) return 4.0 * a / pi;
  const double aa = std::abs(a);
  // all factors written as e^{-cz} products so nothing overflows
  double num = 2.0 * std::exp((aa - pi - gamma) * z) * (-std::expm1(-2.0 * aa * z));
  double den = (-std::expm1(-2.0 * pi * z)) * (1.0 + std::exp(-2.0 * gamma * z));
  return 4.0 * std::copysign(num / den, a);
}

}  // namespace detail

inline double corner_coefficient(double gamma) {
  const double pi = std::numbers::pi;
  require(gamma > 0.0 && gamma < 2.0 * pi, kModule, ErrorCode::InvalidArgument, "corner angle must lie in (0, 2pi)");
  if (gamma == pi) return 0.0;
  auto f = [gamma](double z) { return detail::corner_integrand(gamma, z); };
  // integrand decays like e^{-2 min(γ, π) z}; split at a few decay lengths
  const double rate = 2.0 * std::min(gamma, pi);
  const double split = 4.0 / rate;
  double err1 = 0.0, err2 = 0.0, l1 = 0.0;
  double head = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, split, 20, 1e-14, &err1, &l1);
  boost::math::quadrature::exp_sinh<double> es;
  double tail = es.integrate([&](double z) { return f(split + z); }, 1e-14, &err2);
  double val = head + tail;
  require(std::isfinite(val) && err1 + err2 <= 1e-9 * std::max(1.0, std::abs(val)), kModule, ErrorCode::Numerical,
          "corner coefficient quadrature did not converge");
  return val;
}

// ---------------------------------------------------------------------------
// Koch heat-loss exponent (2 - d_f)/2 with d_f = log 4 / log α

inline double koch_dimension(double alpha) {
  require(alpha > 2.0 && alpha <= 4.0, kModule, ErrorCode::InvalidArgument, "Koch scale factor must lie in (2, 4]");
  return std::log(4.0) / std::log(alpha);
}

inline double koch_heat_exponent(double alpha) { return (2.0 - koch_dimension(alpha)) / 2.0; }

// Subordinator index whose fractional disk exponent β/2 equals the Koch exponent.
inline double koch_matching_beta(double alpha) { return 2.0 - koch_dimension(alpha); }

}  // namespace traplab::criteria
