#pragma once

// Bernstein functions, subordinator and inverse-subordinator sampling,
// moment oracles, the convolution derivative D^Φ_t and Mittag-Leffler values
// on the negative real axis.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "traplab/core.hpp"

namespace traplab::subordination {

inline constexpr const char* kModule = "subordination";

enum class BernsteinKind { Stable, Gamma, TemperedStable, Identity };

struct BernsteinFunction {
  BernsteinKind kind = BernsteinKind::Identity;
  double alpha = 0.0;  // Stable, TemperedStable
  double a = 0.0;      // Gamma
  double b = 0.0;      // Gamma
  double theta = 0.0;  // TemperedStable

  static BernsteinFunction stable(double alpha) {
    require(alpha > 0.0 && alpha < 1.0, kModule, ErrorCode::InvalidArgument, "stable index must lie in (0,1)");
    return {BernsteinKind::Stable, alpha, 0.0, 0.0, 0.0};
  }
  static BernsteinFunction gamma(double a, double b) {
    require(a > 0.0 && b > 0.0, kModule, ErrorCode::InvalidArgument, "gamma parameters must be positive");
    return {BernsteinKind::Gamma, 0.0, a, b, 0.0};
  }
  static BernsteinFunction tempered_stable(double alpha, double theta) {
    require(alpha > 0.0 && alpha < 1.0, kModule, ErrorCode::InvalidArgument, "stable index must lie in (0,1)");
    require(theta > 0.0, kModule, ErrorCode::InvalidArgument, "tempering must be positive");
    return {BernsteinKind::TemperedStable, alpha, 0.0, 0.0, theta};
  }
  static BernsteinFunction identity() { return {}; }

  std::string describe() const {
    switch (kind) {
      case BernsteinKind::Stable: return "stable(alpha=" + std::to_string(alpha) + ")";
      case BernsteinKind::Gamma: return "gamma(a=" + std::to_string(a) + ",b=" + std::to_string(b) + ")";
      case BernsteinKind::TemperedStable:
        return "tempered_stable(alpha=" + std::to_string(alpha) + ",theta=" + std::to_string(theta) + ")";
      case BernsteinKind::Identity: return "identity";
    }
    return "unknown";
  }
};

inline double phi(const BernsteinFunction& bf, double lambda) {
  require(lambda >= 0.0, kModule, ErrorCode::InvalidArgument, "phi needs lambda >= 0");
  switch (bf.kind) {
    case BernsteinKind::Stable: return std::pow(lambda, bf.alpha);
    case BernsteinKind::Gamma: return bf.a * std::log1p(lambda / bf.b);
    case BernsteinKind::TemperedStable: return std::pow(lambda + bf.theta, bf.alpha) - std::pow(bf.theta, bf.alpha);
    case BernsteinKind::Identity: return lambda;
  }
  return 0.0;
}

// Mean of H_1; +inf for the stable family.
inline double phi_prime_at_zero(const BernsteinFunction& bf) {
  switch (bf.kind) {
    case BernsteinKind::Stable: return std::numeric_limits<double>::infinity();
    case BernsteinKind::Gamma: return bf.a / bf.b;
    case BernsteinKind::TemperedStable: return bf.alpha * std::pow(bf.theta, bf.alpha - 1.0);
    case BernsteinKind::Identity: return 1.0;
  }
  return 0.0;
}

// Tail of the Lévy measure, Π̄(z) = Π((z, ∞)). The identity has no jumps.
inline double tail(const BernsteinFunction& bf, double z) {
  require(z > 0.0, kModule, ErrorCode::InvalidArgument, "tail needs z > 0");
  using boost::math::tgamma;
  switch (bf.kind) {
    case BernsteinKind::Stable: return std::pow(z, -bf.alpha) / tgamma(1.0 - bf.alpha);
    case BernsteinKind::Gamma: return bf.a * boost::math::expint(1, bf.b * z);
    case BernsteinKind::TemperedStable: {
      double x = bf.theta * z, al = bf.alpha;
      double upper = tgamma(1.0 - al) * boost::math::gamma_q(1.0 - al, x);
      return std::pow(bf.theta, al) / tgamma(1.0 - al) * (std::pow(x, -al) * std::exp(-x) - upper);
    }
    case BernsteinKind::Identity: return 0.0;
  }
  return 0.0;
}

// I(z) = ∫_0^z Π̄(s) ds, used to integrate the kernel exactly over each cell.
inline double tail_integral(const BernsteinFunction& bf, double z) {
  require(z >= 0.0, kModule, ErrorCode::InvalidArgument, "tail integral needs z >= 0");
  if (z == 0.0) return 0.0;
  using boost::math::tgamma;
  switch (bf.kind) {
    case BernsteinKind::Stable: return std::pow(z, 1.0 - bf.alpha) / tgamma(2.0 - bf.alpha);
    case BernsteinKind::Gamma: {
      double u = bf.b * z;
      return bf.a / bf.b * (u * boost::math::expint(1, u) - std::expm1(-u));
    }
    case BernsteinKind::TemperedStable: {
      double al = bf.alpha, th = bf.theta;
      double lower = tgamma(1.0 - al) * boost::math::gamma_p(1.0 - al, th * z);
      return z * tail(bf, z) + al / tgamma(1.0 - al) * std::pow(th, al - 1.0) * lower;
    }
    case BernsteinKind::Identity: return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Sampling

// One-sided stable variable with E[exp(-λS)] = exp(-λ^α) (Kanter's
// representation, evaluated in logs).
inline double sample_stable_unit(double alpha, Rng& rng) {
  double u = std::numbers::pi * uniform01(rng);
  double e = -std::log(uniform01(rng));
  double log_s = std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha +
                 (1.0 - alpha) / alpha * (std::log(std::sin((1.0 - alpha) * u)) - std::log(e));
  return std::exp(log_s);
}

// Draw of H_t for a subordinator with Laplace exponent Φ.
inline double sample_subordinator_increment(const BernsteinFunction& bf, double t, Rng& rng) {
  require(t >= 0.0 && std::isfinite(t), kModule, ErrorCode::InvalidArgument, "increment length must be >= 0");
  if (t == 0.0) return 0.0;
  switch (bf.kind) {
    case BernsteinKind::Stable: return std::pow(t, 1.0 / bf.alpha) * sample_stable_unit(bf.alpha, rng);
    case BernsteinKind::Gamma: {
      std::gamma_distribution<double> g(bf.a * t, 1.0 / bf.b);
      return g(rng);
    }
    case BernsteinKind::TemperedStable: {
      // exponential tilting of the stable law: accept a stable draw S with
      // probability exp(-θS); pieces of length ≤ θ^-α keep acceptance ≥ 1/e
      double mass = t * std::pow(bf.theta, bf.alpha);
      long pieces = std::max(1L, static_cast<long>(std::ceil(mass)));
      double dt = t / static_cast<double>(pieces);
      double scale = std::pow(dt, 1.0 / bf.alpha);
      double total = 0.0;
      for (long p = 0; p < pieces; ++p) {
        for (int tries = 0;; ++tries) {
          require(tries < 100000, kModule, ErrorCode::IterationCap, "tempered-stable rejection failed");
          double s = scale * sample_stable_unit(bf.alpha, rng);
          if (uniform01(rng) <= std::exp(-bf.theta * s)) {
            total += s;
            break;
          }
        }
      }
      return total;
    }
    case BernsteinKind::Identity: return t;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Moment oracles

// E[(L_t)^β] for the inverse of the α-stable subordinator.
inline double inverse_stable_moment(double alpha, double beta, double t) {
  require(alpha > 0.0 && alpha < 1.0 && beta > -1.0, kModule, ErrorCode::InvalidArgument, "bad moment parameters");
  using boost::math::tgamma;
  return tgamma(beta + 1.0) / tgamma(alpha * beta + 1.0) * std::pow(t, alpha * beta);
}

// E[(H_t)^β] for the α-stable subordinator, β < α.
inline double stable_moment(double alpha, double beta, double t) {
  require(alpha > 0.0 && alpha < 1.0 && beta < alpha, kModule, ErrorCode::InvalidArgument,
          "stable moments exist only for beta < alpha");
  using boost::math::tgamma;
  return tgamma(1.0 - beta / alpha) / tgamma(1.0 - beta) * std::pow(t, beta / alpha);
}

// Upper bound on P(ζ^L > t) given E[ζ^{β/α}].
inline double inv_stable_tail_bound(double alpha, double beta, double e_zeta_moment, double t) {
  require(0.0 < beta && beta < alpha && alpha < 1.0, kModule, ErrorCode::InvalidArgument,
          "tail bound needs 0 < beta < alpha < 1");
  require(t > 0.0, kModule, ErrorCode::InvalidArgument, "tail bound needs t > 0");
  using boost::math::tgamma;
  return tgamma(1.0 - beta / alpha) / tgamma(1.0 - beta) * e_zeta_moment * std::pow(t, -beta);
}

// ---------------------------------------------------------------------------
// Inverse subordinator

struct InverseSample {
  double L = 0.0;  // first-passage time over t (cell midpoint)
  double H = 0.0;  // subordinator value just after passage
};

struct InverseSamplerConfig {
  double rel_tol = 2e-3;        // accepted relative change of E[L_t] between grid halvings
  double delta = 0.0;           // fixed grid step; 0 selects it by pilot refinement
  std::size_t pilot_paths = 4000;
  int max_refinements = 16;
  std::uint64_t pilot_seed = 0x5eed;
  std::size_t max_steps = 100000000;
};

namespace detail {

// Walks H on the grid kδ; returns the passage midpoint on that grid and, when
// coarse != nullptr, on the grid 2δ from the same path.
inline InverseSample walk_to_passage(const BernsteinFunction& bf, double t, double delta, Rng& rng,
                                     std::size_t max_steps, InverseSample* coarse = nullptr) {
  double h = 0.0;
  std::size_t k = 0;
  bool fine_done = false;
  InverseSample fine;
  for (;;) {
    require(k < max_steps, kModule, ErrorCode::ResourceCap, "inverse-subordinator walk exceeded max_steps");
    h += sample_subordinator_increment(bf, delta, rng);
    ++k;
    if (!fine_done && h > t) {
      fine = {(static_cast<double>(k) - 0.5) * delta, h};
      fine_done = true;
      if (!coarse) return fine;
    }
    if (fine_done && coarse && k % 2 == 0) {
      *coarse = {(static_cast<double>(k / 2) - 0.5) * 2.0 * delta, h};
      return fine;
    }
  }
}

}  // namespace detail

// Samples (L_t, H_{L_t}) by path refinement with a grid step fixed at
// construction: δ is halved until the coupled pilot estimate of E[L_t] moves
// by less than rel_tol/2 (mean change plus two standard errors).
class InverseSubordinatorSampler {
 public:
  InverseSubordinatorSampler(BernsteinFunction bf, double t, InverseSamplerConfig cfg = {})
      : bf_(bf), t_(t), cfg_(cfg) {
    require(t > 0.0 && std::isfinite(t), kModule, ErrorCode::InvalidArgument, "inverse sampling needs t > 0");
    if (bf_.kind == BernsteinKind::Identity) {
      delta_ = 0.0;
      return;
    }
    delta_ = cfg_.delta > 0.0 ? cfg_.delta : choose_delta();
  }

  double delta() const { return delta_; }
  double t() const { return t_; }
  const std::vector<double>& pilot_changes() const { return changes_; }

  InverseSample sample(Rng& rng) const {
    if (bf_.kind == BernsteinKind::Identity) return {t_, t_};
    return detail::walk_to_passage(bf_, t_, delta_, rng, cfg_.max_steps);
  }

 private:
  double choose_delta() {
    // start near the scale where E[H_δ] or the stable scale is comparable to t
    double delta = t_ / 4.0;
    if (bf_.kind == BernsteinKind::Stable || bf_.kind == BernsteinKind::TemperedStable)
      delta = std::pow(t_, bf_.alpha) / 4.0;
    else if (bf_.kind == BernsteinKind::Gamma)
      delta = t_ * bf_.b / bf_.a / 4.0;
    for (int j = 0; j < cfg_.max_refinements; ++j) {
      double fine_step = delta / 2.0;
      std::vector<double> fine_l(cfg_.pilot_paths), diff(cfg_.pilot_paths);
      Rng rng = make_stream(cfg_.pilot_seed, static_cast<std::uint64_t>(j));
      for (std::size_t i = 0; i < cfg_.pilot_paths; ++i) {
        InverseSample coarse;
        InverseSample fine = detail::walk_to_passage(bf_, t_, fine_step, rng, cfg_.max_steps, &coarse);
        fine_l[i] = fine.L;
        diff[i] = coarse.L - fine.L;
      }
      double ef = mean_estimate(fine_l).mean;
      auto d = mean_estimate(diff);
      // the move must be small even at the upper end of its confidence band
      double change = (std::abs(d.mean) + 2.0 * d.std_err) / std::max(ef, 1e-300);
      changes_.push_back(change);
      if (change < cfg_.rel_tol / 2.0) return fine_step;
      delta = fine_step;
    }
    throw Error(kModule, ErrorCode::RefinementCap,
                "inverse-subordinator grid refinement cap reached for t=" + std::to_string(t_));
  }

  BernsteinFunction bf_;
  double t_;
  InverseSamplerConfig cfg_;
  double delta_ = 0.0;
  std::vector<double> changes_;
};

inline InverseSample sample_inverse_at(const BernsteinFunction& bf, double t, Rng& rng,
                                       const InverseSamplerConfig& cfg = {}) {
  InverseSubordinatorSampler s(bf, t, cfg);
  return s.sample(rng);
}

// ---------------------------------------------------------------------------
// Convolution derivative D^Φ_t u = ∫_0^t u'(s) Π̄(t-s) ds

inline constexpr std::size_t kMinDerivativeCells = 16;

// `u` holds u(kh), k = 0..N, with h = t/N. u' is taken constant on each cell
// and the kernel is integrated exactly over the cell. For the identity the
// operator is the ordinary derivative, taken as the second-order backward
// difference (exact on quadratics).
inline double nonlocal_derivative(const std::vector<double>& u, double t, const BernsteinFunction& bf) {
  require(t > 0.0, kModule, ErrorCode::InvalidArgument, "nonlocal derivative needs t > 0");
  require(u.size() >= kMinDerivativeCells + 1, kModule, ErrorCode::InvalidArgument,
          "grid too coarse: need at least " + std::to_string(kMinDerivativeCells) + " cells");
  const std::size_t n = u.size() - 1;
  const double h = t / static_cast<double>(n);
  if (bf.kind == BernsteinKind::Identity) return (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
  NeumaierSum s;
  double upper = tail_integral(bf, t);
  for (std::size_t i = 0; i < n; ++i) {
    double lower = tail_integral(bf, t - static_cast<double>(i + 1) * h);
    double w = upper - lower;  // ∫ over cell i of Π̄(t - s) ds
    s.add((u[i + 1] - u[i]) / h * w);
    upper = lower;
  }
  return s.value();
}

// D^Φ u at every grid time kh, k = 0..N (value 0 at k = 0).
inline std::vector<double> nonlocal_derivative_series(const std::vector<double>& u, double h,
                                                      const BernsteinFunction& bf) {
  require(h > 0.0 && u.size() >= 2, kModule, ErrorCode::InvalidArgument, "series needs h > 0 and two samples");
  const std::size_t n = u.size() - 1;
  std::vector<double> out(n + 1, 0.0);
  if (bf.kind == BernsteinKind::Identity) {
    for (std::size_t k = 1; k <= n; ++k)
      out[k] = k == 1 ? (u[1] - u[0]) / h : (3.0 * u[k] - 4.0 * u[k - 1] + u[k - 2]) / (2.0 * h);
    return out;
  }
  // cell weights depend only on the lag
  std::vector<double> I(n + 1);
  for (std::size_t j = 0; j <= n; ++j) I[j] = tail_integral(bf, static_cast<double>(j) * h);
  for (std::size_t k = 1; k <= n; ++k) {
    NeumaierSum s;
    for (std::size_t i = 0; i < k; ++i) s.add((u[i + 1] - u[i]) / h * (I[k - i] - I[k - i - 1]));
    out[k] = s.value();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mittag-Leffler

// E_β(z) for z ≤ 0, 0 < β ≤ 1. Power series while x^{1/β} ≤ 5 (terms stay
// below e^5, so cancellation costs < 3 digits); beyond that the spectral
// representation E_β(-x) = ∫_0^∞ e^{-r x^{1/β}} K_β(r) dr with
// K_β(r) = sin(βπ) r^{β-1} / (π (r^{2β} + 2 r^β cos βπ + 1)).
inline double mittag_leffler(double beta, double z) {
  require(beta > 0.0 && beta <= 1.0, kModule, ErrorCode::InvalidArgument, "Mittag-Leffler needs beta in (0,1]");
  require(z <= 0.0 && std::isfinite(z), kModule, ErrorCode::InvalidArgument,
          "Mittag-Leffler is only supported on the non-positive real axis");
  const double x = -z;
  if (x == 0.0) return 1.0;
  if (beta == 1.0) return std::exp(-x);
  const double scale = std::pow(x, 1.0 / beta);
  if (scale <= 5.0) {
    NeumaierSum s;
    double logx = std::log(x);
    for (int k = 0; k < 2000; ++k) {
      double mag = std::exp(k * logx - std::lgamma(beta * k + 1.0));
      s.add(k % 2 == 0 ? mag : -mag);
      if (k > 10 && mag < 1e-18) return s.value();
    }
    throw Error(kModule, ErrorCode::Numerical, "Mittag-Leffler series did not converge");
  }
  const double sb = std::sin(beta * std::numbers::pi), cb = std::cos(beta * std::numbers::pi);
  auto f = [&](double r) {
    if (r <= 0.0) return 0.0;
    double rb = std::pow(r, beta);
    return sb / std::numbers::pi * rb / r * std::exp(-r * scale) / (rb * rb + 2.0 * rb * cb + 1.0);
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  double head = ts.integrate(f, 0.0, 1.0, 1e-14);
  double rest = es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), 1e-14);
  return head + rest;
}

}  // namespace traplab::subordination
