#pragma once

// Monte Carlo functionals on top of the path engines: heat content and its
// fractional version, heat-loss exponent fits, trap scans, sticky exit means
// and MSD slopes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "traplab/core.hpp"
#include "traplab/geometry.hpp"
#include "traplab/paths.hpp"
#include "traplab/subordination.hpp"

namespace traplab::estimators {

inline constexpr const char* kModule = "estimators";

using geometry::DomainKind;
using geometry::DomainSpec;
using paths::PathConfig;
using subordination::BernsteinFunction;
using subordination::BernsteinKind;

// ---------------------------------------------------------------------------
// Fits

// Weighted least squares of log y on log t; weights (y/se)², or uniform when
// any standard error is zero.
inline FitResult fit_power_law(const std::vector<double>& t, const std::vector<double>& y,
                               const std::vector<double>& se = {}) {
  require(t.size() == y.size() && (se.empty() || se.size() == y.size()), kModule, ErrorCode::InvalidArgument,
          "fit arrays differ in length");
  require(t.size() >= 2, kModule, ErrorCode::InvalidArgument, "power-law fit needs at least two points");
  bool weighted = !se.empty() && std::all_of(se.begin(), se.end(), [](double s) { return s > 0.0; });
  const std::size_t n = t.size();
  std::vector<double> lx(n), ly(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    require(t[i] > 0.0 && y[i] > 0.0, kModule, ErrorCode::InvalidArgument, "power-law fit needs positive data");
    lx[i] = std::log(t[i]);
    ly[i] = std::log(y[i]);
    if (weighted) w[i] = (y[i] / se[i]) * (y[i] / se[i]);
  }
  double sw = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) sw += w[i], mx += w[i] * lx[i], my += w[i] * ly[i];
  mx /= sw, my /= sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (lx[i] - mx) * (lx[i] - mx);
    sxy += w[i] * (lx[i] - mx) * (ly[i] - my);
    syy += w[i] * (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, kModule, ErrorCode::Singular, "fit abscissae coincide");
  FitResult f;
  f.exponent = sxy / sxx;
  f.coefficient = std::exp(my - f.exponent * mx);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = ly[i] - (my + f.exponent * (lx[i] - mx));
    rss += w[i] * r * r;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - rss / syy, 0.0, 1.0) : 1.0;
  if (n > 2) {
    // with known weights the slope variance is 1/sxx; otherwise use the residual scale
    double scale = weighted ? std::max(1.0, rss / static_cast<double>(n - 2)) : rss / static_cast<double>(n - 2);
    f.std_err = std::sqrt(scale / sxx);
  }
  auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  f.t_window = {*lo, *hi};
  f.points = n;
  return f;
}

struct LinearFit {
  double coefficient = 0.0;
  double std_err = 0.0;
};

// y ≈ c·t through the origin, weighted by 1/se².
inline LinearFit fit_linear_through_origin(const std::vector<double>& t, const std::vector<double>& y,
                                           const std::vector<double>& se) {
  require(t.size() == y.size() && se.size() == y.size() && !t.empty(), kModule, ErrorCode::InvalidArgument,
          "fit arrays differ in length");
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double w = se[i] > 0.0 ? 1.0 / (se[i] * se[i]) : 1.0;
    stt += w * t[i] * t[i];
    sty += w * t[i] * y[i];
  }
  require(stt > 0.0, kModule, ErrorCode::Singular, "linear fit needs a nonzero abscissa");
  return {sty / stt, 1.0 / std::sqrt(stt)};
}

// ---------------------------------------------------------------------------
// Heat content

struct HeatContentOptions {
  // the smallest positive survival threshold is resolved by at least this many steps
  std::size_t steps_per_min_time = 32;
  // starts farther than this many sqrt(2 D t_max) from the boundary survive without simulation
  double far_field_sigmas = 7.0;
};

struct HeatContentResult {
  std::vector<double> t;
  std::vector<double> q_hat;
  std::vector<double> std_err;
  std::vector<double> loss;  // area - q_hat
  double area = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_inside = 0;
  double censor_rate = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline constexpr std::uint64_t kStableClockTag = 0x5AB1E;

struct StartSampler {
  const DomainSpec& d;
  std::size_t n;
  std::size_t m = 1;  // strata per axis
  std::size_t strata = 1;
  double measure = 0.0;

  StartSampler(const DomainSpec& dom, std::size_t n_samples) : d(dom), n(n_samples) {
    if (d.kind() == DomainKind::Interval) {
      m = std::max<std::size_t>(1, std::min<std::size_t>(n, 1 << 20));
      strata = m;
      measure = d.length();
    } else {
      m = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::sqrt(double(n))), 1024));
      strata = m * m;
      auto b = d.bbox();
      measure = (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y);
    }
  }

  // Sample i is uniform in stratum i mod strata while complete rounds of
  // strata remain; the remainder is uniform over the whole box.
  Point draw(std::size_t i, Rng& rng) const {
    const bool stratified = i < (n / strata) * strata;
    const std::size_t c = i % strata;
    if (d.kind() == DomainKind::Interval) {
      double u = uniform01(rng);
      double x = stratified ? (static_cast<double>(c) + u) / static_cast<double>(m) : u;
      return {x * d.length(), 0.0};
    }
    auto b = d.bbox();
    double u = uniform01(rng), v = uniform01(rng);
    if (stratified) {
      u = (static_cast<double>(c % m) + u) / static_cast<double>(m);
      v = (static_cast<double>(c / m) + v) / static_cast<double>(m);
    }
    return {b.lo.x + u * (b.hi.x - b.lo.x), b.lo.y + v * (b.hi.y - b.lo.y)};
  }
};

struct SurvivalRow {
  std::vector<char> exited;
  bool inside = false;
  bool censored = false;
};

// Shared engine. With `beta` the killed lifetime ζ is run under an
// independent β-stable clock: survival past t is {H_ζ > t} = {ζ > (t/S)^β}
// with S the unit stable draw, taken from its own stream so the killed paths
// are identical to the unclocked run.
inline HeatContentResult heat_content_impl(const DomainSpec& d, std::optional<double> beta,
                                           const std::vector<double>& t_grid, std::size_t n_samples,
                                           const PathConfig& cfg, const BatchConfig& batch,
                                           const HeatContentOptions& opt) {
  paths::check_config(cfg);
  require(!t_grid.empty() && std::is_sorted(t_grid.begin(), t_grid.end()) && t_grid.front() >= 0.0, kModule,
          ErrorCode::InvalidArgument, "t grid must be sorted and non-negative");
  require(t_grid.back() <= cfg.horizon() * (1.0 + 1e-12), kModule, ErrorCode::InvalidArgument,
          "t grid exceeds the h * max_steps horizon");
  require(n_samples >= 2, kModule, ErrorCode::InvalidArgument, "need at least two samples");
  require(opt.steps_per_min_time >= 1, kModule, ErrorCode::InvalidArgument, "steps_per_min_time must be >= 1");
  StartSampler sampler(d, n_samples);
  const double T_cap = cfg.horizon();
  const std::uint64_t clock_seed = derive_seed(batch.seed, kStableClockTag);
  auto rows = run_blocks<SurvivalRow>(n_samples, batch, [&](std::size_t i, Rng& rng) {
    SurvivalRow r;
    r.exited.assign(t_grid.size(), 0);
    Point x0 = sampler.draw(i, rng);
    if (!d.contains(x0)) return r;
    r.inside = true;
    std::vector<double> thr(t_grid);
    if (beta) {
      Rng clock = make_stream(clock_seed, i);
      double S = subordination::sample_stable_unit(*beta, clock);
      for (auto& v : thr) v = std::pow(v / S, *beta);
    }
    double thr_min = std::numeric_limits<double>::infinity();
    for (double v : thr)
      if (v > 0.0) thr_min = std::min(thr_min, v);
    if (!std::isfinite(thr_min)) return r;
    const double thr_max = thr.back();
    const double thr_sim = std::min(thr_max, T_cap);
    r.censored = thr_max > T_cap;
    if (d.boundary_distance(x0) > opt.far_field_sigmas * std::sqrt(2.0 * cfg.diffusivity * thr_sim)) return r;
    PathConfig c = cfg;
    c.h = std::min(cfg.h, thr_min / static_cast<double>(opt.steps_per_min_time));
    c.max_steps = static_cast<std::size_t>(std::ceil(thr_sim / c.h - 1e-9));
    c.record_every = 0;
    auto p = paths::simulate_killed_exit(d, x0, c, rng);
    if (p.censored) return r;
    r.censored = false;
    for (std::size_t j = 0; j < thr.size(); ++j) r.exited[j] = p.exit_time <= thr[j] * (1.0 + 1e-12) ? 1 : 0;
    return r;
  });
  HeatContentResult out;
  out.t = t_grid;
  out.area = d.area();
  out.n_samples = n_samples;
  std::size_t censored = 0;
  for (const auto& r : rows) {
    out.n_inside += r.inside ? 1 : 0;
    censored += r.censored ? 1 : 0;
  }
  out.censor_rate = out.n_inside ? static_cast<double>(censored) / static_cast<double>(out.n_inside) : 0.0;
  std::vector<double> col(n_samples);
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    for (std::size_t i = 0; i < n_samples; ++i) col[i] = rows[i].exited[j] ? sampler.measure : 0.0;
    auto m = mean_estimate(col);
    out.loss.push_back(m.mean);
    out.q_hat.push_back(out.area - m.mean);
    out.std_err.push_back(m.std_err);
  }
  if (out.censor_rate > 0.01)
    out.warnings.push_back("censoring rate " + std::to_string(out.censor_rate) + " exceeds 1% at the largest t");
  return out;
}

}  // namespace detail

// Q̂(t) = |D| - (box measure)·P̂(start in D and exit by t), starts stratified
// over the bounding box. The step is refined to min(h, t_min/steps_per_min_time).
inline HeatContentResult heat_content_mc(const DomainSpec& d, const std::vector<double>& t_grid,
                                         std::size_t n_samples, const PathConfig& cfg, const BatchConfig& batch,
                                         const HeatContentOptions& opt = {}) {
  return detail::heat_content_impl(d, std::nullopt, t_grid, n_samples, cfg, batch, opt);
}

// Q̂^β(t) = |D|·P̂(H_ζ > t) for a stable clock of index β; the identity clock
// reproduces heat_content_mc path for path.
inline HeatContentResult fractional_heat_content_mc(const DomainSpec& d, const BernsteinFunction& clock,
                                                    const std::vector<double>& t_grid, std::size_t n_samples,
                                                    const PathConfig& cfg, const BatchConfig& batch,
                                                    const HeatContentOptions& opt = {}) {
  require(clock.kind == BernsteinKind::Stable || clock.kind == BernsteinKind::Identity, kModule,
          ErrorCode::InvalidArgument, "fractional heat content needs a stable or identity clock");
  std::optional<double> beta;
  if (clock.kind == BernsteinKind::Stable) beta = clock.alpha;
  return detail::heat_content_impl(d, beta, t_grid, n_samples, cfg, batch, opt);
}

struct HeatLossFit {
  FitResult fit;
  bool inconclusive = false;
  std::string note;
};

// Power-law fit of area - Q̂ over the grid points inside [t_lo, t_hi].
inline HeatLossFit heat_loss_exponent_fit(const HeatContentResult& r, double area, double t_lo = 0.0,
                                          double t_hi = std::numeric_limits<double>::infinity()) {
  std::vector<double> t, y, se;
  HeatLossFit out;
  for (std::size_t j = 0; j < r.t.size(); ++j) {
    if (r.t[j] <= 0.0 || r.t[j] < t_lo * (1 - 1e-12) || r.t[j] > t_hi * (1 + 1e-12)) continue;
    require(r.q_hat[j] < area, kModule, ErrorCode::InvalidArgument, "heat content must stay below the area in the fit window");
    t.push_back(r.t[j]);
    y.push_back(area - r.q_hat[j]);
    se.push_back(r.std_err[j]);
  }
  require(t.size() >= 4, kModule, ErrorCode::InvalidArgument, "heat-loss fit needs at least 4 grid points in the window");
  for (std::size_t j = 1; j < t.size(); ++j)
    if (y[j] < y[j - 1] - 2.0 * std::hypot(se[j], se[j - 1])) {
      out.inconclusive = true;
      out.note = "heat content increases beyond noise at t=" + std::to_string(t[j]);
    }
  out.fit = fit_power_law(t, y, se);
  return out;
}

// ---------------------------------------------------------------------------
// Trap scans

enum class TrapClass { Growing, Bounded, Inconclusive };

inline const char* to_string(TrapClass c) {
  switch (c) {
    case TrapClass::Growing: return "Growing";
    case TrapClass::Bounded: return "Bounded";
    default: return "Inconclusive";
  }
}

struct LabeledStart {
  std::string label;
  Point point;
};

struct TrapScanOptions {
  double growth_ratio = 5.0;  // last-to-first mean ratio for Growing
  double min_spearman = 0.8;  // rank correlation of means against depth order
  double max_censor = 0.2;    // above this at any depth the scan is Inconclusive
};

struct TrapScan {
  std::vector<std::string> depth_labels;
  std::vector<double> mean_hitting_times;  // censored paths contribute the horizon
  std::vector<double> std_errs;
  std::vector<double> censor_rates;
  TrapClass classification = TrapClass::Inconclusive;
  double ratio = 0.0;
  double spearman = 0.0;
  std::string note;
};

inline double spearman_rho(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (rank[i] - static_cast<double>(i)) * (rank[i] - static_cast<double>(i));
  double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

inline TrapClass classify_trap_scan(const TrapScan& s, const TrapScanOptions& opt, double* ratio, double* rho) {
  *ratio = s.mean_hitting_times.back() / s.mean_hitting_times.front();
  *rho = spearman_rho(s.mean_hitting_times);
  for (double c : s.censor_rates)
    if (c > opt.max_censor) return TrapClass::Inconclusive;
  if (*ratio > opt.growth_ratio && *rho >= opt.min_spearman) return TrapClass::Growing;
  return TrapClass::Bounded;
}

// Reflected walks from each start until the target ball is hit or the
// horizon T passes. Depth j uses the seed derive_seed(seed, j), so adding
// paths leaves the existing ones unchanged.
inline TrapScan trap_scan(const DomainSpec& d, paths::TargetBall ball, const std::vector<LabeledStart>& starts,
                          std::size_t n_paths, double T, const PathConfig& cfg, const BatchConfig& batch,
                          const TrapScanOptions& opt = {}) {
  require(starts.size() >= 2, kModule, ErrorCode::InvalidArgument, "trap scan needs at least two depths");
  require(n_paths >= 2, kModule, ErrorCode::InvalidArgument, "need at least two paths per depth");
  require(ball.radius > 0.0 && d.contains(ball.center) && d.boundary_distance(ball.center) > ball.radius, kModule,
          ErrorCode::InvalidArgument, "target ball must lie inside the domain, clear of boundary and walls");
  for (const auto& s : starts)
    require(d.contains(s.point) && norm(s.point - ball.center) > ball.radius, kModule, ErrorCode::InvalidArgument,
            "start " + s.label + " must lie inside the domain and outside the ball");
  TrapScan out;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    BatchConfig b = batch;
    b.seed = derive_seed(batch.seed, j);
    auto rows = run_blocks<std::pair<double, char>>(n_paths, b, [&](std::size_t, Rng& rng) {
      auto p = paths::simulate_reflected(d, starts[j].point, T, cfg, rng, ball);
      return std::pair<double, char>{p.censored ? T : p.exit_time, p.censored ? 1 : 0};
    });
    std::vector<double> tb(n_paths);
    std::size_t cens = 0;
    for (std::size_t i = 0; i < n_paths; ++i) tb[i] = rows[i].first, cens += rows[i].second;
    auto m = mean_estimate(tb);
    out.depth_labels.push_back(starts[j].label);
    out.mean_hitting_times.push_back(m.mean);
    out.std_errs.push_back(m.std_err);
    out.censor_rates.push_back(static_cast<double>(cens) / static_cast<double>(n_paths));
  }
  out.classification = classify_trap_scan(out, opt, &out.ratio, &out.spearman);
  out.note = "ratio " + std::to_string(out.ratio) + " (Growing needs > " + std::to_string(opt.growth_ratio) +
             "), spearman " + std::to_string(out.spearman) + " (needs >= " + std::to_string(opt.min_spearman) +
             "), censor limit " + std::to_string(opt.max_censor);
  return out;
}

// ---------------------------------------------------------------------------
// Sticky exit

struct StickyExitResult {
  double estimate = 0.0;
  double std_err = 0.0;
  double closed_form = 0.0;  // +inf when Φ'(0) is infinite
  bool non_convergent = false;
  std::vector<std::pair<std::size_t, double>> running_mean;  // (paths, mean) at 1, 2, 4, ..., n
  double growth_slope = 0.0;  // log-log slope of the running mean over the trace
};

inline double sticky_exit_closed_form(double ell, double x0, const BernsteinFunction& bf, double eta_over_sigma,
                                      double diffusivity = 1.0) {
  if (x0 >= ell) return 0.0;
  return (ell * ell - x0 * x0) / (2.0 * diffusivity) + eta_over_sigma * subordination::phi_prime_at_zero(bf) * (ell - x0);
}

// Mean of V(τ_ℓ) for the reflected walk from x0 absorbed at ℓ.
inline StickyExitResult sticky_exit_mean(double ell, double x0, const BernsteinFunction& bf, double eta_over_sigma,
                                         std::size_t n_paths, const PathConfig& cfg, const BatchConfig& batch) {
  require(0.0 <= x0 && x0 <= ell && ell > 0.0, kModule, ErrorCode::InvalidArgument, "need 0 <= x0 <= ell");
  require(n_paths >= 2, kModule, ErrorCode::InvalidArgument, "need at least two paths");
  StickyExitResult out;
  out.closed_form = sticky_exit_closed_form(ell, x0, bf, eta_over_sigma, cfg.diffusivity);
  out.non_convergent = !std::isfinite(subordination::phi_prime_at_zero(bf));
  if (x0 >= ell) {
    out.running_mean = {{n_paths, 0.0}};
    return out;
  }
  auto v = run_blocks<double>(n_paths, batch, [&](std::size_t, Rng& rng) {
    auto p = paths::reflected_1d_with_local_time(x0, std::numeric_limits<double>::infinity(), cfg, rng, ell, true);
    require(!p.censored, kModule, ErrorCode::IterationCap, "sticky path not absorbed within max_steps");
    return paths::sticky_evaluate(p, cfg.h, bf, eta_over_sigma, rng).V_at(p.steps);
  });
  auto m = mean_estimate(v);
  out.estimate = m.mean;
  out.std_err = m.std_err;
  NeumaierSum s;
  std::size_t next = 1;
  for (std::size_t i = 0; i < n_paths; ++i) {
    s.add(v[i]);
    if (i + 1 == next || i + 1 == n_paths) {
      out.running_mean.emplace_back(i + 1, s.value() / static_cast<double>(i + 1));
      while (next <= i + 1) next *= 2;
    }
  }
  std::vector<double> n, rm;
  for (auto [k, val] : out.running_mean)
    if (k >= 16 && val > 0.0) n.push_back(static_cast<double>(k)), rm.push_back(val);
  if (n.size() >= 2) out.growth_slope = fit_power_law(n, rm).exponent;
  return out;
}

// ---------------------------------------------------------------------------
// MSD

// Log-log slope of MSD against time using points with time >= burn_in whose
// MSD stays below diameter²/4 (finite-size cut).
inline FitResult msd_fit(const paths::MsdSeries& s, double diameter, double burn_in = 1.0) {
  std::vector<double> t, y, se;
  const double cap = diameter * diameter / 4.0;
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    if (s.times[j] < burn_in || s.times[j] <= 0.0 || s.msd[j] <= 0.0 || s.msd[j] > cap) continue;
    t.push_back(s.times[j]);
    y.push_back(s.msd[j]);
    se.push_back(s.std_err[j]);
  }
  require(t.size() >= 4, kModule, ErrorCode::InvalidArgument,
          "MSD fit window empty: fewer than 4 points past burn-in below the finite-size cap");
  return fit_power_law(t, y, se);
}

}  // namespace traplab::estimators
