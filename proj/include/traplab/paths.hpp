#pragma once

// Trajectory engines: killed and reflected Euler walks in planar domains,
// 1-d reflected Brownian motion with its local time at 0, the sticky clock
// V_s = s + H((η/σ)γ⁺_s), lifetime time changes and random walks on graphs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "traplab/core.hpp"
#include "traplab/geometry.hpp"
#include "traplab/graphs.hpp"
#include "traplab/subordination.hpp"

namespace traplab::paths {

inline constexpr const char* kModule = "paths";

using geometry::DomainKind;
using geometry::DomainSpec;
using subordination::BernsteinFunction;

struct PathConfig {
  double h = 1e-4;                  // time step
  std::size_t max_steps = 1000000;  // horizon h * max_steps
  std::uint64_t seed = 0;
  // Generator D·Δ: increments are sqrt(2 D h)·N(0, I). D = 1 is the heat
  // equation u_t = Δu; D = 1/2 is standard Brownian motion.
  double diffusivity = 1.0;
  bool bridge_correction = true;  // killed walks: Brownian-bridge exit test between steps
  bool adaptive = true;           // far from the boundary, merge 2^m steps into one
  std::size_t record_every = 0;   // keep every n-th position (0: none)

  double sigma() const { return std::sqrt(2.0 * diffusivity); }
  double horizon() const { return h * static_cast<double>(max_steps); }
};

inline void check_config(const PathConfig& cfg) {
  require(cfg.h > 0.0 && std::isfinite(cfg.h), kModule, ErrorCode::InvalidArgument, "step h must be positive");
  require(cfg.max_steps > 0, kModule, ErrorCode::InvalidArgument, "max_steps must be positive");
  require(cfg.diffusivity > 0.0, kModule, ErrorCode::InvalidArgument, "diffusivity must be positive");
}

struct PathSample {
  double exit_time = 0.0;  // multiple of h; meaningless when censored
  bool censored = false;
  Point exit_point;
  double local_time = 0.0;  // γ⁺ at the end of the path (1-d engine)
  std::size_t steps = 0;
  std::vector<Point> positions;          // thinned, when requested
  std::vector<double> local_time_path;   // γ⁺ at every grid step (1-d engine, when requested)
};

struct TargetBall {
  Point center;
  double radius = 0.0;
};

namespace detail {

// Block steps are taken only while the boundary is this many block standard
// deviations away; the chance of touching it inside the block is < 1e-15.
inline constexpr double kSafetySigmas = 8.0;
inline constexpr int kMaxBlockLog2 = 16;

// Lower bound on the boundary distance, refreshed lazily: the distance
// function is 1-Lipschitz, so d(x) >= d(anchor) - |x - anchor|.
class DistanceCache {
 public:
  explicit DistanceCache(const DomainSpec& d) : d_(d) {}

  double lower_bound(Point x) const { return anchor_d_ - norm(x - anchor_); }

  double exact(Point x) {
    anchor_ = x;
    anchor_d_ = d_.boundary_distance(x);
    return anchor_d_;
  }

  // Exact when the cached bound is below `need`, otherwise the bound.
  double at_least(Point x, double need) {
    double lb = lower_bound(x);
    return lb >= need ? lb : exact(x);
  }

 private:
  const DomainSpec& d_;
  Point anchor_;
  double anchor_d_ = -std::numeric_limits<double>::infinity();
};

inline Point gaussian_step(const DomainSpec& d, double sd, std::normal_distribution<double>& n01, Rng& rng) {
  double gx = n01(rng);
  if (d.kind() == DomainKind::Interval) return {sd * gx, 0.0};
  double gy = n01(rng);
  return {sd * gx, sd * gy};
}

// Largest m with kSafetySigmas·sd·sqrt(2^m) <= room and 2^m <= budget.
inline int block_log2(double room, double sd, std::size_t budget) {
  int m = 0;
  while (m < kMaxBlockLog2 && (std::size_t{1} << (m + 1)) <= budget &&
         kSafetySigmas * sd * std::sqrt(static_cast<double>(std::size_t{1} << (m + 1))) <= room)
    ++m;
  return m;
}

// Exit test for the straight step a -> b: the boundary point where the step
// leaves the open domain, if it does.
inline std::optional<Point> step_exit(const DomainSpec& d, Point a, Point b) {
  switch (d.kind()) {
    case DomainKind::Disk: {
      const double R = d.radius();
      if (dot(b, b) < R * R) return std::nullopt;
      Point v = b - a;
      double A = dot(v, v), B = 2.0 * dot(a, v), C = dot(a, a) - R * R;
      double s = (-B + std::sqrt(std::max(B * B - 4.0 * A * C, 0.0))) / (2.0 * A);
      return a + std::clamp(s, 0.0, 1.0) * v;
    }
    case DomainKind::Interval:
      if (b.x <= 0.0) return Point{0.0, 0.0};
      if (b.x >= d.length()) return Point{d.length(), 0.0};
      return std::nullopt;
    default: {
      auto hit = d.first_crossing(a, b);
      if (hit) return hit->point;
      if (!d.contains(b)) return d.nearest_boundary(b).point;
      return std::nullopt;
    }
  }
}

}  // namespace detail

// Killed walk: Euler increments sqrt(2Dh)·N(0,I); exit at the first step whose
// segment leaves the domain or, with bridge correction, with probability
// exp(-2 d1 d2 / (2D h)) for an interior-looking step whose endpoints lie at
// boundary distances d1, d2.
inline PathSample simulate_killed_exit(const DomainSpec& domain, Point x0, const PathConfig& cfg, Rng& rng) {
  check_config(cfg);
  PathSample out;
  if (!domain.contains(x0)) {
    out.exit_point = x0;
    return out;
  }
  const double sd = cfg.sigma() * std::sqrt(cfg.h);
  const double bridge_zone = 6.0 * sd;
  std::normal_distribution<double> n01;
  detail::DistanceCache dist(domain);
  Point x = x0;
  std::size_t k = 0;
  if (cfg.record_every) out.positions.push_back(x);
  auto record = [&](std::size_t before) {
    if (cfg.record_every && k / cfg.record_every != before / cfg.record_every) out.positions.push_back(x);
  };
  while (k < cfg.max_steps) {
    const std::size_t before = k;
    if (cfg.adaptive) {
      double need = detail::kSafetySigmas * sd * std::sqrt(2.0);
      double room = dist.at_least(x, need);
      if (room >= need) {
        int m = detail::block_log2(room, sd, cfg.max_steps - k);
        if (m >= 1) {
          double bsd = sd * std::sqrt(static_cast<double>(std::size_t{1} << m));
          x = x + detail::gaussian_step(domain, bsd, n01, rng);
          k += std::size_t{1} << m;
          record(before);
          continue;
        }
      }
    }
    Point y = x + detail::gaussian_step(domain, sd, n01, rng);
    ++k;
    // no boundary piece within reach of this step
    double reach = norm(y - x);
    double d1 = dist.at_least(x, reach + bridge_zone);
    if (d1 <= reach) {
      if (auto e = detail::step_exit(domain, x, y)) {
        out.exit_time = static_cast<double>(k) * cfg.h;
        out.exit_point = *e;
        out.steps = k;
        return out;
      }
    }
    if (cfg.bridge_correction && d1 < reach + bridge_zone) {
      double d1e = dist.exact(x);
      if (d1e < bridge_zone) {
        auto nb = domain.nearest_boundary(y);
        double p = std::exp(-2.0 * d1e * nb.distance / (sd * sd));
        if (uniform01(rng) < p) {
          out.exit_time = static_cast<double>(k) * cfg.h;
          out.exit_point = nb.point;
          out.steps = k;
          return out;
        }
      }
    }
    x = y;
    record(before);
  }
  out.censored = true;
  out.exit_time = std::numeric_limits<double>::infinity();
  out.exit_point = x;
  out.steps = k;
  return out;
}

// Reflected walk: Euler steps mapped through specular reflection, run for
// horizon T or until the closed target ball is hit. exit_time holds the
// hitting time (censored when the ball is not reached by T).
inline PathSample simulate_reflected(const DomainSpec& domain, Point x0, double T, const PathConfig& cfg, Rng& rng,
                                     std::optional<TargetBall> target = std::nullopt) {
  check_config(cfg);
  require(domain.contains(x0), kModule, ErrorCode::InvalidArgument, "reflected walk must start inside the domain");
  require(T >= 0.0 && T <= cfg.horizon() * (1.0 + 1e-12), kModule, ErrorCode::InvalidArgument,
          "horizon exceeds h * max_steps");
  const std::size_t n_steps = static_cast<std::size_t>(std::llround(std::floor(T / cfg.h + 1e-9)));
  const double sd = cfg.sigma() * std::sqrt(cfg.h);
  std::normal_distribution<double> n01;
  detail::DistanceCache dist(domain);
  PathSample out;
  Point x = x0;
  std::size_t k = 0;
  auto ball_gap = [&](Point p) { return target ? norm(p - target->center) - target->radius : 1e300; };
  if (target && ball_gap(x) <= 0.0) {
    out.exit_point = x;
    return out;
  }
  if (cfg.record_every) out.positions.push_back(x);
  while (k < n_steps) {
    const std::size_t before = k;
    if (cfg.adaptive) {
      double need = detail::kSafetySigmas * sd * std::sqrt(2.0);
      double room = std::min(dist.at_least(x, need), ball_gap(x));
      if (room >= need) {
        int m = detail::block_log2(room, sd, n_steps - k);
        if (m >= 1) {
          double bsd = sd * std::sqrt(static_cast<double>(std::size_t{1} << m));
          x = x + detail::gaussian_step(domain, bsd, n01, rng);
          k += std::size_t{1} << m;
          if (cfg.record_every && k / cfg.record_every != before / cfg.record_every) out.positions.push_back(x);
          continue;
        }
      }
    }
    Point step = detail::gaussian_step(domain, sd, n01, rng);
    Point y = x + step;
    Point next = dist.at_least(x, norm(step)) > norm(step) ? y : geometry::reflect_step(domain, x, y);
    ++k;
    if (target) {
      // closest approach of the step segment to the ball centre
      Point c = target->center;
      double dd = geometry::point_segment_distance(c, {x, next});
      if (dd <= target->radius) {
        out.exit_time = static_cast<double>(k) * cfg.h;
        out.exit_point = next;
        out.steps = k;
        return out;
      }
    }
    x = next;
    if (cfg.record_every && k / cfg.record_every != before / cfg.record_every) out.positions.push_back(x);
  }
  out.steps = k;
  out.exit_point = x;
  out.exit_time = target ? std::numeric_limits<double>::infinity() : static_cast<double>(k) * cfg.h;
  out.censored = target.has_value();
  return out;
}

// 1-d reflected Brownian motion X⁺ = Y + γ⁺ with Y = x0 + sqrt(2D)·W and
// γ⁺_t = max(0, sup_{s<=t} -Y_s) (Skorokhod map). The running minimum inside
// each step is drawn from the Brownian-bridge law, so γ⁺ is exact in law at
// grid times. With a finite `absorb_at` the path stops at the first passage of
// X⁺ over that level (bridge-corrected), which becomes exit_time.
inline PathSample reflected_1d_with_local_time(double x0, double T, const PathConfig& cfg, Rng& rng,
                                               double absorb_at = std::numeric_limits<double>::infinity(),
                                               bool keep_local_time_path = false) {
  check_config(cfg);
  require(x0 >= 0.0, kModule, ErrorCode::InvalidArgument, "reflected 1-d walk needs x0 >= 0");
  require(T >= 0.0, kModule, ErrorCode::InvalidArgument, "horizon must be non-negative");
  PathSample out;
  const double sd = cfg.sigma() * std::sqrt(cfg.h);
  const std::size_t n_steps = std::min<std::size_t>(
      cfg.max_steps, static_cast<std::size_t>(std::isfinite(T) ? std::floor(T / cfg.h + 1e-9) : cfg.max_steps));
  std::normal_distribution<double> n01;
  if (keep_local_time_path) out.local_time_path.push_back(0.0);
  if (x0 >= absorb_at) {
    out.exit_point = {x0, 0.0};
    return out;
  }
  double y = x0, gamma = 0.0;
  std::size_t k = 0;
  while (k < n_steps) {
    double y_next = y + sd * n01(rng);
    double lo = std::min(y, y_next);
    // only bother with the bridge minimum when it can reach below -γ
    if (lo < -gamma + 8.0 * sd) {
      double diff = y_next - y;
      double m = 0.5 * (y + y_next - std::sqrt(diff * diff - 2.0 * sd * sd * std::log(uniform01(rng))));
      gamma = std::max(gamma, -m);
    }
    double x_prev = y + gamma, x_next = y_next + gamma;
    y = y_next;
    ++k;
    if (keep_local_time_path) out.local_time_path.push_back(gamma);
    if (std::isfinite(absorb_at)) {
      bool hit = x_next >= absorb_at;
      if (!hit && absorb_at - x_next < 8.0 * sd) {
        double p = std::exp(-2.0 * (absorb_at - x_prev) * (absorb_at - x_next) / (sd * sd));
        hit = uniform01(rng) < p;
      }
      if (hit) {
        out.exit_time = static_cast<double>(k) * cfg.h;
        out.exit_point = {absorb_at, 0.0};
        out.local_time = gamma;
        out.steps = k;
        return out;
      }
    }
  }
  out.steps = k;
  out.local_time = gamma;
  out.exit_point = {y + gamma, 0.0};
  if (std::isfinite(absorb_at)) {
    out.censored = true;
    out.exit_time = std::numeric_limits<double>::infinity();
  } else {
    out.exit_time = static_cast<double>(k) * cfg.h;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sticky clock

// V(s_k) = s_k + H((η/σ)γ⁺_{s_k}) on the grid s_k = k h.
class StickyClock {
 public:
  StickyClock(double h, double eta_over_sigma, std::vector<double> v) : h_(h), eta_(eta_over_sigma), v_(std::move(v)) {}

  double h() const { return h_; }
  double eta_over_sigma() const { return eta_; }
  std::size_t size() const { return v_.size(); }
  double s_at(std::size_t k) const { return static_cast<double>(k) * h_; }
  double V_at(std::size_t k) const { return v_.at(k); }
  const std::vector<double>& values() const { return v_; }

  // V⁻¹(t) = inf{s : V(s) > t}, linear between grid points.
  double V_inverse(double t) const {
    require(!v_.empty(), kModule, ErrorCode::InvalidArgument, "empty sticky clock");
    if (t <= v_.front()) return 0.0;
    require(t <= v_.back(), kModule, ErrorCode::InvalidArgument, "V_inverse queried beyond the simulated horizon");
    std::size_t lo = 0, hi = v_.size() - 1;  // v_[lo] < t <= v_[hi]
    while (hi - lo > 1) {
      std::size_t mid = lo + (hi - lo) / 2;
      if (v_[mid] < t)
        lo = mid;
      else
        hi = mid;
    }
    double frac = (t - v_[lo]) / (v_[hi] - v_[lo]);
    return (static_cast<double>(lo) + frac) * h_;
  }

 private:
  double h_;
  double eta_;
  std::vector<double> v_;
};

// Draws H along the local-time path by independent increments.
inline StickyClock sticky_evaluate(const PathSample& base, double h, const BernsteinFunction& bf,
                                   double eta_over_sigma, Rng& rng) {
  require(!base.local_time_path.empty(), kModule, ErrorCode::InvalidArgument, "sticky clock needs a local-time path");
  require(eta_over_sigma > 0.0, kModule, ErrorCode::InvalidArgument, "eta/sigma must be positive");
  const auto& g = base.local_time_path;
  std::vector<double> v(g.size());
  double H = 0.0;
  v[0] = 0.0;
  for (std::size_t k = 1; k < g.size(); ++k) {
    double dg = g[k] - g[k - 1];
    if (dg > 0.0) H += subordination::sample_subordinator_increment(bf, eta_over_sigma * dg, rng);
    v[k] = static_cast<double>(k) * h + H;
  }
  return StickyClock(h, eta_over_sigma, std::move(v));
}

// Constant of the lower bound E[(V⁻¹_t)^θ] >= t^θ (1 - C t^{β(1/(2α) - 1)})
// for a stable clock of index α, 0 < β < α.
inline double inverse_clock_moment_constant(double alpha, double beta, double theta, double eta_over_sigma) {
  require(0.0 < beta && beta < alpha && alpha < 1.0 && theta >= 0.0, kModule, ErrorCode::InvalidArgument,
          "needs 0 < beta < alpha < 1 and theta >= 0");
  using boost::math::tgamma;
  const double r = beta / (2.0 * alpha);
  return std::pow(4.0, r) * tgamma(r + 0.5) / tgamma(0.5) * theta * tgamma(theta + r) * tgamma(1.0 - beta / alpha) /
         tgamma(theta + r - beta + 1.0) * std::pow(eta_over_sigma, beta / alpha);
}

// ---------------------------------------------------------------------------
// Lifetime time change

// Survival indicators {H_ζ > t} for each t, with one subordinator draw at the
// exit time ζ of `base`. A censored base path survives every t.
inline std::vector<char> time_changed_eval(const PathSample& base, const BernsteinFunction& bf,
                                           const std::vector<double>& t_grid, Rng& rng) {
  std::vector<char> alive(t_grid.size(), 1);
  if (base.censored) return alive;
  require(std::isfinite(base.exit_time), kModule, ErrorCode::InvalidArgument, "base path has no finite exit time");
  double h_zeta = subordination::sample_subordinator_increment(bf, base.exit_time, rng);
  for (std::size_t i = 0; i < t_grid.size(); ++i) alive[i] = h_zeta > t_grid[i] ? 1 : 0;
  return alive;
}

// ---------------------------------------------------------------------------
// Random walks on graphs

struct MsdSeries {
  std::vector<double> times;  // step counts, or continuous times for time-changed walks
  std::vector<double> msd;
  std::vector<double> std_err;
  double censor_rate = 0.0;
};

inline std::vector<std::size_t> dyadic_steps(std::size_t n_steps) {
  std::vector<std::size_t> out{0};
  for (std::size_t n = 1; n <= n_steps; n *= 2) out.push_back(n);
  return out;
}

namespace detail {

inline graphs::Vertex srw_step(const graphs::GraphModel& g, graphs::Vertex v, Rng& rng) {
  const auto& nb = g.adjacency[v];
  std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
  return nb[pick(rng)];
}

inline double sq_dist(const graphs::GraphModel& g, graphs::Vertex a, graphs::Vertex b) {
  Point d = g.coords[a] - g.coords[b];
  return dot(d, d);
}

}  // namespace detail

// Mean squared Euclidean displacement of the simple random walk from `start`
// at step counts 0, 1, 2, 4, ..., <= n_steps.
inline MsdSeries graph_walk_msd(const graphs::GraphModel& g, graphs::Vertex start, std::size_t n_steps,
                                std::size_t n_paths, const BatchConfig& batch) {
  require(start < g.vertex_count(), kModule, ErrorCode::InvalidArgument, "start vertex out of range");
  require(g.coords.size() == g.vertex_count(), kModule, ErrorCode::InvalidArgument, "graph has no coordinates");
  require(n_paths >= 2, kModule, ErrorCode::InvalidArgument, "need at least two paths");
  auto marks = dyadic_steps(n_steps);
  auto rows = run_blocks<std::vector<double>>(n_paths, batch, [&](std::size_t, Rng& rng) {
    std::vector<double> r(marks.size(), 0.0);
    graphs::Vertex v = start;
    std::size_t next = 1;
    for (std::size_t k = 1; k <= n_steps && next < marks.size(); ++k) {
      v = detail::srw_step(g, v, rng);
      if (k == marks[next]) r[next++] = detail::sq_dist(g, v, start);
    }
    return r;
  });
  MsdSeries out;
  for (std::size_t j = 0; j < marks.size(); ++j) {
    std::vector<double> col(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) col[i] = rows[i][j];
    auto m = mean_estimate(col);
    out.times.push_back(static_cast<double>(marks[j]));
    out.msd.push_back(m.mean);
    out.std_err.push_back(m.std_err);
  }
  return out;
}

// Walk run on the clock L_t, the inverse of the subordinator H: one walk step
// per unit of operational time, so the position at time t is X_{N(t)} with
// N(t) = #{k >= 1 : H_k <= t}. Paths needing more than max_steps operational
// steps are censored and reported in censor_rate.
inline MsdSeries graph_walk_msd_time_changed(const graphs::GraphModel& g, graphs::Vertex start,
                                             const BernsteinFunction& bf, const std::vector<double>& t_grid,
                                             std::size_t n_paths, std::size_t max_steps, const BatchConfig& batch) {
  require(start < g.vertex_count(), kModule, ErrorCode::InvalidArgument, "start vertex out of range");
  require(!t_grid.empty() && std::is_sorted(t_grid.begin(), t_grid.end()), kModule, ErrorCode::InvalidArgument,
          "t grid must be sorted and non-empty");
  require(n_paths >= 2, kModule, ErrorCode::InvalidArgument, "need at least two paths");
  struct Row {
    std::vector<double> d2;
    bool censored = false;
  };
  const std::uint64_t clock_seed = derive_seed(batch.seed, 0xC10C);
  auto rows = run_blocks<Row>(n_paths, batch, [&](std::size_t i, Rng& rng) {
    Rng clock = make_stream(clock_seed, i);
    Row r;
    r.d2.assign(t_grid.size(), 0.0);
    graphs::Vertex v = start;
    double H = subordination::sample_subordinator_increment(bf, 1.0, clock);
    std::size_t k = 0;  // steps taken = #{j <= k : H_j <= t} while H = H_{k+1}
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      while (H <= t_grid[j]) {
        if (k >= max_steps) {
          r.censored = true;
          break;
        }
        v = detail::srw_step(g, v, rng);
        ++k;
        H += subordination::sample_subordinator_increment(bf, 1.0, clock);
      }
      r.d2[j] = detail::sq_dist(g, v, start);
    }
    return r;
  });
  MsdSeries out;
  std::size_t censored = 0;
  for (const auto& r : rows) censored += r.censored ? 1 : 0;
  out.censor_rate = static_cast<double>(censored) / static_cast<double>(n_paths);
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    std::vector<double> col(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) col[i] = rows[i].d2[j];
    auto m = mean_estimate(col);
    out.times.push_back(t_grid[j]);
    out.msd.push_back(m.mean);
    out.std_err.push_back(m.std_err);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dump

inline void write_path_csv(const PathSample& p, std::size_t record_every, std::ostream& os) {
  os << "step,x,y,local_time\n";
  char buf[128];
  for (std::size_t i = 0; i < p.positions.size(); ++i) {
    double lt = i * record_every < p.local_time_path.size() ? p.local_time_path[i * record_every] : p.local_time;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i * record_every, p.positions[i].x, p.positions[i].y,
                  lt);
    os << buf;
  }
}

}  // namespace traplab::paths
