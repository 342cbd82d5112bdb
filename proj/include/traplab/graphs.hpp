#pragma once

// Sierpinski gasket pre-fractal graphs SG(2) / SG(3), star graphs and path
// graphs, with exact exit-time solves and lazy-walk return probabilities.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "traplab/core.hpp"

namespace traplab::graphs {

inline constexpr const char* kModule = "prefractal_graphs";

using Vertex = std::uint32_t;

struct GraphModel {
  std::vector<std::vector<Vertex>> adjacency;
  std::vector<Point> coords;
  std::vector<Vertex> absorbing;
  std::vector<Vertex> corners;  // a0, a1, a2 for gaskets; hub for star graphs

  std::size_t vertex_count() const { return adjacency.size(); }
  std::size_t edge_count() const {
    std::size_t s = 0;
    for (const auto& a : adjacency) s += a.size();
    return s / 2;
  }
  std::size_t degree(Vertex v) const { return adjacency[v].size(); }

  std::vector<char> absorbing_mask() const {
    std::vector<char> mask(vertex_count(), 0);
    for (Vertex v : absorbing) mask.at(v) = 1;
    return mask;
  }
};

namespace detail {

// Vertices reachable from `sources`.
inline std::vector<char> reachable(const GraphModel& g, const std::vector<Vertex>& sources) {
  std::vector<char> seen(g.vertex_count(), 0);
  std::deque<Vertex> q;
  for (Vertex s : sources)
    if (!seen[s]) {
      seen[s] = 1;
      q.push_back(s);
    }
  while (!q.empty()) {
    Vertex v = q.front();
    q.pop_front();
    for (Vertex u : g.adjacency[v])
      if (!seen[u]) {
        seen[u] = 1;
        q.push_back(u);
      }
  }
  return seen;
}

}  // namespace detail

// Checks symmetry, absence of self-loops and duplicate edges and, optionally,
// connectivity.
inline void validate(const GraphModel& g, bool check_connected = true) {
  const std::size_t n = g.vertex_count();
  require(n > 0, kModule, ErrorCode::InvalidArgument, "empty graph");
  for (Vertex v = 0; v < n; ++v) {
    const auto& a = g.adjacency[v];
    for (std::size_t i = 0; i < a.size(); ++i) {
      Vertex u = a[i];
      require(u < n, kModule, ErrorCode::InvalidArgument, "neighbour index out of range");
      require(u != v, kModule, ErrorCode::InvalidArgument, "self-loop at vertex " + std::to_string(v));
      const auto& b = g.adjacency[u];
      require(std::count(b.begin(), b.end(), v) == 1 && std::count(a.begin(), a.end(), u) == 1, kModule,
              ErrorCode::InvalidArgument, "adjacency is not symmetric/simple at vertex " + std::to_string(v));
    }
  }
  for (Vertex v : g.absorbing) require(v < n, kModule, ErrorCode::InvalidArgument, "absorbing vertex out of range");
  if (check_connected) {
    auto seen = detail::reachable(g, {0});
    require(std::count(seen.begin(), seen.end(), 1) == static_cast<std::ptrdiff_t>(n), kModule,
            ErrorCode::InvalidArgument, "graph is not connected");
  }
}

namespace detail {

class GraphBuilder {
 public:
  Vertex vertex(std::int64_t i, std::int64_t j, Point p) {
    auto key = (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
    auto [it, inserted] = index_.try_emplace(key, static_cast<Vertex>(g_.adjacency.size()));
    if (inserted) {
      g_.adjacency.emplace_back();
      g_.coords.push_back(p);
    }
    return it->second;
  }
  void edge(Vertex a, Vertex b) {
    g_.adjacency[a].push_back(b);
    g_.adjacency[b].push_back(a);
  }
  GraphModel take() { return std::move(g_); }
  GraphModel& graph() { return g_; }

 private:
  std::unordered_map<std::uint64_t, Vertex> index_;
  GraphModel g_;
};

}  // namespace detail

enum class SgVariant { SG2, SG3 };

inline const char* to_string(SgVariant v) { return v == SgVariant::SG2 ? "SG2" : "SG3"; }

inline std::size_t sg_vertex_count(SgVariant v, int level) {
  if (v == SgVariant::SG2) return static_cast<std::size_t>(3 * (std::pow(3.0, level) + 1) / 2 + 0.5);
  std::size_t c = 3;
  for (int n = 0; n < level; ++n) c = 6 * c - 8;
  return c;
}

// Level-n gasket graph on the unit triangle a0=(0,0), a1=(1,0), a2=(1/2,√3/2).
// Vertices carry triangular-lattice coordinates (i, j) at mesh m^-n,
// point = (i + j/2, j√3/2)·m^-n; corners get indices 0, 1, 2.
inline GraphModel build_sg_graph(SgVariant variant, int level, std::size_t max_vertices = std::size_t{1} << 23) {
  require(level >= 0, kModule, ErrorCode::InvalidArgument, "level must be non-negative");
  const int m = variant == SgVariant::SG2 ? 2 : 3;
  require(level <= 16 && sg_vertex_count(variant, level) <= max_vertices, kModule, ErrorCode::ResourceCap,
          "level " + std::to_string(level) + " exceeds the vertex budget");
  const std::int64_t side = static_cast<std::int64_t>(std::llround(std::pow(m, level)));
  const double scale = 1.0 / static_cast<double>(side);
  detail::GraphBuilder b;
  auto vtx = [&](std::int64_t i, std::int64_t j) {
    return b.vertex(i, j, {scale * (i + 0.5 * j), scale * (std::sqrt(3.0) / 2.0) * j});
  };
  vtx(0, 0);
  vtx(side, 0);
  vtx(0, side);

  // upward sub-triangles kept at each subdivision, in units of the child size
  std::vector<std::pair<int, int>> offsets;
  if (variant == SgVariant::SG2)
    offsets = {{0, 0}, {1, 0}, {0, 1}};
  else
    offsets = {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {0, 2}};

  struct Cell {
    std::int64_t i, j, s;
  };
  std::vector<Cell> stack{{0, 0, side}};
  while (!stack.empty()) {
    Cell c = stack.back();
    stack.pop_back();
    if (c.s == 1) {
      Vertex p = vtx(c.i, c.j), q = vtx(c.i + 1, c.j), r = vtx(c.i, c.j + 1);
      b.edge(p, q);
      b.edge(q, r);
      b.edge(r, p);
      continue;
    }
    std::int64_t h = c.s / m;
    for (auto it = offsets.rbegin(); it != offsets.rend(); ++it) stack.push_back({c.i + it->first * h, c.j + it->second * h, h});
  }
  GraphModel g = b.take();
  g.corners = {0, 1, 2};
  return g;
}

// Hub (vertex 0) with `edges` rays of `mesh` vertices each at spacing ell/mesh;
// ray tips are absorbing.
inline GraphModel build_star_graph(int edges, double ell, int mesh) {
  require(edges >= 1, kModule, ErrorCode::InvalidArgument, "star graph needs at least one edge");
  require(ell > 0.0, kModule, ErrorCode::InvalidArgument, "edge length must be positive");
  require(mesh >= 2, kModule, ErrorCode::InvalidArgument, "mesh must be at least 2");
  GraphModel g;
  g.adjacency.emplace_back();
  g.coords.push_back({0.0, 0.0});
  const double hstep = ell / mesh;
  for (int e = 0; e < edges; ++e) {
    double th = 2.0 * std::numbers::pi * e / edges;
    Vertex prev = 0;
    for (int k = 1; k <= mesh; ++k) {
      Vertex v = static_cast<Vertex>(g.adjacency.size());
      g.adjacency.emplace_back();
      g.coords.push_back({k * hstep * std::cos(th), k * hstep * std::sin(th)});
      g.adjacency[prev].push_back(v);
      g.adjacency[v].push_back(prev);
      prev = v;
    }
    g.absorbing.push_back(prev);
  }
  g.corners = {0};
  return g;
}

// Path 0 - 1 - ... - (n-1) with unit spacing.
inline GraphModel build_path_graph(std::size_t n) {
  require(n >= 2, kModule, ErrorCode::InvalidArgument, "path graph needs at least 2 vertices");
  GraphModel g;
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.coords.push_back({static_cast<double>(i), 0.0});
    if (i + 1 < n) {
      g.adjacency[i].push_back(static_cast<Vertex>(i + 1));
      g.adjacency[i + 1].push_back(static_cast<Vertex>(i));
    }
  }
  g.corners = {0, static_cast<Vertex>(n - 1)};
  return g;
}

// ---------------------------------------------------------------------------
// Exit times

struct ExitTimeTable {
  std::vector<double> m;      // expected SRW steps to absorption, 0 on the absorbing set
  double residual = 0.0;      // max |m(v) - 1 - mean_{u~v} m(u)| over non-absorbing v
  std::string solver;
};

inline double harmonic_residual(const GraphModel& g, const std::vector<double>& m) {
  auto mask = g.absorbing_mask();
  double worst = 0.0;
  for (Vertex v = 0; v < g.vertex_count(); ++v) {
    if (mask[v]) continue;
    NeumaierSum s;
    for (Vertex u : g.adjacency[v]) s.add(m[u]);
    double r = m[v] - 1.0 - s.value() / static_cast<double>(g.degree(v));
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

inline constexpr std::size_t kDenseSolveLimit = 2000;

// Solves (I - P)m = 1 on the non-absorbing vertices. Multiplying row v by
// deg(v) gives the symmetric positive definite system (D - A)m = deg, which is
// factorised directly (dense below kDenseSolveLimit unknowns, sparse Cholesky
// above) and polished by iterative refinement.
inline ExitTimeTable mean_exit_time_exact(const GraphModel& g) {
  validate(g, false);
  require(!g.absorbing.empty(), kModule, ErrorCode::Singular, "absorbing set is empty");
  {
    auto seen = detail::reachable(g, g.absorbing);
    require(std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }), kModule, ErrorCode::Singular,
            "exit-time system is singular: a component has no absorbing vertex");
  }
  auto mask = g.absorbing_mask();
  const std::size_t n = g.vertex_count();
  std::vector<std::int64_t> idx(n, -1);
  std::vector<Vertex> interior;
  for (Vertex v = 0; v < n; ++v)
    if (!mask[v]) {
      idx[v] = static_cast<std::int64_t>(interior.size());
      interior.push_back(v);
    }
  require(!interior.empty(), kModule, ErrorCode::InvalidArgument, "no non-absorbing vertex");
  const Eigen::Index k = static_cast<Eigen::Index>(interior.size());

  Eigen::VectorXd rhs(k);
  for (Eigen::Index r = 0; r < k; ++r) rhs[r] = static_cast<double>(g.degree(interior[r]));

  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index r = 0; r < k; ++r) {
    Vertex v = interior[r];
    trip.emplace_back(r, r, static_cast<double>(g.degree(v)));
    for (Vertex u : g.adjacency[v])
      if (idx[u] >= 0) trip.emplace_back(r, idx[u], -1.0);
  }
  Eigen::SparseMatrix<double> A(k, k);
  A.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd x;
  std::string solver;
  if (interior.size() < kDenseSolveLimit) {
    Eigen::MatrixXd Ad(A);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Ad);
    require(ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0, kModule,
            ErrorCode::Singular, "exit-time system is singular (component without absorbing vertex?)");
    x = ldlt.solve(rhs);
    for (int it = 0; it < 3; ++it) x += ldlt.solve(rhs - A * x);
    solver = "dense_ldlt";
  } else {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    require(ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0, kModule, ErrorCode::Singular,
            "exit-time system is singular (component without absorbing vertex?)");
    x = ldlt.solve(rhs);
    for (int it = 0; it < 3; ++it) x += ldlt.solve(rhs - A * x);
    solver = "sparse_ldlt";
  }
  require(x.allFinite(), kModule, ErrorCode::Singular, "exit-time solve produced non-finite values");

  ExitTimeTable t;
  t.m.assign(n, 0.0);
  for (Eigen::Index r = 0; r < k; ++r) t.m[interior[r]] = x[r];
  t.residual = harmonic_residual(g, t.m);
  t.solver = solver;
  return t;
}

// ---------------------------------------------------------------------------
// Lazy random walk

// One step of the lazy walk (hold 1/2, else uniform neighbour) applied to a
// distribution.
inline std::vector<double> lazy_walk_step(const GraphModel& g, const std::vector<double>& mu) {
  std::vector<double> next(mu.size(), 0.0);
  for (Vertex w = 0; w < g.vertex_count(); ++w) {
    if (mu[w] == 0.0) continue;
    next[w] += 0.5 * mu[w];
    double share = 0.5 * mu[w] / static_cast<double>(g.degree(w));
    for (Vertex u : g.adjacency[w]) next[u] += share;
  }
  return next;
}

// p_n(v, v) for n = 0..steps under the lazy walk.
inline std::vector<double> return_probability(const GraphModel& g, Vertex v, std::size_t steps) {
  require(v < g.vertex_count(), kModule, ErrorCode::InvalidArgument, "vertex out of range");
  std::vector<double> mu(g.vertex_count(), 0.0);
  mu[v] = 1.0;
  std::vector<double> out{1.0};
  out.reserve(steps + 1);
  for (std::size_t n = 1; n <= steps; ++n) {
    mu = lazy_walk_step(g, mu);
    out.push_back(mu[v]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Walk dimension

// `exit_times` holds one mean exit time per level (consecutive levels, each a
// length_factor finer). d_w = log(mean successive ratio) / log(length_factor).
inline FitResult walk_dimension_from_ratios(const std::vector<double>& exit_times, double length_factor) {
  require(exit_times.size() >= 2, kModule, ErrorCode::InvalidArgument, "need at least two levels");
  require(length_factor > 1.0, kModule, ErrorCode::InvalidArgument, "length factor must exceed 1");
  for (double m : exit_times) require(m > 0.0, kModule, ErrorCode::InvalidArgument, "exit times must be positive");
  std::vector<double> ratios;
  for (std::size_t i = 1; i < exit_times.size(); ++i) ratios.push_back(exit_times[i] / exit_times[i - 1]);
  auto est = mean_estimate(ratios);
  FitResult f;
  f.coefficient = est.mean;
  f.exponent = std::log(est.mean) / std::log(length_factor);
  f.std_err = est.mean > 0.0 ? est.std_err / (est.mean * std::log(length_factor)) : 0.0;
  // goodness of the geometric law log m_k = k·log(ratio) + c
  const std::size_t n = exit_times.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += static_cast<double>(i);
    sy += std::log(exit_times[i]);
  }
  double mx = sx / n, my = sy / n, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = i - mx, dy = std::log(exit_times[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  f.t_window = {1.0, std::pow(length_factor, static_cast<double>(n - 1))};
  f.points = n;
  return f;
}

// ---------------------------------------------------------------------------
// Export

inline void write_edges_csv(const GraphModel& g, std::ostream& os) {
  os << "u,v\n";
  for (Vertex v = 0; v < g.vertex_count(); ++v)
    for (Vertex u : g.adjacency[v])
      if (v < u) os << v << ',' << u << '\n';
}

inline void write_vertices_csv(const GraphModel& g, std::ostream& os) {
  os << "vertex,x,y,absorbing\n";
  auto mask = g.absorbing_mask();
  char buf[96];
  for (Vertex v = 0; v < g.vertex_count(); ++v) {
    Point p = v < g.coords.size() ? g.coords[v] : Point{};
    std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%d\n", v, p.x, p.y, mask[v] ? 1 : 0);
    os << buf;
  }
}

inline void write_exit_table_csv(const ExitTimeTable& t, std::ostream& os) {
  os << "vertex,m\n";
  char buf[64];
  for (std::size_t v = 0; v < t.m.size(); ++v) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", v, t.m[v]);
    os << buf;
  }
}

}  // namespace traplab::graphs
