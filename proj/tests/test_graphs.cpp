#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "traplab/graphs.hpp"

using namespace traplab;
using namespace traplab::graphs;

namespace {

// Independent SG(3) oracle: apply every word of length n in the six
// similitudes phi_0..phi_5 to the unit triangle and deduplicate the images of
// its corners and sides on a rounded key.
struct IfsCounts {
  std::size_t vertices = 0;
  std::size_t edges = 0;
};

using P = std::pair<double, double>;

IfsCounts sg3_ifs_enumeration(int n) {
  const double s3 = std::sqrt(3.0);
  const P a[3] = {{0, 0}, {1, 0}, {0.5, s3 / 2}};
  const P c0{1.0 / 3, 0}, c5{1.0 / 6, s3 / 6}, c6{0.5, s3 / 6};
  auto phi = [&](int i, P x) -> P {
    if (i < 3) return {a[i].first + (x.first - a[i].first) / 3, a[i].second + (x.second - a[i].second) / 3};
    const P& c = i == 3 ? c0 : (i == 4 ? c6 : c5);
    return {x.first / 3 + c.first, x.second / 3 + c.second};
  };
  std::vector<std::array<P, 3>> tris{{a[0], a[1], a[2]}};
  for (int k = 0; k < n; ++k) {
    std::vector<std::array<P, 3>> next;
    for (const auto& t : tris)
      for (int i = 0; i < 6; ++i) next.push_back({phi(i, t[0]), phi(i, t[1]), phi(i, t[2])});
    tris = std::move(next);
  }
  auto key = [](P p) { return std::make_pair(std::llround(p.first * 1e9), std::llround(p.second * 1e9)); };
  std::set<std::pair<long long, long long>> verts;
  std::set<std::pair<std::pair<long long, long long>, std::pair<long long, long long>>> edges;
  for (const auto& t : tris)
    for (int e = 0; e < 3; ++e) {
      auto u = key(t[e]), v = key(t[(e + 1) % 3]);
      verts.insert(u);
      edges.insert(u < v ? std::make_pair(u, v) : std::make_pair(v, u));
    }
  return {verts.size(), edges.size()};
}

GraphModel with_absorbing(GraphModel g, std::vector<Vertex> abs) {
  g.absorbing = std::move(abs);
  return g;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST(Graphs, Sg2Counts) {
  auto g0 = build_sg_graph(SgVariant::SG2, 0);
  EXPECT_EQ(g0.vertex_count(), 3u);
  EXPECT_EQ(g0.edge_count(), 3u);
  auto g1 = build_sg_graph(SgVariant::SG2, 1);
  EXPECT_EQ(g1.vertex_count(), 6u);
  EXPECT_EQ(g1.edge_count(), 9u);
  for (int n = 0; n <= 7; ++n) {
    auto g = build_sg_graph(SgVariant::SG2, n);
    EXPECT_EQ(g.vertex_count(), static_cast<std::size_t>(3 * (std::pow(3, n) + 1) / 2));
    EXPECT_EQ(g.edge_count(), static_cast<std::size_t>(std::pow(3, n + 1)));
    EXPECT_NO_THROW(validate(g));
  }
}

TEST(Graphs, CornersAtUnitTriangle) {
  auto g = build_sg_graph(SgVariant::SG3, 2);
  EXPECT_NEAR(g.coords[0].x, 0.0, 1e-15);
  EXPECT_NEAR(g.coords[1].x, 1.0, 1e-15);
  EXPECT_NEAR(g.coords[2].x, 0.5, 1e-15);
  EXPECT_NEAR(g.coords[2].y, std::sqrt(3.0) / 2.0, 1e-15);
  for (Vertex c : g.corners) EXPECT_EQ(g.degree(c), 2u);
}

TEST(Graphs, Sg3AgainstIfsEnumeration) {
  auto g1 = build_sg_graph(SgVariant::SG3, 1);
  EXPECT_EQ(g1.vertex_count(), 10u);
  EXPECT_EQ(g1.edge_count(), 18u);
  for (int n = 0; n <= 4; ++n) {
    auto g = build_sg_graph(SgVariant::SG3, n);
    auto oracle = sg3_ifs_enumeration(n);
    EXPECT_EQ(g.vertex_count(), oracle.vertices) << n;
    EXPECT_EQ(g.edge_count(), oracle.edges) << n;
    EXPECT_EQ(g.vertex_count(), sg_vertex_count(SgVariant::SG3, n));
    EXPECT_NO_THROW(validate(g));
  }
}

TEST(Graphs, Sg3ContainsListedPoints) {
  auto g = build_sg_graph(SgVariant::SG3, 1);
  const double s3 = std::sqrt(3.0);
  std::vector<Point> c{{1.0 / 3, 0}, {2.0 / 3, 0}, {5.0 / 6, s3 / 6}, {2.0 / 3, s3 / 3},
                       {1.0 / 3, s3 / 3}, {1.0 / 6, s3 / 6}, {0.5, s3 / 6}};
  for (const auto& p : c) {
    bool found = false;
    for (const auto& q : g.coords) found = found || norm(p - q) < 1e-12;
    EXPECT_TRUE(found) << p.x << "," << p.y;
  }
}

TEST(Graphs, LevelCap) {
  try {
    build_sg_graph(SgVariant::SG3, 9, 1000000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResourceCap);
  }
}

TEST(Graphs, StarGraphCounts) {
  auto s1 = build_star_graph(1, 1.0, 10);
  EXPECT_EQ(s1.vertex_count(), 11u);
  EXPECT_EQ(s1.absorbing.size(), 1u);
  EXPECT_EQ(s1.degree(s1.absorbing[0]), 1u);
  auto s3 = build_star_graph(3, 1.0, 10);
  EXPECT_EQ(s3.vertex_count(), 31u);
  EXPECT_EQ(s3.degree(0), 3u);
}

TEST(Graphs, ExitTimeBaseCases) {
  auto g0 = with_absorbing(build_sg_graph(SgVariant::SG2, 0), {1, 2});
  auto t0 = mean_exit_time_exact(g0);
  EXPECT_DOUBLE_EQ(t0.m[0], 1.0);
  EXPECT_EQ(t0.m[1], 0.0);
  auto g1 = with_absorbing(build_sg_graph(SgVariant::SG2, 1), {1, 2});
  EXPECT_NEAR(mean_exit_time_exact(g1).m[0], 5.0, 1e-13);
}

TEST(Graphs, Sg2CornerExitTimesArePowersOfFive) {
  for (int n = 0; n <= 6; ++n) {
    auto g = with_absorbing(build_sg_graph(SgVariant::SG2, n), {1, 2});
    auto t = mean_exit_time_exact(g);
    EXPECT_LE(t.residual, 1e-10) << n;
    EXPECT_NEAR(t.m[0], std::pow(5.0, n), 1e-9 * std::pow(5.0, n)) << n;
  }
}

TEST(Graphs, Sg3RatiosApproachNinetyOverSeven) {
  std::vector<double> m;
  for (int n = 0; n <= 5; ++n) {
    auto g = with_absorbing(build_sg_graph(SgVariant::SG3, n), {1, 2});
    auto t = mean_exit_time_exact(g);
    // beyond level 4 the exit times exceed 1e5 and 1e-10 is below one ulp
    EXPECT_LE(t.residual, n <= 4 ? 1e-10 : 1e-15 * t.m[0]) << n;
    m.push_back(t.m[0]);
  }
  // the corner exit ratio is exactly 90/7 from the first level on
  for (int n = 1; n <= 5; ++n) EXPECT_NEAR(m[n] / m[n - 1], 90.0 / 7.0, 1e-9) << n;
  auto f = walk_dimension_from_ratios(m, 3.0);
  EXPECT_NEAR(f.exponent, std::log(90.0 / 7.0) / std::log(3.0), 1e-9);
}

TEST(Graphs, SparsePathMatchesDense) {
  auto g = with_absorbing(build_sg_graph(SgVariant::SG2, 7), {1, 2});
  ASSERT_GT(g.vertex_count(), kDenseSolveLimit);
  auto t = mean_exit_time_exact(g);
  EXPECT_EQ(t.solver, "sparse_ldlt");
  EXPECT_NEAR(t.m[0] / std::pow(5.0, 7), 1.0, 1e-12);
}

TEST(Graphs, StarExitScalesToClosedForm) {
  // SRW steps of length h carry time h^2/2 for the generator Laplacian, so
  // steps * h^2 / 2 is the discrete analogue of (l^2 - x^2)/2 at the hub.
  for (int mesh : {4, 16, 64}) {
    auto g = build_star_graph(3, 1.0, mesh);
    auto t = mean_exit_time_exact(g);
    double h = 1.0 / mesh;
    EXPECT_NEAR(t.m[0] * h * h / 2.0, 0.5, 1e-10);
    // and at distance x along a ray
    Vertex v = static_cast<Vertex>(mesh / 2);
    double x = (mesh / 2) * h;
    EXPECT_NEAR(t.m[v] * h * h / 2.0, (1.0 - x * x) / 2.0, 1e-10);
  }
}

TEST(Graphs, IntervalOracleBothEndsAbsorbing) {
  auto g = build_path_graph(11);
  g.absorbing = {0, 10};
  auto t = mean_exit_time_exact(g);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(t.m[k], k * (10.0 - k), 1e-10);
}

TEST(Graphs, SingularSystem) {
  GraphModel g;
  g.adjacency = {{1}, {0}, {3}, {2}};
  g.coords.resize(4);
  g.absorbing = {0};
  try {
    mean_exit_time_exact(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Singular);
  }
  g.absorbing = {};
  EXPECT_THROW(mean_exit_time_exact(g), Error);
}

TEST(Graphs, ReturnProbabilityBasics) {
  auto k3 = build_sg_graph(SgVariant::SG2, 0);
  auto p = return_probability(k3, 0, 3);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  // mass conservation
  auto g = build_sg_graph(SgVariant::SG3, 2);
  std::vector<double> mu(g.vertex_count(), 0.0);
  mu[5] = 1.0;
  for (int n = 0; n < 200; ++n) {
    mu = lazy_walk_step(g, mu);
    double s = 0;
    for (double v : mu) s += v;
    ASSERT_NEAR(s, 1.0, 1e-13);
  }
}

TEST(Graphs, Sg3ReturnProbabilitySlope) {
  auto g = build_sg_graph(SgVariant::SG3, 5);
  const std::size_t steps = 1 << 12;
  auto p = return_probability(g, 0, steps);
  std::vector<double> x, y;
  for (std::size_t n = 1 << 7; n <= steps; n *= 2) {
    x.push_back(std::log(static_cast<double>(n)));
    y.push_back(std::log(p[n]));
  }
  double expected = -std::log(6.0) / std::log(90.0 / 7.0);
  EXPECT_NEAR(expected, -0.70158, 1e-5);
  EXPECT_NEAR(slope(x, y), expected, 0.03);
}

TEST(Graphs, WalkDimensionFromRatios) {
  auto f = walk_dimension_from_ratios({1, 5, 25, 125}, 2.0);
  EXPECT_NEAR(f.exponent, std::log(5.0) / std::log(2.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(walk_dimension_from_ratios({1, 1}, 3.0).exponent, 0.0, 1e-15);
  EXPECT_THROW(walk_dimension_from_ratios({1}, 2.0), Error);
  EXPECT_THROW(walk_dimension_from_ratios({1, 0}, 2.0), Error);
}

TEST(Graphs, CsvExports) {
  auto g = with_absorbing(build_sg_graph(SgVariant::SG2, 1), {1, 2});
  std::ostringstream e, v, m;
  write_edges_csv(g, e);
  write_vertices_csv(g, v);
  write_exit_table_csv(mean_exit_time_exact(g), m);
  std::string es = e.str();
  EXPECT_EQ(es.rfind("u,v\n", 0), 0u);
  EXPECT_EQ(std::count(es.begin(), es.end(), '\n'), 10);
  EXPECT_EQ(m.str().rfind("vertex,m\n0,5", 0), 0u);
}
