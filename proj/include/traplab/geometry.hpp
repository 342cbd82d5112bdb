#pragma once

// Planar domains: disks, simple polygons, Koch pre-fractal snowflakes (with or
// without walled passages), truncated horns and 1-d intervals, together with
// the containment / crossing / reflection primitives the path engines use.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "traplab/core.hpp"

namespace traplab::geometry {

inline constexpr const char* kModule = "geometry";

struct Segment {
  Point a;
  Point b;
};

struct BBox {
  Point lo;
  Point hi;
};

enum class DomainKind { Disk, Polygon, KochSnowflake, WalledSnowflake, Horn, Interval };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Disk: return "disk";
    case DomainKind::Polygon: return "polygon";
    case DomainKind::KochSnowflake: return "koch";
    case DomainKind::WalledSnowflake: return "walled_koch";
    case DomainKind::Horn: return "horn";
    case DomainKind::Interval: return "interval";
  }
  return "unknown";
}

// One blocked passage of a walled snowflake: the shared side of length `a`
// between a level-`level` triangle and its parent, and the centred opening
// left between its two walls.
struct Passage {
  Segment side;
  double a = 0.0;
  double opening = 0.0;
  int level = 0;
};

struct Crossing {
  double s = 0.0;       // parameter along the query segment, in (0, 1]
  Point point;
  std::size_t segment = 0;
};

struct Nearest {
  double distance = std::numeric_limits<double>::infinity();
  Point point;          // closest boundary point
  Point normal;         // unit vector from the boundary point towards the query
};

inline double point_segment_distance(Point p, Segment s, Point* closest = nullptr) {
  Point d = s.b - s.a;
  double len2 = dot(d, d);
  double u = len2 > 0.0 ? std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0) : 0.0;
  Point c = s.a + u * d;
  if (closest) *closest = c;
  return norm(p - c);
}

inline double shoelace_area(const std::vector<Point>& v) {
  NeumaierSum s;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    s.add(a.x * b.y - b.x * a.y);
  }
  return 0.5 * s.value();
}

namespace detail {

inline bool segments_properly_intersect(Segment p, Segment q) {
  auto orient = [](Point a, Point b, Point c) { return cross(b - a, c - a); };
  double d1 = orient(q.a, q.b, p.a), d2 = orient(q.a, q.b, p.b);
  double d3 = orient(p.a, p.b, q.a), d4 = orient(p.a, p.b, q.b);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// Uniform grid of buckets over the bounding box; each segment is registered in
// every cell its bounding box touches.
class SegmentGrid {
 public:
  SegmentGrid() = default;

  SegmentGrid(const std::vector<Segment>& segs, BBox box) {
    lo_ = box.lo;
    double w = std::max(box.hi.x - box.lo.x, 1e-12);
    double h = std::max(box.hi.y - box.lo.y, 1e-12);
    // aim for a handful of segments per occupied cell
    double target = std::clamp(std::sqrt(static_cast<double>(segs.size())) * 2.0, 1.0, 1024.0);
    cell_ = std::max(w, h) / target;
    nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
    cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const auto& s = segs[k];
      int i0 = col(std::min(s.a.x, s.b.x)), i1 = col(std::max(s.a.x, s.b.x));
      int j0 = row(std::min(s.a.y, s.b.y)), j1 = row(std::max(s.a.y, s.b.y));
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) cells_[index(i, j)].push_back(static_cast<std::uint32_t>(k));
    }
  }

  int col(double x) const { return std::clamp(static_cast<int>(std::floor((x - lo_.x) / cell_)), 0, nx_ - 1); }
  int row(double y) const { return std::clamp(static_cast<int>(std::floor((y - lo_.y) / cell_)), 0, ny_ - 1); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  const std::vector<std::uint32_t>& cell(int i, int j) const { return cells_[index(i, j)]; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return cell_; }

 private:
  Point lo_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;
};

}  // namespace detail

class DomainSpec {
 public:
  DomainKind kind() const { return kind_; }

  double radius() const { return radius_; }
  double length() const { return length_; }
  double alpha() const { return alpha_; }
  int level() const { return level_; }
  double gamma() const { return gamma_; }
  double horn_b() const { return horn_b_; }
  double horn_x_max() const { return horn_x_max_; }
  int horn_mesh() const { return horn_mesh_; }

  // Outer boundary, counterclockwise. Empty for disks and intervals.
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Segment>& walls() const { return walls_; }
  const std::vector<Passage>& passages() const { return passages_; }
  std::size_t edge_count() const { return vertices_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }

  BBox bbox() const { return bbox_; }

  double area() const {
    switch (kind_) {
      case DomainKind::Disk: return std::numbers::pi * radius_ * radius_;
      case DomainKind::Interval: return length_;
      default: return shoelace_area(vertices_);
    }
  }

  // Length of the outer boundary; walls are not counted.
  double perimeter() const {
    switch (kind_) {
      case DomainKind::Disk: return 2.0 * std::numbers::pi * radius_;
      case DomainKind::Interval: return 0.0;
      default: {
        NeumaierSum s;
        for (std::size_t i = 0; i < vertices_.size(); ++i)
          s.add(norm(vertices_[(i + 1) % vertices_.size()] - vertices_[i]));
        return s.value();
      }
    }
  }

  double diameter() const {
    if (kind_ == DomainKind::Disk) return 2.0 * radius_;
    if (kind_ == DomainKind::Interval) return length_;
    return norm(bbox_.hi - bbox_.lo);
  }

  // Open domain: boundary points (including wall points) are outside.
  bool contains(Point p) const {
    if (!is_finite(p)) return false;
    switch (kind_) {
      case DomainKind::Disk: return p.x * p.x + p.y * p.y < radius_ * radius_;
      case DomainKind::Interval: return p.x > 0.0 && p.x < length_;
      default: return polygon_contains(p);
    }
  }

  // Exact Euclidean distance from p to the boundary (walls included).
  Nearest nearest_boundary(Point p) const {
    Nearest out;
    switch (kind_) {
      case DomainKind::Disk: {
        double r = norm(p);
        Point u = r > 0.0 ? (1.0 / r) * p : Point{1.0, 0.0};
        out.point = radius_ * u;
        out.distance = std::abs(radius_ - r);
        out.normal = r <= radius_ ? Point{-u.x, -u.y} : u;
        return out;
      }
      case DomainKind::Interval: {
        if (p.x <= 0.5 * length_) {
          out.distance = std::abs(p.x);
          out.point = {0.0, 0.0};
          out.normal = {p.x >= 0.0 ? 1.0 : -1.0, 0.0};
        } else {
          out.distance = std::abs(length_ - p.x);
          out.point = {length_, 0.0};
          out.normal = {p.x <= length_ ? -1.0 : 1.0, 0.0};
        }
        return out;
      }
      default: return polygon_nearest(p);
    }
  }

  double boundary_distance(Point p) const { return nearest_boundary(p).distance; }

  // First boundary segment crossed when moving from a to b (a assumed inside
  // or on the boundary). `skip` excludes one segment (the one a sits on).
  std::optional<Crossing> first_crossing(Point a, Point b, std::size_t skip = npos) const {
    constexpr double eps = 1e-12;
    std::optional<Crossing> best;
    const auto& g = grid_;
    int i0 = g.col(std::min(a.x, b.x)), i1 = g.col(std::max(a.x, b.x));
    int j0 = g.row(std::min(a.y, b.y)), j1 = g.row(std::max(a.y, b.y));
    Point d = b - a;
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        for (std::uint32_t k : g.cell(i, j)) {
          if (k == skip) continue;
          const Segment& s = segments_[k];
          Point e = s.b - s.a;
          double den = cross(d, e);
          if (den == 0.0) continue;
          Point w = s.a - a;
          double sp = cross(w, e) / den;
          double u = cross(w, d) / den;
          if (sp <= eps || sp > 1.0 || u < 0.0 || u > 1.0) continue;
          if (!best || sp < best->s) best = Crossing{sp, a + sp * d, k};
        }
      }
    }
    return best;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Factories live below as free functions; they need write access.
  friend DomainSpec make_disk(double radius);
  friend DomainSpec make_polygon(std::vector<Point> vertices);
  friend DomainSpec make_interval(double length);
  friend DomainSpec build_koch_snowflake(double alpha, int level, std::size_t max_edges);
  friend DomainSpec build_walled_snowflake(double alpha, int level, double gamma, std::size_t max_edges);
  friend DomainSpec build_horn(double b, double x_max, int mesh);

 private:
  void finalize() {
    segments_.clear();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) segments_.push_back({vertices_[i], vertices_[(i + 1) % n]});
    polygon_edges_ = segments_.size();
    for (const auto& w : walls_) segments_.push_back(w);
    if (kind_ == DomainKind::Disk) {
      bbox_ = {{-radius_, -radius_}, {radius_, radius_}};
    } else if (kind_ == DomainKind::Interval) {
      bbox_ = {{0.0, -0.0}, {length_, 0.0}};
    } else {
      Point lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      Point hi{-lo.x, -lo.y};
      for (const auto& v : vertices_) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
      }
      bbox_ = {lo, hi};
      grid_ = detail::SegmentGrid(segments_, bbox_);
    }
  }

  bool polygon_contains(Point p) const {
    if (p.x < bbox_.lo.x || p.x > bbox_.hi.x || p.y < bbox_.lo.y || p.y > bbox_.hi.y) return false;
    const auto& g = grid_;
    int ci = g.col(p.x), cj = g.row(p.y);
    // on-boundary check against everything registered in the cell of p
    for (std::uint32_t k : g.cell(ci, cj))
      if (point_segment_distance(p, segments_[k]) <= 1e-13) return false;
    // even-odd ray towards +x; candidate edges live in the cells to the right
    std::vector<std::uint32_t> cand;
    for (int i = ci; i < g.nx(); ++i)
      for (std::uint32_t k : g.cell(i, cj))
        if (k < polygon_edges_) cand.push_back(k);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    bool inside = false;
    for (std::uint32_t k : cand) {
      const Point& a = segments_[k].a;
      const Point& b = segments_[k].b;
      if ((a.y > p.y) != (b.y > p.y)) {
        double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (x > p.x) inside = !inside;
      }
    }
    return inside;
  }

  Nearest polygon_nearest(Point p) const {
    const auto& g = grid_;
    int ci = g.col(p.x), cj = g.row(p.y);
    Nearest best;
    std::size_t best_k = npos;
    int max_ring = std::max(g.nx(), g.ny());
    for (int r = 0; r <= max_ring; ++r) {
      for (int j = cj - r; j <= cj + r; ++j) {
        if (j < 0 || j >= g.ny()) continue;
        bool edge_row = (j == cj - r || j == cj + r);
        for (int i = ci - r; i <= ci + r; i += (edge_row ? 1 : 2 * std::max(r, 1))) {
          if (i < 0 || i >= g.nx()) continue;
          for (std::uint32_t k : g.cell(i, j)) {
            Point c;
            double d = point_segment_distance(p, segments_[k], &c);
            if (d < best.distance) {
              best.distance = d;
              best.point = c;
              best_k = k;
            }
          }
        }
      }
      // anything in ring r+1 is at least r cells away
      if (best.distance <= r * g.cell_size()) break;
    }
    if (best_k != npos) {
      Point diff = p - best.point;
      double len = norm(diff);
      if (len > 0.0) {
        best.normal = (1.0 / len) * diff;
      } else {
        Point e = segments_[best_k].b - segments_[best_k].a;
        double el = norm(e);
        best.normal = {-e.y / el, e.x / el};
      }
    }
    return best;
  }

  DomainKind kind_ = DomainKind::Polygon;
  double radius_ = 0.0;
  double length_ = 0.0;
  double alpha_ = 0.0;
  int level_ = 0;
  double gamma_ = 0.0;
  double horn_b_ = 0.0;
  double horn_x_max_ = 0.0;
  int horn_mesh_ = 0;

  std::vector<Point> vertices_;
  std::vector<Segment> walls_;
  std::vector<Passage> passages_;
  std::vector<Segment> segments_;
  std::size_t polygon_edges_ = 0;
  BBox bbox_;
  detail::SegmentGrid grid_;
};

inline DomainSpec make_disk(double radius) {
  require(radius > 0.0 && std::isfinite(radius), kModule, ErrorCode::InvalidArgument, "disk radius must be positive");
  DomainSpec d;
  d.kind_ = DomainKind::Disk;
  d.radius_ = radius;
  d.finalize();
  return d;
}

inline DomainSpec make_interval(double length) {
  require(length > 0.0 && std::isfinite(length), kModule, ErrorCode::InvalidArgument, "interval length must be positive");
  DomainSpec d;
  d.kind_ = DomainKind::Interval;
  d.length_ = length;
  d.finalize();
  return d;
}

// Accepts either orientation and stores the ring counterclockwise. Rejects
// self-intersecting rings.
inline DomainSpec make_polygon(std::vector<Point> vertices) {
  require(vertices.size() >= 3, kModule, ErrorCode::InvalidArgument, "polygon needs at least 3 vertices");
  for (const auto& v : vertices) require(is_finite(v), kModule, ErrorCode::InvalidArgument, "non-finite polygon vertex");
  if (shoelace_area(vertices) < 0.0) std::reverse(vertices.begin(), vertices.end());
  require(shoelace_area(vertices) > 0.0, kModule, ErrorCode::InvalidArgument, "degenerate polygon");
  const std::size_t n = vertices.size();
  if (n <= 4096) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        Segment a{vertices[i], vertices[(i + 1) % n]}, b{vertices[j], vertices[(j + 1) % n]};
        require(!detail::segments_properly_intersect(a, b), kModule, ErrorCode::InvalidArgument,
                "polygon is not simple");
      }
  }
  DomainSpec d;
  d.kind_ = DomainKind::Polygon;
  d.vertices_ = std::move(vertices);
  d.finalize();
  return d;
}

inline DomainSpec make_unit_square() { return make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

// ---------------------------------------------------------------------------
// Koch snowflakes

// Angle of the similitudes that raise each bump.
inline double koch_theta(double alpha) { return std::asin(std::sqrt(alpha * (4.0 - alpha)) / 2.0); }

// The four contractions generating the Koch curve between 0 and 1 (complex plane).
struct KochMaps {
  using C = std::complex<double>;
  double alpha;
  C rot;
  C apex;  // image of 0 under the third map, top of the bump

  explicit KochMaps(double a)
      : alpha(a), rot(std::polar(1.0, koch_theta(a))), apex(0.5, std::sqrt(1.0 / a - 0.25)) {}

  C apply(int i, C z) const {
    switch (i) {
      case 0: return z / alpha;
      case 1: return z / alpha * rot + 1.0 / alpha;
      case 2: return z / alpha * std::conj(rot) + apex;
      default: return (z - 1.0) / alpha + 1.0;
    }
  }
};

namespace detail {

inline constexpr std::size_t kDefaultMaxEdges = std::size_t{1} << 22;

inline void check_koch_args(double alpha, int level, std::size_t max_edges) {
  require(alpha > 2.0 && alpha < 4.0, kModule, ErrorCode::InvalidArgument, "alpha must lie in (2,4)");
  require(level >= 0, kModule, ErrorCode::InvalidArgument, "level must be non-negative");
  require(level <= 15 && 3.0 * std::pow(4.0, level) <= static_cast<double>(max_edges), kModule,
          ErrorCode::ResourceCap, "level " + std::to_string(level) + " exceeds the edge budget");
}

// Points of the level-n pre-fractal curve from 0 to 1, endpoints included.
inline std::vector<std::complex<double>> koch_curve(double alpha, int level) {
  KochMaps maps(alpha);
  std::vector<std::complex<double>> cur{{0.0, 0.0}, {1.0, 0.0}};
  for (int n = 0; n < level; ++n) {
    std::vector<std::complex<double>> next;
    next.reserve(4 * (cur.size() - 1) + 1);
    for (int i = 0; i < 4; ++i) {
      for (std::size_t k = (i == 0 ? 0 : 1); k < cur.size(); ++k) next.push_back(maps.apply(i, cur[k]));
    }
    cur = std::move(next);
  }
  return cur;
}

// Base triangle sides A->B->C->A; the bumps lie to the left of each side,
// which is outside because this traversal is clockwise.
inline std::vector<std::pair<Point, Point>> koch_sides() {
  const Point A{0.0, 0.0}, B{1.0, 0.0}, C{0.5, -std::sqrt(3.0) / 2.0};
  return {{A, B}, {B, C}, {C, A}};
}

inline Point map_to_side(std::complex<double> z, Point p, Point q) {
  std::complex<double> P(p.x, p.y), Q(q.x, q.y);
  auto w = P + (Q - P) * z;
  return {w.real(), w.imag()};
}

}  // namespace detail

inline DomainSpec build_koch_snowflake(double alpha, int level, std::size_t max_edges = detail::kDefaultMaxEdges) {
  detail::check_koch_args(alpha, level, max_edges);
  auto curve = detail::koch_curve(alpha, level);
  std::vector<Point> ring;
  ring.reserve(3 * (curve.size() - 1));
  for (auto [p, q] : detail::koch_sides())
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) ring.push_back(detail::map_to_side(curve[k], p, q));
  std::reverse(ring.begin(), ring.end());
  DomainSpec d;
  d.kind_ = DomainKind::KochSnowflake;
  d.alpha_ = alpha;
  d.level_ = level;
  d.vertices_ = std::move(ring);
  d.finalize();
  return d;
}

// Opening left in a passage of length a: exp(-a^-gamma), never wider than a.
inline double wall_opening(double gamma, double a) { return std::min(std::exp(-std::pow(a, -gamma)), a); }

inline DomainSpec build_walled_snowflake(double alpha, int level, double gamma,
                                         std::size_t max_edges = detail::kDefaultMaxEdges) {
  require(std::isfinite(gamma), kModule, ErrorCode::InvalidArgument, "gamma must be finite");
  DomainSpec d = build_koch_snowflake(alpha, level, max_edges);
  d.kind_ = DomainKind::WalledSnowflake;
  d.gamma_ = gamma;
  KochMaps maps(alpha);
  const double base_a = 1.0 - 2.0 / alpha;
  // Passages of level k sit on the middle portion of every level-(k-1) edge.
  for (int k = 1; k <= level; ++k) {
    auto curve = detail::koch_curve(alpha, k - 1);
    const double a = base_a * std::pow(alpha, -(k - 1));
    const double w = wall_opening(gamma, a);
    require(w > 0.0, kModule, ErrorCode::Underflow,
            "wall opening exp(-a^-gamma) underflows to 0 at level " + std::to_string(k) + " (a=" + std::to_string(a) +
                ", gamma=" + std::to_string(gamma) + ")");
    for (auto [p, q] : detail::koch_sides()) {
      for (std::size_t s = 0; s + 1 < curve.size(); ++s) {
        auto z0 = curve[s], z1 = curve[s + 1];
        auto x = detail::map_to_side(z0 + (z1 - z0) * maps.apply(1, 0.0), p, q);
        auto y = detail::map_to_side(z0 + (z1 - z0) * maps.apply(3, 0.0), p, q);
        Passage pass{{x, y}, a, w, k};
        d.passages_.push_back(pass);
        if (w < a) {
          Point dir = (1.0 / a) * (y - x);
          double wall = 0.5 * (a - w);
          d.walls_.push_back({x, x + wall * dir});
          d.walls_.push_back({y - wall * dir, y});
        }
      }
    }
  }
  d.finalize();
  return d;
}

// Centroids of a nested chain of bump triangles: entry k (k >= 1) lies deep
// inside a level-k triangle sitting on the side A-B, each inside the bump of
// the previous one. Entry 0 is a point of the base triangle halfway between
// its centre and the side A-B.
inline std::vector<Point> koch_chain_points(double alpha, int depth) {
  require(alpha > 2.0 && alpha < 4.0, kModule, ErrorCode::InvalidArgument, "alpha must lie in (2,4)");
  KochMaps maps(alpha);
  const auto sides = detail::koch_sides();
  const Point A = sides[0].first, B = sides[0].second;
  std::vector<Point> out;
  out.push_back({0.5, -std::sqrt(3.0) / 12.0});
  std::complex<double> z0(0.0, 0.0), z1(1.0, 0.0);  // current segment image
  for (int k = 1; k <= depth; ++k) {
    auto seg = [&](std::complex<double> z) { return z0 + (z1 - z0) * z; };
    Point p = detail::map_to_side(seg(maps.apply(1, 0.0)), A, B);
    Point q = detail::map_to_side(seg(maps.apply(3, 0.0)), A, B);
    Point r = detail::map_to_side(seg(maps.apply(1, 1.0)), A, B);
    out.push_back((1.0 / 3.0) * (p + q + r));
    // descend into the left side of this bump
    auto n0 = seg(maps.apply(1, 0.0)), n1 = seg(maps.apply(1, 1.0));
    z0 = n0;
    z1 = n1;
  }
  return out;
}

inline Point base_triangle_center() { return {0.5, -std::sqrt(3.0) / 6.0}; }

// ---------------------------------------------------------------------------
// Horn

// Polygonal approximation of {1 < x < x_max, |y| <= exp(-x^b)} with `mesh`
// abscissae per side.
inline DomainSpec build_horn(double b, double x_max, int mesh) {
  require(b > 0.0, kModule, ErrorCode::InvalidArgument, "horn exponent b must be positive");
  require(x_max > 1.0, kModule, ErrorCode::InvalidArgument, "horn truncation x_max must exceed 1");
  require(mesh >= 2, kModule, ErrorCode::InvalidArgument, "horn mesh must be at least 2");
  std::vector<Point> ring;
  for (int i = 0; i <= mesh; ++i) {
    double x = 1.0 + (x_max - 1.0) * i / mesh;
    ring.push_back({x, -std::exp(-std::pow(x, b))});
  }
  for (int i = mesh; i >= 0; --i) {
    double x = 1.0 + (x_max - 1.0) * i / mesh;
    ring.push_back({x, std::exp(-std::pow(x, b))});
  }
  DomainSpec d = make_polygon(std::move(ring));
  d.kind_ = DomainKind::Horn;
  d.horn_b_ = b;
  d.horn_x_max_ = x_max;
  d.horn_mesh_ = mesh;
  return d;
}

// ---------------------------------------------------------------------------
// Specular reflection

inline constexpr int kReflectIterationCap = 64;

// Moves from `from` towards `to`, mirroring the overshoot about every
// boundary piece it crosses, until the endpoint is inside.
inline Point reflect_step(const DomainSpec& d, Point from, Point to, int cap = kReflectIterationCap) {
  switch (d.kind()) {
    case DomainKind::Interval: {
      double L = d.length();
      double x = to.x;
      for (int it = 0;; ++it) {
        if (x > 0.0 && x < L) return {x, 0.0};
        require(it < cap, kModule, ErrorCode::IterationCap, "reflection did not settle; shrink the step");
        if (x <= 0.0) x = -x;
        if (x >= L) x = 2.0 * L - x;
        if (x == 0.0 || x == L) return {from.x, 0.0};
      }
    }
    case DomainKind::Disk: {
      const double R = d.radius();
      Point a = from, b = to;
      for (int it = 0;; ++it) {
        if (dot(b, b) < R * R) return b;
        require(it < cap, kModule, ErrorCode::IterationCap, "reflection did not settle; shrink the step");
        Point v = b - a;
        double A = dot(v, v), B = 2.0 * dot(a, v), Cc = dot(a, a) - R * R;
        double disc = std::max(B * B - 4.0 * A * Cc, 0.0);
        double s = (-B + std::sqrt(disc)) / (2.0 * A);
        Point hit = a + s * v;
        Point n = (1.0 / norm(hit)) * hit;
        hit = R * n;
        Point rem = b - hit;
        b = hit + rem - (2.0 * dot(rem, n)) * n;
        a = hit;
        if (dot(b, b) == R * R) return from;
      }
    }
    default: {
      Point a = from, b = to;
      std::size_t skip = DomainSpec::npos;
      for (int it = 0;; ++it) {
        auto hit = d.first_crossing(a, b, skip);
        if (!hit) return d.contains(b) ? b : from;
        require(it < cap, kModule, ErrorCode::IterationCap, "reflection did not settle; shrink the step");
        const Segment& s = d.segments()[hit->segment];
        Point e = s.b - s.a;
        Point n{-e.y, e.x};
        n = (1.0 / norm(n)) * n;
        Point rem = b - hit->point;
        b = hit->point + rem - (2.0 * dot(rem, n)) * n;
        a = hit->point;
        skip = hit->segment;
      }
    }
  }
}

inline bool contains(const DomainSpec& d, Point p) { return d.contains(p); }

// ---------------------------------------------------------------------------
// Export

// Rings of the outline: ring 0 is the outer boundary (circle sampled at 512
// points for disks), each wall is its own two-point ring.
inline std::vector<std::vector<Point>> outline_rings(const DomainSpec& d) {
  std::vector<std::vector<Point>> rings;
  switch (d.kind()) {
    case DomainKind::Disk: {
      std::vector<Point> ring;
      for (int i = 0; i < 512; ++i) {
        double th = 2.0 * std::numbers::pi * i / 512.0;
        ring.push_back({d.radius() * std::cos(th), d.radius() * std::sin(th)});
      }
      rings.push_back(std::move(ring));
      break;
    }
    case DomainKind::Interval: rings.push_back({{0.0, 0.0}, {d.length(), 0.0}}); break;
    default: rings.push_back(d.vertices());
  }
  for (const auto& w : d.walls()) rings.push_back({w.a, w.b});
  return rings;
}

inline void write_geometry_csv(const DomainSpec& d, std::ostream& os) {
  os << "ring_id,x,y\n";
  auto rings = outline_rings(d);
  char buf[96];
  for (std::size_t r = 0; r < rings.size(); ++r)
    for (const auto& p : rings[r]) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, p.x, p.y);
      os << buf;
    }
}

inline void write_geometry_svg(const DomainSpec& d, std::ostream& os, double size_px = 800.0) {
  BBox b = d.bbox();
  double w = std::max(b.hi.x - b.lo.x, 1e-9), h = std::max(b.hi.y - b.lo.y, 1e-9);
  double scale = size_px / std::max(w, h);
  double pad = 10.0;
  auto X = [&](double x) { return pad + (x - b.lo.x) * scale; };
  auto Y = [&](double y) { return pad + (b.hi.y - y) * scale; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (w * scale + 2 * pad) << "\" height=\""
     << (h * scale + 2 * pad) << "\">\n";
  auto rings = outline_rings(d);
  for (std::size_t r = 0; r < rings.size(); ++r) {
    bool closed = r == 0 && d.kind() != DomainKind::Interval;
    os << (closed ? "<polygon" : "<polyline") << " fill=\"none\" stroke=\"" << (r == 0 ? "black" : "red")
       << "\" stroke-width=\"1\" points=\"";
    for (const auto& p : rings[r]) os << X(p.x) << ',' << Y(p.y) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace traplab::geometry
