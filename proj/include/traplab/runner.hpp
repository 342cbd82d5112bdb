#pragma once

// Configuration-driven experiments. A config is a strict JSON object
// {experiment, params, seed, workers, out_dir}; each experiment declares its
// parameter keys with defaults, unknown keys are rejected, and the resolved
// config (defaults filled in) is echoed into manifest.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "traplab/core.hpp"
#include "traplab/criteria.hpp"
#include "traplab/estimators.hpp"
#include "traplab/geometry.hpp"
#include "traplab/graphs.hpp"
#include "traplab/io.hpp"
#include "traplab/paths.hpp"
#include "traplab/subordination.hpp"

#ifndef TRAPLAB_VERSION
#define TRAPLAB_VERSION "0.1.0"
#endif

namespace traplab::runner {

inline constexpr const char* kModule = "cli";

using json = nlohmann::ordered_json;
using io::CsvTable;
using io::fmt;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"geometry-export", "graph-exact", "criteria",
                                              "heat-content",    "fractional-heat-content", "trap-scan",
                                              "sticky-exit",     "msd",         "subordinator-check"};
  return names;
}

// Upper bound on path counts accepted from a config.
inline constexpr double kMaxPaths = 1e8;

// ---------------------------------------------------------------------------
// Parameter schemas

namespace detail {

inline json domain_defaults(const std::string& kind, double alpha, int level) {
  return json{{"domain", kind},   {"radius", 1.0},     {"length", 1.0},      {"vertices", json::array()},
              {"alpha", alpha},   {"level", level},    {"gamma", 2.5},       {"horn_b", 2.0},
              {"horn_x_max", 6.0}, {"horn_mesh", 400}};
}

inline void merge(json& into, const json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) into[it.key()] = it.value();
}

inline json path_defaults(double h, double max_steps) {
  return json{{"h", h}, {"max_steps", max_steps}, {"diffusivity", 1.0}, {"bridge_correction", true}, {"adaptive", true}};
}

}  // namespace detail

inline json param_defaults(const std::string& experiment) {
  using detail::merge;
  json p;
  if (experiment == "geometry-export") {
    p = detail::domain_defaults("koch", 3.0, 3);
    merge(p, {{"svg_size", 800.0}});
  } else if (experiment == "graph-exact") {
    p = {{"variant", "SG2"}, {"level_min", 0}, {"level_max", 4}};
  } else if (experiment == "criteria") {
    const double pi = std::numbers::pi;
    p = {{"horn_b", {1.0, 2.0, 3.0}},
         {"horn_x_cap", 100.0},
         {"koch_gamma", {1.5, 2.0, 3.0}},
         {"koch_a", 1.0 / 3.0},
         {"corner_angles", {pi / 3.0, pi / 2.0, pi}},
         {"koch_alpha", {2.5, 3.0}}};
  } else if (experiment == "heat-content" || experiment == "fractional-heat-content") {
    p = detail::domain_defaults("disk", 3.0, 4);
    merge(p, detail::path_defaults(1e-4, 1e6));
    merge(p, {{"t_min", 1e-5},
              {"t_ratio", 2.0},
              {"t_points", 8},
              {"n_samples", 100000},
              {"steps_per_min_time", 32},
              {"far_field_sigmas", 7.0},
              {"fit_t_min", 0.0},
              {"fit_t_max", 0.0}});
    if (experiment == "fractional-heat-content") p["beta"] = 0.5;
  } else if (experiment == "trap-scan") {
    p = detail::domain_defaults("koch", 3.0, 3);
    merge(p, detail::path_defaults(1e-4, 1e6));
    merge(p, {{"ball_center", json::array()},
              {"ball_radius", 0.1},
              {"starts", json::array()},
              {"max_depth", 3},
              {"square_depths", {0.15, 0.25, 0.33, 0.42}},
              {"n_paths", 1000},
              {"growth_ratio", 5.0},
              {"min_spearman", 0.8},
              {"max_censor", 0.2}});
  } else if (experiment == "sticky-exit") {
    p = detail::path_defaults(1e-4, 1e8);
    merge(p, {{"ell", 1.0},
              {"x0", 0.0},
              {"clock", "gamma"},
              {"clock_alpha", 0.5},
              {"clock_a", 1.0},
              {"clock_b", 1.0},
              {"clock_theta", 1.0},
              {"eta_over_sigma", 1.0},
              {"n_paths", 10000}});
  } else if (experiment == "msd") {
    p = {{"graph", "SG2"},  {"level", 8},       {"n_steps", 8192},   {"n_paths", 2000},   {"clock", "identity"},
         {"clock_alpha", 0.5}, {"clock_a", 1.0}, {"clock_b", 1.0},    {"clock_theta", 1.0}, {"t_min", 256.0},
         {"t_ratio", 2.0},  {"t_points", 13},   {"max_steps", 1048576}, {"burn_in", 16.0}};
  } else if (experiment == "subordinator-check") {
    p = {{"n_samples", 100000},   {"lambda", 1.0},        {"stable_alpha", 0.5}, {"gamma_a", 1.0},
         {"gamma_b", 1.0},        {"tempered_alpha", 0.5}, {"tempered_theta", 1.0}, {"inverse_t", 1.0},
         {"inverse_thetas", {1.0, 1.5}}, {"derivative_h", 1e-4}};
  } else {
    throw Error(kModule, ErrorCode::Schema, "unknown experiment '" + experiment + "'");
  }
  return p;
}

namespace detail {

inline bool same_kind(const json& def, const json& v) {
  if (def.is_number()) return v.is_number() && !v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_object()) return v.is_object();
  return false;
}

}  // namespace detail

// Validates against the schema and fills every default in.
inline json resolve_config(const json& cfg) {
  require(cfg.is_object(), kModule, ErrorCode::Schema, "config must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const auto& k = it.key();
    require(k == "experiment" || k == "params" || k == "seed" || k == "workers" || k == "out_dir", kModule,
            ErrorCode::Schema, "unknown key '" + k + "'");
  }
  require(cfg.contains("experiment") && cfg["experiment"].is_string(), kModule, ErrorCode::Schema,
          "missing required string key 'experiment'");
  const std::string exp = cfg["experiment"].get<std::string>();
  bool known = false;
  for (const auto& n : experiment_names()) known |= n == exp;
  require(known, kModule, ErrorCode::Schema, "unknown experiment '" + exp + "'");
  json out;
  out["experiment"] = exp;
  json params = param_defaults(exp);
  if (cfg.contains("params")) {
    require(cfg["params"].is_object(), kModule, ErrorCode::Schema, "'params' must be an object");
    for (auto it = cfg["params"].begin(); it != cfg["params"].end(); ++it) {
      require(params.contains(it.key()), kModule, ErrorCode::Schema,
              "unknown key 'params." + it.key() + "' for experiment " + exp);
      require(detail::same_kind(params[it.key()], it.value()), kModule, ErrorCode::Schema,
              "wrong type for 'params." + it.key() + "'");
      params[it.key()] = it.value();
    }
  }
  out["params"] = params;
  std::uint64_t seed = 0;
  if (cfg.contains("seed")) {
    require(cfg["seed"].is_number_unsigned() || (cfg["seed"].is_number_integer() && cfg["seed"].get<long long>() >= 0),
            kModule, ErrorCode::Schema, "'seed' must be a non-negative 64-bit integer");
    seed = cfg["seed"].get<std::uint64_t>();
  }
  out["seed"] = seed;
  long long workers = 1;
  if (cfg.contains("workers")) {
    require(cfg["workers"].is_number_integer() && cfg["workers"].get<long long>() >= 0 &&
                cfg["workers"].get<long long>() <= 1024,
            kModule, ErrorCode::Schema, "'workers' must be an integer in [0, 1024] (0 = all cores)");
    workers = cfg["workers"].get<long long>();
  }
  out["workers"] = workers;
  std::string out_dir = "out";
  if (cfg.contains("out_dir")) {
    require(cfg["out_dir"].is_string() && !cfg["out_dir"].get<std::string>().empty(), kModule, ErrorCode::Schema,
            "'out_dir' must be a non-empty string");
    out_dir = cfg["out_dir"].get<std::string>();
  }
  out["out_dir"] = out_dir;
  return out;
}

// key=value with value parsed as JSON when possible, else as a string. Keys
// seed, workers, out_dir and experiment address the top level; anything else
// (optionally prefixed "params.") addresses a parameter.
inline void apply_override(json& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  require(eq != std::string::npos && eq > 0, kModule, ErrorCode::Schema, "override must look like key=value: " + kv);
  std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  if (key == "seed" || key == "workers" || key == "out_dir" || key == "experiment") {
    cfg[key] = value;
    return;
  }
  if (key.rfind("params.", 0) == 0) key = key.substr(7);
  require(!key.empty() && key.find('.') == std::string::npos, kModule, ErrorCode::Schema, "bad override key: " + kv);
  cfg["params"][key] = value;
}

// ---------------------------------------------------------------------------
// Parameter access

class Params {
 public:
  explicit Params(const json& p) : p_(p) {}
  double num(const char* k) const { return p_.at(k).get<double>(); }
  long long integer(const char* k) const {
    double v = num(k);
    require(std::floor(v) == v, kModule, ErrorCode::Schema, std::string("'params.") + k + "' must be an integer");
    return static_cast<long long>(v);
  }
  std::size_t count(const char* k) const {
    long long v = integer(k);
    require(v >= 0 && static_cast<double>(v) <= kMaxPaths, kModule, ErrorCode::ResourceCap,
            std::string("'params.") + k + "' outside [0, 1e8]");
    return static_cast<std::size_t>(v);
  }
  std::string str(const char* k) const { return p_.at(k).get<std::string>(); }
  bool flag(const char* k) const { return p_.at(k).get<bool>(); }
  std::vector<double> list(const char* k) const {
    std::vector<double> out;
    for (const auto& v : p_.at(k)) {
      require(v.is_number(), kModule, ErrorCode::Schema, std::string("'params.") + k + "' must hold numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  std::vector<Point> points(const char* k) const {
    std::vector<Point> out;
    for (const auto& v : p_.at(k)) {
      require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(), kModule, ErrorCode::Schema,
              std::string("'params.") + k + "' must hold [x, y] pairs");
      out.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return out;
  }

 private:
  const json& p_;
};

inline geometry::DomainSpec build_domain(const Params& p) {
  const std::string kind = p.str("domain");
  if (kind == "disk") return geometry::make_disk(p.num("radius"));
  if (kind == "interval") return geometry::make_interval(p.num("length"));
  if (kind == "square") return geometry::make_unit_square();
  if (kind == "polygon") return geometry::make_polygon(p.points("vertices"));
  if (kind == "koch") return geometry::build_koch_snowflake(p.num("alpha"), static_cast<int>(p.integer("level")));
  if (kind == "walled")
    return geometry::build_walled_snowflake(p.num("alpha"), static_cast<int>(p.integer("level")), p.num("gamma"));
  if (kind == "horn")
    return geometry::build_horn(p.num("horn_b"), p.num("horn_x_max"), static_cast<int>(p.integer("horn_mesh")));
  throw Error(kModule, ErrorCode::Schema,
              "unknown domain '" + kind + "' (disk, interval, square, polygon, koch, walled, horn)");
}

inline paths::PathConfig path_config(const Params& p, std::uint64_t seed) {
  paths::PathConfig c;
  c.h = p.num("h");
  c.max_steps = static_cast<std::size_t>(p.integer("max_steps"));
  c.diffusivity = p.num("diffusivity");
  c.bridge_correction = p.flag("bridge_correction");
  c.adaptive = p.flag("adaptive");
  c.seed = seed;
  return c;
}

inline subordination::BernsteinFunction clock_from(const Params& p) {
  using subordination::BernsteinFunction;
  const std::string kind = p.str("clock");
  if (kind == "identity") return BernsteinFunction::identity();
  if (kind == "stable") return BernsteinFunction::stable(p.num("clock_alpha"));
  if (kind == "gamma") return BernsteinFunction::gamma(p.num("clock_a"), p.num("clock_b"));
  if (kind == "tempered_stable") return BernsteinFunction::tempered_stable(p.num("clock_alpha"), p.num("clock_theta"));
  throw Error(kModule, ErrorCode::Schema, "unknown clock '" + kind + "' (identity, stable, gamma, tempered_stable)");
}

inline std::vector<double> time_grid(const Params& p) {
  double t0 = p.num("t_min"), r = p.num("t_ratio");
  std::size_t n = p.count("t_points");
  require(t0 > 0.0 && r > 1.0 && n >= 1, kModule, ErrorCode::Schema, "time grid needs t_min > 0, t_ratio > 1, t_points >= 1");
  return dyadic_grid(t0, n, r);
}

// ---------------------------------------------------------------------------
// Experiments

struct Outputs {
  std::vector<std::pair<std::string, CsvTable>> tables;
  std::vector<std::pair<std::string, std::string>> texts;
  std::vector<std::string> warnings;
};

inline Outputs run_geometry_export(const Params& p) {
  auto d = build_domain(p);
  Outputs o;
  std::ostringstream csv, svg;
  geometry::write_geometry_csv(d, csv);
  geometry::write_geometry_svg(d, svg, p.num("svg_size"));
  o.texts.push_back({"geometry.csv", csv.str()});
  o.texts.push_back({"geometry.svg", svg.str()});
  CsvTable s{{"kind", "edges", "walls", "area", "perimeter", "diameter"}, {}};
  s.add({geometry::to_string(d.kind()), fmt(d.edge_count()), fmt(d.walls().size()), fmt(d.area()), fmt(d.perimeter()),
         fmt(d.diameter())});
  o.tables.push_back({"geometry_summary.csv", s});
  return o;
}

inline Outputs run_graph_exact(const Params& p) {
  const std::string v = p.str("variant");
  require(v == "SG2" || v == "SG3", kModule, ErrorCode::Schema, "variant must be SG2 or SG3");
  const auto variant = v == "SG2" ? graphs::SgVariant::SG2 : graphs::SgVariant::SG3;
  const long long lo = p.integer("level_min"), hi = p.integer("level_max");
  require(0 <= lo && lo <= hi, kModule, ErrorCode::Schema, "need 0 <= level_min <= level_max");
  CsvTable t{{"level", "vertices", "corner_exit_time", "residual", "solver"}, {}};
  std::vector<double> times;
  for (long long n = lo; n <= hi; ++n) {
    auto g = graphs::build_sg_graph(variant, static_cast<int>(n));
    g.absorbing = {g.corners[1], g.corners[2]};
    auto tab = graphs::mean_exit_time_exact(g);
    double m = tab.m[g.corners[0]];
    times.push_back(m);
    t.add({fmt(static_cast<std::size_t>(n)), fmt(g.vertex_count()), fmt(m), fmt(tab.residual), tab.solver});
  }
  Outputs o;
  o.tables.push_back({"graph_exact.csv", t});
  if (times.size() >= 2) {
    double factor = variant == graphs::SgVariant::SG2 ? 2.0 : 3.0;
    auto f = graphs::walk_dimension_from_ratios(times, factor);
    CsvTable w{{"variant", "length_factor", "mean_ratio", "walk_dimension", "r_squared"}, {}};
    w.add({v, fmt(factor), fmt(f.coefficient), fmt(f.exponent), fmt(f.r_squared)});
    o.tables.push_back({"walk_dimension.csv", w});
  }
  return o;
}

inline Outputs run_criteria(const Params& p) {
  CsvTable t{{"family", "params", "verdict", "evidence_tail"}, {}};
  const double cap = p.num("horn_x_cap");
  for (double b : p.list("horn_b")) {
    auto v = criteria::horn_trap_classifier(b, cap);
    t.add({"horn", "b=" + fmt(b) + ";x_cap=" + fmt(cap), criteria::to_string(v.verdict), fmt(v.evidence.back())});
  }
  const double a = p.num("koch_a");
  for (double g : p.list("koch_gamma")) {
    auto v = criteria::modified_koch_classifier(g, a);
    t.add({"modified_koch", "gamma=" + fmt(g) + ";a=" + fmt(a), criteria::to_string(v.verdict),
           fmt(v.evidence.back())});
  }
  for (double ang : p.list("corner_angles"))
    t.add({"corner_coefficient", "angle=" + fmt(ang), "Value", fmt(criteria::corner_coefficient(ang))});
  for (double al : p.list("koch_alpha"))
    t.add({"koch_exponent", "alpha=" + fmt(al), "Value", fmt(criteria::koch_heat_exponent(al))});
  Outputs o;
  o.tables.push_back({"criteria.csv", t});
  return o;
}

inline Outputs run_heat_content(const Params& p, const BatchConfig& batch, std::uint64_t seed, bool fractional) {
  auto d = build_domain(p);
  auto cfg = path_config(p, seed);
  auto grid = time_grid(p);
  estimators::HeatContentOptions opt;
  opt.steps_per_min_time = p.count("steps_per_min_time");
  opt.far_field_sigmas = p.num("far_field_sigmas");
  const std::size_t n = p.count("n_samples");
  auto r = fractional ? estimators::fractional_heat_content_mc(
                            d, subordination::BernsteinFunction::stable(p.num("beta")), grid, n, cfg, batch, opt)
                      : estimators::heat_content_mc(d, grid, n, cfg, batch, opt);
  CsvTable t{{"t", "Q_hat", "std_err", "loss"}, {}};
  for (std::size_t j = 0; j < r.t.size(); ++j) t.add({fmt(r.t[j]), fmt(r.q_hat[j]), fmt(r.std_err[j]), fmt(r.loss[j])});
  Outputs o;
  o.tables.push_back({fractional ? "fractional_heat_content.csv" : "heat_content.csv", t});
  o.warnings = r.warnings;
  double lo = p.num("fit_t_min"), hi = p.num("fit_t_max");
  if (hi <= 0.0) hi = std::numeric_limits<double>::infinity();
  std::size_t in_window = 0;
  for (double tt : grid) in_window += (tt >= lo * (1 - 1e-12) && tt <= hi * (1 + 1e-12)) ? 1 : 0;
  if (in_window >= 4) {
    auto f = estimators::heat_loss_exponent_fit(r, r.area, lo, hi);
    CsvTable ft{{"exponent", "coefficient", "std_err", "r_squared", "t_min", "t_max", "points", "inconclusive"}, {}};
    ft.add({fmt(f.fit.exponent), fmt(f.fit.coefficient), fmt(f.fit.std_err), fmt(f.fit.r_squared),
            fmt(f.fit.t_window.first), fmt(f.fit.t_window.second), fmt(f.fit.points), f.inconclusive ? "1" : "0"});
    o.tables.push_back({"fit.csv", ft});
    if (f.inconclusive) o.warnings.push_back(f.note);
  } else {
    o.warnings.push_back("fewer than 4 grid points in the fit window; no fit written");
  }
  return o;
}

inline Outputs run_trap_scan(const Params& p, const BatchConfig& batch, std::uint64_t seed) {
  auto d = build_domain(p);
  auto cfg = path_config(p, seed);
  const std::string kind = p.str("domain");
  paths::TargetBall ball;
  auto center = p.list("ball_center");
  if (!center.empty()) {
    require(center.size() == 2, kModule, ErrorCode::Schema, "'params.ball_center' must be [x, y]");
    ball.center = {center[0], center[1]};
  } else if (kind == "koch" || kind == "walled") {
    ball.center = geometry::base_triangle_center();
  } else if (kind == "square") {
    ball.center = {0.5, 0.5};
  } else if (kind == "disk") {
    ball.center = {0.0, 0.0};
  } else {
    throw Error(kModule, ErrorCode::Schema, "'params.ball_center' is required for domain " + kind);
  }
  ball.radius = p.num("ball_radius");
  std::vector<estimators::LabeledStart> starts;
  auto explicit_starts = p.points("starts");
  if (!explicit_starts.empty()) {
    for (std::size_t i = 0; i < explicit_starts.size(); ++i) starts.push_back({std::to_string(i), explicit_starts[i]});
  } else if (kind == "koch" || kind == "walled") {
    auto pts = geometry::koch_chain_points(p.num("alpha"), static_cast<int>(p.integer("max_depth")));
    for (std::size_t i = 0; i < pts.size(); ++i) starts.push_back({std::to_string(i), pts[i]});
  } else if (kind == "square") {
    // depth k sits at distance d_k from the centre along the diagonal towards (0, 0)
    auto ds = p.list("square_depths");
    for (std::size_t i = 0; i < ds.size(); ++i) starts.push_back({std::to_string(i), {0.5 - ds[i], 0.5 - ds[i]}});
  } else {
    throw Error(kModule, ErrorCode::Schema, "'params.starts' is required for domain " + kind);
  }
  estimators::TrapScanOptions opt;
  opt.growth_ratio = p.num("growth_ratio");
  opt.min_spearman = p.num("min_spearman");
  opt.max_censor = p.num("max_censor");
  auto s = estimators::trap_scan(d, ball, starts, p.count("n_paths"), cfg.horizon(), cfg, batch, opt);
  CsvTable t{{"depth", "mean_TB", "std_err", "censor_rate"}, {}};
  for (std::size_t j = 0; j < s.depth_labels.size(); ++j)
    t.add({s.depth_labels[j], fmt(s.mean_hitting_times[j]), fmt(s.std_errs[j]), fmt(s.censor_rates[j])});
  CsvTable c{{"classification", "ratio", "spearman", "max_censor_rate"}, {}};
  c.add({estimators::to_string(s.classification), fmt(s.ratio), fmt(s.spearman),
         fmt(*std::max_element(s.censor_rates.begin(), s.censor_rates.end()))});
  Outputs o;
  o.tables.push_back({"trap_scan.csv", t});
  o.tables.push_back({"classification.csv", c});
  if (s.classification == estimators::TrapClass::Inconclusive)
    o.warnings.push_back("trap scan inconclusive: censoring above " + fmt(opt.max_censor));
  return o;
}

inline Outputs run_sticky_exit(const Params& p, const BatchConfig& batch, std::uint64_t seed) {
  auto cfg = path_config(p, seed);
  auto bf = clock_from(p);
  auto r = estimators::sticky_exit_mean(p.num("ell"), p.num("x0"), bf, p.num("eta_over_sigma"), p.count("n_paths"), cfg,
                                        batch);
  CsvTable t{{"estimate", "std_err", "closed_form", "non_convergent", "growth_slope"}, {}};
  t.add({fmt(r.estimate), fmt(r.std_err), fmt(r.closed_form), r.non_convergent ? "1" : "0", fmt(r.growth_slope)});
  CsvTable rm{{"paths", "running_mean"}, {}};
  for (auto [n, v] : r.running_mean) rm.add({fmt(n), fmt(v)});
  Outputs o;
  o.tables.push_back({"sticky_exit.csv", t});
  o.tables.push_back({"running_mean.csv", rm});
  if (r.non_convergent) o.warnings.push_back("clock has infinite mean: running mean reported, no converged estimate");
  return o;
}

inline Outputs run_msd(const Params& p, const BatchConfig& batch) {
  const std::string gname = p.str("graph");
  const std::size_t n_steps = p.count("n_steps");
  graphs::GraphModel g;
  graphs::Vertex start = 0;
  double diameter = 1.0;
  if (gname == "SG2" || gname == "SG3") {
    g = graphs::build_sg_graph(gname == "SG2" ? graphs::SgVariant::SG2 : graphs::SgVariant::SG3,
                               static_cast<int>(p.integer("level")));
    start = g.corners[0];
  } else if (gname == "line") {
    // long enough that no walk reaches an end
    std::size_t len = 2 * std::max<std::size_t>(n_steps, p.count("max_steps")) + 1;
    g = graphs::build_path_graph(len);
    start = static_cast<graphs::Vertex>(len / 2);
    diameter = static_cast<double>(len - 1);
  } else {
    throw Error(kModule, ErrorCode::Schema, "graph must be SG2, SG3 or line");
  }
  auto bf = clock_from(p);
  paths::MsdSeries s;
  if (bf.kind == subordination::BernsteinKind::Identity)
    s = paths::graph_walk_msd(g, start, n_steps, p.count("n_paths"), batch);
  else
    s = paths::graph_walk_msd_time_changed(g, start, bf, time_grid(p), p.count("n_paths"), p.count("max_steps"), batch);
  CsvTable t{{"t", "msd", "std_err"}, {}};
  for (std::size_t j = 0; j < s.times.size(); ++j) t.add({fmt(s.times[j]), fmt(s.msd[j]), fmt(s.std_err[j])});
  Outputs o;
  o.tables.push_back({"msd.csv", t});
  auto f = estimators::msd_fit(s, diameter, p.num("burn_in"));
  CsvTable ft{{"exponent", "coefficient", "std_err", "r_squared", "t_min", "t_max", "points", "censor_rate"}, {}};
  ft.add({fmt(f.exponent), fmt(f.coefficient), fmt(f.std_err), fmt(f.r_squared), fmt(f.t_window.first),
          fmt(f.t_window.second), fmt(f.points), fmt(s.censor_rate)});
  o.tables.push_back({"fit.csv", ft});
  if (s.censor_rate > 0.01) o.warnings.push_back("time-changed walks censored at max_steps: rate " + fmt(s.censor_rate));
  return o;
}

inline Outputs run_subordinator_check(const Params& p, const BatchConfig& batch) {
  using subordination::BernsteinFunction;
  const std::size_t n = p.count("n_samples");
  const double lambda = p.num("lambda");
  CsvTable t{{"quantity", "params", "closed_form", "mc_estimate", "std_err"}, {}};
  std::vector<BernsteinFunction> clocks{BernsteinFunction::stable(p.num("stable_alpha")),
                                        BernsteinFunction::gamma(p.num("gamma_a"), p.num("gamma_b")),
                                        BernsteinFunction::tempered_stable(p.num("tempered_alpha"), p.num("tempered_theta"))};
  for (std::size_t c = 0; c < clocks.size(); ++c) {
    BatchConfig b = batch;
    b.seed = derive_seed(batch.seed, 100 + c);
    auto v = run_blocks<double>(n, b, [&](std::size_t, Rng& rng) {
      return std::exp(-lambda * subordination::sample_subordinator_increment(clocks[c], 1.0, rng));
    });
    auto m = mean_estimate(v);
    std::string name = clocks[c].describe();
    std::replace(name.begin(), name.end(), ',', ';');
    t.add({"laplace_H1", name + ";lambda=" + fmt(lambda), fmt(std::exp(-subordination::phi(clocks[c], lambda))),
           fmt(m.mean), fmt(m.std_err)});
  }
  const double alpha = p.num("stable_alpha"), T = p.num("inverse_t");
  subordination::InverseSamplerConfig icfg;
  icfg.pilot_seed = derive_seed(batch.seed, 200);
  subordination::InverseSubordinatorSampler sampler(BernsteinFunction::stable(alpha), T, icfg);
  BatchConfig b = batch;
  b.seed = derive_seed(batch.seed, 201);
  auto L = run_blocks<double>(n, b, [&](std::size_t, Rng& rng) { return sampler.sample(rng).L; });
  for (double theta : p.list("inverse_thetas")) {
    std::vector<double> v(L.size());
    for (std::size_t i = 0; i < L.size(); ++i) v[i] = std::pow(L[i], theta);
    auto m = mean_estimate(v);
    t.add({"inverse_moment", "alpha=" + fmt(alpha) + ";theta=" + fmt(theta) + ";t=" + fmt(T) + ";delta=" + fmt(sampler.delta()),
           fmt(subordination::inverse_stable_moment(alpha, theta, T)), fmt(m.mean), fmt(m.std_err)});
  }
  // D^Φ of u(s) = s at t = 1 for Φ(λ) = λ^α is 1/Γ(2 - α)
  const double h = p.num("derivative_h");
  require(h > 0.0 && h <= 1.0 / 16.0, kModule, ErrorCode::Schema, "'params.derivative_h' must lie in (0, 1/16]");
  const std::size_t cells = static_cast<std::size_t>(std::llround(1.0 / h));
  std::vector<double> u(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) u[k] = static_cast<double>(k) / static_cast<double>(cells);
  double dphi = subordination::nonlocal_derivative(u, 1.0, BernsteinFunction::stable(alpha));
  t.add({"nonlocal_derivative", "u=s;alpha=" + fmt(alpha) + ";t=1;h=" + fmt(h), fmt(1.0 / boost::math::tgamma(2.0 - alpha)),
         fmt(dphi), fmt(0.0)});
  Outputs o;
  o.tables.push_back({"subordinator_check.csv", t});
  return o;
}

// ---------------------------------------------------------------------------
// Run

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::string> files;
  json manifest;
};

inline Outputs dispatch(const json& resolved) {
  const std::string exp = resolved["experiment"].get<std::string>();
  const Params p(resolved["params"]);
  const std::uint64_t seed = resolved["seed"].get<std::uint64_t>();
  BatchConfig batch{seed, static_cast<unsigned>(resolved["workers"].get<long long>()), 64};
  batch.workers = resolve_workers(batch.workers);
  if (exp == "geometry-export") return run_geometry_export(p);
  if (exp == "graph-exact") return run_graph_exact(p);
  if (exp == "criteria") return run_criteria(p);
  if (exp == "heat-content") return run_heat_content(p, batch, seed, false);
  if (exp == "fractional-heat-content") return run_heat_content(p, batch, seed, true);
  if (exp == "trap-scan") return run_trap_scan(p, batch, seed);
  if (exp == "sticky-exit") return run_sticky_exit(p, batch, seed);
  if (exp == "msd") return run_msd(p, batch);
  return run_subordinator_check(p, batch);
}

// Runs a resolved config; all output I/O happens here, after the parallel work.
inline RunResult run(const json& config) {
  const json resolved = resolve_config(config);
  const auto start = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  Outputs o = dispatch(resolved);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RunResult r;
  r.out_dir = resolved["out_dir"].get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(r.out_dir, ec);
  require(!ec, kModule, ErrorCode::Io, "cannot create output directory " + r.out_dir.string() + ": " + ec.message());
  for (const auto& [name, table] : o.tables) {
    io::write_csv(r.out_dir / name, table);
    r.files.push_back(name);
  }
  for (const auto& [name, text] : o.texts) {
    io::write_text(r.out_dir / name, text);
    r.files.push_back(name);
  }
  r.manifest = io::make_manifest(resolved, resolved["seed"].get<std::uint64_t>(), TRAPLAB_VERSION,
                                 io::utc_timestamp(start), runtime, o.warnings);
  io::write_text(r.out_dir / "manifest.json", r.manifest.dump(2) + "\n");
  r.files.push_back("manifest.json");
  return r;
}

inline json error_record(const std::string& module, const std::string& code, const std::string& message) {
  return json{{"error", {{"module", module}, {"code", code}, {"message", message}}}};
}

}  // namespace traplab::runner
