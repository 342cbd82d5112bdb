#pragma once

// Output plumbing for the runner: CSV tables, the run manifest and plotting
// scripts generated from result CSVs.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "traplab/core.hpp"

namespace traplab::io {

inline constexpr const char* kModule = "cli";

using json = nlohmann::ordered_json;

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    require(row.size() == header.size(), kModule, ErrorCode::ColumnMismatch, "CSV row width differs from header");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(kModule, ErrorCode::ColumnMismatch, "missing column '" + name + "'");
  }

  std::vector<double> numbers(const std::string& name) const {
    std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) {
      try {
        out.push_back(std::stod(r.at(c)));
      } catch (const std::exception&) {
        throw Error(kModule, ErrorCode::ColumnMismatch, "non-numeric value in column '" + name + "'");
      }
    }
    return out;
  }
};

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      require(cells[i].find_first_of(",\n\r\"") == std::string::npos, kModule, ErrorCode::InvalidArgument,
              "CSV cell contains a separator: " + cells[i]);
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), kModule, ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os << text;
  require(static_cast<bool>(os), kModule, ErrorCode::Io, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), kModule, ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      require(cells.size() == t.header.size(), kModule, ErrorCode::ColumnMismatch,
              "CSV row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  require(!first, kModule, ErrorCode::ColumnMismatch, "CSV has no header row");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

// ---------------------------------------------------------------------------
// Manifest

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  std::time_t tt = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json make_manifest(const json& resolved_config, std::uint64_t seed, const std::string& version,
                          const std::string& started_at, double runtime_seconds,
                          const std::vector<std::string>& warnings) {
  json m;
  m["config"] = resolved_config;
  m["seed"] = seed;
  m["version"] = version;
  m["started_at"] = started_at;
  m["runtime_seconds"] = runtime_seconds;
  m["warnings"] = warnings;
  return m;
}

// ---------------------------------------------------------------------------
// Plot scripts (matplotlib), data embedded so the script stands alone

enum class PlotKind { LogLog, Series };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "loglog") return PlotKind::LogLog;
  if (s == "series") return PlotKind::Series;
  throw Error(kModule, ErrorCode::InvalidArgument, "plot kind must be loglog or series, got '" + s + "'");
}

namespace detail {

inline std::string py_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s + "]";
}

}  // namespace detail

// loglog: x column "t", y column "loss" (heat content) or "msd", error column
// "std_err"; the script fits and annotates the slope. series: depth-vs-mean
// trap-scan plot with censor-rate markers.
inline std::string emit_plot_script(const CsvTable& t, PlotKind kind, const std::string& title = "traplab") {
  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
     << "import numpy as np\n"
     << "import matplotlib\n"
     << "matplotlib.use('Agg')\n"
     << "import matplotlib.pyplot as plt\n\n";
  if (kind == PlotKind::LogLog) {
    std::string ycol = "loss";
    bool has_loss = false, has_msd = false;
    for (const auto& h : t.header) has_loss |= h == "loss", has_msd |= h == "msd";
    if (!has_loss && has_msd) ycol = "msd";
    auto x = t.numbers("t");
    auto y = t.numbers(ycol);
    auto e = t.numbers("std_err");
    py << "t = np.array(" << detail::py_list(x) << ")\n"
       << "y = np.array(" << detail::py_list(y) << ")\n"
       << "err = np.array(" << detail::py_list(e) << ")\n"
       << "keep = (t > 0) & (y > 0)\n"
       << "slope, icept = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)\n"
       << "fig, ax = plt.subplots()\n"
       << "ax.errorbar(t[keep], y[keep], yerr=err[keep], fmt='o', ms=4, capsize=2, label='" << ycol << "')\n"
       << "ax.plot(t[keep], np.exp(icept) * t[keep] ** slope, '-', label='fit')\n"
       << "ax.set_xscale('log')\n"
       << "ax.set_yscale('log')\n"
       << "ax.set_xlabel('t')\n"
       << "ax.set_ylabel('" << ycol << "')\n"
       << "ax.annotate('slope = %.4f' % slope, xy=(0.05, 0.9), xycoords='axes fraction')\n";
  } else {
    auto c = t.column("depth");
    std::vector<std::string> labels;
    for (const auto& r : t.rows) labels.push_back(r[c]);
    auto m = t.numbers("mean_TB");
    auto e = t.numbers("std_err");
    auto cr = t.numbers("censor_rate");
    py << "labels = [";
    for (std::size_t i = 0; i < labels.size(); ++i) py << (i ? ", " : "") << "'" << labels[i] << "'";
    py << "]\n"
       << "mean = np.array(" << detail::py_list(m) << ")\n"
       << "err = np.array(" << detail::py_list(e) << ")\n"
       << "censor = np.array(" << detail::py_list(cr) << ")\n"
       << "x = np.arange(len(labels))\n"
       << "fig, ax = plt.subplots()\n"
       << "ax.errorbar(x, mean, yerr=err, fmt='o-', capsize=3, label='mean hitting time')\n"
       << "bad = censor > 0\n"
       << "ax.scatter(x[bad], mean[bad], marker='x', s=80, c='red', label='censored paths')\n"
       << "for xi, yi, ci in zip(x, mean, censor):\n"
       << "    ax.annotate('%.0f%%' % (100 * ci), (xi, yi), textcoords='offset points', xytext=(4, 6), fontsize=8)\n"
       << "ax.set_xticks(x)\n"
       << "ax.set_xticklabels(labels)\n"
       << "ax.set_xlabel('depth')\n"
       << "ax.set_ylabel('mean hitting time')\n";
  }
  py << "ax.set_title('" << title << "')\n"
     << "ax.legend()\n"
     << "fig.tight_layout()\n"
     << "fig.savefig(__file__.rsplit('.', 1)[0] + '.png', dpi=150)\n";
  return py.str();
}

}  // namespace traplab::io
