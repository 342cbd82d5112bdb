#pragma once

// Shared plumbing: points, errors, random streams, compensated sums and the
// deterministic block-parallel driver used by every Monte Carlo batch.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace traplab {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

enum class ErrorCode {
  InvalidArgument,
  ResourceCap,
  IterationCap,
  RefinementCap,
  Underflow,
  Singular,
  Numerical,
  Schema,
  ColumnMismatch,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::ResourceCap: return "resource_cap";
    case ErrorCode::IterationCap: return "iteration_cap";
    case ErrorCode::RefinementCap: return "refinement_cap";
    case ErrorCode::Underflow: return "underflow";
    case ErrorCode::Singular: return "singular";
    case ErrorCode::Numerical: return "numerical";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::ColumnMismatch: return "column_mismatch";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries the module that produced it so
// the runner can surface a machine-readable record.
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorCode code, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)), code_(code) {}

  const std::string& module() const noexcept { return module_; }
  ErrorCode code() const noexcept { return code_; }

 private:
  std::string module_;
  ErrorCode code_;
};

inline void require(bool ok, const char* module, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(module, code, message);
}

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream `index` of the family rooted at `seed`. Streams are a fixed stride
// apart in the splitmix sequence, so the assignment never depends on how many
// workers consume them.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng{splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1))};
}

// Derives an independent seed family for a named sub-purpose (e.g. the
// subordinator draws that accompany a batch of spatial paths).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag * 0xD1B54A32D192ED03ULL));
}

inline double uniform01(Rng& rng) {
  // (0,1): never returns 0 so logs are safe
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = u(rng);
  while (v <= 0.0) v = u(rng);
  return v;
}

// ---------------------------------------------------------------------------
// Summation

class NeumaierSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  double variance = 0.0;
  std::size_t count = 0;
};

// Order matters for bit reproducibility; callers pass values in path-index order.
template <class Range>
MeanEstimate mean_estimate(const Range& values) {
  MeanEstimate out;
  NeumaierSum s;
  std::size_t n = 0;
  for (double v : values) {
    s.add(v);
    ++n;
  }
  out.count = n;
  if (n == 0) return out;
  out.mean = s.value() / static_cast<double>(n);
  NeumaierSum sq;
  for (double v : values) sq.add((v - out.mean) * (v - out.mean));
  out.variance = n > 1 ? sq.value() / static_cast<double>(n - 1) : 0.0;
  out.std_err = std::sqrt(out.variance / static_cast<double>(n));
  return out;
}

// Power-law fit y ~ coefficient * t^exponent over [t_window.first, t_window.second].
struct FitResult {
  double exponent = 0.0;
  double coefficient = 0.0;
  double std_err = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> t_window{0.0, 0.0};
  std::size_t points = 0;
};

// ---------------------------------------------------------------------------
// Parallel execution

inline unsigned resolve_workers(unsigned workers) {
  if (workers > 0) return workers;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(i) for i in [0, n) on a pool of `workers` threads. Work is handed
// out dynamically but every result lands at its own index.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct BatchConfig {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::size_t block_size = 64;
};

// Item i is produced by fn(i, rng) where rng is the stream of block
// i / block_size, consumed in item order inside the block. Output is
// therefore a pure function of (seed, block_size, n) whatever the worker count.
template <class T, class Fn>
std::vector<T> run_blocks(std::size_t n, const BatchConfig& batch, Fn&& fn) {
  std::vector<T> out(n);
  const std::size_t bs = std::max<std::size_t>(batch.block_size, 1);
  const std::size_t blocks = (n + bs - 1) / bs;
  parallel_for(blocks, batch.workers, [&](std::size_t b) {
    Rng rng = make_stream(batch.seed, b);
    const std::size_t end = std::min(n, (b + 1) * bs);
    for (std::size_t i = b * bs; i < end; ++i) out[i] = fn(i, rng);
  });
  return out;
}

inline std::vector<double> dyadic_grid(double t_min, std::size_t points, double ratio = 2.0) {
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) grid[k] = t_min * std::pow(ratio, static_cast<double>(k));
  return grid;
}

}  // namespace traplab
