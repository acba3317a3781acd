#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace eqsynth {

// Tolerances shared across the library. Callers may pass their own where an
// operation takes an explicit tolerance; these are the defaults.
inline constexpr double kProbTol = 1e-9;   // distribution sums
inline constexpr double kFeasTol = 1e-7;   // LP feasibility
inline constexpr double kPivotTol = 1e-11; // simplex pivot eligibility
inline constexpr double kEqTol = 1e-6;     // equilibrium verification

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input text could not be parsed. line/col are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0, int col = 0)
      : Error(format_msg(what, line, col)), line_(line), col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  static std::string format_msg(const std::string& what, int line, int col) {
    if (line <= 0) return what;
    std::string m = "line " + std::to_string(line);
    if (col > 0) m += ":" + std::to_string(col);
    return m + ": " + what;
  }
  int line_ = 0;
  int col_ = 0;
};

// Deterministic 64-bit PRNG (splitmix64). Used everywhere randomness is
// needed so results are reproducible across platforms and stdlib versions.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next() % n; }
};

// Derives an independent stream from a base seed, e.g. per batch or per
// restart. Plain addition would correlate streams; run one mixing step.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  SplitMix64 g(base ^ (0x517cc1b727220a95ULL * (index + 1)));
  return g.next();
}

// Row-major joint index over per-player action counts: the first player is
// the most significant digit.
struct JointIndexer {
  std::vector<int> sizes;
  std::vector<int64_t> strides;
  int64_t total = 1;

  JointIndexer() = default;
  explicit JointIndexer(std::vector<int> sz) : sizes(std::move(sz)) {
    strides.assign(sizes.size(), 1);
    for (int i = int(sizes.size()) - 2; i >= 0; --i)
      strides[size_t(i)] = strides[size_t(i) + 1] * sizes[size_t(i) + 1];
    total = sizes.empty() ? 1 : strides[0] * sizes[0];
  }

  int64_t index(const std::vector<int>& digits) const {
    int64_t idx = 0;
    for (size_t i = 0; i < sizes.size(); ++i) idx += strides[i] * digits[i];
    return idx;
  }

  void decode(int64_t idx, std::vector<int>& digits) const {
    digits.resize(sizes.size());
    for (size_t i = 0; i < sizes.size(); ++i) {
      digits[i] = int(idx / strides[i]);
      idx %= strides[i];
    }
  }

  std::vector<int> decode(int64_t idx) const {
    std::vector<int> d;
    decode(idx, d);
    return d;
  }
};

// Runs fn(i) for i in [0, n). With threads > 1 the range is split into
// contiguous blocks; fn must write only to slot i so the result does not
// depend on scheduling.
template <typename Fn>
void parallel_for(int64_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int nt = int(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(size_t(nt));
  int64_t chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    int64_t lo = t * chunk;
    int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Shortest round-trip decimal form; used for all machine-readable output so
// that equal doubles always print as equal bytes.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline bool nearly_equal(double a, double b, double tol) {
  return std::fabs(a - b) <= tol;
}

}  // namespace eqsynth
