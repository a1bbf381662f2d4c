/**
 * @file core.hpp
 * @brief Shared domain types, the random-number contract and small numeric
 * helpers used by every other dfl header.
 */
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dfl {

/// Context features z of one sample.
using FeatureVector = std::vector<double>;
/// Objective coefficients c (or a prediction of them).
using CostVector = std::vector<double>;
/// Binary incidence vector over the instance's variable ordering.
using Decision = std::vector<std::uint8_t>;

/// Thrown on any shape disagreement between vectors, datasets and instances.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_size(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(a) +
                         " != " + std::to_string(b));
  }
}

/// c^T x, accumulated in variable order.
inline double dot(std::span<const double> c, std::span<const std::uint8_t> x) {
  require_same_size(c.size(), x.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (x[i]) acc += c[i];
  }
  return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Stream identifiers. One stream per purpose so that e.g. changing the batch
/// size never shifts the data-generation draws.
enum class StreamId : std::uint64_t {
  Instance = 1,   // TSP node coordinates
  GenModel = 2,   // mixing matrix B
  TrainSplit = 3,
  ValSplit = 4,
  TestSplit = 5,
  Shuffle = 16,   // minibatch permutation
  Pfyl = 17,      // PFYL perturbations
  BiasDemo = 32,
  Test = 64,      // free for tests and tools
};

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/**
 * @brief Deterministic random stream.
 *
 * Generator: xoshiro256** whose 256-bit state is filled by splitmix64 from a
 * key derived from (seed, stream id). Uniforms use the top 53 bits. Normals
 * use the basic Box–Muller transform with u1 in (0,1]; the second variate of
 * each pair is cached and returned by the next call. None of this may change
 * without invalidating every recorded experiment.
 *
 * Single owner: not thread-safe.
 */
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t key = stream_id * 0xD1B54A32D192ED03ULL;
    std::uint64_t sm = seed ^ splitmix64(key);
    for (auto& w : s_) w = splitmix64(sm);
  }
  RngStream(std::uint64_t seed, StreamId id) : RngStream(seed, static_cast<std::uint64_t>(id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi); returns lo exactly when lo == hi.
  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("uniform: lo > hi");
    if (lo == hi) return lo;
    return lo + (hi - lo) * uniform01();
  }

  double normal() {
    if (cached_) {
      double v = *cached_;
      cached_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(angle);
    return r * std::cos(angle);
  }

  bool bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli: p outside [0,1]");
    return uniform01() < p;
  }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: n == 0");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> cached_;
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct Sample {
  FeatureVector z;
  CostVector c;
  std::optional<CostVector> c_clean;  // E[c|z] when known (synthetic data)
};

struct DatasetMeta {
  std::string problem;      // "grid" | "tsp" | "select"
  std::size_t m = 0;        // feature dimension
  std::size_t n = 0;        // variable count
  std::string instance;     // instance descriptor, see oracles.hpp
  std::uint64_t seed = 0;
  double noise_halfwidth = 0.0;
  int degree = 1;
  bool noise_shared = false;
  std::string split;        // "train" | "val" | "test" | ""
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetMeta meta;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  bool has_clean() const {
    if (samples.empty()) return false;
    for (const auto& s : samples) {
      if (!s.c_clean) return false;
    }
    return true;
  }

  /// Throws DimensionError unless every sample agrees with meta.m / meta.n.
  void validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset has no samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const std::string where = "sample " + std::to_string(i);
      require_same_size(s.z.size(), meta.m, where + " features");
      require_same_size(s.c.size(), meta.n, where + " costs");
      if (s.c_clean) require_same_size(s.c_clean->size(), meta.n, where + " clean costs");
      if (!all_finite(s.z) || !all_finite(s.c)) {
        throw std::invalid_argument(where + ": non-finite value");
      }
    }
  }
};

/// FNV-1a over the raw bytes of every numeric field, in sample order.
inline std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001B3ULL;
    }
  };
  auto mix_vec = [&](const std::vector<double>& v) {
    const std::uint64_t len = v.size();
    mix_bytes(&len, sizeof len);
    mix_bytes(v.data(), v.size() * sizeof(double));
  };
  for (const auto& s : ds.samples) {
    mix_vec(s.z);
    mix_vec(s.c);
    if (s.c_clean) mix_vec(*s.c_clean);
  }
  mix_bytes(ds.meta.instance.data(), ds.meta.instance.size());
  return h;
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace dfl
