/**
 * @file targets.hpp
 * @brief Per-sample (target cost, target decision) lists for the four target
 * policies: empirical, robust-optimal, top-k and k-nearest-neighbour.
 *
 * Targets depend only on the training data, never on the predictor, so they
 * are computed once before the first epoch.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/oracles.hpp"
#include "json.hpp"

namespace dfl {

struct TargetPolicy {
  enum class Kind { Empirical, RobustOpt, TopK, Knn };

  Kind kind = Kind::Empirical;
  UncertaintyParams uncertainty{};  // RobustOpt only
  std::size_t k = 10;               // TopK, Knn
  double w = 0.5;                   // Knn interpolation weight

  static TargetPolicy empirical() { return {}; }
  static TargetPolicy robust(UncertaintyParams u) {
    TargetPolicy p;
    p.kind = Kind::RobustOpt;
    p.uncertainty = u;
    return p;
  }
  static TargetPolicy top_k(std::size_t k) {
    TargetPolicy p;
    p.kind = Kind::TopK;
    p.k = k;
    return p;
  }
  static TargetPolicy knn(std::size_t k, double w) {
    TargetPolicy p;
    p.kind = Kind::Knn;
    p.k = k;
    p.w = w;
    return p;
  }

  void validate() const {
    if ((kind == Kind::TopK || kind == Kind::Knn) && k < 1) {
      throw std::invalid_argument("target policy: k must be >= 1");
    }
    if (kind == Kind::Knn && !(w >= 0.0 && w <= 1.0)) {
      throw std::invalid_argument("target policy: w must lie in [0,1]");
    }
    if (kind == Kind::RobustOpt) uncertainty.validate();
  }

  /// Short name used on the command line and in result tables.
  std::string name() const {
    switch (kind) {
      case Kind::Empirical: return "emp";
      case Kind::RobustOpt: return "ro";
      case Kind::TopK: return "topk";
      case Kind::Knn: return "knn";
    }
    return {};
  }
};

inline void to_json(nlohmann::json& j, const TargetPolicy& p) {
  j = nlohmann::json{{"loss", p.name()}};
  switch (p.kind) {
    case TargetPolicy::Kind::Empirical: break;
    case TargetPolicy::Kind::RobustOpt:
      j["rho"] = p.uncertainty.rho;
      j["gamma"] = p.uncertainty.gamma;
      break;
    case TargetPolicy::Kind::TopK: j["k"] = p.k; break;
    case TargetPolicy::Kind::Knn:
      j["k"] = p.k;
      j["w"] = p.w;
      break;
  }
}

inline void from_json(const nlohmann::json& j, TargetPolicy& p) {
  const auto name = j.at("loss").get<std::string>();
  if (name == "emp") {
    p = TargetPolicy::empirical();
  } else if (name == "ro") {
    p = TargetPolicy::robust({j.at("rho").get<double>(), j.at("gamma").get<double>()});
  } else if (name == "topk") {
    p = TargetPolicy::top_k(j.at("k").get<std::size_t>());
  } else if (name == "knn") {
    p = TargetPolicy::knn(j.at("k").get<std::size_t>(), j.at("w").get<double>());
  } else {
    throw std::invalid_argument("unknown loss '" + name + "'");
  }
}

struct TargetPair {
  CostVector c;
  Decision x;

  friend bool operator==(const TargetPair&, const TargetPair&) = default;
};

struct TargetSet {
  TargetPolicy policy;
  std::vector<std::vector<TargetPair>> samples;
  std::uint64_t solves = 0;  // audit units consumed while building

  std::size_t size() const { return samples.size(); }
  std::span<const TargetPair> operator[](std::size_t i) const { return samples[i]; }
};

/**
 * Indices of the k samples nearest to sample i in Euclidean feature distance,
 * excluding i itself; equal distances go to the smaller index.
 */
inline std::vector<std::size_t> knn_neighbors(const Dataset& ds, std::size_t i, std::size_t k) {
  const std::size_t t = ds.size();
  if (i >= t) throw std::out_of_range("knn_neighbors: sample index out of range");
  if (k < 1 || k >= t) {
    throw std::invalid_argument("knn_neighbors: need 1 <= k <= t-1 (k=" + std::to_string(k) +
                                ", t=" + std::to_string(t) + ")");
  }
  const auto& zi = ds.samples[i].z;
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(t - 1);
  for (std::size_t j = 0; j < t; ++j) {
    if (j == i) continue;
    const auto& zj = ds.samples[j].z;
    require_same_size(zj.size(), zi.size(), "knn features");
    double d2 = 0.0;
    for (std::size_t a = 0; a < zi.size(); ++a) {
      const double d = zj[a] - zi[a];
      d2 += d * d;
    }
    dist.emplace_back(d2, j);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t a = 0; a < k; ++a) out[a] = dist[a].second;
  return out;
}

/// w·c_(j) + (1−w)·c_i for each of the k nearest neighbours j of sample i.
inline std::vector<CostVector> knn_target_costs(const Dataset& ds, std::size_t i, std::size_t k,
                                                double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("knn_target_costs: w outside [0,1]");
  const auto& ci = ds.samples[i].c;
  std::vector<CostVector> out;
  for (std::size_t j : knn_neighbors(ds, i, k)) {
    const auto& cj = ds.samples[j].c;
    require_same_size(cj.size(), ci.size(), "knn costs");
    CostVector blend(ci.size());
    for (std::size_t a = 0; a < ci.size(); ++a) blend[a] = w * cj[a] + (1.0 - w) * ci[a];
    out.push_back(std::move(blend));
  }
  return out;
}

inline std::vector<TargetPair> sample_targets(const TargetPolicy& policy, const Dataset& ds,
                                              std::size_t i, const Oracle& oracle) {
  const auto& c = ds.samples[i].c;
  std::vector<TargetPair> out;
  switch (policy.kind) {
    case TargetPolicy::Kind::Empirical:
      out.push_back({c, oracle.solve(c)});
      break;
    case TargetPolicy::Kind::RobustOpt:
      out.push_back({c, oracle.robust_solve(c, policy.uncertainty)});
      break;
    case TargetPolicy::Kind::TopK:
      for (auto& x : oracle.top_k(c, policy.k)) out.push_back({c, std::move(x)});
      break;
    case TargetPolicy::Kind::Knn:
      for (auto& cw : knn_target_costs(ds, i, policy.k, policy.w)) {
        Decision x = oracle.solve(cw);
        out.push_back({std::move(cw), std::move(x)});
      }
      break;
  }
  return out;
}

/**
 * @brief Precompute the target lists for every training sample.
 *
 * Samples are split over `workers` threads; results land in sample order,
 * so the TargetSet does not depend on the worker count. `solves` records the
 * audit units consumed (the oracle must not be used concurrently by others
 * for this figure to be exact).
 */
inline TargetSet build_targets(const TargetPolicy& policy, const Dataset& ds, const Oracle& oracle,
                               unsigned workers = 1) {
  policy.validate();
  require_same_size(ds.meta.n, oracle.n(), "dataset vs instance");
  if (ds.empty()) throw std::invalid_argument("build_targets: empty dataset");

  TargetSet ts;
  ts.policy = policy;
  ts.samples.resize(ds.size());
  const std::uint64_t before = oracle.audit().count();

  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(ds.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < ds.size(); ++i) ts.samples[i] = sample_targets(policy, ds, i, oracle);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < ds.size(); i += workers) {
            ts.samples[i] = sample_targets(policy, ds, i, oracle);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  ts.solves = oracle.audit().count() - before;
  return ts;
}

// ---------------------------------------------------------------------------
// targets.json cache
// ---------------------------------------------------------------------------

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string bits_string(std::span<const std::uint8_t> x) {
  std::string s(x.size(), '0');
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]) s[i] = '1';
  }
  return s;
}

inline Decision parse_bits(std::string_view s) {
  Decision x(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw std::runtime_error("bad decision bit string");
    x[i] = static_cast<std::uint8_t>(s[i] - '0');
  }
  return x;
}

inline nlohmann::json targets_key(const Dataset& ds, const TargetPolicy& policy) {
  return {{"dataset_hash", hash_hex(dataset_hash(ds))}, {"policy", policy}};
}

inline void save_targets(const std::string& path, const Dataset& ds, const TargetSet& ts) {
  nlohmann::json j;
  j["key"] = targets_key(ds, ts.policy);
  j["solves"] = ts.solves;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& list : ts.samples) {
    auto row = nlohmann::json::array();
    for (const auto& tp : list) row.push_back({{"c", tp.c}, {"x", bits_string(tp.x)}});
    arr.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << '\n';
}

/// Cached targets for (ds, policy), or nullopt when the file is absent or
/// was built for different data or parameters.
inline std::optional<TargetSet> load_targets(const std::string& path, const Dataset& ds,
                                             const TargetPolicy& policy) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (j.value("key", nlohmann::json{}) != targets_key(ds, policy)) return std::nullopt;
  TargetSet ts;
  ts.policy = policy;
  ts.solves = j.at("solves").get<std::uint64_t>();
  for (const auto& row : j.at("samples")) {
    std::vector<TargetPair> list;
    for (const auto& e : row) {
      list.push_back({e.at("c").get<CostVector>(), parse_bits(e.at("x").get<std::string>())});
    }
    ts.samples.push_back(std::move(list));
  }
  if (ts.samples.size() != ds.size()) return std::nullopt;
  return ts;
}

}  // namespace dfl
