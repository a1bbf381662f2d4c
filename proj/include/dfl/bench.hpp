/**
 * @file bench.hpp
 * @brief Experiment harness: paired significance test, the high/low variance
 * bias Monte Carlo and the uncertainty sweep runner.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/datagen.hpp"
#include "dfl/eval.hpp"
#include "dfl/learning.hpp"
#include "dfl/oracles.hpp"
#include "dfl/targets.hpp"
#include "json.hpp"

namespace dfl {

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

namespace detail {

// Continued fraction for I_x(a,b) by the modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 10000;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kTol) return h;
  }
  throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct TTestResult {
  double t_stat = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/**
 * Two-sided paired t-test on a − b. Zero variance of the differences gives
 * p = 1 if they are all zero and p = 0 (t = ±inf) otherwise.
 */
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  require_same_size(a.size(), b.size(), "paired_t_test");
  const std::size_t r = a.size();
  if (r < 2) throw std::invalid_argument("paired_t_test needs at least 2 pairs");
  std::vector<double> d(r);
  for (std::size_t i = 0; i < r; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(r);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(r - 1);
  TTestResult res;
  if (var == 0.0) {
    if (mean == 0.0) return res;
    res.t_stat = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
  } else {
    res.t_stat = mean / std::sqrt(var / static_cast<double>(r));
    res.p_value = student_t_two_sided_p(res.t_stat, static_cast<double>(r - 1));
  }
  res.significant = res.p_value < alpha;
  return res;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
inline double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// Bias demo
// ---------------------------------------------------------------------------

struct BiasDemoConfig {
  std::size_t n_high = 2;
  std::size_t n_low = 2;
  double sigma_high = 1.0;
  double sigma_low = 1e-6;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

struct BiasDemoResult {
  std::vector<std::uint64_t> counts;  // high-variance decisions first
  std::vector<double> frequency;
  double mean_high_frequency = 0.0;
  double mean_low_frequency = 0.0;
  // σ_low → 0 limits: (1/n_h)(1 − 2^{−n_h}) and (1/n_l) 2^{−n_h}
  double limit_high = 0.0;
  double limit_low = 0.0;
};

/// One-of-n selection with independent zero-mean Gaussian coefficients;
/// counts how often each decision is the realized optimum.
inline BiasDemoResult bias_demo(const BiasDemoConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("bias_demo: trials must be >= 1");
  if (cfg.n_high < 1 || cfg.n_low < 1) throw std::invalid_argument("bias_demo: group sizes must be >= 1");
  if (!(cfg.sigma_high >= 0.0 && cfg.sigma_low >= 0.0)) {
    throw std::invalid_argument("bias_demo: sigmas must be >= 0");
  }
  const std::size_t n = cfg.n_high + cfg.n_low;
  RngStream rng(cfg.seed, StreamId::BiasDemo);
  BiasDemoResult res;
  res.counts.assign(n, 0);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (i < cfg.n_high ? cfg.sigma_high : cfg.sigma_low) * rng.normal();
      if (v < best_v) {
        best_v = v;
        best = i;
      }
    }
    ++res.counts[best];
  }
  const double trials = static_cast<double>(cfg.trials);
  for (auto c : res.counts) res.frequency.push_back(static_cast<double>(c) / trials);
  for (std::size_t i = 0; i < n; ++i) {
    (i < cfg.n_high ? res.mean_high_frequency : res.mean_low_frequency) += res.frequency[i];
  }
  res.mean_high_frequency /= static_cast<double>(cfg.n_high);
  res.mean_low_frequency /= static_cast<double>(cfg.n_low);
  const double all_high_positive = std::pow(0.5, static_cast<double>(cfg.n_high));
  res.limit_high = (1.0 - all_high_positive) / static_cast<double>(cfg.n_high);
  res.limit_low = all_high_positive / static_cast<double>(cfg.n_low);
  return res;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
  std::vector<std::string> problems{"grid:5x5"};  // "grid:VxH", "tsp:N", "select:N"
  std::vector<std::size_t> train_sizes{100};
  std::vector<double> noise{0.0, 0.5, 1.0};
  std::vector<std::string> methods{"pfl", "spo+", "pfyl"};
  std::vector<std::string> losses{"emp", "ro", "topk", "knn"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::map<std::size_t, std::size_t> epochs_by_t{{100, 200}, {1000, 100}};
  std::size_t default_epochs = 200;
  std::size_t val_size = 100;
  std::size_t test_size = 1000;
  std::size_t features = 5;
  int degree = 6;
  std::size_t batch_size = 32;
  double lr = 0.01;
  std::size_t k = 10;
  double w = 0.5;
  double rho = 0.5;
  double gamma_frac = 0.125;
  std::size_t pfyl_m = 1;
  double pfyl_sigma = 1.0;
  unsigned threads = 1;
  double alpha = 0.05;

  std::size_t epochs_for(std::size_t t) const {
    auto it = epochs_by_t.find(t);
    return it == epochs_by_t.end() ? default_epochs : it->second;
  }
};

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig cfg;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("problems", cfg.problems);
  get("train_sizes", cfg.train_sizes);
  get("noise", cfg.noise);
  get("methods", cfg.methods);
  get("losses", cfg.losses);
  get("seeds", cfg.seeds);
  if (j.contains("epochs")) {
    const auto& e = j.at("epochs");
    if (e.is_number_integer()) {
      cfg.epochs_by_t.clear();
      cfg.default_epochs = e.get<std::size_t>();
    } else {
      cfg.epochs_by_t.clear();
      for (const auto& [key, val] : e.items()) cfg.epochs_by_t[std::stoul(key)] = val.get<std::size_t>();
    }
  }
  get("default_epochs", cfg.default_epochs);
  get("val_size", cfg.val_size);
  get("test_size", cfg.test_size);
  get("features", cfg.features);
  get("degree", cfg.degree);
  get("batch_size", cfg.batch_size);
  get("lr", cfg.lr);
  get("k", cfg.k);
  get("w", cfg.w);
  get("rho", cfg.rho);
  get("gamma_frac", cfg.gamma_frac);
  get("pfyl_m", cfg.pfyl_m);
  get("pfyl_sigma", cfg.pfyl_sigma);
  get("threads", cfg.threads);
  get("alpha", cfg.alpha);
  for (const auto& m : cfg.methods) parse_method(m);
  for (const auto& l : cfg.losses) {
    if (l != "emp" && l != "ro" && l != "topk" && l != "knn") {
      throw std::invalid_argument("unknown loss '" + l + "' in sweep config");
    }
  }
  if (cfg.seeds.empty()) throw std::invalid_argument("sweep config needs at least one seed");
  return cfg;
}

/// Policy for a loss name, with Γ = gamma_frac · n for RO.
inline TargetPolicy make_policy(const std::string& loss, std::size_t n, std::size_t k, double w,
                                double rho, double gamma_frac) {
  if (loss == "emp") return TargetPolicy::empirical();
  if (loss == "ro") return TargetPolicy::robust({rho, gamma_frac * static_cast<double>(n)});
  if (loss == "topk") return TargetPolicy::top_k(k);
  if (loss == "knn") return TargetPolicy::knn(k, w);
  throw std::invalid_argument("unknown loss '" + loss + "'");
}

/// "tsp:N" without coordinates gets seed-dependent random coordinates.
inline ProblemInstance sweep_instance(const std::string& desc, std::uint64_t seed) {
  ProblemInstance inst = ProblemInstance::parse(desc);
  if (inst.kind() == ProblemKind::Tsp && desc.find("coords=") == std::string::npos) {
    inst = ProblemInstance::tsp(random_tsp_coords(inst.nodes(), seed));
  }
  return inst;
}

struct SweepRun {
  std::string problem;
  std::size_t t = 0;
  double noise = 0.0;
  std::string method;
  std::string loss;  // "mse" for PFL
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double test_regret_pct = 0.0;
  double test_expected_regret_pct = 0.0;
  double best_val_regret_pct = 0.0;
  std::size_t best_epoch = 0;
  TrainAudit audit;
  double wall_seconds = 0.0;
};

struct SweepAggregate {
  std::string problem;
  std::size_t t = 0;
  double noise = 0.0;
  std::string method;
  std::string loss;
  std::size_t runs = 0;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  double mean_expected = 0.0;
  double std_expected = 0.0;
  std::optional<TTestResult> vs_empirical;
  std::string marker;  // "*" better, "x" worse, "" otherwise
};

struct SweepResult {
  std::vector<SweepRun> runs;
  std::vector<SweepAggregate> aggregates;
};

inline SweepRun run_single(const SweepConfig& cfg, SweepRun run) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const ProblemInstance inst = sweep_instance(run.problem, run.seed);
    GenParams gp;
    gp.m = cfg.features;
    gp.deg = cfg.degree;
    gp.noise_halfwidth = run.noise;
    gp.t_train = run.t;
    gp.t_val = cfg.val_size;
    gp.t_test = cfg.test_size;
    gp.seed = run.seed;
    const SplitDatasets data = generate_splits(inst, gp);
    const Oracle oracle(inst);

    TrainConfig tc;
    tc.method = parse_method(run.method);
    tc.pfyl_samples = cfg.pfyl_m;
    tc.pfyl_sigma = cfg.pfyl_sigma;
    tc.epochs = cfg.epochs_for(run.t);
    tc.batch_size = cfg.batch_size;
    tc.seed = run.seed;
    tc.lr = cfg.lr;
    TargetSet targets;
    if (tc.method != Method::PflMse) {
      tc.policy = make_policy(run.loss, inst.n(), cfg.k, cfg.w, cfg.rho, cfg.gamma_frac);
      targets = build_targets(tc.policy, data.train, oracle);
    }
    const TrainedModel model = train(tc, data.train, data.val, oracle, targets);
    auto by_model = [&model](std::size_t, const Sample& s) { return model.predictor.predict(s.z); };
    run.test_regret_pct = eval_regret(by_model, data.test, oracle).normalized_regret_pct;
    run.test_expected_regret_pct = eval_expected_regret(by_model, data.test, oracle);
    run.best_val_regret_pct = model.best_val_regret_pct;
    run.best_epoch = model.best_epoch;
    run.audit = model.audit;
    run.ok = true;
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

/**
 * @brief Run every (problem, t, ε̄, method, loss, seed) combination.
 *
 * PFL runs once per (problem, t, ε̄, seed) with loss "mse". All runs sharing
 * (problem, t, ε̄, seed) see the same generated data, which is what makes the
 * per-seed pairing against the empirical loss valid. Runs are independent and
 * distributed over cfg.threads; results keep config-then-seed order.
 */
inline SweepResult run_sweep(const SweepConfig& cfg) {
  std::vector<SweepRun> plan;
  for (const auto& problem : cfg.problems) {
    for (std::size_t t : cfg.train_sizes) {
      for (double noise : cfg.noise) {
        for (const auto& method : cfg.methods) {
          const bool pfl = parse_method(method) == Method::PflMse;
          const std::vector<std::string> losses = pfl ? std::vector<std::string>{"mse"} : cfg.losses;
          for (const auto& loss : losses) {
            for (std::uint64_t seed : cfg.seeds) {
              SweepRun r;
              r.problem = problem;
              r.t = t;
              r.noise = noise;
              r.method = method;
              r.loss = loss;
              r.seed = seed;
              plan.push_back(std::move(r));
            }
          }
        }
      }
    }
  }

  SweepResult result;
  result.runs.resize(plan.size());
  const unsigned workers = std::max(1U, std::min<unsigned>(cfg.threads, static_cast<unsigned>(plan.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) result.runs[i] = run_single(cfg, plan[i]);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Aggregate consecutive blocks of one configuration (seeds are innermost).
  const std::size_t block = cfg.seeds.size();
  for (std::size_t start = 0; start < result.runs.size(); start += block) {
    const SweepRun& head = result.runs[start];
    SweepAggregate agg;
    agg.problem = head.problem;
    agg.t = head.t;
    agg.noise = head.noise;
    agg.method = head.method;
    agg.loss = head.loss;
    std::vector<double> reg, exp;
    for (std::size_t i = start; i < start + block; ++i) {
      if (!result.runs[i].ok) continue;
      reg.push_back(result.runs[i].test_regret_pct);
      exp.push_back(result.runs[i].test_expected_regret_pct);
    }
    agg.runs = reg.size();
    agg.mean_regret = mean_of(reg);
    agg.std_regret = stddev_of(reg);
    agg.mean_expected = mean_of(exp);
    agg.std_expected = stddev_of(exp);
    result.aggregates.push_back(std::move(agg));
  }

  // Significance of each robust loss against the empirical loss of the same
  // (problem, t, ε̄, method), paired by seed over runs that both succeeded.
  for (std::size_t a = 0; a < result.aggregates.size(); ++a) {
    auto& agg = result.aggregates[a];
    if (agg.loss == "emp" || agg.loss == "mse") continue;
    for (std::size_t b = 0; b < result.aggregates.size(); ++b) {
      const auto& ref = result.aggregates[b];
      if (ref.loss != "emp" || ref.problem != agg.problem || ref.t != agg.t || ref.noise != agg.noise ||
          ref.method != agg.method) {
        continue;
      }
      std::vector<double> x, y;
      for (std::size_t s = 0; s < block; ++s) {
        const auto& ra = result.runs[a * block + s];
        const auto& rb = result.runs[b * block + s];
        if (ra.ok && rb.ok) {
          x.push_back(ra.test_regret_pct);
          y.push_back(rb.test_regret_pct);
        }
      }
      if (x.size() >= 2) {
        agg.vs_empirical = paired_t_test(x, y, cfg.alpha);
        if (agg.vs_empirical->significant) agg.marker = agg.vs_empirical->t_stat < 0 ? "*" : "x";
      }
    }
  }
  return result;
}

/// Writes results.csv (detail rows then aggregate rows) and, if
/// `timing_path` is non-empty, the per-run wall-clock times there.
inline void write_sweep_csv(const SweepResult& res, const std::string& path,
                            const std::string& timing_path = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "kind,problem,t,noise,method,loss,seed,status,test_regret_pct,test_regret_std,"
         "test_expected_regret_pct,test_expected_regret_std,best_val_regret_pct,best_epoch,"
         "precompute_solves,gradient_solves,eval_solves,runs,t_stat,p_value,significance\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(v > 0 ? "inf" : v < 0 ? "-inf" : "nan"); };
  for (const auto& r : res.runs) {
    out << "detail," << r.problem << ',' << r.t << ',' << num(r.noise) << ',' << r.method << ','
        << r.loss << ',' << r.seed << ',';
    if (!r.ok) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "error: " << msg << ",,,,,,,,,,,,,\n";
      continue;
    }
    out << "ok," << num(r.test_regret_pct) << ",," << num(r.test_expected_regret_pct) << ",,"
        << num(r.best_val_regret_pct) << ',' << r.best_epoch << ',' << r.audit.precompute_solves << ','
        << r.audit.gradient_solves << ',' << r.audit.eval_solves << ",,,,\n";
  }
  for (const auto& a : res.aggregates) {
    out << "aggregate," << a.problem << ',' << a.t << ',' << num(a.noise) << ',' << a.method << ','
        << a.loss << ",," << (a.runs ? "ok" : "failed") << ',' << num(a.mean_regret) << ','
        << num(a.std_regret) << ',' << num(a.mean_expected) << ',' << num(a.std_expected) << ",,,,,,"
        << a.runs << ',';
    if (a.vs_empirical) {
      out << num(a.vs_empirical->t_stat) << ',' << num(a.vs_empirical->p_value) << ',' << a.marker;
    } else {
      out << ",," << a.marker;
    }
    out << '\n';
  }
  if (!timing_path.empty()) {
    std::ofstream tout(timing_path);
    if (!tout) throw std::runtime_error("cannot write " + timing_path);
    tout << "problem,t,noise,method,loss,seed,wall_seconds\n";
    for (const auto& r : res.runs) {
      tout << r.problem << ',' << r.t << ',' << num(r.noise) << ',' << r.method << ',' << r.loss << ','
           << r.seed << ',' << r.wall_seconds << '\n';
    }
  }
}

}  // namespace dfl
