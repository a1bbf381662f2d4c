/**
 * @file learning.hpp
 * @brief Linear cost predictor, Adam, the SPO+/PFYL/MSE gradient engines and
 * the deterministic minibatch training loop.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/eval.hpp"
#include "dfl/oracles.hpp"
#include "dfl/targets.hpp"
#include "json.hpp"

namespace dfl {

/// ĉ = θ z (+ b). Parameters are stored flat: θ row-major (n×m), then b.
struct LinearPredictor {
  std::size_t n = 0;
  std::size_t m = 0;
  bool use_bias = false;
  std::vector<double> params;

  static LinearPredictor zeros(std::size_t n, std::size_t m, bool use_bias = false) {
    LinearPredictor p;
    p.n = n;
    p.m = m;
    p.use_bias = use_bias;
    p.params.assign(n * m + (use_bias ? n : 0), 0.0);
    return p;
  }

  double& theta(std::size_t i, std::size_t j) { return params[i * m + j]; }
  double theta(std::size_t i, std::size_t j) const { return params[i * m + j]; }
  double bias(std::size_t i) const { return use_bias ? params[n * m + i] : 0.0; }

  CostVector predict(std::span<const double> z) const {
    require_same_size(z.size(), m, "predict features");
    CostVector out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += params[i * m + j] * z[j];
      out[i] = acc + bias(i);
    }
    return out;
  }

  friend bool operator==(const LinearPredictor&, const LinearPredictor&) = default;
};

inline CostVector predict(const LinearPredictor& p, std::span<const double> z) { return p.predict(z); }

struct AdamState {
  std::vector<double> m1;
  std::vector<double> m2;
  std::uint64_t step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update in place. Non-finite gradients abort.
inline void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads) {
  require_same_size(params.size(), grads.size(), "adam params vs grads");
  if (!all_finite(grads)) throw std::runtime_error("adam_step: non-finite gradient");
  if (st.m1.empty()) {
    st.m1.assign(params.size(), 0.0);
    st.m2.assign(params.size(), 0.0);
  }
  require_same_size(st.m1.size(), params.size(), "adam state");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m1[i] = st.beta1 * st.m1[i] + (1.0 - st.beta1) * g;
    st.m2[i] = st.beta2 * st.m2[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m1[i] / bc1;
    const double vhat = st.m2[i] / bc2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient engines (gradients w.r.t. ĉ)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> mean_target_decision(std::span<const TargetPair> targets) {
  if (targets.empty()) throw std::invalid_argument("empty target list");
  std::vector<double> xbar(targets.front().x.size(), 0.0);
  for (const auto& t : targets) {
    require_same_size(t.x.size(), xbar.size(), "target decision");
    for (std::size_t i = 0; i < xbar.size(); ++i) xbar[i] += t.x[i];
  }
  const double k = static_cast<double>(targets.size());
  for (double& v : xbar) v /= k;
  return xbar;
}

// Mean of the target costs, taken as anchor + mean deviation from the anchor
// so that it equals the anchor bit-for-bit whenever every target does.
inline CostVector mean_target_cost(std::span<const TargetPair> targets, std::span<const double> anchor) {
  CostVector dev(anchor.size(), 0.0);
  for (const auto& t : targets) {
    require_same_size(t.c.size(), anchor.size(), "target cost");
    for (std::size_t i = 0; i < dev.size(); ++i) dev[i] += t.c[i] - anchor[i];
  }
  const double k = static_cast<double>(targets.size());
  CostVector out(anchor.begin(), anchor.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += dev[i] / k;
  return out;
}

}  // namespace detail

/**
 * SPO+ subgradient 2(x̄ − x*(2ĉ − c_ref)) with x̄ the mean target decision.
 * c_ref is the realized cost c for empirical, robust and top-k targets and
 * the mean k-NN target cost for k-NN targets. One nominal solve.
 */
inline CostVector spo_plus_gradient(const TargetPolicy& policy, std::span<const TargetPair> targets,
                                    std::span<const double> c, std::span<const double> chat,
                                    const Oracle& oracle) {
  require_same_size(c.size(), chat.size(), "spo+ costs");
  const auto xbar = detail::mean_target_decision(targets);
  const CostVector cref = policy.kind == TargetPolicy::Kind::Knn
                              ? detail::mean_target_cost(targets, c)
                              : CostVector(c.begin(), c.end());
  CostVector shifted(chat.size());
  for (std::size_t i = 0; i < chat.size(); ++i) shifted[i] = 2.0 * chat[i] - cref[i];
  const Decision xs = oracle.solve(shifted);
  CostVector g(chat.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (xbar[i] - xs[i]);
  return g;
}

/// PFYL gradient x̄ − (1/M) Σ x*(ĉ + σ ζ_s), ζ_s ~ N(0, I) from `stream`.
/// M nominal solves; n·M normals are drawn even when σ = 0.
inline CostVector pfyl_gradient(std::span<const TargetPair> targets, std::span<const double> chat,
                                const Oracle& oracle, std::size_t samples, double sigma,
                                RngStream& stream) {
  if (samples < 1) throw std::invalid_argument("pfyl: M must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("pfyl: sigma must be >= 0");
  const auto xbar = detail::mean_target_decision(targets);
  require_same_size(xbar.size(), chat.size(), "pfyl costs");
  std::vector<double> acc(chat.size(), 0.0);
  CostVector perturbed(chat.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < chat.size(); ++i) perturbed[i] = chat[i] + sigma * stream.normal();
    const Decision x = oracle.solve(perturbed);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
  }
  CostVector g(chat.size());
  const double M = static_cast<double>(samples);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = xbar[i] - acc[i] / M;
  return g;
}

/// Gradient of (1/n)‖ĉ − c‖².
inline CostVector mse_gradient(std::span<const double> c, std::span<const double> chat) {
  require_same_size(c.size(), chat.size(), "mse costs");
  CostVector g(c.size());
  const double scale = 2.0 / static_cast<double>(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) g[i] = scale * (chat[i] - c[i]);
  return g;
}

/**
 * Policy loss of prediction ĉ. Empirical, RO and top-k average
 * c^T(x*(ĉ) − x_target) over the targets; k-NN uses each target's own cost.
 * One solve for x*(ĉ).
 */
inline double loss_value(const TargetPolicy& policy, std::span<const TargetPair> targets,
                         std::span<const double> c, std::span<const double> chat,
                         const Oracle& oracle) {
  if (targets.empty()) throw std::invalid_argument("loss_value: empty target list");
  if ((policy.kind == TargetPolicy::Kind::Empirical || policy.kind == TargetPolicy::Kind::RobustOpt) &&
      targets.size() != 1) {
    throw std::invalid_argument("loss_value: empirical/RO targets must have length 1");
  }
  const Decision xhat = oracle.solve(chat);
  double sum = 0.0;
  for (const auto& t : targets) {
    const std::span<const double> ct = policy.kind == TargetPolicy::Kind::Knn
                                           ? std::span<const double>(t.c)
                                           : c;
    sum += dot(ct, xhat) - dot(ct, t.x);
  }
  return sum / static_cast<double>(targets.size());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class Method { SpoPlus, Pfyl, PflMse };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::SpoPlus: return "spo+";
    case Method::Pfyl: return "pfyl";
    case Method::PflMse: return "pfl";
  }
  return {};
}

inline Method parse_method(const std::string& s) {
  if (s == "spo+" || s == "spo") return Method::SpoPlus;
  if (s == "pfyl") return Method::Pfyl;
  if (s == "pfl" || s == "mse") return Method::PflMse;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct TrainConfig {
  Method method = Method::SpoPlus;
  std::size_t pfyl_samples = 1;  // M
  double pfyl_sigma = 1.0;
  TargetPolicy policy{};
  std::size_t epochs = 0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double lr = 0.01;
  bool use_bias = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_regret_pct = 0.0;
  double val_regret_pct = 0.0;
};

struct TrainAudit {
  std::uint64_t precompute_solves = 0;  // target construction
  std::uint64_t gradient_solves = 0;    // inside the gradient engines
  std::uint64_t eval_solves = 0;        // epoch-end evaluation, reported apart
  std::uint64_t total() const { return precompute_solves + gradient_solves; }
};

struct TrainedModel {
  LinearPredictor predictor;
  std::size_t best_epoch = 0;
  double best_val_regret_pct = std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> history;
  TrainAudit audit;
  TrainConfig config;
  std::string instance;
};

/**
 * @brief Minibatch training from θ = 0.
 *
 * Each epoch permutes the samples with the shuffle stream (if enabled),
 * averages ∂L/∂θ = g zᵀ over each minibatch in sample order and takes one
 * Adam step per minibatch. After every epoch the train and validation
 * normalised empirical regrets are recorded; the returned predictor is the
 * snapshot with the lowest validation regret (earliest epoch on ties).
 */
inline TrainedModel train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                          const Oracle& oracle, const TargetSet& targets) {
  if (train_ds.empty()) throw std::invalid_argument("train: empty training set");
  if (val_ds.empty()) throw std::invalid_argument("train: empty validation set");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  const std::size_t n = oracle.n();
  const std::size_t m = train_ds.meta.m;
  require_same_size(train_ds.meta.n, n, "training set vs instance");
  require_same_size(val_ds.meta.n, n, "validation set vs instance");
  require_same_size(val_ds.meta.m, m, "validation features");
  if (cfg.method != Method::PflMse) require_same_size(targets.size(), train_ds.size(), "targets");

  TrainedModel model;
  model.config = cfg;
  model.instance = oracle.instance().descriptor();
  model.predictor = LinearPredictor::zeros(n, m, cfg.use_bias);
  model.audit.precompute_solves = cfg.method == Method::PflMse ? 0 : targets.solves;
  if (cfg.epochs == 0) return model;

  LinearPredictor current = model.predictor;
  AdamState adam;
  adam.lr = cfg.lr;
  RngStream shuffle_rng(cfg.seed, StreamId::Shuffle);
  RngStream pfyl_rng(cfg.seed, StreamId::Pfyl);
  auto& audit = oracle.audit();

  std::uint64_t mark = audit.count();
  const RegretEvaluator train_eval(train_ds, oracle);
  const RegretEvaluator val_eval(val_ds, oracle);
  model.audit.eval_solves += audit.count() - mark;

  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(current.params.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);
      }
    }
    mark = audit.count();
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const Sample& s = train_ds.samples[i];
        const CostVector chat = current.predict(s.z);
        CostVector g;
        switch (cfg.method) {
          case Method::SpoPlus:
            g = spo_plus_gradient(cfg.policy, targets[i], s.c, chat, oracle);
            break;
          case Method::Pfyl:
            g = pfyl_gradient(targets[i], chat, oracle, cfg.pfyl_samples, cfg.pfyl_sigma, pfyl_rng);
            break;
          case Method::PflMse:
            g = mse_gradient(s.c, chat);
            break;
        }
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < m; ++j) grad[r * m + j] += g[r] * s.z[j];
          if (cfg.use_bias) grad[n * m + r] += g[r];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& v : grad) v *= inv;
      if (!all_finite(grad)) {
        throw std::runtime_error("train: non-finite gradient in epoch " + std::to_string(epoch));
      }
      adam_step(adam, current.params, grad);
    }
    model.audit.gradient_solves += audit.count() - mark;

    mark = audit.count();
    auto by_model = [&current](std::size_t, const Sample& s) { return current.predict(s.z); };
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_regret_pct = train_eval.evaluate(by_model).normalized_regret_pct;
    rec.val_regret_pct = val_eval.evaluate(by_model).normalized_regret_pct;
    model.audit.eval_solves += audit.count() - mark;
    if (!std::isfinite(rec.val_regret_pct) || !std::isfinite(rec.train_regret_pct)) {
      throw std::runtime_error("train: non-finite regret in epoch " + std::to_string(epoch));
    }
    model.history.push_back(rec);
    if (rec.val_regret_pct < model.best_val_regret_pct) {
      model.best_val_regret_pct = rec.val_regret_pct;
      model.best_epoch = epoch;
      model.predictor = current;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// model.json
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
  return {{"method", method_name(cfg.method)},
          {"pfyl_m", cfg.pfyl_samples},
          {"pfyl_sigma", cfg.pfyl_sigma},
          {"policy", cfg.policy},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"shuffle", cfg.shuffle},
          {"lr", cfg.lr},
          {"use_bias", cfg.use_bias}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.method = parse_method(j.at("method").get<std::string>());
  cfg.pfyl_samples = j.at("pfyl_m").get<std::size_t>();
  cfg.pfyl_sigma = j.at("pfyl_sigma").get<double>();
  cfg.policy = j.at("policy").get<TargetPolicy>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.shuffle = j.at("shuffle").get<bool>();
  cfg.lr = j.at("lr").get<double>();
  cfg.use_bias = j.at("use_bias").get<bool>();
  return cfg;
}

inline nlohmann::json model_to_json(const TrainedModel& model) {
  const auto& p = model.predictor;
  nlohmann::json theta = nlohmann::json::array();
  for (std::size_t i = 0; i < p.n; ++i) {
    theta.push_back(std::vector<double>(p.params.begin() + static_cast<std::ptrdiff_t>(i * p.m),
                                        p.params.begin() + static_cast<std::ptrdiff_t>((i + 1) * p.m)));
  }
  std::vector<double> bias;
  if (p.use_bias) bias.assign(p.params.begin() + static_cast<std::ptrdiff_t>(p.n * p.m), p.params.end());
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : model.history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_regret_pct", h.train_regret_pct},
                       {"val_regret_pct", h.val_regret_pct}});
  }
  nlohmann::json j;
  j["format"] = "dfl-model/1";
  j["instance"] = model.instance;
  j["n"] = p.n;
  j["m"] = p.m;
  j["use_bias"] = p.use_bias;
  j["theta"] = std::move(theta);
  j["bias"] = bias;
  j["config"] = config_to_json(model.config);
  j["best_epoch"] = model.best_epoch;
  j["audit"] = {{"precompute_solves", model.audit.precompute_solves},
                {"gradient_solves", model.audit.gradient_solves},
                {"eval_solves", model.audit.eval_solves},
                {"total_solves", model.audit.total()}};
  j["history"] = std::move(history);
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  TrainedModel model;
  model.instance = j.at("instance").get<std::string>();
  auto& p = model.predictor;
  p = LinearPredictor::zeros(j.at("n").get<std::size_t>(), j.at("m").get<std::size_t>(),
                             j.at("use_bias").get<bool>());
  const auto& theta = j.at("theta");
  if (theta.size() != p.n) throw std::runtime_error("model: theta row count != n");
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto row = theta[i].get<std::vector<double>>();
    if (row.size() != p.m) throw std::runtime_error("model: theta row length != m");
    for (std::size_t k = 0; k < p.m; ++k) p.theta(i, k) = row[k];
  }
  if (p.use_bias) {
    const auto bias = j.at("bias").get<std::vector<double>>();
    if (bias.size() != p.n) throw std::runtime_error("model: bias length != n");
    std::copy(bias.begin(), bias.end(), p.params.begin() + static_cast<std::ptrdiff_t>(p.n * p.m));
  }
  model.config = config_from_json(j.at("config"));
  model.best_epoch = j.at("best_epoch").get<std::size_t>();
  const auto& a = j.at("audit");
  model.audit.precompute_solves = a.at("precompute_solves").get<std::uint64_t>();
  model.audit.gradient_solves = a.at("gradient_solves").get<std::uint64_t>();
  model.audit.eval_solves = a.at("eval_solves").get<std::uint64_t>();
  for (const auto& h : j.at("history")) {
    model.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_regret_pct").get<double>(),
                             h.at("val_regret_pct").get<double>()});
  }
  if (!model.history.empty() && model.best_epoch >= 1 && model.best_epoch <= model.history.size()) {
    model.best_val_regret_pct = model.history[model.best_epoch - 1].val_regret_pct;
  }
  return model;
}

inline void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_json(model).dump(2) << '\n';
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace dfl
