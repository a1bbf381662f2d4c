// dfl: command-line front end.
//
//   dfl datagen   --problem grid --grid 5x5 --noise 0.5 --seed 1 --out data/
//   dfl train     --data data/ --method spo+ --loss knn --epochs 200 --out model.json
//   dfl eval      --data data/ --model model.json --split test --report report.json
//   dfl sweep     --config sweep.json --out results.csv
//   dfl bias-demo --nh 2 --nl 2 --sigma-h 1 --sigma-l 1e-6 --trials 100000
//
// Exit status is 0 on success and 1 (with a diagnostic on stderr) otherwise.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dfl/dfl.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DatagenArgs {
  std::string problem = "grid";
  std::string grid = "5x5";
  std::size_t nodes = 8;
  std::size_t features = 5;
  int deg = 6;
  double noise = 0.0;
  bool noise_shared = false;
  std::size_t train = 100;
  std::size_t val = 100;
  std::size_t test = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string method = "spo+";
  std::string loss = "emp";
  std::size_t k = 10;
  double w = 0.5;
  double rho = 0.5;
  double gamma_frac = 0.125;
  std::size_t pfyl_m = 1;
  double pfyl_sigma = 1.0;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 0.01;
  std::uint64_t seed = 0;
  bool no_shuffle = false;
  bool bias = false;
  unsigned threads = 1;
  std::string targets_cache;
  std::string out = "model.json";
};

struct EvalArgs {
  std::string data;
  std::string model;
  std::string split = "test";
  std::string report;
};

struct SweepArgs {
  std::string config;
  std::string out = "results.csv";
  int threads = -1;
};

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

int run_datagen(const DatagenArgs& a) {
  dfl::GenParams gp;
  gp.m = a.features;
  gp.deg = a.deg;
  gp.noise_halfwidth = a.noise;
  gp.noise_shared = a.noise_shared;
  gp.t_train = a.train;
  gp.t_val = a.val;
  gp.t_test = a.test;
  gp.seed = a.seed;
  const dfl::ProblemInstance inst =
      a.problem == "grid"     ? dfl::ProblemInstance::parse("grid:" + a.grid)
      : a.problem == "tsp"    ? dfl::ProblemInstance::tsp(dfl::random_tsp_coords(a.nodes, a.seed))
      : a.problem == "select" ? dfl::ProblemInstance::select(a.nodes)
                              : throw std::invalid_argument("unknown problem '" + a.problem + "'");
  const auto splits = dfl::generate_splits(inst, gp);
  dfl::save_splits(splits, a.out);
  std::cout << "wrote " << inst.descriptor().substr(0, 40) << " (n=" << inst.n() << ") train/val/test = "
            << a.train << "/" << a.val << "/" << a.test << " to " << a.out << '\n';
  return 0;
}

int run_train(const TrainArgs& a) {
  const dfl::Dataset train_ds = dfl::load_dataset(fs::path(a.data) / "train");
  const dfl::Dataset val_ds = dfl::load_dataset(fs::path(a.data) / "val");
  if (train_ds.meta.instance != val_ds.meta.instance) {
    throw std::invalid_argument("train and val splits describe different instances");
  }
  const dfl::Oracle oracle(dfl::ProblemInstance::parse(train_ds.meta.instance));

  dfl::TrainConfig cfg;
  cfg.method = dfl::parse_method(a.method);
  cfg.pfyl_samples = a.pfyl_m;
  cfg.pfyl_sigma = a.pfyl_sigma;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.shuffle = !a.no_shuffle;
  cfg.lr = a.lr;
  cfg.use_bias = a.bias;
  cfg.policy = dfl::make_policy(a.loss, oracle.n(), a.k, a.w, a.rho, a.gamma_frac);

  dfl::TargetSet targets;
  if (cfg.method != dfl::Method::PflMse) {
    std::optional<dfl::TargetSet> cached;
    if (!a.targets_cache.empty()) cached = dfl::load_targets(a.targets_cache, train_ds, cfg.policy);
    if (cached) {
      targets = std::move(*cached);
    } else {
      targets = dfl::build_targets(cfg.policy, train_ds, oracle, a.threads);
      if (!a.targets_cache.empty()) dfl::save_targets(a.targets_cache, train_ds, targets);
    }
  }
  const dfl::TrainedModel model = dfl::train(cfg, train_ds, val_ds, oracle, targets);
  dfl::save_model(a.out, model);
  std::cout << "best epoch " << model.best_epoch << ", validation regret "
            << (model.history.empty() ? 0.0 : model.best_val_regret_pct) << "%, solves "
            << model.audit.total() << " (+" << model.audit.eval_solves << " eval) -> " << a.out << '\n';
  return 0;
}

int run_eval(const EvalArgs& a) {
  if (a.split != "train" && a.split != "val" && a.split != "test") {
    throw std::invalid_argument("split must be train, val or test");
  }
  const dfl::Dataset ds = dfl::load_dataset(fs::path(a.data) / a.split);
  const dfl::TrainedModel model = dfl::load_model(a.model);
  if (model.instance != ds.meta.instance) throw std::invalid_argument("model and data instances differ");
  const dfl::Oracle oracle(dfl::ProblemInstance::parse(ds.meta.instance));
  auto by_model = [&model](std::size_t, const dfl::Sample& s) { return model.predictor.predict(s.z); };
  dfl::RegretReport rep = dfl::eval_regret(by_model, ds, oracle);
  if (ds.has_clean()) rep.expected_normalized_regret_pct = dfl::eval_expected_regret(by_model, ds, oracle);
  rep.model_id = fs::path(a.model).filename().string();

  json j = {{"split", a.split},
            {"model", rep.model_id},
            {"samples", ds.size()},
            {"normalized_regret_pct", rep.normalized_regret_pct},
            {"denominator_zero", rep.denominator_zero},
            {"sum_regret", rep.sum_regret},
            {"sum_abs_optimal", rep.sum_abs_optimal},
            {"regrets", rep.regrets}};
  j["expected_normalized_regret_pct"] =
      rep.expected_normalized_regret_pct ? json(*rep.expected_normalized_regret_pct) : json(nullptr);
  write_json(j, a.report);
  if (!a.report.empty() && a.report != "-") {
    std::cout << a.split << " normalized regret " << rep.normalized_regret_pct << "% -> " << a.report << '\n';
  }
  return 0;
}

int run_sweep_cmd(const SweepArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw std::runtime_error("cannot read " + a.config);
  json j;
  in >> j;
  dfl::SweepConfig cfg = dfl::sweep_config_from_json(j);
  if (a.threads > 0) cfg.threads = static_cast<unsigned>(a.threads);
  const dfl::SweepResult res = dfl::run_sweep(cfg);
  dfl::write_sweep_csv(res, a.out, a.out + ".timing.csv");
  std::size_t failed = 0;
  for (const auto& r : res.runs) failed += r.ok ? 0 : 1;
  std::cout << res.runs.size() << " runs (" << failed << " failed) -> " << a.out << '\n';
  return 0;
}

int run_bias_demo(const dfl::BiasDemoConfig& cfg, const std::string& out) {
  const dfl::BiasDemoResult res = dfl::bias_demo(cfg);
  json j = {{"n_high", cfg.n_high},
            {"n_low", cfg.n_low},
            {"sigma_high", cfg.sigma_high},
            {"sigma_low", cfg.sigma_low},
            {"trials", cfg.trials},
            {"seed", cfg.seed},
            {"counts", res.counts},
            {"frequency", res.frequency},
            {"mean_high_frequency", res.mean_high_frequency},
            {"mean_low_frequency", res.mean_low_frequency},
            {"limit_high", res.limit_high},
            {"limit_low", res.limit_low}};
  write_json(j, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-focused learning with robust regret losses"};
  app.require_subcommand(1);

  DatagenArgs dg;
  auto* datagen = app.add_subcommand("datagen", "Generate train/val/test datasets");
  datagen->add_option("--problem", dg.problem, "grid | tsp | select")->check(CLI::IsMember({"grid", "tsp", "select"}));
  datagen->add_option("--grid", dg.grid, "Grid size VxH");
  datagen->add_option("--nodes", dg.nodes, "TSP nodes (or select alternatives)");
  datagen->add_option("--features", dg.features, "Feature dimension m");
  datagen->add_option("--deg", dg.deg, "Polynomial degree");
  datagen->add_option("--noise", dg.noise, "Noise half-width");
  datagen->add_flag("--noise-shared", dg.noise_shared, "One noise factor per sample");
  datagen->add_option("--train", dg.train, "Training samples");
  datagen->add_option("--val", dg.val, "Validation samples");
  datagen->add_option("--test", dg.test, "Test samples");
  datagen->add_option("--seed", dg.seed, "Seed");
  datagen->add_option("--out", dg.out, "Output directory")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a linear predictor");
  train->add_option("--data", tr.data, "Dataset directory (with train/ and val/)")->required();
  train->add_option("--method", tr.method, "spo+ | pfyl | pfl")->check(CLI::IsMember({"spo+", "pfyl", "pfl"}));
  train->add_option("--loss", tr.loss, "emp | ro | topk | knn")->check(CLI::IsMember({"emp", "ro", "topk", "knn"}));
  train->add_option("--k", tr.k, "k for top-k / k-NN");
  train->add_option("--w", tr.w, "k-NN interpolation weight");
  train->add_option("--rho", tr.rho, "RO per-coefficient deviation");
  train->add_option("--gamma-frac", tr.gamma_frac, "RO budget as a fraction of n");
  train->add_option("--pfyl-m", tr.pfyl_m, "PFYL perturbation samples");
  train->add_option("--pfyl-sigma", tr.pfyl_sigma, "PFYL perturbation amplitude");
  train->add_option("--epochs", tr.epochs, "Epochs");
  train->add_option("--batch", tr.batch, "Batch size");
  train->add_option("--lr", tr.lr, "Adam learning rate");
  train->add_option("--seed", tr.seed, "Seed");
  train->add_flag("--no-shuffle", tr.no_shuffle, "Keep sample order fixed");
  train->add_flag("--bias", tr.bias, "Add a bias term");
  train->add_option("--threads", tr.threads, "Threads for target precomputation");
  train->add_option("--targets-cache", tr.targets_cache, "targets.json cache file");
  train->add_option("--out", tr.out, "Output model.json");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on one split");
  eval->add_option("--data", ev.data, "Dataset directory")->required();
  eval->add_option("--model", ev.model, "model.json")->required();
  eval->add_option("--split", ev.split, "train | val | test");
  eval->add_option("--report", ev.report, "Output report.json (stdout if omitted)");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep");
  sweep->add_option("--config", sw.config, "sweep.json")->required();
  sweep->add_option("--out", sw.out, "results.csv");
  sweep->add_option("--threads", sw.threads, "Override worker threads");

  dfl::BiasDemoConfig bd;
  std::string bd_out;
  auto* bias = app.add_subcommand("bias-demo", "Monte Carlo of high/low variance optimal frequencies");
  bias->add_option("--nh", bd.n_high, "High-variance decisions");
  bias->add_option("--nl", bd.n_low, "Low-variance decisions");
  bias->add_option("--sigma-h", bd.sigma_high, "High standard deviation");
  bias->add_option("--sigma-l", bd.sigma_low, "Low standard deviation");
  bias->add_option("--trials", bd.trials, "Trials");
  bias->add_option("--seed", bd.seed, "Seed");
  bias->add_option("--out", bd_out, "Output JSON (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) return run_datagen(dg);
    if (*train) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*sweep) return run_sweep_cmd(sw);
    if (*bias) return run_bias_demo(bd, bd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
