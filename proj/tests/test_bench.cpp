#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfl/dfl.hpp"

// Reference values below were computed with scipy.special.betainc and
// scipy.stats.ttest_rel.

TEST(Stats, IncompleteBeta) {
  EXPECT_NEAR(dfl::incomplete_beta(2, 0.5, 0.3), 0.03784096948581308, 1e-10);
  EXPECT_NEAR(dfl::incomplete_beta(0.5, 0.5, 0.9), 0.7951672353008665, 1e-10);
  EXPECT_NEAR(dfl::incomplete_beta(10, 0.5, 0.95), 0.317151575465545, 1e-10);
  EXPECT_NEAR(dfl::incomplete_beta(1.5, 2.5, 0.2), 0.25102826441671433, 1e-10);
  EXPECT_EQ(dfl::incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(dfl::incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(Stats, StudentTwoSided) {
  EXPECT_NEAR(dfl::student_t_two_sided_p(2.0, 9), 0.07655282377070094, 1e-10);
  EXPECT_NEAR(dfl::student_t_two_sided_p(-2.0, 9), 0.07655282377070094, 1e-10);
  EXPECT_EQ(dfl::student_t_two_sided_p(0.0, 9), 1.0);
}

TEST(Stats, PairedTTestReference) {
  const std::vector<double> diffs{0.8, 1.2, 0.9, 1.1, 1.0}, zero(5, 0.0);
  const auto r = dfl::paired_t_test(diffs, zero);
  EXPECT_NEAR(r.t_stat, 14.142135623730951, 1e-9);
  EXPECT_NEAR(r.p_value, 0.0001451281706131975, 1e-10);
  EXPECT_TRUE(r.significant);

  const std::vector<double> a{1.2, 3.4, 2.2, 5.1, 0.3, 2.8}, b{1.0, 2.9, 2.5, 4.0, 0.1, 2.0};
  const auto s = dfl::paired_t_test(a, b);
  EXPECT_NEAR(s.t_stat, 2.059165564555793, 1e-9);
  EXPECT_NEAR(s.p_value, 0.09453353046791459, 1e-10);
  EXPECT_FALSE(s.significant);
}

TEST(Stats, PairedTTestSymmetryAndDegenerate) {
  const std::vector<double> a{1.2, 3.4, 2.2, 5.1, 0.3, 2.8}, b{1.0, 2.9, 2.5, 4.0, 0.1, 2.0};
  const auto ab = dfl::paired_t_test(a, b), ba = dfl::paired_t_test(b, a);
  EXPECT_EQ(ab.t_stat, -ba.t_stat);
  EXPECT_EQ(ab.p_value, ba.p_value);

  const auto same = dfl::paired_t_test(a, a);
  EXPECT_EQ(same.t_stat, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_FALSE(same.significant);

  const std::vector<double> d{1.25, 3.5, 2.25, 5.0, 0.5, 2.75};
  std::vector<double> shifted = d;
  for (double& v : shifted) v += 1.0;  // exact for these values
  const auto sh = dfl::paired_t_test(d, shifted);
  EXPECT_EQ(sh.p_value, 0.0);
  EXPECT_TRUE(std::isinf(sh.t_stat) && sh.t_stat < 0);

  EXPECT_THROW(dfl::paired_t_test(std::vector<double>{1}, std::vector<double>{2}), std::invalid_argument);
}

TEST(Stats, MeanAndStd) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_EQ(dfl::mean_of(v), 5.0);
  EXPECT_NEAR(dfl::stddev_of(v), 2.138089935299395, 1e-12);
  EXPECT_EQ(dfl::stddev_of(std::vector<double>{3}), 0.0);
}

TEST(Eval, RegretExample) {
  const dfl::Oracle o(dfl::ProblemInstance::grid(2, 2));
  dfl::Dataset ds;
  ds.meta.m = 1;
  ds.meta.n = 4;
  ds.samples = {{{0.0}, {1, 5, 1, 1}, std::nullopt}};
  const auto rep = dfl::eval_regret([](std::size_t, const dfl::Sample&) { return std::vector<double>{5, 1, 1, 1}; }, ds, o);
  ASSERT_EQ(rep.regrets.size(), 1u);
  EXPECT_EQ(rep.regrets[0], 4.0);
  EXPECT_EQ(rep.sum_abs_optimal, 2.0);
  EXPECT_NEAR(rep.normalized_regret_pct, 200.0, 1e-9);
  const auto perfect = dfl::eval_regret([](std::size_t, const dfl::Sample& s) { return s.c; }, ds, o);
  EXPECT_EQ(perfect.normalized_regret_pct, 0.0);
}

TEST(Eval, ZeroDenominatorIsFlagged) {
  const dfl::Oracle o(dfl::ProblemInstance::select(2));
  dfl::Dataset ds;
  ds.meta.m = 1;
  ds.meta.n = 2;
  ds.samples = {{{0.0}, {0, 0}, std::nullopt}};
  const auto rep = dfl::eval_regret([](std::size_t, const dfl::Sample&) { return std::vector<double>{1, 0}; }, ds, o);
  EXPECT_TRUE(rep.denominator_zero);
  EXPECT_EQ(rep.normalized_regret_pct, 0.0);
}

TEST(Eval, ExpectedRegretNeedsCleanCosts) {
  const dfl::Oracle o(dfl::ProblemInstance::select(2));
  dfl::Dataset ds;
  ds.meta.m = 1;
  ds.meta.n = 2;
  ds.samples = {{{0.0}, {1, 2}, std::nullopt}};
  EXPECT_THROW(dfl::eval_expected_regret([](std::size_t, const dfl::Sample& s) { return s.c; }, ds, o),
               std::invalid_argument);
}

TEST(BiasDemo, DegenerateSingleHigh) {
  dfl::BiasDemoConfig cfg;
  cfg.n_high = 1;
  cfg.n_low = 1;
  cfg.trials = 20000;
  const auto r = dfl::bias_demo(cfg);
  EXPECT_NEAR(r.mean_high_frequency, 0.5, 0.02);
  EXPECT_EQ(r.limit_high, 0.5);
  EXPECT_EQ(r.limit_low, 0.5);
  EXPECT_EQ(r.counts[0] + r.counts[1], 20000u);
}

TEST(BiasDemo, LimitsAndValidation) {
  dfl::BiasDemoConfig cfg;
  cfg.n_high = 3;
  cfg.n_low = 2;
  cfg.trials = 10;
  const auto r = dfl::bias_demo(cfg);
  EXPECT_DOUBLE_EQ(r.limit_high, (1 - 0.125) / 3);
  EXPECT_DOUBLE_EQ(r.limit_low, 0.125 / 2);
  cfg.trials = 0;
  EXPECT_THROW(dfl::bias_demo(cfg), std::invalid_argument);
  cfg.trials = 10;
  cfg.n_low = 0;
  EXPECT_THROW(dfl::bias_demo(cfg), std::invalid_argument);
}

TEST(Sweep, ConfigParsing) {
  const auto cfg = dfl::sweep_config_from_json(nlohmann::json::parse(R"({
    "problems": ["grid:3x3", "tsp:5"], "train_sizes": [20, 40], "noise": [0.5],
    "methods": ["spo+"], "losses": ["emp", "knn"], "seeds": [1, 2],
    "epochs": {"20": 3, "40": 2}, "default_epochs": 7, "k": 4
  })"));
  EXPECT_EQ(cfg.problems.size(), 2u);
  EXPECT_EQ(cfg.epochs_for(20), 3u);
  EXPECT_EQ(cfg.epochs_for(40), 2u);
  EXPECT_EQ(cfg.epochs_for(99), 7u);
  EXPECT_EQ(cfg.k, 4u);
  EXPECT_EQ(dfl::sweep_config_from_json(nlohmann::json::parse(R"({"epochs": 5})")).epochs_for(100), 5u);
  EXPECT_THROW(dfl::sweep_config_from_json(nlohmann::json::parse(R"({"losses": ["bogus"]})")), std::invalid_argument);
  EXPECT_THROW(dfl::sweep_config_from_json(nlohmann::json::parse(R"({"methods": ["sgd"]})")), std::invalid_argument);
}

TEST(Sweep, PolicyFactory) {
  const auto ro = dfl::make_policy("ro", 40, 10, 0.5, 0.5, 0.125);
  EXPECT_EQ(ro.uncertainty.gamma, 5.0);
  EXPECT_EQ(dfl::make_policy("knn", 40, 3, 0.2, 0.5, 0.1).k, 3u);
  EXPECT_THROW(dfl::make_policy("x", 4, 1, 0, 0, 0), std::invalid_argument);
}

namespace {

dfl::SweepConfig tiny_sweep(unsigned threads) {
  dfl::SweepConfig cfg;
  cfg.problems = {"grid:3x3", "tsp:5"};
  cfg.train_sizes = {12};
  cfg.noise = {0.5};
  cfg.methods = {"pfl", "spo+"};
  cfg.losses = {"emp", "topk", "knn"};
  cfg.seeds = {0, 1, 2};
  cfg.epochs_by_t.clear();
  cfg.default_epochs = 3;
  cfg.val_size = 6;
  cfg.test_size = 8;
  cfg.k = 3;
  cfg.threads = threads;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Sweep, BookkeepingAndPairing) {
  const auto res = dfl::run_sweep(tiny_sweep(1));
  // Per problem: pfl×1 + spo+×3 losses, 3 seeds each.
  ASSERT_EQ(res.runs.size(), 2u * 4u * 3u);
  ASSERT_EQ(res.aggregates.size(), 2u * 4u);
  for (const auto& r : res.runs) EXPECT_TRUE(r.ok) << r.error;
  EXPECT_EQ(res.runs[0].loss, "mse");
  for (const auto& a : res.aggregates) {
    EXPECT_EQ(a.runs, 3u);
    const bool paired = a.loss == "topk" || a.loss == "knn";
    EXPECT_EQ(a.vs_empirical.has_value(), paired) << a.method << ' ' << a.loss;
  }
  // Empirical SPO+ audit: t precompute, t·epochs gradient solves.
  const auto& emp = res.runs[3];
  EXPECT_EQ(emp.loss, "emp");
  EXPECT_EQ(emp.audit.precompute_solves, 12u);
  EXPECT_EQ(emp.audit.gradient_solves, 36u);
}

TEST(Sweep, ThreadCountDoesNotChangeCsv) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = (dir / "dfl_sweep_1.csv").string(), p3 = (dir / "dfl_sweep_3.csv").string();
  dfl::write_sweep_csv(dfl::run_sweep(tiny_sweep(1)), p1);
  dfl::write_sweep_csv(dfl::run_sweep(tiny_sweep(3)), p3);
  const auto a = slurp(p1), b = slurp(p3);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  std::istringstream lines(a);
  std::string line;
  while (std::getline(lines, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 20) << line;
  std::filesystem::remove(p1);
  std::filesystem::remove(p3);
}
