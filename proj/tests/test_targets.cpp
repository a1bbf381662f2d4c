#include <gtest/gtest.h>

#include <filesystem>

#include "brute_force.hpp"
#include "dfl/dfl.hpp"

using dfl::Decision;
using dfl::TargetPolicy;

namespace {

dfl::Dataset toy_dataset() {
  // Features on a line: 0, 1, 3, 6; costs for a 2×2 grid.
  dfl::Dataset ds;
  ds.meta.m = 1;
  ds.meta.n = 4;
  ds.meta.instance = "grid:2x2";
  ds.samples = {{{0.0}, {1, 5, 1, 1}, std::nullopt},
                {{1.0}, {5, 1, 1, 1}, std::nullopt},
                {{3.0}, {1, 1, 5, 1}, std::nullopt},
                {{6.0}, {2, 2, 2, 2}, std::nullopt}};
  return ds;
}

dfl::SplitDatasets small_splits(std::uint64_t seed, double noise = 0.5) {
  dfl::GenParams gp;
  gp.m = 3;
  gp.t_train = 20;
  gp.t_val = 10;
  gp.t_test = 10;
  gp.noise_halfwidth = noise;
  gp.seed = seed;
  return dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp);
}

}  // namespace

TEST(Knn, NeighboursExcludeSelfAndBreakTiesLow) {
  const auto ds = toy_dataset();
  EXPECT_EQ(dfl::knn_neighbors(ds, 0, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(dfl::knn_neighbors(ds, 3, 1), (std::vector<std::size_t>{2}));
  // Sample 1 sits at distance 1 from 0 and 2 from 2: 0 first.
  EXPECT_EQ(dfl::knn_neighbors(ds, 1, 3), (std::vector<std::size_t>{0, 2, 3}));

  dfl::Dataset tie = ds;
  tie.samples[2].z = {2.0};  // 0 and 2 both at distance 1 from sample 1
  EXPECT_EQ(dfl::knn_neighbors(tie, 1, 1), (std::vector<std::size_t>{0}));
}

TEST(Knn, RejectsBadK) {
  const auto ds = toy_dataset();
  EXPECT_THROW(dfl::knn_neighbors(ds, 0, 0), std::invalid_argument);
  EXPECT_THROW(dfl::knn_neighbors(ds, 0, 4), std::invalid_argument);
  EXPECT_NO_THROW(dfl::knn_neighbors(ds, 0, 3));
}

TEST(Knn, BlendedCosts) {
  const auto ds = toy_dataset();
  const auto cs = dfl::knn_target_costs(ds, 0, 1, 0.5);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0], (std::vector<double>{3, 3, 1, 1}));
  const auto own = dfl::knn_target_costs(ds, 0, 2, 0.0);
  for (const auto& c : own) EXPECT_EQ(c, ds.samples[0].c);
  EXPECT_THROW(dfl::knn_target_costs(ds, 0, 1, 1.5), std::invalid_argument);
}

TEST(Targets, ShapesPerPolicy) {
  const auto ds = toy_dataset();
  const dfl::Oracle o(dfl::ProblemInstance::grid(2, 2));
  const auto emp = dfl::build_targets(TargetPolicy::empirical(), ds, o);
  ASSERT_EQ(emp.size(), 4u);
  EXPECT_EQ(emp.solves, 4u);
  EXPECT_EQ(emp[0].size(), 1u);
  EXPECT_EQ(emp[0][0].x, (Decision{1, 0, 0, 1}));
  EXPECT_EQ(emp[1][0].x, (Decision{0, 1, 1, 0}));

  const auto top = dfl::build_targets(TargetPolicy::top_k(10), ds, o);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(top[i].size(), 2u);  // a 2×2 grid has only two paths
    EXPECT_EQ(top[i][0].x, emp[i][0].x);
    EXPECT_EQ(top[i][0].c, ds.samples[i].c);
  }

  const auto knn = dfl::build_targets(TargetPolicy::knn(2, 0.5), ds, o);
  EXPECT_EQ(knn.solves, 8u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ASSERT_EQ(knn[i].size(), 2u);
    for (const auto& tp : knn[i]) EXPECT_EQ(tp.x, o.solve(tp.c));
  }

  const auto ro = dfl::build_targets(TargetPolicy::robust({0.5, 1.0}), ds, o);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ASSERT_EQ(ro[i].size(), 1u);
    EXPECT_EQ(ro[i][0].x, o.robust_solve(ds.samples[i].c, {0.5, 1.0}));
  }
}

TEST(Targets, KnnWeightZeroReproducesEmpiricalDecisions) {
  const auto data = small_splits(3);
  const dfl::Oracle o(dfl::ProblemInstance::grid(3, 3));
  const auto emp = dfl::build_targets(TargetPolicy::empirical(), data.train, o);
  const auto knn = dfl::build_targets(TargetPolicy::knn(4, 0.0), data.train, o);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    for (const auto& tp : knn[i]) {
      EXPECT_EQ(tp.x, emp[i][0].x);
      EXPECT_EQ(tp.c, emp[i][0].c);
    }
  }
}

TEST(Targets, WorkerCountDoesNotChangeResult) {
  const auto data = small_splits(4);
  for (const auto& policy : {TargetPolicy::empirical(), TargetPolicy::top_k(5), TargetPolicy::knn(3, 0.5),
                             TargetPolicy::robust({0.5, 1.5})}) {
    const dfl::Oracle a(dfl::ProblemInstance::grid(3, 3)), b(dfl::ProblemInstance::grid(3, 3));
    const auto one = dfl::build_targets(policy, data.train, a, 1);
    const auto four = dfl::build_targets(policy, data.train, b, 4);
    EXPECT_EQ(one.samples, four.samples) << policy.name();
    EXPECT_EQ(one.solves, four.solves) << policy.name();
  }
}

TEST(Targets, DimensionMismatchThrows) {
  const auto ds = toy_dataset();
  const dfl::Oracle o(dfl::ProblemInstance::grid(3, 3));
  EXPECT_THROW(dfl::build_targets(TargetPolicy::empirical(), ds, o), dfl::DimensionError);
}

TEST(Targets, CacheRoundTripAndKeyMismatch) {
  const auto data = small_splits(5);
  const dfl::Oracle o(dfl::ProblemInstance::grid(3, 3));
  const auto policy = TargetPolicy::knn(3, 0.25);
  const auto ts = dfl::build_targets(policy, data.train, o);
  const auto path = (std::filesystem::temp_directory_path() / "dfl_targets_cache_test.json").string();
  dfl::save_targets(path, data.train, ts);

  const auto back = dfl::load_targets(path, data.train, policy);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->samples, ts.samples);
  EXPECT_EQ(back->solves, ts.solves);

  EXPECT_FALSE(dfl::load_targets(path, data.train, TargetPolicy::knn(3, 0.5)).has_value());
  EXPECT_FALSE(dfl::load_targets(path, data.val, policy).has_value());
  EXPECT_FALSE(dfl::load_targets(path + ".missing", data.train, policy).has_value());
  std::filesystem::remove(path);
}

TEST(Targets, PolicyJsonRoundTrip) {
  for (const auto& p : {TargetPolicy::empirical(), TargetPolicy::robust({0.25, 3.0}), TargetPolicy::top_k(7),
                        TargetPolicy::knn(4, 0.3)}) {
    const nlohmann::json j = p;
    const auto q = j.get<TargetPolicy>();
    EXPECT_EQ(q.name(), p.name());
    EXPECT_EQ(nlohmann::json(q), j);
  }
  EXPECT_THROW(nlohmann::json({{"loss", "bogus"}}).get<TargetPolicy>(), std::invalid_argument);
}

TEST(Targets, PolicyValidation) {
  EXPECT_THROW(TargetPolicy::knn(0, 0.5).validate(), std::invalid_argument);
  EXPECT_THROW(TargetPolicy::knn(3, -0.1).validate(), std::invalid_argument);
  EXPECT_THROW(TargetPolicy::top_k(0).validate(), std::invalid_argument);
  EXPECT_THROW(TargetPolicy::robust({-1.0, 1.0}).validate(), std::invalid_argument);
}
