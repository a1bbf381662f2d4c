#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dfl/dfl.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dfl_datagen_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(GenModel, ShapeAndDensity) {
  const auto inst = dfl::ProblemInstance::grid(10, 10);
  const auto gm = dfl::make_gen_model(inst, 5, 0);
  EXPECT_EQ(gm.B.size(), 180u * 5u);
  double ones = 0;
  for (auto b : gm.B) ones += b;
  EXPECT_NEAR(ones / gm.B.size(), 0.5, 0.06);
}

TEST(GenModel, CleanCostAtZeroFeatures) {
  const auto gm = dfl::make_gen_model(dfl::ProblemInstance::grid(3, 3), 4, 1);
  for (double v : dfl::clean_costs(gm, std::vector<double>(4, 0.0), 6)) EXPECT_EQ(v, 730.0);
  for (double v : dfl::clean_costs(gm, std::vector<double>(4, 0.0), 1)) EXPECT_EQ(v, 4.0);
}

TEST(GenModel, CleanCostFloorsAtOne) {
  const auto gm = dfl::make_gen_model(dfl::ProblemInstance::grid(3, 3), 1, 2);
  const auto c = dfl::clean_costs(gm, std::vector<double>{-100.0}, 6);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], gm.b(i, 0) ? 1.0 : 730.0);
}

TEST(Datagen, SplitSizesAndStreams) {
  dfl::GenParams gp;
  gp.t_train = 17;
  gp.t_val = 5;
  gp.t_test = 9;
  gp.seed = 3;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::tsp(5), gp);
  EXPECT_EQ(d.train.size(), 17u);
  EXPECT_EQ(d.val.size(), 5u);
  EXPECT_EQ(d.test.size(), 9u);
  EXPECT_EQ(d.train.meta.n, 10u);
  EXPECT_NE(d.train.samples[0].z, d.val.samples[0].z);
  EXPECT_EQ(d.train.meta.split, "train");

  const auto again = dfl::generate_splits(dfl::ProblemInstance::tsp(5), gp);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(d.train.samples[i].c, again.train.samples[i].c);
}

TEST(Datagen, NoNoiseMeansCleanCosts) {
  dfl::GenParams gp;
  gp.t_train = 50;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::grid(4, 4), gp);
  for (const auto& s : d.train.samples) EXPECT_EQ(s.c, *s.c_clean);
}

TEST(Datagen, NoiseIsMeanOneAndBounded) {
  dfl::GenParams gp;
  gp.noise_halfwidth = 0.5;
  gp.t_train = 4000;
  gp.seed = 8;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp);
  double sum = 0.0;
  std::size_t cnt = 0;
  for (const auto& s : d.train.samples) {
    for (std::size_t i = 0; i < s.c.size(); ++i) {
      const double r = s.c[i] / (*s.c_clean)[i];
      ASSERT_GE(r, 0.5 - 1e-12);
      ASSERT_LE(r, 1.5 + 1e-12);
      sum += r;
      ++cnt;
    }
  }
  EXPECT_NEAR(sum / cnt, 1.0, 0.01);
}

TEST(Datagen, SharedNoiseScalesWholeVector) {
  dfl::GenParams gp;
  gp.noise_halfwidth = 0.5;
  gp.noise_shared = true;
  gp.t_train = 20;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp);
  for (const auto& s : d.train.samples) {
    const double r0 = s.c[0] / (*s.c_clean)[0];
    for (std::size_t i = 1; i < s.c.size(); ++i) EXPECT_NEAR(s.c[i] / (*s.c_clean)[i], r0, 1e-12);
  }
}

TEST(Datagen, InvalidParams) {
  dfl::GenParams gp;
  gp.noise_halfwidth = -0.1;
  EXPECT_THROW(dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp), std::invalid_argument);
  gp.noise_halfwidth = 0.0;
  gp.m = 0;
  EXPECT_THROW(dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp), std::invalid_argument);
}

TEST(Datagen, TspCoordinatesSurviveDescriptor) {
  const auto pts = dfl::random_tsp_coords(7, 12);
  const auto inst = dfl::ProblemInstance::tsp(pts);
  EXPECT_EQ(dfl::ProblemInstance::parse(inst.descriptor()).coords(), pts);
  EXPECT_EQ(dfl::random_tsp_coords(7, 12), pts);
  EXPECT_NE(dfl::random_tsp_coords(7, 13), pts);
}

TEST(Persistence, RoundTripIsBitExact) {
  dfl::GenParams gp;
  gp.noise_halfwidth = 1.0;
  gp.t_train = 30;
  gp.t_val = 4;
  gp.t_test = 6;
  gp.seed = 21;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::tsp(dfl::random_tsp_coords(6, 21)), gp);
  const auto dir = scratch("roundtrip");
  dfl::save_splits(d, dir);
  const auto back = dfl::load_dataset(dir / "train");
  ASSERT_EQ(back.size(), d.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.samples[i].z, d.train.samples[i].z);
    EXPECT_EQ(back.samples[i].c, d.train.samples[i].c);
    EXPECT_EQ(back.samples[i].c_clean, d.train.samples[i].c_clean);
  }
  EXPECT_EQ(back.meta.instance, d.train.meta.instance);
  EXPECT_EQ(dfl::dataset_hash(back), dfl::dataset_hash(d.train));
  EXPECT_EQ(dfl::load_dataset(dir / "test").size(), 6u);
  fs::remove_all(dir);
}

TEST(Persistence, TamperedMetaIsRejected) {
  dfl::GenParams gp;
  gp.t_train = 5;
  gp.t_val = 2;
  gp.t_test = 2;
  const auto d = dfl::generate_splits(dfl::ProblemInstance::grid(3, 3), gp);
  const auto dir = scratch("tamper");
  dfl::save_dataset(d.train, dir);

  nlohmann::json meta;
  std::ifstream(dir / "meta.json") >> meta;
  meta["n"] = 13;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_THROW(dfl::load_dataset(dir), dfl::DimensionError);

  meta["n"] = 12;
  meta["samples"] = 6;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_THROW(dfl::load_dataset(dir), dfl::DimensionError);

  meta["samples"] = 5;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_NO_THROW(dfl::load_dataset(dir));

  std::ofstream(dir / "costs.csv", std::ios::app) << "1,2\n";
  EXPECT_ANY_THROW(dfl::load_dataset(dir));
  fs::remove_all(dir);
  EXPECT_THROW(dfl::load_dataset(dir), std::runtime_error);
}
