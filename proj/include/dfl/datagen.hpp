/**
 * @file datagen.hpp
 * @brief Synthetic contextual cost data and the on-disk dataset layout.
 *
 * Generation: z ~ N(0, I_m); c_clean_i = (max((Bz)_i/√m + 3, 0))^deg + 1;
 * c_i = c_clean_i · ε_i with ε_i ~ U(1−ε̄, 1+ε̄), independent per coefficient
 * (or one ε per sample with noise_shared). Since E[ε] = 1, c_clean = E[c|z].
 *
 * Dataset directory: features.csv (z_0..z_{m-1}), costs.csv (c_0..c_{n-1}),
 * optional clean_costs.csv, and meta.json. Numbers are written in shortest
 * round-trip form, so save/load is bit-exact.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/oracles.hpp"
#include "json.hpp"

namespace dfl {

struct GenParams {
  std::size_t m = 5;
  int deg = 6;
  double noise_halfwidth = 0.0;
  std::size_t t_train = 100;
  std::size_t t_val = 100;
  std::size_t t_test = 1000;
  std::uint64_t seed = 0;
  bool noise_shared = false;

  void validate() const {
    if (m < 1) throw std::invalid_argument("feature dimension must be >= 1");
    if (deg < 1) throw std::invalid_argument("polynomial degree must be >= 1");
    if (!(noise_halfwidth >= 0.0) || !std::isfinite(noise_halfwidth)) {
      throw std::invalid_argument("noise half-width must be finite and >= 0");
    }
  }
};

/// Fixed mixing matrix B ∈ {0,1}^{n×m} (row-major) for one instance.
struct GenModel {
  ProblemInstance inst;
  std::size_t m = 0;
  std::vector<std::uint8_t> B;

  std::uint8_t b(std::size_t i, std::size_t j) const { return B[i * m + j]; }
};

inline GenModel make_gen_model(const ProblemInstance& inst, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("feature dimension must be >= 1");
  RngStream rng(seed, StreamId::GenModel);
  GenModel gm{inst, m, std::vector<std::uint8_t>(inst.n() * m)};
  for (auto& v : gm.B) v = rng.bernoulli(0.5) ? 1 : 0;
  return gm;
}

/// Clean cost of every coefficient for features z.
inline CostVector clean_costs(const GenModel& gm, std::span<const double> z, int deg) {
  require_same_size(z.size(), gm.m, "features");
  const double scale = 1.0 / std::sqrt(static_cast<double>(gm.m));
  CostVector out(gm.inst.n());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double bz = 0.0;
    for (std::size_t j = 0; j < gm.m; ++j) {
      if (gm.b(i, j)) bz += z[j];
    }
    const double base = std::max(bz * scale + 3.0, 0.0);
    out[i] = std::pow(base, deg) + 1.0;
  }
  return out;
}

inline Dataset generate_samples(const GenModel& gm, std::size_t count, const GenParams& params,
                                RngStream& stream) {
  params.validate();
  if (count < 1) throw std::invalid_argument("generate_samples: count must be >= 1");
  require_same_size(params.m, gm.m, "GenParams.m vs GenModel.m");
  Dataset ds;
  ds.meta.problem = gm.inst.kind_name();
  ds.meta.m = gm.m;
  ds.meta.n = gm.inst.n();
  ds.meta.instance = gm.inst.descriptor();
  ds.meta.seed = params.seed;
  ds.meta.noise_halfwidth = params.noise_halfwidth;
  ds.meta.degree = params.deg;
  ds.meta.noise_shared = params.noise_shared;
  const double lo = 1.0 - params.noise_halfwidth, hi = 1.0 + params.noise_halfwidth;
  ds.samples.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Sample smp;
    smp.z.resize(gm.m);
    for (double& v : smp.z) v = stream.normal();
    CostVector clean = clean_costs(gm, smp.z, params.deg);
    smp.c = clean;
    if (params.noise_shared) {
      const double eps = stream.uniform(lo, hi);
      for (double& v : smp.c) v *= eps;
    } else {
      for (double& v : smp.c) v *= stream.uniform(lo, hi);
    }
    smp.c_clean = std::move(clean);
    ds.samples.push_back(std::move(smp));
  }
  return ds;
}

/// Node coordinates uniform in [0,1]², rounded through the 6-decimal
/// descriptor text so that parse(descriptor()) reproduces them exactly.
inline std::vector<Point2> random_tsp_coords(std::size_t nodes, std::uint64_t seed) {
  RngStream rng(seed, StreamId::Instance);
  std::vector<Point2> pts(nodes);
  for (auto& p : pts) {
    p.x = rng.uniform01();
    p.y = rng.uniform01();
  }
  return ProblemInstance::parse(ProblemInstance::tsp(pts).descriptor()).coords();
}

struct SplitDatasets {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Train/val/test drawn from one GenModel on three distinct streams.
inline SplitDatasets generate_splits(const ProblemInstance& inst, const GenParams& params) {
  params.validate();
  const GenModel gm = make_gen_model(inst, params.m, params.seed);
  RngStream train_rng(params.seed, StreamId::TrainSplit);
  RngStream val_rng(params.seed, StreamId::ValSplit);
  RngStream test_rng(params.seed, StreamId::TestSplit);
  SplitDatasets out{generate_samples(gm, params.t_train, params, train_rng),
                    generate_samples(gm, params.t_val, params, val_rng),
                    generate_samples(gm, params.t_test, params, test_rng)};
  out.train.meta.split = "train";
  out.val.meta.split = "val";
  out.test.meta.split = "test";
  return out;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

namespace detail {

inline void write_csv(const std::filesystem::path& path, const std::string& prefix, std::size_t cols,
                      const std::vector<const std::vector<double>*>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << prefix << j;
  out << '\n';
  for (const auto* row : rows) {
    for (std::size_t j = 0; j < row->size(); ++j) out << (j ? "," : "") << format_double((*row)[j]);
    out << '\n';
  }
}

inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path,
                                                 const std::string& prefix, std::size_t cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected;
  for (std::size_t j = 0; j < cols; ++j) expected += (j ? "," : "") + prefix + std::to_string(j);
  if (line != expected) {
    throw std::runtime_error(path.string() + ": header does not match " + std::to_string(cols) +
                             " columns " + prefix + "*");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (row.size() != cols) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows.size() + 1) + " has " +
                               std::to_string(row.size()) + " columns, expected " + std::to_string(cols));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  std::vector<const std::vector<double>*> z, c, clean;
  for (const auto& s : ds.samples) {
    z.push_back(&s.z);
    c.push_back(&s.c);
    if (s.c_clean) clean.push_back(&*s.c_clean);
  }
  detail::write_csv(dir / "features.csv", "z_", ds.meta.m, z);
  detail::write_csv(dir / "costs.csv", "c_", ds.meta.n, c);
  const bool with_clean = ds.has_clean();
  if (with_clean) {
    detail::write_csv(dir / "clean_costs.csv", "c_", ds.meta.n, clean);
  } else {
    std::filesystem::remove(dir / "clean_costs.csv");
  }
  nlohmann::json meta = {{"problem", ds.meta.problem},
                         {"m", ds.meta.m},
                         {"n", ds.meta.n},
                         {"instance", ds.meta.instance},
                         {"seed", ds.meta.seed},
                         {"noise_halfwidth", ds.meta.noise_halfwidth},
                         {"degree", ds.meta.degree},
                         {"noise_shared", ds.meta.noise_shared},
                         {"split", ds.meta.split},
                         {"samples", ds.size()},
                         {"has_clean", with_clean}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw std::runtime_error("cannot write meta.json in " + dir.string());
  out << meta.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt meta.json: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    ds.meta.problem = meta.at("problem").get<std::string>();
    ds.meta.m = meta.at("m").get<std::size_t>();
    ds.meta.n = meta.at("n").get<std::size_t>();
    ds.meta.instance = meta.at("instance").get<std::string>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    ds.meta.noise_halfwidth = meta.at("noise_halfwidth").get<double>();
    ds.meta.degree = meta.at("degree").get<int>();
    ds.meta.noise_shared = meta.value("noise_shared", false);
    ds.meta.split = meta.value("split", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("meta.json: " + std::string(e.what()));
  }
  const auto inst = ProblemInstance::parse(ds.meta.instance);
  require_same_size(ds.meta.n, inst.n(), "meta.json n vs instance descriptor");

  auto z = detail::read_csv(dir / "features.csv", "z_", ds.meta.m);
  auto c = detail::read_csv(dir / "costs.csv", "c_", ds.meta.n);
  require_same_size(c.size(), z.size(), "costs.csv rows vs features.csv rows");
  std::vector<std::vector<double>> clean;
  const bool with_clean = meta.value("has_clean", std::filesystem::exists(dir / "clean_costs.csv"));
  if (with_clean) {
    clean = detail::read_csv(dir / "clean_costs.csv", "c_", ds.meta.n);
    require_same_size(clean.size(), z.size(), "clean_costs.csv rows vs features.csv rows");
  }
  if (meta.contains("samples")) {
    require_same_size(z.size(), meta.at("samples").get<std::size_t>(), "row count vs meta.json samples");
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    Sample s{std::move(z[i]), std::move(c[i]), std::nullopt};
    if (with_clean) s.c_clean = std::move(clean[i]);
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

inline void save_splits(const SplitDatasets& splits, const std::filesystem::path& dir) {
  save_dataset(splits.train, dir / "train");
  save_dataset(splits.val, dir / "val");
  save_dataset(splits.test, dir / "test");
}

}  // namespace dfl
