#include "tubelab/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "tubelab/lacunarity.hpp"
#include "tubelab/sticky.hpp"

using namespace tubelab;

namespace {

const PrunedSlopeTree& cantor(int N) {
  static std::map<int, PrunedSlopeTree> cache;
  auto it = cache.find(N);
  if (it == cache.end()) it = cache.emplace(N, prune(digit_tree(3, 1, 19, {0, 2}), N, 1)).first;
  return it->second;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.Ns = {2, 3};
  cfg.seeds = 4;
  cfg.slices = 8;
  cfg.master_seed = 11;
  return cfg;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg = small_config();
  cfg.a0 = Rational(21, 2);
  cfg.c = 0.75;
  cfg.output = "/tmp/x.csv";
  auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.hash(), cfg.hash());
}

TEST(Config, HashIgnoresOutputAndThreads) {
  ExperimentConfig a = small_config(), b = a;
  b.output = "elsewhere.csv";
  b.threads = 3;
  EXPECT_EQ(a.hash(), b.hash());
  b.master_seed = 12;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(config_from_json({{"M", 1}}), ValidationError);
  EXPECT_THROW(config_from_json({{"R", {0}}}), ValidationError);
  EXPECT_THROW(config_from_json({{"A0", "1/10"}}), ValidationError);
  EXPECT_THROW(config_from_json({{"seeds", 0}}), ValidationError);
  EXPECT_THROW(config_from_json({{"colour", "red"}}), ValidationError);
  EXPECT_THROW(config_from_json({{"N", "two"}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ValidationError);
}

TEST(Config, NearLevelsWithDefaultFactor) {
  ExperimentConfig cfg;
  EXPECT_TRUE(cfg.near_levels(1).empty());
  EXPECT_EQ(cfg.near_levels(2), std::vector<int>({1}));
  EXPECT_EQ(cfg.near_levels(3), std::vector<int>({1, 2}));
  EXPECT_EQ(cfg.near_levels(4), std::vector<int>({2}));
  EXPECT_EQ(cfg.near_levels(5), std::vector<int>({2}));
  EXPECT_EQ(cfg.near_levels(9), std::vector<int>({2, 3, 4}));
  EXPECT_EQ(levels_for(cfg, 5), std::vector<int>({1, 2}));
  cfg.c = 2.0;
  EXPECT_EQ(cfg.near_levels(2), std::vector<int>({2}));
}

TEST(Generator, LazyTreesMatchEncodedSets) {
  auto lazy = generator_tree("cantor:L=5", 3, 1);
  auto encoded = MadicTree::encode_set(generate(GeneratorSpec::parse("cantor:L=5")), 3, 5);
  EXPECT_EQ(lazy.vertex_count(), encoded.vertex_count());
  EXPECT_EQ(splitting_number(lazy).value, 5);
  EXPECT_EQ(generator_tree("dyadic:m=25", 2, 1).height(), 25);
  EXPECT_EQ(generator_tree("dyadic:m=6", 4, 1).height(), 3);
  EXPECT_EQ(splitting_number(generator_tree("dyadic:m=6", 2, 1)).value, 6);
}

TEST(Kakeya, OneTubePerRootWithSlopesInOmega) {
  const auto& p = cantor(3);
  auto tubes = construct_kakeya(p, 5);
  ASSERT_EQ(tubes.size(), static_cast<size_t>(std::pow(3, p.J)));
  auto roots = root_cubes(p);
  for (size_t k = 0; k < tubes.size(); ++k) {
    EXPECT_EQ(tubes[k].root, roots[k]);
    ASSERT_LT(tubes[k].slope, p.slopes.size());
    EXPECT_EQ(tubes[k].direction, p.slopes[tubes[k].slope]);
  }
  auto again = construct_kakeya(p, 5);
  for (size_t k = 0; k < tubes.size(); ++k) EXPECT_EQ(again[k].slope, tubes[k].slope);
  auto other = sticky_slopes(p, 6);
  size_t differ = 0;
  for (size_t k = 0; k < tubes.size(); ++k) differ += other[k] != tubes[k].slope;
  EXPECT_GT(differ, 0u);
}

TEST(Metrics, FastPathMatchesExactRationals) {
  ExperimentConfig cfg;
  cfg.slices = 12;
  for (int N : {1, 2}) {
    const auto& p = cantor(N);
    std::vector<int> levels{1, 2, 3};
    for (uint64_t seed : {1u, 2u, 3u}) {
      auto sigma = sticky_slopes(p, seed);
      auto fast = family_metrics(p, sigma, cfg, levels);
      auto exact = family_metrics_exact(p, sigma, cfg, levels);
      EXPECT_LT(rel(fast.near_est, exact.near_est), 1e-12);
      EXPECT_LT(rel(fast.far, exact.far), 1e-12);
      EXPECT_LT(rel(fast.near_lb, exact.near_lb), 1e-12);
      for (int R : levels) EXPECT_LT(rel(fast.moment_at(R), exact.moment_at(R)), 1e-10) << N << " " << R;
    }
  }
}

TEST(Metrics, DyadicFastPathMatchesExact) {
  auto p = prune(full_tree(2, 1, 12), 2, 1);
  ExperimentConfig cfg;
  cfg.M = 2;
  cfg.slices = 10;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    auto sigma = sticky_slopes(p, seed);
    auto fast = family_metrics(p, sigma, cfg, {1, 2});
    auto exact = family_metrics_exact(p, sigma, cfg, {1, 2});
    EXPECT_LT(rel(fast.far, exact.far), 1e-12);
    for (int R : {1, 2}) EXPECT_LT(rel(fast.moment_at(R), exact.moment_at(R)), 1e-10);
  }
}

TEST(Metrics, ParallelFamilyHasNoOverlap) {
  const auto& p = cantor(3);
  ExperimentConfig cfg;
  std::vector<size_t> sigma(root_cubes(p).size(), 3);
  auto m = family_metrics(p, sigma, cfg, {1, 2});
  EXPECT_EQ(m.moment_at(1), 0.0);
  EXPECT_EQ(m.moment_at(2), 0.0);
  EXPECT_NEAR(m.near_est, 0.25, 1e-12);
  EXPECT_NEAR(m.far, 0.25, 1e-12);
  // With no overlap the Cauchy-Schwarz bound is the mass of the slabs R = 1, 2.
  EXPECT_NEAR(m.near_lb, 0.25 * (1 - 1.0 / 9), 1e-12);
  EXPECT_THROW(m.moment_at(3), std::out_of_range);
}

TEST(Metrics, RejectsWrongSlopeCount) {
  const auto& p = cantor(2);
  ExperimentConfig cfg;
  EXPECT_THROW(family_metrics(p, std::vector<size_t>(5, 0), cfg, {1}), ValidationError);
}

TEST(Metrics, SingleSplitFarVolumeEqualsWeightedEnumeration) {
  // N = 1: three roots, each carrying one of two slopes with probability 1/2.
  const auto& p = cantor(1);
  ASSERT_EQ(p.J, 1);
  ExperimentConfig cfg;
  cfg.slices = 16;
  double weighted = 0;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<size_t> sigma{size_t(mask & 1), size_t(mask >> 1 & 1), size_t(mask >> 2 & 1)};
    weighted += family_metrics_exact(p, sigma, cfg, {}).far / 8;
  }
  EXPECT_NEAR(enumerated_far_mean(p, cfg), weighted, 1e-12);
}

TEST(Metrics, MonteCarloMomentAgreesWithEnumeration) {
  auto p = prune(full_tree(2, 1, 12), 2, 1);
  ASSERT_EQ(static_cast<int>(warehouse_cubes(p).size()), 12);
  ExperimentConfig cfg;
  cfg.M = 2;
  for (int R : {1, 2}) {
    double exact = enumerated_moment_mean(p, R);
    double sum = 0, sq = 0;
    const int trials = 3000;
    for (int k = 0; k < trials; ++k) {
      double m = family_metrics(p, sticky_slopes(p, derive_seed(99, k)), cfg, {1, 2}).moment_at(R);
      sum += m;
      sq += m * m;
    }
    double mean = sum / trials, sd = std::sqrt((sq - trials * mean * mean) / (trials - 1));
    EXPECT_LT(std::abs(mean - exact), 4 * sd / std::sqrt(trials)) << R;
    EXPECT_GT(exact, 0);
  }
}

TEST(Stats, SpearmanAndQuantiles) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {5, 5, 5}), 0.0);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_THROW(spearman({1}, {1}), ValidationError);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.1), 1);
}

TEST(Tables, SyntheticRecords) {
  ExperimentConfig cfg;
  cfg.Rs = {1};
  std::vector<RunRecord> rs;
  auto add = [&](int N, double near, double far, double m1) {
    RunRecord r;
    r.N = N;
    r.metrics.near_est = near;
    r.metrics.near_lb = near / 2;
    r.metrics.far = far;
    r.metrics.moment = {{1, m1}};
    rs.push_back(r);
  };
  add(2, 0.2, 0.1, 1);
  add(2, 0.2, 0.1, 3);
  add(3, 0.3, 0.1, 2);
  add(4, 0.2, 0.1, 2);
  auto far = far_slab_table(cfg, rs);
  ASSERT_EQ(far.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(far.rows[0].scaled(), 0.2);
  EXPECT_DOUBLE_EQ(far.rows[0].stderr_, 0);
  EXPECT_DOUBLE_EQ(far.spearman, 1.0);
  auto mom = moment_table(cfg, rs);
  EXPECT_DOUBLE_EQ(mom.find(2, 1)->mean, 2);
  EXPECT_DOUBLE_EQ(mom.find(2, 1)->mean_square, 5);
  EXPECT_DOUBLE_EQ(mom.find(2, 1)->ratio1(), 2 / (2.0 / 9));
  EXPECT_EQ(mom.find(5, 1), nullptr);
  auto ratio = ratio_table(cfg, rs);
  EXPECT_DOUBLE_EQ(ratio.rows[1].median_ratio, 3);
  EXPECT_EQ(ratio.inversions, 1);
  EXPECT_EQ(ratio.lb_inversions, 1);
}

TEST(Runs, ReplayIsBitExactAndThreadIndependent) {
  ExperimentConfig cfg = small_config();
  auto records = collect(cfg);
  ASSERT_EQ(records.size(), 8u);
  cfg.threads = 3;
  auto threaded = collect(cfg);
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(threaded[i].seed, records[i].seed);
    EXPECT_EQ(threaded[i].metrics.far, records[i].metrics.far);
    EXPECT_EQ(threaded[i].metrics.moment, records[i].metrics.moment);
  }
  auto again = replay(cfg, records[5]);
  EXPECT_EQ(again.metrics.near_est, records[5].metrics.near_est);
  EXPECT_EQ(again.metrics.near_lb, records[5].metrics.near_lb);
  EXPECT_EQ(again.metrics.moment, records[5].metrics.moment);
  ExperimentConfig other = cfg;
  other.slices = 9;
  EXPECT_THROW(replay(other, records[0]), ValidationError);
}

TEST(Runs, ExperimentsShareTubeSets) {
  ExperimentConfig cfg = small_config();
  auto records = collect(cfg);
  auto far = experiment_far_slab(cfg);
  auto direct = far_slab_table(cfg, records);
  ASSERT_EQ(far.rows.size(), direct.rows.size());
  for (size_t i = 0; i < far.rows.size(); ++i) EXPECT_EQ(far.rows[i].mean, direct.rows[i].mean);
  auto mom = experiment_moments(cfg);
  EXPECT_EQ(mom.find(3, 2)->mean, moment_table(cfg, records).find(3, 2)->mean);
  auto ratio = experiment_ratio(cfg);
  EXPECT_EQ(ratio.rows[0].median_ratio, ratio_table(cfg, records).rows[0].median_ratio);
}

TEST(Runs, PersistAndReadBack) {
  ExperimentConfig cfg = small_config();
  cfg.Ns = {2};
  cfg.seeds = 2;
  auto dir = std::filesystem::temp_directory_path() / "tubelab_harness_test";
  std::filesystem::create_directories(dir);
  cfg.output = (dir / "run.csv").string();
  std::filesystem::remove(cfg.output + ".jsonl");
  auto records = collect(cfg);
  persist(cfg, records);
  persist(cfg, records);
  std::ifstream csv(cfg.output);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "N,R,seed,near_est,near_lb,far,moment1,moment2");
  auto log = read_run_log(cfg.output + ".jsonl");
  ASSERT_EQ(log.size(), 4u);  // appended twice
  for (const auto& entry : log) {
    EXPECT_EQ(entry.record.config_hash, cfg.hash());
    auto again = replay(entry.config, entry.record);
    EXPECT_EQ(again.metrics.far, entry.record.metrics.far);
    EXPECT_EQ(again.metrics.moment, entry.record.metrics.moment);
  }
  std::filesystem::remove_all(dir);
}

TEST(Runs, InfeasibleGeneratorIsRejectedAtPruning) {
  ExperimentConfig cfg = small_config();
  cfg.generator = "power:lambda=1/2,J=1";
  cfg.M = 2;
  EXPECT_THROW(collect(cfg), InfeasibleError);
  cfg.generator = "cantor:L=3";
  cfg.M = 3;
  EXPECT_THROW(collect(cfg), InfeasibleError);
}
