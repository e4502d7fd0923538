#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tubelab/core.hpp"
#include "tubelab/madic_tree.hpp"
#include "tubelab/pruning.hpp"
#include "tubelab/tubes.hpp"

namespace tubelab {

struct ExperimentConfig {
  std::string generator = "cantor:L=19";
  int M = 3, d = 1;
  std::vector<int> Ns{2, 3, 4, 5};
  int c0 = 1;
  Rational a0 = 10;
  Rational c1 = 3;
  // Slabs [M^{-R}, M^{-R+1}] of the moment experiment.
  std::vector<int> Rs{1, 2};
  int seeds = 200;
  uint64_t master_seed = 1;
  int slices = 64;
  // R range [c ln N, 2c ln N] of the near-slab lower bound; 1/ln M when unset.
  std::optional<double> c;
  int threads = 1;
  std::string output;  // CSV path; the run log goes to output + ".jsonl"

  void validate() const;
  double log_factor() const;
  // Integers R >= 1 in [c ln N, 2c ln N].
  std::vector<int> near_levels(int N) const;
  // Stable hash of the canonical JSON form.
  uint64_t hash() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Tree of the generator: "cantor:L=.." and "full:L=.." are built lazily, every other kind
// is generated and encoded at height L (default: the separating height for d = 1, else 24).
MadicTree generator_tree(const std::string& spec, int M, int d);

// K_N(X): one tube per root cube with slope sigma_X(t), roots in lexicographic order.
std::vector<Tube> construct_kakeya(const PrunedSlopeTree& p, uint64_t seed, const Rational& a0 = 10);
// sigma_X on every root cube, roots in lexicographic order.
std::vector<size_t> sticky_slopes(const PrunedSlopeTree& p, uint64_t seed);

// Volumes of one tube family.  sigma[k] is the slope of the k-th root cube.
struct FamilyMetrics {
  double near_est = 0;  // |K cap [0,1] x R^d|, midpoint rule over slices
  double near_lb = 0;   // sum over the near levels of the Cauchy-Schwarz bound
  double far = 0;       // |K cap [A0, A0+1] x R^d|, midpoint rule over slices
  // Per R: sum over t1 != t2 of |P*_{t1} cap P*_{t2}| (exact pair volumes).
  std::vector<std::pair<int, double>> moment;
  double moment_at(int R) const;
};

// Fast evaluation for d = 1.  Pair volumes use the closed-form integral of the overlap
// length, slices use sorted interval unions.
FamilyMetrics family_metrics(const PrunedSlopeTree& p, const std::vector<size_t>& sigma, const ExperimentConfig& cfg,
                             const std::vector<int>& levels);
// Any d, from the exact rational routines of the tubes module; quadratic in the tube count.
FamilyMetrics family_metrics_exact(const PrunedSlopeTree& p, const std::vector<size_t>& sigma,
                                   const ExperimentConfig& cfg, const std::vector<int>& levels);

struct RunRecord {
  uint64_t config_hash = 0;
  int N = 0;
  int trial = 0;
  uint64_t seed = 0;
  FamilyMetrics metrics;
  std::string timestamp;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

// seed of trial k at N: derive_seed(master, N, k), shared by every experiment.
uint64_t trial_seed(const ExperimentConfig& cfg, int N, int trial);
// Every R used by the moment or ratio experiments at N.
std::vector<int> levels_for(const ExperimentConfig& cfg, int N);

// One record per (N, trial); trials run on cfg.threads threads and land in trial order.
std::vector<RunRecord> collect(const ExperimentConfig& cfg);
// Recomputes a record; equal metrics mean a faithful replay.
RunRecord replay(const ExperimentConfig& cfg, const RunRecord& r);

struct FarSlabRow {
  int N = 0;
  double mean = 0, stderr_ = 0;
  double scaled() const { return N * mean; }
};
struct FarSlabTable {
  std::vector<FarSlabRow> rows;
  double spearman = 0;  // rank correlation of N * mean against N
};

struct MomentRow {
  int N = 0, R = 0;
  double mean = 0, mean_square = 0;
  double scale = 0;  // N M^{-2R}
  double ratio1() const { return scale > 0 ? mean / scale : 0; }
  double ratio2() const { return scale > 0 ? mean_square / (scale * scale) : 0; }
};
struct MomentTable {
  std::vector<MomentRow> rows;
  const MomentRow* find(int N, int R) const;
};

struct RatioRow {
  int N = 0;
  std::vector<int> levels;
  double median_ratio = 0;     // near_est / far
  double median_lb_ratio = 0;  // near_lb / far
  // Quantiles 0.1, 0.25, 0.5 of near_est.
  double near_q10 = 0, near_q25 = 0, near_q50 = 0;
};
struct RatioTable {
  std::vector<RatioRow> rows;
  int inversions = 0;     // consecutive N where median_ratio decreases
  int lb_inversions = 0;  // same for median_lb_ratio
};

FarSlabTable far_slab_table(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);
MomentTable moment_table(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);
RatioTable ratio_table(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);

FarSlabTable experiment_far_slab(const ExperimentConfig& cfg);
MomentTable experiment_moments(const ExperimentConfig& cfg);
RatioTable experiment_ratio(const ExperimentConfig& cfg);

nlohmann::json to_json(const FarSlabTable& t);
nlohmann::json to_json(const MomentTable& t);
nlohmann::json to_json(const RatioTable& t);

// Columns N, R, seed, near_est, near_lb, far, moment1, moment2; one row per (record, R).
std::string records_csv(const std::vector<RunRecord>& records);
// Writes the CSV to cfg.output and appends one JSON line per record to cfg.output + ".jsonl".
void persist(const ExperimentConfig& cfg, const std::vector<RunRecord>& records);
struct LoggedRun {
  ExperimentConfig config;
  RunRecord record;
};
std::vector<LoggedRun> read_run_log(const std::string& path);

double spearman(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

// Exact mean of the moment sum at level R over every realization of the warehouse bits
// (at most max_bits of them), from the fast pair volumes.
double enumerated_moment_mean(const PrunedSlopeTree& p, int R, int max_bits = 16);
// Same for the far-slab volume.
double enumerated_far_mean(const PrunedSlopeTree& p, const ExperimentConfig& cfg, int max_bits = 16);

}  // namespace tubelab
