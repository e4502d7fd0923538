#include "tubelab/harness.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "tubelab/lacunarity.hpp"
#include "tubelab/sticky.hpp"

namespace tubelab {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (M < 2) throw ValidationError("M must be at least 2");
  if (d < 1) throw ValidationError("d must be at least 1");
  if (Ns.empty()) throw ValidationError("empty N range");
  for (int N : Ns)
    if (N < 1) throw ValidationError("N must be positive");
  if (c0 < 1) throw ValidationError("C0 must be a positive integer");
  if (a0 * 9 < 1) throw ValidationError("A0 must be at least 1/9 so that the far slab lies on the tubes");
  if (c1 <= 1) throw ValidationError("C1 must exceed 1");
  for (int R : Rs)
    if (R < 1) throw ValidationError("R must be at least 1");
  if (seeds < 1) throw ValidationError("at least one seed required");
  if (slices < 1) throw ValidationError("slice count must be positive");
  if (threads < 1) throw ValidationError("thread count must be positive");
  if (c && *c <= 0) throw ValidationError("c must be positive");
}

double ExperimentConfig::log_factor() const { return c ? *c : 1.0 / std::log(static_cast<double>(M)); }

std::vector<int> ExperimentConfig::near_levels(int N) const {
  double lo = log_factor() * std::log(static_cast<double>(N));
  double hi = 2 * lo;
  std::vector<int> out;
  for (int R = std::max(1, static_cast<int>(std::ceil(lo - 1e-12))); R <= hi + 1e-12; ++R) out.push_back(R);
  return out;
}

uint64_t ExperimentConfig::hash() const {
  json j = to_json(*this);
  j.erase("output");
  j.erase("threads");
  uint64_t h = 0;
  for (unsigned char ch : j.dump()) h = mix64(h ^ ch);
  return h;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["generator"] = cfg.generator;
  j["M"] = cfg.M;
  j["d"] = cfg.d;
  j["N"] = cfg.Ns;
  j["C0"] = cfg.c0;
  j["A0"] = to_string(cfg.a0);
  j["C1"] = to_string(cfg.c1);
  j["R"] = cfg.Rs;
  j["seeds"] = cfg.seeds;
  j["master_seed"] = cfg.master_seed;
  j["slices"] = cfg.slices;
  j["c"] = cfg.c ? json(*cfg.c) : json(nullptr);
  j["c_used"] = cfg.log_factor();
  j["threads"] = cfg.threads;
  j["output"] = cfg.output;
  return j;
}

namespace {

Rational rational_field(const json& j, const char* key, const Rational& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long>());
  throw ValidationError(fmt::format("{} must be an integer or a rational string", key));
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  static const std::vector<std::string> known{"generator", "M", "d", "N", "C0", "A0", "C1", "R", "seeds",
                                              "master_seed", "slices", "c", "c_used", "threads", "output"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ValidationError("unknown config key " + k);
  ExperimentConfig cfg;
  try {
    cfg.generator = j.value("generator", cfg.generator);
    cfg.M = j.value("M", cfg.M);
    cfg.d = j.value("d", cfg.d);
    if (j.contains("N")) cfg.Ns = j.at("N").get<std::vector<int>>();
    cfg.c0 = j.value("C0", cfg.c0);
    cfg.a0 = rational_field(j, "A0", cfg.a0);
    cfg.c1 = rational_field(j, "C1", cfg.c1);
    if (j.contains("R")) cfg.Rs = j.at("R").get<std::vector<int>>();
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.slices = j.value("slices", cfg.slices);
    if (j.contains("c") && !j.at("c").is_null()) cfg.c = j.at("c").get<double>();
    cfg.threads = j.value("threads", cfg.threads);
    cfg.output = j.value("output", cfg.output);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

MadicTree generator_tree(const std::string& spec, int M, int d) {
  auto g = GeneratorSpec::parse(spec);
  auto level = [&](const char* key, int fallback) {
    int L = std::stoi(g.param(key, std::to_string(fallback)));
    if (L < 0 || L > 64) throw ValidationError("tree height out of range");
    return L;
  };
  if (g.kind == "cantor" && M == 3) return digit_tree(3, d, level("L", 19), {0, 2});
  if (g.kind == "full") return full_tree(M, d, level("L", 8));
  if (g.kind == "dyadic") {
    int m = level("m", 8);
    int r = 0;
    while ((1 << r) < M) ++r;
    if ((1 << r) == M && m % r == 0) return full_tree(M, d, m / r);
  }
  auto points = generate(g);
  if (points.empty()) throw ValidationError("generator produced no points");
  if (points.front().size() != static_cast<size_t>(d)) throw ValidationError("generator dimension differs from d");
  int fallback = 24;
  if (d == 1) fallback = std::min(64, separating_height(first_coordinates(points), M));
  return MadicTree::encode_set(points, M, level("L", fallback));
}

std::vector<size_t> sticky_slopes(const PrunedSlopeTree& p, uint64_t seed) {
  StickyMap sigma(p, BernoulliWarehouse(seed));
  std::vector<size_t> out;
  for (const auto& t : root_cubes(p)) out.push_back(sigma.sigma(t));
  return out;
}

std::vector<Tube> construct_kakeya(const PrunedSlopeTree& p, uint64_t seed, const Rational& a0) {
  auto roots = root_cubes(p);
  auto sigma = sticky_slopes(p, seed);
  std::vector<Tube> out;
  out.reserve(roots.size());
  for (size_t k = 0; k < roots.size(); ++k) out.push_back(make_tube(p, roots[k], sigma[k], a0));
  return out;
}

double FamilyMetrics::moment_at(int R) const {
  for (const auto& [r, v] : moment)
    if (r == R) return v;
  throw std::out_of_range(fmt::format("moment at R = {} was not computed", R));
}

namespace {

// Tube family in d = 1 with cross-sections [c_k + x v - w/2, c_k + x v + w/2].
struct LineFamily {
  double unit = 0;  // M^J
  double width = 0;
  std::vector<double> slope;
  const std::vector<size_t>* sigma = nullptr;

  LineFamily(const PrunedSlopeTree& p, const std::vector<size_t>& s) : sigma(&s) {
    unit = std::pow(static_cast<double>(p.M), p.J);
    width = to_double(dilation_constant(1)) / unit;
    for (const auto& v : p.slopes) slope.push_back(to_double(v[0]));
    if (s.size() != static_cast<size_t>(std::llround(unit))) throw ValidationError("one slope per root cube required");
  }

  double centre(size_t k) const { return (static_cast<double>(k) + 0.5) / unit; }

  double slice(double x, std::vector<double>& lo) const {
    size_t n = sigma->size();
    lo.resize(n);
    for (size_t k = 0; k < n; ++k) lo[k] = centre(k) + x * slope[(*sigma)[k]] - width / 2;
    std::sort(lo.begin(), lo.end());
    double total = 0, end = -1e300;
    for (double l : lo) {
      double h = l + width;
      if (l >= end) {
        total += width;
      } else if (h > end) {
        total += h - end;
      }
      end = std::max(end, h);
    }
    return total;
  }

  double union_volume(double a, double b, int slices) const {
    std::vector<double> buf;
    double h = (b - a) / slices, sum = 0;
    for (int i = 0; i < slices; ++i) sum += slice(a + (i + 0.5) * h, buf);
    return sum * h;
  }

  // Integral of max(0, w - |y|) over (-inf, y].
  double tent(double y) const {
    double w = width;
    if (y <= -w) return 0;
    if (y <= 0) return (y + w) * (y + w) / 2;
    if (y < w) return w * w - (w - y) * (w - y) / 2;
    return w * w;
  }

  // Integral over x in [a, b] of the overlap length of the cross-sections of roots k, k'.
  double pair_volume(long delta, double s, double a, double b) const {
    double d0 = delta / unit;
    if (s == 0) return (b - a) * std::max(0.0, width - std::abs(d0));
    double ya = d0 + std::min(a * s, b * s), yb = d0 + std::max(a * s, b * s);
    return (tent(yb) - tent(ya)) / std::abs(s);
  }

  double pair_sum(double a, double b) const {
    size_t n = slope.size();
    std::vector<std::vector<long>> pos(n);
    for (size_t k = 0; k < sigma->size(); ++k) pos[(*sigma)[k]].push_back(static_cast<long>(k));
    double total = 0;
    for (size_t s1 = 0; s1 < n; ++s1)
      for (size_t s2 = 0; s2 < n; ++s2) {
        const auto& P2 = pos[s2];
        if (pos[s1].empty() || P2.empty()) continue;
        double s = slope[s2] - slope[s1];
        long lo = static_cast<long>(std::floor((-width - std::max(a * s, b * s)) * unit)) - 1;
        long hi = static_cast<long>(std::ceil((width - std::min(a * s, b * s)) * unit)) + 1;
        auto first = P2.begin();
        for (long k : pos[s1]) {
          while (first != P2.end() && *first < k + lo) ++first;
          for (auto it = first; it != P2.end() && *it <= k + hi; ++it)
            if (*it != k) total += pair_volume(*it - k, s, a, b);
        }
      }
    return total;
  }
};

double level_lo(int M, int R) { return std::pow(static_cast<double>(M), -R); }

double near_bound(const ExperimentConfig& cfg, int N, const FamilyMetrics& m, double cross_mass) {
  double lb = 0;
  for (int R : cfg.near_levels(N)) {
    double a = level_lo(cfg.M, R), b = a * cfg.M;
    double mass = cross_mass * (b - a);
    lb += mass * mass / (mass + m.moment_at(R));
  }
  return lb;
}

}  // namespace

FamilyMetrics family_metrics(const PrunedSlopeTree& p, const std::vector<size_t>& sigma, const ExperimentConfig& cfg,
                             const std::vector<int>& levels) {
  if (p.d != 1) return family_metrics_exact(p, sigma, cfg, levels);
  LineFamily f(p, sigma);
  FamilyMetrics m;
  double a0 = to_double(cfg.a0);
  m.near_est = f.union_volume(0, 1, cfg.slices);
  m.far = f.union_volume(a0, a0 + 1, cfg.slices);
  for (int R : levels) {
    double a = level_lo(p.M, R);
    m.moment.emplace_back(R, f.pair_sum(a, a * p.M));
  }
  m.near_lb = near_bound(cfg, p.N, m, f.width * static_cast<double>(sigma.size()));
  return m;
}

FamilyMetrics family_metrics_exact(const PrunedSlopeTree& p, const std::vector<size_t>& sigma,
                                   const ExperimentConfig& cfg, const std::vector<int>& levels) {
  auto roots = root_cubes(p);
  if (sigma.size() != roots.size()) throw ValidationError("one slope per root cube required");
  std::vector<Tube> tubes;
  for (size_t k = 0; k < roots.size(); ++k) tubes.push_back(make_tube(p, roots[k], sigma[k], cfg.a0));
  auto quadrature = [&](const Rational& lo, const Rational& hi) {
    Rational h = (hi - lo) / cfg.slices, sum = 0;
    for (int i = 0; i < cfg.slices; ++i) sum += h * slice_union_measure(tubes, lo + (Rational(i) + Rational(1, 2)) * h);
    return to_double(sum);
  };
  FamilyMetrics m;
  m.near_est = quadrature(0, 1);
  m.far = quadrature(cfg.a0, cfg.a0 + 1);
  for (int R : levels) {
    SlabWindow w = SlabWindow::level(p.M, R);
    Rational sum = 0;
    for (size_t i = 0; i < tubes.size(); ++i)
      for (size_t j = i + 1; j < tubes.size(); ++j) sum += pair_intersection_volume(tubes[i], tubes[j], w);
    m.moment.emplace_back(R, to_double(Rational(2 * sum)));
  }
  Rational cross = 1;
  for (int i = 0; i < p.d; ++i) cross *= tubes.front().side;
  m.near_lb = near_bound(cfg, p.N, m, to_double(Rational(cross * static_cast<long>(tubes.size()))));
  return m;
}

json to_json(const RunRecord& r) {
  json moments = json::object();
  for (const auto& [R, v] : r.metrics.moment) moments[std::to_string(R)] = v;
  return {{"config_hash", fmt::format("{:016x}", r.config_hash)},
          {"N", r.N},
          {"trial", r.trial},
          {"seed", r.seed},
          {"near_est", r.metrics.near_est},
          {"near_lb", r.metrics.near_lb},
          {"far", r.metrics.far},
          {"moment", moments},
          {"timestamp", r.timestamp}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  try {
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.N = j.at("N").get<int>();
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<uint64_t>();
    r.metrics.near_est = j.at("near_est").get<double>();
    r.metrics.near_lb = j.at("near_lb").get<double>();
    r.metrics.far = j.at("far").get<double>();
    for (const auto& [k, v] : j.at("moment").items()) r.metrics.moment.emplace_back(std::stoi(k), v.get<double>());
    std::sort(r.metrics.moment.begin(), r.metrics.moment.end());
    r.timestamp = j.value("timestamp", "");
  } catch (const std::exception& e) {
    throw ValidationError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

uint64_t trial_seed(const ExperimentConfig& cfg, int N, int trial) {
  return derive_seed(cfg.master_seed, static_cast<uint64_t>(N), static_cast<uint64_t>(trial));
}

std::vector<int> levels_for(const ExperimentConfig& cfg, int N) {
  std::vector<int> out = cfg.Rs;
  for (int R : cfg.near_levels(N)) out.push_back(R);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

PrunedSlopeTree instance(const ExperimentConfig& cfg, const MadicTree& tree, int N) {
  PrunedSlopeTree p = prune(tree, N, cfg.c0);
  double roots = std::pow(static_cast<double>(p.M), p.d * p.J);
  double cap = p.d == 1 ? 4e6 : 4096;
  if (roots > cap) throw InfeasibleError(fmt::format("N = {} needs {} root cubes, above the limit {}", N, roots, cap));
  return p;
}

RunRecord run_trial(const ExperimentConfig& cfg, const PrunedSlopeTree& p, int trial) {
  RunRecord r;
  r.config_hash = cfg.hash();
  r.N = p.N;
  r.trial = trial;
  r.seed = trial_seed(cfg, p.N, trial);
  r.metrics = family_metrics(p, sticky_slopes(p, r.seed), cfg, levels_for(cfg, p.N));
  r.timestamp = now_utc();
  return r;
}

}  // namespace

std::vector<RunRecord> collect(const ExperimentConfig& cfg) {
  cfg.validate();
  MadicTree tree = generator_tree(cfg.generator, cfg.M, cfg.d);
  std::vector<RunRecord> out;
  for (int N : cfg.Ns) {
    PrunedSlopeTree p = instance(cfg, tree, N);
    std::vector<RunRecord> batch(cfg.seeds);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
      for (int k; (k = next++) < cfg.seeds;) {
        try {
          batch[k] = run_trial(cfg, p, k);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < std::min(cfg.threads, cfg.seeds); ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

RunRecord replay(const ExperimentConfig& cfg, const RunRecord& r) {
  if (r.config_hash != cfg.hash()) throw ValidationError("record was produced by a different config");
  MadicTree tree = generator_tree(cfg.generator, cfg.M, cfg.d);
  return run_trial(cfg, instance(cfg, tree, r.N), r.trial);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  size_t i = static_cast<size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) r[order[k]] = (i + j) / 2.0 + 1;
    i = j + 1;
  }
  return r;
}

std::map<int, std::vector<const RunRecord*>> by_n(const std::vector<RunRecord>& records) {
  std::map<int, std::vector<const RunRecord*>> out;
  for (const auto& r : records) out[r.N].push_back(&r);
  return out;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("rank correlation needs two equal-length samples");
  auto rx = ranks(x), ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx == 0 || syy == 0 ? 0 : sxy / std::sqrt(sxx * syy);
}

FarSlabTable far_slab_table(const ExperimentConfig&, const std::vector<RunRecord>& records) {
  FarSlabTable t;
  for (const auto& [N, rs] : by_n(records)) {
    FarSlabRow row;
    row.N = N;
    double sum = 0, sq = 0;
    for (const auto* r : rs) {
      sum += r->metrics.far;
      sq += r->metrics.far * r->metrics.far;
    }
    double n = static_cast<double>(rs.size());
    row.mean = sum / n;
    row.stderr_ = rs.size() > 1 ? std::sqrt(std::max(0.0, (sq - n * row.mean * row.mean) / (n - 1)) / n) : 0;
    t.rows.push_back(row);
  }
  if (t.rows.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& row : t.rows) {
      x.push_back(row.N);
      y.push_back(row.scaled());
    }
    t.spearman = spearman(x, y);
  }
  return t;
}

const MomentRow* MomentTable::find(int N, int R) const {
  for (const auto& r : rows)
    if (r.N == N && r.R == R) return &r;
  return nullptr;
}

MomentTable moment_table(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  MomentTable t;
  for (const auto& [N, rs] : by_n(records))
    for (int R : cfg.Rs) {
      MomentRow row;
      row.N = N;
      row.R = R;
      for (const auto* r : rs) {
        double m = r->metrics.moment_at(R);
        row.mean += m;
        row.mean_square += m * m;
      }
      row.mean /= rs.size();
      row.mean_square /= rs.size();
      row.scale = N * std::pow(static_cast<double>(cfg.M), -2 * R);
      t.rows.push_back(row);
    }
  return t;
}

RatioTable ratio_table(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  RatioTable t;
  for (const auto& [N, rs] : by_n(records)) {
    RatioRow row;
    row.N = N;
    row.levels = cfg.near_levels(N);
    std::vector<double> ratio, lb, near;
    for (const auto* r : rs) {
      if (r->metrics.far <= 0) throw InfeasibleError("far-slab volume vanished");
      ratio.push_back(r->metrics.near_est / r->metrics.far);
      lb.push_back(r->metrics.near_lb / r->metrics.far);
      near.push_back(r->metrics.near_est);
    }
    row.median_ratio = median(ratio);
    row.median_lb_ratio = median(lb);
    row.near_q10 = quantile(near, 0.1);
    row.near_q25 = quantile(near, 0.25);
    row.near_q50 = quantile(near, 0.5);
    t.rows.push_back(row);
  }
  for (size_t i = 1; i < t.rows.size(); ++i) {
    t.inversions += t.rows[i].median_ratio < t.rows[i - 1].median_ratio;
    t.lb_inversions += t.rows[i].median_lb_ratio < t.rows[i - 1].median_lb_ratio;
  }
  return t;
}

FarSlabTable experiment_far_slab(const ExperimentConfig& cfg) { return far_slab_table(cfg, collect(cfg)); }
MomentTable experiment_moments(const ExperimentConfig& cfg) { return moment_table(cfg, collect(cfg)); }
RatioTable experiment_ratio(const ExperimentConfig& cfg) { return ratio_table(cfg, collect(cfg)); }

json to_json(const FarSlabTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"N", r.N}, {"mean", r.mean}, {"stderr", r.stderr_}, {"N_times_mean", r.scaled()}});
  return {{"rows", rows}, {"spearman", t.spearman}};
}

json to_json(const MomentTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"N", r.N},
                    {"R", r.R},
                    {"mean", r.mean},
                    {"mean_square", r.mean_square},
                    {"scale", r.scale},
                    {"ratio1", r.ratio1()},
                    {"ratio2", r.ratio2()}});
  return {{"rows", rows}};
}

json to_json(const RatioTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"N", r.N},
                    {"levels", r.levels},
                    {"median_ratio", r.median_ratio},
                    {"median_lb_ratio", r.median_lb_ratio},
                    {"near_q10", r.near_q10},
                    {"near_q25", r.near_q25},
                    {"near_q50", r.near_q50}});
  return {{"rows", rows}, {"inversions", t.inversions}, {"lb_inversions", t.lb_inversions}};
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::string out = "N,R,seed,near_est,near_lb,far,moment1,moment2\n";
  for (const auto& r : records)
    for (const auto& [R, m] : r.metrics.moment)
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.N, R, r.seed, r.metrics.near_est, r.metrics.near_lb,
                         r.metrics.far, m, m * m);
  return out;
}

void persist(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  if (cfg.output.empty()) throw ValidationError("no output path configured");
  {
    std::ofstream csv(cfg.output, std::ios::trunc);
    if (!csv) throw ValidationError("cannot write " + cfg.output);
    csv << records_csv(records);
  }
  std::ofstream log(cfg.output + ".jsonl", std::ios::app);
  if (!log) throw ValidationError("cannot write " + cfg.output + ".jsonl");
  json c = to_json(cfg);
  for (const auto& r : records) log << json{{"config", c}, {"record", to_json(r)}}.dump() << '\n';
}

std::vector<LoggedRun> read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::vector<LoggedRun> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("malformed run log line: ") + e.what());
    }
    if (!j.contains("config") || !j.contains("record")) throw ValidationError("run log line lacks config or record");
    out.push_back({config_from_json(j.at("config")), record_from_json(j.at("record"))});
  }
  return out;
}

namespace {

template <class F>
double enumerate_mean(const PrunedSlopeTree& p, int max_bits, F&& value) {
  EnumerationOracle oracle(p, max_bits);
  auto roots = root_cubes(p);
  if (oracle.roots() != roots) throw std::logic_error("oracle roots out of order");
  std::vector<size_t> sigma(roots.size());
  double sum = 0;
  for (uint64_t r = 0; r < oracle.realizations(); ++r) {
    for (size_t k = 0; k < roots.size(); ++k) sigma[k] = oracle.sigma(r, k);
    sum += value(sigma);
  }
  return sum / static_cast<double>(oracle.realizations());
}

}  // namespace

double enumerated_moment_mean(const PrunedSlopeTree& p, int R, int max_bits) {
  if (p.d != 1) throw ValidationError("enumerated means are implemented for d = 1");
  double a = level_lo(p.M, R);
  return enumerate_mean(p, max_bits, [&](const std::vector<size_t>& s) { return LineFamily(p, s).pair_sum(a, a * p.M); });
}

double enumerated_far_mean(const PrunedSlopeTree& p, const ExperimentConfig& cfg, int max_bits) {
  if (p.d != 1) throw ValidationError("enumerated means are implemented for d = 1");
  double a0 = to_double(cfg.a0);
  return enumerate_mean(p, max_bits,
                        [&](const std::vector<size_t>& s) { return LineFamily(p, s).union_volume(a0, a0 + 1, cfg.slices); });
}

}  // namespace tubelab
