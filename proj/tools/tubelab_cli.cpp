#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tubelab/harness.hpp"
#include "tubelab/lacunarity.hpp"
#include "tubelab/madic_tree.hpp"
#include "tubelab/percolation.hpp"
#include "tubelab/pruning.hpp"
#include "tubelab/sticky.hpp"
#include "tubelab/tubes.hpp"

using namespace tubelab;
using nlohmann::json;

namespace {

constexpr int kUsage = 64;

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

ExperimentConfig load_config(const std::string& path, int seeds, int threads, const std::string& output) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = config_from_json(j);
  }
  if (seeds > 0) cfg.seeds = seeds;
  if (threads > 0) cfg.threads = threads;
  if (!output.empty()) cfg.output = output;
  cfg.validate();
  return cfg;
}

json tree_summary(const MadicTree& t, size_t list_limit) {
  json levels = json::array();
  for (int h = 0; h <= t.height(); ++h) levels.push_back(t.level(h).size());
  json j{{"M", t.base()}, {"d", t.dim()}, {"J", t.height()}, {"vertices_per_level", levels}};
  if (list_limit > 0) {
    json leaves = json::array();
    for (const auto& a : t.level(t.height())) {
      if (leaves.size() >= list_limit) break;
      leaves.push_back(a.str());
    }
    j["leaves"] = leaves;
  }
  return j;
}

json witness_json(const LacunaryWitness& w) {
  json seq = json::array(), kids = json::array();
  for (const auto& x : w.sequence) seq.push_back(to_string(x));
  for (const auto& [key, child] : w.children) kids.push_back({{"gap", to_string(key)}, {"witness", witness_json(child)}});
  return {{"order", w.order}, {"lambda", to_string(w.lambda)}, {"limit", to_string(w.limit)}, {"sequence", seq}, {"children", kids}};
}

// Ordered tuples of distinct roots agree on prob_exact, the closed form and the frequency
// over every assignment of the bits the tuple can read.
struct ProbSummary {
  long tuples = 0, admissible = 0, agree = 0, mismatched = 0, realizable_only = 0;
};

void check_tuple(const PrunedSlopeTree& p, const std::vector<Address>& roots, ProbSummary& out) {
  std::set<int> heights;
  for (const auto& sv : p.splitting) heights.insert(sv.lambda);
  std::vector<Address> cubes;
  for (const auto& t : roots)
    for (int h : heights) cubes.push_back(t.ancestor(h));
  std::sort(cubes.begin(), cubes.end());
  cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());
  if (cubes.size() > 24) throw ValidationError("tuple reads more than 24 bits");
  size_t k = roots.size();
  std::vector<uint64_t> hist(size_t(1) << (p.N * k), 0);
  uint64_t total = uint64_t(1) << cubes.size();
  for (uint64_t mask = 0; mask < total; ++mask) {
    BernoulliWarehouse x(0);
    for (size_t i = 0; i < cubes.size(); ++i) x.set(cubes[i], static_cast<int>(mask >> i & 1));
    StickyMap sigma(p, x);
    size_t code = 0;
    for (const auto& t : roots) code = (code << p.N) | sigma.sigma(t);
    ++hist[code];
  }
  ++out.tuples;
  for (size_t code = 0; code < hist.size(); ++code) {
    std::vector<size_t> slopes(k);
    size_t rest = code;
    for (size_t i = k; i-- > 0;) {
      slopes[i] = rest & ((size_t(1) << p.N) - 1);
      rest >>= p.N;
    }
    auto a = check_admissible(p, roots, slopes);
    if (a.realizable != (hist[code] > 0)) {
      ++out.mismatched;
      continue;
    }
    if (!a.realizable) continue;
    Rational freq(static_cast<unsigned long>(hist[code]), static_cast<unsigned long>(total));
    if (prob_exact(p, roots, slopes) != freq) {
      ++out.mismatched;
      continue;
    }
    if (!a.heights_ok) {
      ++out.realizable_only;
      continue;
    }
    ++out.admissible;
    if (k == 1 || prob_closed_form(p, roots, slopes) == freq)
      ++out.agree;
    else
      ++out.mismatched;
  }
}

// 2^N slopes k M^{-J}, k < 2^N, in base 2: every splitting vertex has its basic cubes one level below.
PrunedSlopeTree corner_instance(int N, int J) {
  if (N < 1 || J < N || J > 30) throw ValidationError("need 1 <= N <= J <= 30");
  std::vector<RationalPoint> omega;
  for (long k = 0; k < (1L << N); ++k) omega.push_back({Rational(k, 1L << J)});
  return build_slope_tree(omega, 2, J, 1);
}

int run(int argc, char** argv) {
  CLI::App app{"Random sticky Kakeya-type constructions over sublacunary direction sets"};
  app.require_subcommand(1);

  std::string set_spec = "cantor:L=6";
  int base = 0, dim = 1, N = 2, c0 = 2, list = 0;

  auto* encode = app.add_subcommand("encode", "Encode a generated point set as an M-adic tree");
  encode->add_option("--set", set_spec, "Generator spec kind:key=value,...")->required();
  encode->add_option("--base", base, "M (default 2 for dyadic sets, else 3)");
  encode->add_option("--dim", dim, "d");
  encode->add_option("--list", list, "List up to this many leaves");

  auto* split = app.add_subcommand("split-number", "Splitting number of the encoded tree");
  split->add_option("--set", set_spec)->required();
  split->add_option("--base", base);
  split->add_option("--dim", dim);

  auto* lac = app.add_subcommand("lacunarity", "Lacunary decomposition with verified witnesses (d = 1)");
  lac->add_option("--set", set_spec)->required();
  lac->add_option("--base", base);

  auto* prune_cmd = app.add_subcommand("prune", "Prune the slope tree to 2^N slopes");
  prune_cmd->add_option("--set", set_spec)->required();
  prune_cmd->add_option("--base", base);
  prune_cmd->add_option("--dim", dim);
  prune_cmd->add_option("--N", N)->required();
  prune_cmd->add_option("--C0", c0);

  std::string config_path, output;
  int seeds = 0, threads = 0;
  uint64_t seed = 1;
  auto* construct = app.add_subcommand("construct", "Tube family K_N(X) for one seed");
  construct->add_option("--config", config_path, "Experiment config JSON");
  construct->add_option("--N", N)->required();
  construct->add_option("--seed", seed);
  bool count_only = false;
  construct->add_flag("--count-only", count_only);

  std::vector<CLI::App*> experiments;
  for (auto [name, help] : {std::pair{"volume", "Far-slab volume experiment"}, std::pair{"moments", "Moment experiment"},
                            std::pair{"ratio", "Near/far ratio experiment"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Experiment config JSON");
    sub->add_option("--seeds", seeds, "Override the seed count");
    sub->add_option("--threads", threads);
    sub->add_option("--output", output, "CSV path; the run log is appended to <output>.jsonl");
    experiments.push_back(sub);
  }

  std::string tree_kind = "complete", p_text = "1/2";
  int height = 2, branching = 2;
  long trials = 10000;
  auto* perc = app.add_subcommand("percolate", "Survival probability, resistance bound and Monte Carlo");
  perc->add_option("--tree", tree_kind)->check(CLI::IsMember({"complete", "path", "star", "random"}));
  perc->add_option("--height", height);
  perc->add_option("--branching", branching);
  perc->add_option("--p", p_text);
  perc->add_option("--trials", trials);
  perc->add_option("--seed", seed);

  int J = 3, max_tuple = 3;
  long samples = 2000;
  bool exhaustive = false;
  auto* vp = app.add_subcommand("verify-prob", "Compare closed-form, exact and enumerated tuple probabilities");
  vp->add_option("--N", N);
  vp->add_option("--J", J);
  vp->add_option("--max-tuple", max_tuple)->check(CLI::Range(1, 4));
  vp->add_flag("--exhaustive", exhaustive, "Every ordered tuple instead of a sample");
  vp->add_option("--samples", samples);
  vp->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  // dyadic sets default to base 2, everything else to base 3
  if (base == 0) base = GeneratorSpec::parse(set_spec).kind == "dyadic" ? 2 : 3;

  if (*encode) {
    emit(tree_summary(generator_tree(set_spec, base, dim), static_cast<size_t>(std::max(0, list))));
  } else if (*split) {
    std::cout << splitting_number(generator_tree(set_spec, base, dim)).value << '\n';
  } else if (*lac) {
    auto set = first_coordinates(generate(GeneratorSpec::parse(set_spec)));
    auto dec = decompose_lacunary_order(set, base);
    json pieces = json::array();
    for (const auto& piece : dec.pieces)
      pieces.push_back({{"size", piece.points.size()},
                        {"verified", verify_witness(piece.points, piece.witness)},
                        {"witness", witness_json(piece.witness)}});
    json out{{"split", dec.split}, {"points", set.size()}, {"pieces", pieces}};
    if (dec.split <= 1) {
      auto seqs = decompose_split_one(set, base);
      bool ok = true;
      for (const auto& s : seqs) ok = ok && verify_sequence(s, Rational(1, base));
      out["split_one_sequences"] = seqs.size();
      out["split_one_verified"] = ok;
    }
    emit(out);
  } else if (*prune_cmd) {
    emit(to_json(prune(generator_tree(set_spec, base, dim), N, c0)));
  } else if (*construct) {
    auto cfg = load_config(config_path, 0, 0, "");
    auto p = prune(generator_tree(cfg.generator, cfg.M, cfg.d), N, cfg.c0);
    auto tubes = construct_kakeya(p, seed, cfg.a0);
    json out{{"N", p.N}, {"J", p.J}, {"seed", seed}, {"count", tubes.size()}};
    if (!count_only) {
      json arr = json::array();
      for (const auto& t : tubes) arr.push_back(to_json(t));
      out["tubes"] = arr;
    }
    emit(out);
  } else if (*perc) {
    Rational p = parse_rational(p_text);
    if (p < 0 || p > 1) throw ValidationError("p must lie in [0, 1]");
    if (height < 0 || branching < 1) throw ValidationError("need height >= 0 and branching >= 1");
    std::mt19937_64 rng(seed);
    RootedTree tree = tree_kind == "complete" ? complete_tree(branching, height)
                      : tree_kind == "path"   ? path_tree(height)
                      : tree_kind == "star"   ? star_tree(branching)
                                              : random_tree(rng, height, branching);
    ResistorNetwork net(tree, p);
    auto b = survival_upper_bound(net);
    Rational q = survival_exact(net);
    emit({{"vertices", tree.size()},
          {"survival_exact", to_string(q)},
          {"resistance", to_string(b.resistance)},
          {"bound", to_string(b.bound)},
          {"merged_bound", to_string(b.merged_bound)},
          {"monte_carlo", survival_monte_carlo(tree, to_double(p), trials, seed)},
          {"trials", trials}});
  } else if (*vp) {
    auto p = corner_instance(N, J);
    auto roots = root_cubes(p);
    ProbSummary s;
    std::vector<Address> cur;
    std::vector<size_t> used;
    std::function<void(size_t)> rec = [&](size_t k) {
      if (cur.size() == k) {
        check_tuple(p, cur, s);
        return;
      }
      for (size_t r = 0; r < roots.size(); ++r) {
        if (std::find(used.begin(), used.end(), r) != used.end()) continue;
        used.push_back(r);
        cur.push_back(roots[r]);
        rec(k);
        cur.pop_back();
        used.pop_back();
      }
    };
    std::mt19937_64 rng(seed);
    for (int k = 1; k <= max_tuple; ++k) {
      if (exhaustive) {
        rec(static_cast<size_t>(k));
        continue;
      }
      if (static_cast<size_t>(k) > roots.size()) break;
      for (long i = 0; i < samples; ++i) {
        std::vector<size_t> ids(roots.size());
        for (size_t r = 0; r < ids.size(); ++r) ids[r] = r;
        std::shuffle(ids.begin(), ids.end(), rng);
        std::vector<Address> tuple;
        for (int j = 0; j < k; ++j) tuple.push_back(roots[ids[j]]);
        check_tuple(p, tuple, s);
      }
    }
    emit({{"N", p.N},
          {"J", p.J},
          {"roots", roots.size()},
          {"tuples", s.tuples},
          {"admissible", s.admissible},
          {"agree", s.agree},
          {"realizable_only", s.realizable_only},
          {"mismatched", s.mismatched}});
    if (s.mismatched == 0)
      std::cout << fmt::format("all tuples agree ({} admissible prescriptions over {} tuples)\n", s.agree, s.tuples);
    else
      std::cout << fmt::format("{} mismatches\n", s.mismatched);
    return s.mismatched == 0 ? 0 : 1;
  } else {
    int which = 0;
    for (size_t i = 0; i < experiments.size(); ++i)
      if (*experiments[i]) which = static_cast<int>(i);
    auto cfg = load_config(config_path, seeds, threads, output);
    auto records = collect(cfg);
    if (!cfg.output.empty()) persist(cfg, records);
    json table = which == 0 ? to_json(far_slab_table(cfg, records))
                 : which == 1 ? to_json(moment_table(cfg, records))
                              : to_json(ratio_table(cfg, records));
    table["config"] = to_json(cfg);
    table["config_hash"] = fmt::format("{:016x}", cfg.hash());
    emit(table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
