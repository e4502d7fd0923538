#include "tubelab/percolation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace tubelab {

RootedTree::RootedTree(std::vector<int> parents) : parent(std::move(parents)) {
  if (parent.empty() || parent[0] != -1) throw ValidationError("tree needs a root with parent -1");
  for (size_t v = 1; v < parent.size(); ++v)
    if (parent[v] < 0 || parent[v] >= static_cast<int>(v)) throw ValidationError("parents must precede children");
}

int RootedTree::add_child(int v) {
  if (v < 0 || v >= static_cast<int>(parent.size())) throw ValidationError("no such vertex");
  parent.push_back(v);
  return static_cast<int>(parent.size()) - 1;
}

std::vector<std::vector<int>> RootedTree::children() const {
  std::vector<std::vector<int>> out(parent.size());
  for (size_t v = 1; v < parent.size(); ++v) out[parent[v]].push_back(static_cast<int>(v));
  return out;
}

std::vector<int> RootedTree::depth() const {
  std::vector<int> out(parent.size(), 0);
  for (size_t v = 1; v < parent.size(); ++v) out[v] = out[parent[v]] + 1;
  return out;
}

int RootedTree::height() const {
  auto dep = depth();
  return *std::max_element(dep.begin(), dep.end());
}

std::vector<size_t> RootedTree::level_counts() const {
  auto dep = depth();
  std::vector<size_t> out(height() + 1, 0);
  for (int h : dep) ++out[h];
  return out;
}

RootedTree complete_tree(int branching, int height) {
  if (branching < 1 || height < 0) throw ValidationError("bad complete tree shape");
  RootedTree t;
  std::vector<int> frontier{0};
  for (int h = 0; h < height; ++h) {
    std::vector<int> next;
    for (int v : frontier)
      for (int b = 0; b < branching; ++b) next.push_back(t.add_child(v));
    frontier = std::move(next);
  }
  return t;
}

RootedTree path_tree(int length) { return complete_tree(1, length); }

RootedTree star_tree(int leaves) { return complete_tree(leaves, 1); }

RootedTree random_tree(std::mt19937_64& rng, int height, int max_branching) {
  if (height < 1 || max_branching < 1) throw ValidationError("bad random tree shape");
  RootedTree t;
  std::vector<int> frontier{0};
  for (int h = 0; h < height; ++h) {
    std::vector<int> next;
    for (int v : frontier) {
      int k = 1 + static_cast<int>(rng() % static_cast<uint64_t>(max_branching));
      for (int b = 0; b < k; ++b) next.push_back(t.add_child(v));
    }
    frontier = std::move(next);
  }
  return t;
}

ResistorNetwork::ResistorNetwork(RootedTree t, const Rational& uniform)
    : ResistorNetwork(t, std::vector<Rational>(t.size(), uniform)) {}

ResistorNetwork::ResistorNetwork(RootedTree t, std::vector<Rational> probabilities)
    : tree(std::move(t)), p(std::move(probabilities)) {
  if (tree.size() < 2) throw ValidationError("network needs at least one edge");
  if (p.size() != tree.size()) throw ValidationError("one probability per vertex expected");
  for (size_t v = 1; v < p.size(); ++v)
    if (p[v] <= 0 || p[v] >= 1) throw ValidationError("retention probabilities must lie in (0, 1)");
}

Rational ResistorNetwork::resistance(int v) const {
  if (v <= 0 || v >= static_cast<int>(tree.size())) throw ValidationError("no edge ends at this vertex");
  Rational reach = 1;
  for (int u = v; u > 0; u = tree.parent[u]) reach *= p[u];
  return (1 - p[v]) / reach;
}

Rational total_resistance(const ResistorNetwork& net) {
  auto kids = net.tree.children();
  std::vector<Rational> below(net.tree.size(), Rational(0));
  for (size_t v = net.tree.size(); v-- > 0;) {
    if (kids[v].empty()) continue;
    Rational conductance = 0;
    for (int c : kids[v]) conductance += 1 / Rational(net.resistance(c) + below[c]);
    below[v] = 1 / conductance;
  }
  return below[0];
}

Rational level_resistance(const ResistorNetwork& net) {
  auto dep = net.tree.depth();
  std::vector<Rational> conductance(net.tree.height() + 1, Rational(0));
  for (size_t v = 1; v < net.tree.size(); ++v) conductance[dep[v]] += 1 / net.resistance(static_cast<int>(v));
  Rational total = 0;
  for (size_t k = 1; k < conductance.size(); ++k) total += 1 / conductance[k];
  return total;
}

SurvivalBound survival_upper_bound(const ResistorNetwork& net) {
  SurvivalBound b;
  b.resistance = total_resistance(net);
  b.merged_resistance = level_resistance(net);
  b.bound = 2 / (1 + b.resistance);
  b.merged_bound = 2 / (1 + b.merged_resistance);
  return b;
}

Rational survival_exact(const ResistorNetwork& net) {
  auto kids = net.tree.children();
  std::vector<Rational> q(net.tree.size(), Rational(1));
  for (size_t v = net.tree.size(); v-- > 0;) {
    if (kids[v].empty()) continue;
    Rational fail = 1;
    for (int c : kids[v]) fail *= 1 - net.p[c] * q[c];
    q[v] = 1 - fail;
  }
  return q[0];
}

Rational survival_exact(const RootedTree& tree, const Rational& p) { return survival_exact(ResistorNetwork(tree, p)); }

double survival_monte_carlo(const RootedTree& tree, double p, long trials, uint64_t seed) {
  if (trials < 1) throw ValidationError("at least one trial required");
  if (!(p > 0 && p < 1)) throw ValidationError("retention probability must lie in (0, 1)");
  auto kids = tree.children();
  std::vector<char> alive(tree.size());
  long survived = 0;
  std::bernoulli_distribution keep(p);
  for (long k = 0; k < trials; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<uint64_t>(k)));
    std::vector<char> edge(tree.size(), 0);
    for (size_t v = 1; v < tree.size(); ++v) edge[v] = keep(rng);
    for (size_t v = tree.size(); v-- > 0;) {
      if (kids[v].empty()) {
        alive[v] = 1;
        continue;
      }
      alive[v] = 0;
      for (int c : kids[v])
        if (edge[c] && alive[c]) {
          alive[v] = 1;
          break;
        }
    }
    survived += alive[0];
  }
  return static_cast<double>(survived) / static_cast<double>(trials);
}

RootedTree as_rooted_tree(const ReferenceTree& ref) {
  RootedTree t;
  std::vector<int> previous;
  for (size_t j = 0; j < ref.levels.size(); ++j) {
    std::vector<int> ids;
    for (const auto& v : ref.levels[j]) ids.push_back(t.add_child(j == 0 ? 0 : previous.at(v.parent)));
    previous = std::move(ids);
  }
  return t;
}

PercolationOutcome percolate_reference(const ReferenceTree& ref, const BernoulliWarehouse& x) {
  PercolationOutcome out;
  std::set<Address> ends;
  for (const auto& level : ref.levels) {
    std::vector<bool> kept;
    for (const auto& v : level) {
      if (!ends.insert(v.cube).second) throw std::logic_error("two edges of N_x end at " + v.cube.str());
      kept.push_back(x.bit(v.cube) == v.label);
    }
    out.retained.push_back(std::move(kept));
  }
  for (const auto& ray : ref.rays) {
    bool ok = true;
    for (size_t j = 0; j < ray.size() && ok; ++j) {
      // A ray survives when every edge on it is kept.
      ok = out.retained[j][ray[j]];
    }
    if (ok) {
      out.survives = true;
      break;
    }
  }
  return out;
}

}  // namespace tubelab
