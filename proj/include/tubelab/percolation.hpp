#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tubelab/core.hpp"
#include "tubelab/sticky.hpp"
#include "tubelab/tubes.hpp"

namespace tubelab {

// Finite rooted tree on vertices 0..n-1 with root 0; parent[0] = -1 and parent[v] < v.
struct RootedTree {
  std::vector<int> parent;

  RootedTree() : parent{-1} {}
  explicit RootedTree(std::vector<int> parents);

  size_t size() const { return parent.size(); }
  int add_child(int v);
  std::vector<std::vector<int>> children() const;
  std::vector<int> depth() const;
  int height() const;
  // Number of vertices at depth k, k = 0..height.
  std::vector<size_t> level_counts() const;
};

RootedTree complete_tree(int branching, int height);
RootedTree path_tree(int length);
RootedTree star_tree(int leaves);
// Every vertex above depth `height` gets 1..max_branching children, uniformly; all leaves
// sit at depth `height`.
RootedTree random_tree(std::mt19937_64& rng, int height, int max_branching);

// Edge e is identified with the vertex v(e) where it terminates; p[v] is its retention
// probability (p[0] is unused).
struct ResistorNetwork {
  RootedTree tree;
  std::vector<Rational> p;

  ResistorNetwork(RootedTree t, const Rational& uniform);
  ResistorNetwork(RootedTree t, std::vector<Rational> probabilities);

  // 1/R_e = (1/(1 - p_e)) prod of p over the edges from the root down to and including e.
  Rational resistance(int v) const;
};

// Root-to-ground resistance with every leaf tied to the negative node.
Rational total_resistance(const ResistorNetwork& net);
// Resistance after shorting every level into one node: sum over levels of the parallel
// resistance of that level's edges.
Rational level_resistance(const ResistorNetwork& net);

struct SurvivalBound {
  Rational resistance;        // exact network resistance
  Rational merged_resistance; // level-merged network
  Rational bound;             // 2 / (1 + resistance)
  Rational merged_bound;      // 2 / (1 + merged_resistance) >= bound
};

SurvivalBound survival_upper_bound(const ResistorNetwork& net);

// Probability that some root-to-leaf path keeps all its edges: q(leaf) = 1,
// q(v) = 1 - prod_c (1 - p_c q(c)).
Rational survival_exact(const ResistorNetwork& net);
Rational survival_exact(const RootedTree& tree, const Rational& p);

// Fraction of surviving trials; trial k draws its edges from the stream derive_seed(seed, k).
double survival_monte_carlo(const RootedTree& tree, double p, long trials, uint64_t seed);

// N_x as a rooted tree: vertex 0 is x, then the vertices of levels 1..N in order.
RootedTree as_rooted_tree(const ReferenceTree& ref);

struct PercolationOutcome {
  // retained[j - 1][k]: edge ending at vertex k of level j is kept.
  std::vector<std::vector<bool>> retained;
  bool survives = false;
};

// Edge e ending at Q*_j(t) is retained iff X_{Q*_j(t)} = kappa(e).  Throws std::logic_error
// when two edges end at the same cube.
PercolationOutcome percolate_reference(const ReferenceTree& ref, const BernoulliWarehouse& x);

}  // namespace tubelab
