#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubelab/core.hpp"
#include "tubelab/pruning.hpp"

namespace tubelab {

// Independent Bernoulli(1/2) bits X_Q indexed by root-hyperplane cubes.  Each bit is a
// deterministic function of (seed, cube address), realized on first use and memoized, so
// the realization does not depend on query order.  Explicit assignments override it.
class BernoulliWarehouse {
 public:
  explicit BernoulliWarehouse(uint64_t seed = 0);
  BernoulliWarehouse(const BernoulliWarehouse& other);
  BernoulliWarehouse& operator=(const BernoulliWarehouse& other);

  uint64_t seed() const { return seed_; }
  int bit(const Address& q) const;
  void set(const Address& q, int value);
  size_t realized() const;

 private:
  uint64_t seed_;
  mutable std::unordered_map<Address, int, AddressHash> bits_;
  mutable std::unique_ptr<std::mutex> mutex_;
};

// Bit of the hash-based realization, without memoization.
int warehouse_bit(uint64_t seed, const Address& q);

// The random sticky slope assignment.  For a root t the j-th basic spatial cube Q_j(t) is
// the ancestor of t at the height of the basic slope cubes below the current splitting
// vertex; its bit chooses the child, and sigma(t) = Psi_N(X_{Q_1(t)}, ..., X_{Q_N(t)}).
class StickyMap {
 public:
  StickyMap(const PrunedSlopeTree& tree, BernoulliWarehouse x);

  const PrunedSlopeTree& slope_tree() const { return *p_; }
  const BernoulliWarehouse& warehouse() const { return x_; }

  std::vector<Address> chain(const Address& root) const;
  std::vector<int> bits(const Address& root) const;
  size_t sigma(const Address& root) const;
  // Slope vertex of height J assigned to the root.
  Address sigma_address(const Address& root) const;
  // Extension to an arbitrary root-tree vertex: the vertex of height h(q) on the ray of
  // sigma(Q_{j+1}), where Q_j is the smallest basic spatial cube containing q.  The ray is
  // taken through the lexicographically first root cube inside q.
  Address extend(const Address& q) const;

 private:
  void check_root(const Address& root) const;
  const PrunedSlopeTree* p_;
  BernoulliWarehouse x_;
};

StickyMap sample_assignment(const PrunedSlopeTree& tree, uint64_t seed);
Address extend_sticky(const StickyMap& map, const Address& q);

// Height and lineage preservation of the extended map on every vertex of the root tree
// down to height max_height (J when negative).
bool sticky_on_root_tree(const StickyMap& map, int max_height = -1);

// All root cubes Q(J) in lexicographic order.
std::vector<Address> root_cubes(const PrunedSlopeTree& tree);

// theta(omega, k): the basic slope cube containing omega of maximal height <= k; the first
// splitting vertex when there is none.
Address theta(const PrunedSlopeTree& tree, const Address& omega, int k);
// mu(omega, k): number of basic slope cubes of height <= k containing omega.
int mu(const PrunedSlopeTree& tree, const Address& omega, int k);
// Cube representing the vertex of height mu(omega, k) on the ray of u in the tree N(A; alpha):
// the ancestor of u at the height of theta(omega, k), or the root hyperplane when mu = 0.
Address q_u(const PrunedSlopeTree& tree, const Address& u, const Address& omega, int k);

// Q*_j(t; alpha) for j = 1..N: ancestor of t at height eta_j(alpha(t)).
std::vector<Address> reference_cubes(const PrunedSlopeTree& tree, const Address& root, size_t slope);

struct Admissibility {
  // Some realization of X produces the prescribed slopes.
  bool realizable = false;
  // h(D(alpha(t), alpha(t'))) >= h(D(t, t')) for every pair of roots.
  bool heights_ok = false;
  // Bits forced by the prescription; a partial realization certifying realizability.
  std::map<Address, int> certificate;
  std::string reason;
  bool admissible() const { return realizable && heights_ok; }
};

Admissibility check_admissible(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                               const std::vector<size_t>& slopes);
bool is_sticky_admissible(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                          const std::vector<size_t>& slopes);

// Number of distinct reference cubes, the vertex count n(A; alpha) of N(A; alpha).
int vertex_count(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                 const std::vector<size_t>& slopes);

// Pr(sigma(t) = alpha(t) for t in A) = 2^{-n(A; alpha)}.  Exact for every realizable
// prescription; throws ValidationError otherwise.
Rational prob_exact(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                    const std::vector<size_t>& slopes);

struct RootClassification {
  size_t size = 0;
  // 0 for pairs; 1..2 for triples; 1..3 for quadruples.
  int type = 0;
  // Input positions forming the canonical tuple (t1, t2, t2') or (t1, t2, t1', t2').
  std::vector<int> order;
  // Quadruples of type 2 and 3: positions within each pair, (i1, i2) and (j1, j2).
  std::array<int, 2> i{0, 1}, j{0, 1};
  std::string label() const;
};

// Triples are read as {(t1, t2); (t1, t2')} and quadruples as {(t1, t2); (t1', t2')};
// the second and third roots (triples) or the two pairs (quadruples) are swapped when
// needed to meet the height ordering.
RootClassification classify_roots(const std::vector<Address>& roots);

// Closed-form probability for an admissible tuple of 2, 3 or 4 roots.
Rational prob_closed_form(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                          const std::vector<size_t>& slopes);

// Cubes whose bits the sticky map can read: every cube at the height of some basic slope cube.
std::vector<Address> warehouse_cubes(const PrunedSlopeTree& tree);

// Exhaustive enumeration of all realizations of the warehouse bits (at most max_bits).
class EnumerationOracle {
 public:
  explicit EnumerationOracle(const PrunedSlopeTree& tree, int max_bits = 20);

  int bit_count() const { return static_cast<int>(cubes_.size()); }
  uint64_t realizations() const { return uint64_t(1) << cubes_.size(); }
  const std::vector<Address>& roots() const { return roots_; }
  size_t root_id(const Address& root) const;
  // sigma(roots[id]) under the realization whose bit i is X of warehouse_cubes()[i].
  size_t sigma(uint64_t realization, size_t id) const;

  uint64_t count(const std::vector<size_t>& ids, const std::vector<size_t>& slopes) const;
  Rational probability(const std::vector<size_t>& ids, const std::vector<size_t>& slopes) const;
  // Number of realizations producing each slope tuple on the given roots.
  std::map<std::vector<size_t>, uint64_t> histogram(const std::vector<size_t>& ids) const;
  // Same counts indexed by the slope tuple read as base-2^N digits, first root most significant.
  std::vector<uint64_t> dense_histogram(const std::vector<size_t>& ids) const;

 private:
  const PrunedSlopeTree* p_;
  std::vector<Address> cubes_;
  std::vector<Address> roots_;
  std::map<Address, size_t> root_ids_;
  std::vector<int> vars_;        // roots x splitting rows: index into cubes_
  std::vector<uint8_t> table_;   // realizations x roots
};

}  // namespace tubelab
