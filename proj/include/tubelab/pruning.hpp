#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tubelab/core.hpp"
#include "tubelab/madic_tree.hpp"

namespace tubelab {

struct SeparatedPair {
  int k = 0;
  Address v1, v2;
  // Guaranteed number of splits per ray below v1 and v2 in the working subtree.
  int budget1 = 0, budget2 = 0;
};

// Inside the subtree of `tree` below v0 whose rays all split at least n0 times, find the
// smallest height k carrying more than (2C0+1)^d vertices and the lexicographically least
// pair of maximal separation at that height.  The pair is at distance >= C0 M^{-k}.
SeparatedPair find_separated_pair(const MadicTree& tree, const Address& v0, int c0, int n0);

struct SplittingVertex {
  Address vertex;
  int index = 0;   // splitting index nu
  int lambda = 0;  // height of the basic slope cubes below this vertex (J when index = N)
  // children[0] is the older (lexicographically larger) child and carries bit 0.
  std::array<Address, 2> children;
  std::array<Address, 2> basic;
  // Row of the splitting vertex identified by basic[i]; -1 when index = N.
  std::array<int, 2> next{-1, -1};
};

class PrunedSlopeTree {
 public:
  int M = 2, d = 1, N = 0, J = 0, C0 = 1;
  // slopes[s] = Psi_N(binary digits of s, most significant first).
  std::vector<RationalPoint> slopes;
  // Splitting vertices in breadth-first order; row 0 is the first splitting vertex.
  std::vector<SplittingVertex> splitting;
  std::vector<int> fundamental_heights;  // sorted, distinct

  // Psi: bit strings of length 0..N to basic slope cubes.
  Address psi(const std::vector<int>& bits) const;
  std::vector<int> psi_inverse(const Address& cube) const;

  std::vector<int> bits_of(size_t slope) const;
  Address slope_address(size_t slope) const;
  // Row of the j-th splitting vertex on the ray of a slope (1 <= j <= N).
  int splitting_row(size_t slope, int j) const;
  // Height eta_j of the j-th basic slope cube containing the slope; eta_0 is the first splitting height.
  int eta(size_t slope, int j) const;
  // Basic slope cube of order j containing the slope; order 0 is the first splitting vertex.
  Address basic_cube(size_t slope, int j) const;
  // Index of the slope whose height-J address is `leaf`, or -1.
  long slope_index(const Address& leaf) const;
  // Row of the splitting vertex at this address, or -1.
  int row_of(const Address& v) const;

  MadicTree tree() const;

 private:
  friend PrunedSlopeTree build_slope_tree(std::vector<RationalPoint>, int, int, int);
  std::map<Address, std::vector<int>> psi_table_;
  std::map<Address, size_t> slope_of_leaf_;
  std::map<Address, int> row_of_;
};

// Slope tree structure of an explicit set of 2^N points at height J.  Throws
// ValidationError unless every ray splits exactly N times through binary splits.
PrunedSlopeTree build_slope_tree(std::vector<RationalPoint> omega, int M, int J, int c0);

// Extraction of 2^N slopes with binary, Euclidean-separated splitting structure from a
// tree with split > (N+1)(2C0+1)^d.  J is the least height meeting the separation bound.
PrunedSlopeTree prune(const MadicTree& tree, int N, int c0);

struct PruneCheck {
  bool splits_exactly_n = false;
  bool binary_splits = false;
  bool separated_descendants = false;
  bool j_separation = false;
  bool metrics_comparable = false;
  std::vector<std::string> failures;
  bool ok() const {
    return splits_exactly_n && binary_splits && separated_descendants && j_separation && metrics_comparable;
  }
};

// Exhaustive exact check of the four structural properties and the metric comparison.
PruneCheck check_pruned(const PrunedSlopeTree& p);

struct SlopeMetrics {
  Rational rho_sq, delta_sq;  // squared sup and inf distances across the two children
  bool comparable = false;    // delta <= rho <= (1 + 2 sqrt(d) / C0) delta
  bool within_diameter = false;  // rho <= sqrt(d) M^{-h}
};

SlopeMetrics slope_metrics(const PrunedSlopeTree& p, const Address& gamma);

// Scales nonnegative slopes by M^{-L} with the least L placing them in [0,1)^d.
std::pair<std::vector<RationalPoint>, int> normalize_slopes(const std::vector<RationalPoint>& slopes, int M);

nlohmann::json to_json(const PrunedSlopeTree& p);

}  // namespace tubelab
