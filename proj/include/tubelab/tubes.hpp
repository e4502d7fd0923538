#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tubelab/core.hpp"
#include "tubelab/pruning.hpp"
#include "tubelab/sticky.hpp"

namespace tubelab {

// c_d = min(d^{-2d}, 1/(4 sqrt d)); equal to 1/4 for d = 1 and d^{-2d} for d >= 2.
Rational dilation_constant(int d);

// Prism P_{t,w} = Q~_t + [0, 10 A0](1, w) where Q~_t is the c_d-dilate of the root cube t
// about its centre.  The cross-section at x1 is the closed cube of side c_d M^{-J} centred
// at cen(t) + x1 w.
struct Tube {
  const PrunedSlopeTree* instance = nullptr;
  Address root;
  size_t slope = 0;
  RationalPoint centre;
  RationalPoint direction;
  Rational side;
  Rational length;

  RationalPoint cross_centre(const Rational& x1) const;
  // x = (x1, x2, ..., x_{d+1}).
  bool contains(const RationalPoint& x) const;
};

Tube make_tube(const PrunedSlopeTree& p, const Address& root, size_t slope, const Rational& a0 = 10);
nlohmann::json to_json(const Tube& tube);

// Range [lo, hi] of the first coordinate.
struct SlabWindow {
  Rational lo, hi;
  SlabWindow() = default;
  SlabWindow(Rational a, Rational b);
  Rational width() const { return hi - lo; }
  // [rho, C1 rho] with M^{-J} <= rho <= 10 A0 and C1 > 1.
  static SlabWindow scaled(const Rational& rho, const Rational& c1, const PrunedSlopeTree& p,
                           const Rational& a0 = 10);
  // [M^{-R}, M^{-R+1}].
  static SlabWindow level(int M, int R);
};

// Open set of x1 in the window where the two cross-sections overlap in positive measure,
// as an interval (lo, hi); empty when lo >= hi.
struct OverlapInterval {
  Rational lo, hi;
  bool empty() const { return lo >= hi; }
};

OverlapInterval overlap_interval(const Tube& a, const Tube& b, const SlabWindow& w);

// Positive-measure intersection inside the slab.  For distinct roots the centre
// inequality |cen(t') - cen(t) + x1(v' - v)| <= 2 c_d sqrt(d) M^{-J} and the lower bound
// |x1||v - v'| >= M^{-J}/2 are checked at an intersection point; a failure throws
// std::logic_error.
bool intersects(const Tube& a, const Tube& b, const SlabWindow& w);

// Exact |P_a cap P_b cap slab|: integral of the overlap box volume, piecewise polynomial in x1.
Rational pair_intersection_volume(const Tube& a, const Tube& b, const SlabWindow& w);

// |P cap slab|.
Rational tube_slab_volume(const Tube& tube, const SlabWindow& w);

// |P cap P'| (M^{-J} + |v - v'|) / M^{-J(d+1)}, bounded by a constant depending on d only.
double intersection_size_ratio(const Tube& a, const Tube& b, const SlabWindow& w);

// Exact measure of the union of cross-sections at x1.
Rational slice_union_measure(const std::vector<Tube>& tubes, const Rational& x1);

struct UnionVolume {
  // Midpoint quadrature over the slices, each slice measured exactly.
  Rational estimate;
  // (sum_i |P_i cap slab|)^2 / sum_{i,j} |P_i cap P_j cap slab|.
  Rational lower_bound;
};

UnionVolume union_volume(const std::vector<Tube>& tubes, const SlabWindow& w, int slices = 64);

// Poss(x): roots t meeting x - x1 Omega_N, each with its unique slope v(t).
struct Possible {
  std::vector<Address> roots;
  std::vector<size_t> slopes;
  size_t size() const { return roots.size(); }
};

// Requires A0 <= x1 <= 10 A0.  Throws InfeasibleError when a root admits two slopes.
Possible poss(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0 = 10);
// Roots t whose dilated tube P_{t,v} contains x for some slope v; a subset of poss(x).
Possible poss_through_tubes(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0 = 10);

struct ReferenceVertex {
  Address cube;   // Q*_j(t), representing Phi_j(t)
  Address image;  // Theta_j(t), the j-th basic slope cube of v(t)
  int label = 0;  // kappa of the edge ending here: j-th bit of v(t)
  int parent = -1;
};

// The trees N_x and M_x over Poss(x).  Level j = 1..N holds the distinct Phi_j(t).
struct ReferenceTree {
  RationalPoint x;
  Possible possible;
  std::vector<std::vector<ReferenceVertex>> levels;
  // rays[i][j - 1]: index within levels[j - 1] of Phi_j of the i-th possible root.
  std::vector<std::vector<int>> rays;

  // n_j(x) for j = 1..N.
  std::vector<size_t> counts() const;
  // max_j n_j / 2^j.
  double growth_constant() const;
};

// Builds N_x and M_x, checking that vertices sharing Q*_j share their image, label and
// parent, and that the image map preserves lineage (std::logic_error otherwise).  Throws
// InfeasibleError when two possible roots violate h(D(t, t')) < lambda(D(v(t), v(t'))).
ReferenceTree reference_trees(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0 = 10);

struct Inclusion {
  // x lies on some tube P_{t, sigma(t)}.
  bool member = false;
  // A possible root whose ray carries X_{Q*_j(t)} = kappa at every level, i.e. sigma(t) = v(t).
  std::optional<Address> witness;
};

Inclusion inclusion_check(const RationalPoint& x, const StickyMap& sigma, const Rational& a0 = 10);

}  // namespace tubelab
