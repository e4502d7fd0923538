#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tubelab/core.hpp"
#include "tubelab/pruning.hpp"
#include "tubelab/tubes.hpp"

namespace tubelab {

// A tuple of tubes (t_i, v_i) listed in the order of the collection's definition.
struct TubeTuple {
  std::vector<Address> roots;
  std::vector<size_t> slopes;
  friend bool operator<(const TubeTuple& a, const TubeTuple& b) {
    return a.roots != b.roots ? a.roots < b.roots : a.slopes < b.slopes;
  }
  friend bool operator==(const TubeTuple& a, const TubeTuple& b) {
    return a.roots == b.roots && a.slopes == b.slopes;
  }
};

// Window [rho, C1 rho] and tube length parameter shared by every enumerator.
struct CountingWindow {
  Rational rho;
  Rational c1 = 3;
  Rational a0 = 10;
  SlabWindow slab(const PrunedSlopeTree& p) const;
};

// sup |a - b| over slopes a, b with D(a, b) = omega.
double rho_of(const PrunedSlopeTree& p, const Address& omega);
// Splitting index nu of a splitting vertex.
int nu_of(const PrunedSlopeTree& p, const Address& omega);

struct CountingLimits {
  // Largest root count |Q(J)| accepted by the scans.
  size_t max_roots = 6561;
};

// Ordered pairs ((t1, v1), (t2, v2)) with D(t1, t2) = u, D(v1, v2) = omega, sticky-admissible,
// whose tubes meet inside the window.  Each unordered pair appears in both orders.  The
// scan skips empty windows (2 C1 rho rho_omega < M^{-J}) and only visits t1 in u and t2 in
// a different child of u inside the per-coordinate intersection box.
std::vector<TubeTuple> enumerate_E2(const Address& u, const Address& omega, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits = {});
// Same collection by scanning every (t1, t2, v1, v2).
std::vector<TubeTuple> enumerate_E2_bruteforce(const Address& u, const Address& omega, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits = {});

struct E2Diagnostics {
  size_t size = 0;
  size_t first_roots = 0;      // distinct t1
  size_t max_slice = 0;        // max over (t1, v1, v2) of the number of t2
  double slice_constant = 0;   // max_slice / (rho rho_omega M^J)
  double projection_ratio = 0; // first_roots / (rho rho_omega M^{-(d-1)h(u) + dJ})
  double size_ratio = 0;       // size / ((rho rho_omega)^2 2^{2(N - nu)} M^{-(d-1)h(u) + (d+1)J})
};

E2Diagnostics diagnose_E2(const std::vector<TubeTuple>& e2, const Address& u, const Address& omega,
                          const CountingWindow& w, const PrunedSlopeTree& p);

// (varpi_1, varpi_2, varpi_3) with h nondecreasing and varpi_2, varpi_3 inside varpi_1.
struct SlopeTriple {
  Address w1, w2, w3;
  // Which inputs coincided, e.g. "abc", "aab"; letters follow the canonical order.
  std::string pattern;
};

// Canonical arrangement of 3 or 4 slope splitting vertices (at most three distinct) whose
// pairs are nested or jointly contained in a third.  With four inputs one copy of the
// deepest repeated vertex is dropped.
SlopeTriple canonical_triple(const PrunedSlopeTree& p, std::vector<Address> vertices);
// m[varpi_1, varpi_2, varpi_3].
int slope_complexity(const PrunedSlopeTree& p, const SlopeTriple& t);
int slope_complexity(const PrunedSlopeTree& p, const std::vector<Address>& vertices);
// m-hat[varpi_1, varpi_2] = 2 nu(varpi_2) + nu(varpi_1) for two or three vertices with at
// most two distinct, nested.
int slope_complexity_hat(const PrunedSlopeTree& p, const std::vector<Address>& vertices);

// #{(w_1..w_4) : D(w_{i_k}, w_{j_k}) = varpi_k, k = 1..3} for index pairs (0-based).
size_t count_slope_quadruples(const PrunedSlopeTree& p, const SlopeTriple& t,
                              const std::array<std::pair<int, int>, 3>& pairs);
// #{(w_1, w_2, w_3) : D(w_{i_1}, w_{j_1}) = varpi_1, D(w_{i_2}, w_{j_2}) = varpi_2}.
size_t count_slope_triples(const PrunedSlopeTree& p, const Address& w1, const Address& w2,
                           const std::array<std::pair<int, int>, 2>& pairs);

// Anchor vertices for the three- and four-tube collections; unused fields stay empty.
struct Anchors {
  std::optional<Address> u, u2, z, t, s1, s2;               // root tree
  std::optional<Address> omega, omega2, v, theta, theta1, theta2;  // slope tree
};

// Root-slope quadruples {(t1,v1),(t2,v2),(t1',v2'),(t2',v2')} listed as (t1, t2, t1', t2')
// with root configuration of the given type (1..3), the anchor relations of that type and
// both windowed intersections.  Necessary conditions (boundary distances for types 2 and 3,
// the thin-cylinder inequalities for type 3) are checked on every tuple and a failure
// throws std::logic_error.
std::vector<TubeTuple> enumerate_E4(int type, const Anchors& anchors, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits = {});
// Same collection from a scan over every root and slope pair with the defining ancestors.
std::vector<TubeTuple> enumerate_E4_bruteforce(int type, const Anchors& anchors, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits = {});
// Triples (t1, t2, t2') of type 1 or 2 with P1 meeting P2 and P2', u = D(t1, t2),
// u' = D(t1, t2') (u' = u for type 2), and for type 2 t = D(t2, t2'), theta = D(v2, v2').
std::vector<TubeTuple> enumerate_E3(int type, const Anchors& anchors, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits = {});
std::vector<TubeTuple> enumerate_E3_bruteforce(int type, const Anchors& anchors, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits = {});

// Anchors read off a quadruple (t1, t2, t1', t2') or triple (t1, t2, t2') of the given type.
Anchors anchors_of(int type, const TubeTuple& q, const PrunedSlopeTree& p);
// Type of the root configuration of a triple or quadruple, 0 when roots repeat.
int tuple_type(const TubeTuple& q);

// Right-hand side of the size bound without its constant.
double e2_bound(const Address& u, const Address& omega, const CountingWindow& w, const PrunedSlopeTree& p);
double e3_bound(int type, const Anchors& anchors, const CountingWindow& w, const PrunedSlopeTree& p);
double e4_bound(int type, const Anchors& anchors, const CountingWindow& w, const PrunedSlopeTree& p);

struct SumRow {
  std::string lemma;   // "splitting", "weighted-splitting", "root-tree", "finer+", "finer-"
  std::string regime;  // e.g. "alpha>1", "beta=d"
  std::string params;
  double lhs = 0, rhs = 0;
  double ratio() const { return rhs > 0 ? lhs / rhs : 0; }
};

struct SummationReport {
  std::vector<SumRow> rows;
  // Exact check of the unit-exponent case: sum over splitting vertices below varpi_0 of
  // 2^{-nu} <= N 2^{-nu(varpi_0)}, for every splitting vertex varpi_0.
  bool unit_exponent_holds = true;
  double max_ratio(const std::string& lemma, const std::string& regime) const;
};

SummationReport summation_diagnostics(const PrunedSlopeTree& p);

std::string to_csv(const SummationReport& report);

}  // namespace tubelab
