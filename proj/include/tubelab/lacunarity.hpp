#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tubelab/core.hpp"

namespace tubelab {

// Finite prefix of a lacunary sequence: |a_{j+1} - limit| <= lambda |a_j - limit|.
struct LacunarySequence {
  std::vector<Rational> terms;
  Rational limit;
};

bool verify_sequence(const LacunarySequence& s, const Rational& lambda);

// Witness that a finite set lies in Lambda(order; lambda).  `sequence` is a finite
// prefix (in sequence order) of the special sequence converging to `limit`; the
// unlisted tail lies strictly closer to the limit than the last listed term.
// Children are keyed by the left endpoint a of the gap [a, b) they describe.
struct LacunaryWitness {
  int order = 0;
  Rational lambda{1, 2};
  std::vector<Rational> sequence;
  Rational limit;
  std::vector<std::pair<Rational, LacunaryWitness>> children;
};

// Throws ValidationError on a malformed witness (duplicate terms, child keys that are
// not gap endpoints, repeated keys); returns false when the set fails the definition.
bool verify_witness(const std::vector<Rational>& set, const LacunaryWitness& w);

// Smallest height at which all points of the set occupy distinct M-adic cubes.
int separating_height(const std::vector<Rational>& set, int M);

// Cover of a split-1 set by at most 6M lacunary sequences with constant <= 1/M,
// following the A+/A-, per-digit, index-mod-3 construction.
std::vector<LacunarySequence> decompose_split_one(const std::vector<Rational>& set, int M);

struct LacunaryPiece {
  std::vector<Rational> points;
  LacunaryWitness witness;
};

struct LacunaryDecomposition {
  int split = 0;
  std::vector<LacunaryPiece> pieces;
};

// Cover of a finite set with split(T(set;M)) = N by sets carrying witnesses of order <= N.
LacunaryDecomposition decompose_lacunary_order(const std::vector<Rational>& set, int M);

// Scalar projection x.w/|w|^2 of each point.
std::vector<Rational> project(const std::vector<RationalPoint>& points, const RationalPoint& direction);

// Section of the cone over a direction set with the hyperplane {x_j = 1} (0-based axis j).
std::vector<RationalPoint> cone_section(const std::vector<RationalPoint>& omega, int axis);

// Affine image c1*U + c2 of a witness.
LacunaryWitness transform_witness(const LacunaryWitness& w, const Rational& c1, const Rational& c2);

struct GeneratorSpec {
  std::string kind;
  std::map<std::string, std::string> params;

  // "kind:key=value,key=value"
  static GeneratorSpec parse(const std::string& text);
  std::string param(const std::string& key, const std::string& fallback = "") const;
};

// Rationals of [lo, hi] in Stern-Brocot order: the endpoints, then mediants level by level.
std::vector<Rational> stern_brocot(const Rational& lo, const Rational& hi, size_t count);

// Deterministic finite point set.  Kinds: cantor(L), dyadic(m), power(lambda,J),
// two_scale(K), nsw(exponents,ratio,J), carbery(lambda,d,kmax),
// counterexample(jmax,part=U|V|sum|product), parcet_rogers(lmax).
std::vector<RationalPoint> generate(const GeneratorSpec& spec, unsigned max_denominator_bits = 512);

std::vector<Rational> first_coordinates(const std::vector<RationalPoint>& points);

}  // namespace tubelab
