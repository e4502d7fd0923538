#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tubelab {

using Integer = mpz_class;

// mpq_class whose numerator/denominator constructor always canonicalizes, so that
// comparisons never see an unreduced fraction.
class Rational : public mpq_class {
 public:
  Rational() = default;
  Rational(const mpq_class& q) : mpq_class(q) {}
  Rational(mpq_class&& q) : mpq_class(std::move(q)) {}
  template <class T, class U>
  Rational(const __gmp_expr<T, U>& e) : mpq_class(e) {}
  Rational(int n) : mpq_class(n) {}
  Rational(long n) : mpq_class(n) {}
  Rational(unsigned long n) : mpq_class(n) {}
  Rational(const Integer& n) : mpq_class(n) {}
  template <class A, class B>
  Rational(const A& num, const B& den) : mpq_class(Integer(num), Integer(den)) {
    if (den == 0) throw std::domain_error("zero denominator");
    canonicalize();
  }
};
using RationalPoint = std::vector<Rational>;

// Input rejected by a precondition check.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Instance is well-formed but the requested construction cannot be carried out.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Rational parse_rational(const std::string& text);
std::string to_string(const Rational& q);
double to_double(const Rational& q);

Integer ipow(long base, long exp);
Rational rpow(const Rational& base, long exp);

// Vertex of the full M^d-adic tree: a sequence of d-tuples over Z_M, stored
// level-major so that digits[k*d + i] is coordinate i at level k+1.
struct Address {
  int d = 1;
  std::vector<uint8_t> digits;

  Address() = default;
  explicit Address(int dim) : d(dim) {}
  Address(int dim, std::vector<uint8_t> ds) : d(dim), digits(std::move(ds)) {}

  int height() const { return static_cast<int>(digits.size()) / d; }
  bool is_root() const { return digits.empty(); }
  uint8_t digit(int level, int coord) const { return digits[static_cast<size_t>(level) * d + coord]; }

  Address ancestor(int h) const;
  Address parent() const { return ancestor(height() - 1); }
  Address child(const uint8_t* tuple) const;
  Address child(const std::vector<uint8_t>& tuple) const { return child(tuple.data()); }
  // True when `other` lies inside this cube (this is a prefix of other).
  bool contains(const Address& other) const;
  bool strictly_contains(const Address& other) const {
    return contains(other) && other.height() > height();
  }

  // Integer cube index per coordinate at this height.
  std::vector<Integer> index(int M) const;
  RationalPoint corner(int M) const;
  RationalPoint centre(int M) const;
  Rational side(int M) const;

  std::string str() const;

  friend bool operator==(const Address& a, const Address& b) {
    return a.d == b.d && a.digits == b.digits;
  }
  friend bool operator!=(const Address& a, const Address& b) { return !(a == b); }
  friend bool operator<(const Address& a, const Address& b) { return a.digits < b.digits; }
};

struct AddressHash {
  size_t operator()(const Address& a) const noexcept;
};

// Youngest common ancestor D(u, v): the longest common prefix.
Address youngest_common_ancestor(const Address& u, const Address& v);

// Address of height J of the cube containing a point of [0,1)^d.
Address address_of(const RationalPoint& p, int M, int J);

// Address from integer cube indices at height h.
Address address_from_index(const std::vector<Integer>& idx, int M, int h);

// Euclidean distance squared between two closed cubes.
Rational cube_distance_sq(const Address& a, const Address& b, int M);

Rational dist_sq(const RationalPoint& a, const RationalPoint& b);

// 64-bit mixing function used for every seed derivation (splitmix64 finalizer).
uint64_t mix64(uint64_t x);
uint64_t derive_seed(uint64_t master, uint64_t index);
uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b);

}  // namespace tubelab
