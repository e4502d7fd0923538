#include "tubelab/core.hpp"

#include <algorithm>
#include <sstream>

namespace tubelab {

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (c != ' ') s.push_back(c);
  if (s.empty()) throw ValidationError("empty rational");
  auto slash = s.find('/');
  auto valid_int = [](const std::string& t) {
    size_t i = (!t.empty() && (t[0] == '-' || t[0] == '+')) ? 1 : 0;
    if (i >= t.size()) return false;
    return std::all_of(t.begin() + i, t.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  Rational q;
  if (slash == std::string::npos) {
    if (!valid_int(s)) throw ValidationError("not a rational: " + text);
    q = Rational(Integer(s[0] == '+' ? s.substr(1) : s));
  } else {
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    if (!valid_int(num) || !valid_int(den) || den[0] == '-' || den[0] == '+')
      throw ValidationError("not a rational: " + text);
    Integer dz(den);
    if (dz == 0) throw ValidationError("zero denominator: " + text);
    q = Rational(Integer(num[0] == '+' ? num.substr(1) : num), dz);
  }
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q) { return q.get_str(); }

double to_double(const Rational& q) { return q.get_d(); }

Integer ipow(long base, long exp) {
  Integer r;
  mpz_ui_pow_ui(r.get_mpz_t(), static_cast<unsigned long>(base), static_cast<unsigned long>(exp));
  return r;
}

Rational rpow(const Rational& base, long exp) {
  Integer n, d;
  unsigned long e = static_cast<unsigned long>(exp < 0 ? -exp : exp);
  mpz_pow_ui(n.get_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(d.get_mpz_t(), base.get_den_mpz_t(), e);
  Rational r = exp < 0 ? Rational(d, n) : Rational(n, d);
  r.canonicalize();
  return r;
}

Address Address::ancestor(int h) const {
  if (h < 0 || h > height()) throw ValidationError("ancestor height out of range");
  return Address(d, std::vector<uint8_t>(digits.begin(), digits.begin() + static_cast<long>(h) * d));
}

Address Address::child(const uint8_t* tuple) const {
  Address c(d, digits);
  c.digits.insert(c.digits.end(), tuple, tuple + d);
  return c;
}

bool Address::contains(const Address& other) const {
  if (other.d != d || other.digits.size() < digits.size()) return false;
  return std::equal(digits.begin(), digits.end(), other.digits.begin());
}

std::vector<Integer> Address::index(int M) const {
  std::vector<Integer> idx(d, 0);
  for (int k = 0; k < height(); ++k)
    for (int i = 0; i < d; ++i) idx[i] = idx[i] * M + digit(k, i);
  return idx;
}

RationalPoint Address::corner(int M) const {
  auto idx = index(M);
  Integer scale = ipow(M, height());
  RationalPoint p(d);
  for (int i = 0; i < d; ++i) {
    p[i] = Rational(idx[i], scale);
    p[i].canonicalize();
  }
  return p;
}

RationalPoint Address::centre(int M) const {
  auto p = corner(M);
  Rational half = side(M) / 2;
  for (auto& x : p) x += half;
  return p;
}

Rational Address::side(int M) const { return Rational(1) / Rational(ipow(M, height())); }

std::string Address::str() const {
  std::ostringstream os;
  os << "<";
  for (int k = 0; k < height(); ++k) {
    if (k) os << ",";
    if (d > 1) os << "(";
    for (int i = 0; i < d; ++i) {
      if (i) os << " ";
      os << static_cast<int>(digit(k, i));
    }
    if (d > 1) os << ")";
  }
  os << ">";
  return os.str();
}

size_t AddressHash::operator()(const Address& a) const noexcept {
  uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<uint64_t>(a.digits.size());
  for (uint8_t x : a.digits) h = mix64(h ^ x);
  return static_cast<size_t>(h);
}

Address youngest_common_ancestor(const Address& u, const Address& v) {
  if (u.d != v.d) throw ValidationError("addresses from different trees");
  int h = 0;
  int hmax = std::min(u.height(), v.height());
  while (h < hmax &&
         std::equal(u.digits.begin() + static_cast<long>(h) * u.d,
                    u.digits.begin() + static_cast<long>(h + 1) * u.d,
                    v.digits.begin() + static_cast<long>(h) * u.d))
    ++h;
  return u.ancestor(h);
}

Address address_of(const RationalPoint& p, int M, int J) {
  int d = static_cast<int>(p.size());
  std::vector<Integer> idx(d);
  Integer scale = ipow(M, J);
  for (int i = 0; i < d; ++i) {
    if (p[i] < 0 || p[i] >= 1) throw ValidationError("coordinate outside [0,1): " + to_string(p[i]));
    Rational s = p[i] * Rational(scale);
    mpz_fdiv_q(idx[i].get_mpz_t(), s.get_num_mpz_t(), s.get_den_mpz_t());
  }
  return address_from_index(idx, M, J);
}

Address address_from_index(const std::vector<Integer>& idx, int M, int h) {
  int d = static_cast<int>(idx.size());
  Address a(d);
  a.digits.assign(static_cast<size_t>(h) * d, 0);
  for (int i = 0; i < d; ++i) {
    if (idx[i] < 0) throw ValidationError("negative cube index");
    std::string s = idx[i].get_str(M);
    if (static_cast<int>(s.size()) > h && idx[i] != 0) throw ValidationError("cube index out of range");
    int off = h - static_cast<int>(s.size());
    for (size_t k = 0; k < s.size(); ++k) {
      char c = s[k];
      int digit = (c >= '0' && c <= '9') ? c - '0' : (c >= 'a' && c <= 'z') ? c - 'a' + 10 : c - 'A' + 36;
      if (off + static_cast<int>(k) >= 0) a.digits[static_cast<size_t>(off + k) * d + i] = static_cast<uint8_t>(digit);
    }
  }
  return a;
}

Rational cube_distance_sq(const Address& a, const Address& b, int M) {
  auto ca = a.corner(M), cb = b.corner(M);
  Rational sa = a.side(M), sb = b.side(M);
  Rational total = 0;
  for (int i = 0; i < a.d; ++i) {
    Rational gap = 0;
    if (ca[i] + sa < cb[i]) gap = cb[i] - (ca[i] + sa);
    else if (cb[i] + sb < ca[i]) gap = ca[i] - (cb[i] + sb);
    total += gap * gap;
  }
  return total;
}

Rational dist_sq(const RationalPoint& a, const RationalPoint& b) {
  Rational s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    Rational t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t master, uint64_t index) { return mix64(mix64(master) ^ index); }

uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

}  // namespace tubelab
