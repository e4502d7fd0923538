#include "tubelab/counting.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "tubelab/sticky.hpp"

namespace tubelab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

Integer floor_q(const Rational& q) {
  Integer out;
  mpz_fdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

Integer ceil_q(const Rational& q) {
  Integer out;
  mpz_cdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

void check_cap(const PrunedSlopeTree& p, const CountingLimits& limits) {
  if (ipow(p.M, static_cast<long>(p.d) * p.J) > Integer(static_cast<unsigned long>(limits.max_roots)))
    throw ValidationError(fmt::format("root tree Q({}) exceeds the cap of {} cubes", p.J, limits.max_roots));
}

const SplittingVertex& splitting_at(const PrunedSlopeTree& p, const Address& w) {
  int r = p.row_of(w);
  if (r < 0) throw ValidationError("not a splitting vertex: " + w.str());
  return p.splitting[r];
}

std::vector<size_t> slopes_below(const PrunedSlopeTree& p, const Address& a) {
  std::vector<size_t> out;
  for (size_t s = 0; s < p.slopes.size(); ++s)
    if (a.contains(p.slope_address(s))) out.push_back(s);
  return out;
}

Address slope_D(const PrunedSlopeTree& p, size_t a, size_t b) {
  return youngest_common_ancestor(p.slope_address(a), p.slope_address(b));
}

// Every height-J cube inside u.
std::vector<Address> roots_in(const PrunedSlopeTree& p, const Address& u) {
  std::vector<Address> out{u};
  for (int h = u.height(); h < p.J; ++h) {
    std::vector<Address> next;
    std::vector<uint8_t> tuple(p.d, 0);
    for (const auto& a : out) {
      std::function<void(int)> rec = [&](int i) {
        if (i == p.d) {
          next.push_back(a.child(tuple));
          return;
        }
        for (int m = 0; m < p.M; ++m) {
          tuple[i] = static_cast<uint8_t>(m);
          rec(i + 1);
        }
      };
      rec(0);
    }
    out = std::move(next);
  }
  return out;
}

class TubeCache {
 public:
  TubeCache(const PrunedSlopeTree& p, const Rational& a0) : p_(p), a0_(a0) {}
  const Tube& get(const Address& t, size_t v) {
    auto key = std::make_pair(t, v);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, make_tube(p_, t, v, a0_)).first;
    return it->second;
  }

 private:
  const PrunedSlopeTree& p_;
  Rational a0_;
  std::map<std::pair<Address, size_t>, Tube> cache_;
};

// Distance from a cube t inside `outer` to the boundary of `outer`.
Rational boundary_gap(const Address& t, const Address& outer, int M) {
  auto lo = t.corner(M), olo = outer.corner(M);
  Rational s = t.side(M), os = outer.side(M);
  Rational best = os;
  for (size_t i = 0; i < lo.size(); ++i) {
    Rational a = lo[i] - olo[i];
    Rational b = olo[i] + os - lo[i] - s;
    best = std::min(best, Rational(std::min(a, b)));
  }
  return best;
}

double gap(const Address& t, const Address& outer, int M) { return to_double(boundary_gap(t, outer, M)); }

double mpow(int M, int e) { return std::pow(static_cast<double>(M), e); }

std::vector<double> centre_d(const Address& a, int M) {
  std::vector<double> out;
  for (const auto& c : a.centre(M)) out.push_back(to_double(c));
  return out;
}

// min over x1 in [lo, hi] of |a + x1 b|.
double min_on_segment(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi) {
  double ab = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], bb += b[i] * b[i];
  double x = bb > 0 ? std::clamp(-ab / bb, lo, hi) : lo;
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] + x * b[i]) * (a[i] + x * b[i]);
  return std::sqrt(s);
}

const Address& need(const std::optional<Address>& a, const char* name) {
  if (!a) throw ValidationError(std::string("missing anchor ") + name);
  return *a;
}

Address deeper(const Address& a, const Address& b) { return a.height() >= b.height() ? a : b; }

// Intersecting ordered pairs ((t, v), (t', v')) with D(t, t') = u and D(v, v') = omega, by a
// scan over every root and slope pair.
std::vector<TubeTuple> scan_pairs(const PrunedSlopeTree& p, const CountingWindow& w, TubeCache& tubes,
                                  const Address& u, const Address& omega) {
  auto slab = w.slab(p);
  auto roots = root_cubes(p);
  std::vector<TubeTuple> out;
  for (const auto& t1 : roots)
    for (const auto& t2 : roots) {
      if (t1 == t2 || youngest_common_ancestor(t1, t2) != u) continue;
      for (size_t v1 = 0; v1 < p.slopes.size(); ++v1)
        for (size_t v2 = 0; v2 < p.slopes.size(); ++v2)
          if (slope_D(p, v1, v2) == omega && intersects(tubes.get(t1, v1), tubes.get(t2, v2), slab))
            out.push_back({{t1, t2}, {v1, v2}});
    }
  return out;
}

bool distinct(const std::vector<Address>& roots) {
  for (size_t a = 0; a < roots.size(); ++a)
    for (size_t b = a + 1; b < roots.size(); ++b)
      if (roots[a] == roots[b]) return false;
  return true;
}

void validate_anchors(int type, const Anchors& a, const PrunedSlopeTree& p, bool four) {
  if (four) require(type >= 1 && type <= 3, "quadruple type must be 1, 2 or 3");
  else require(type == 1 || type == 2, "triple type must be 1 or 2");
  const Address& u = need(a.u, "u");
  splitting_at(p, need(a.omega, "omega"));
  splitting_at(p, need(a.omega2, "omega'"));
  if (!four) {
    if (type == 1) need(a.u2, "u'");
    else need(a.t, "t"), need(a.theta, "theta");
    return;
  }
  if (type == 1) {
    require(need(a.z, "z") == youngest_common_ancestor(u, need(a.u2, "u'")), "z must equal D(u, u')");
    require(need(a.v, "v") == youngest_common_ancestor(*a.omega, *a.omega2), "v must equal D(omega, omega')");
  } else if (type == 2) {
    const Address& u2 = need(a.u2, "u'");
    const Address& t = need(a.t, "t");
    need(a.theta, "theta");
    require(u.strictly_contains(u2), "type 2 needs u' strictly inside u");
    require(u.contains(t) && (t.contains(u2) || u2.contains(t)), "u, u', t must be linearly ordered");
  } else {
    const Address& s1 = need(a.s1, "s1");
    const Address& s2 = need(a.s2, "s2");
    need(a.theta1, "theta1"), need(a.theta2, "theta2");
    require(u.contains(s1) && u.strictly_contains(s2), "s1 inside u and s2 strictly inside u required");
    require(s1.height() <= s2.height(), "h(s1) <= h(s2) required");
    require(a.omega->contains(*a.omega2), "omega' inside omega required");
  }
}

bool matches_E4(int type, const Anchors& a, const TubeTuple& q, const PrunedSlopeTree& p) {
  const auto& t = q.roots;
  const auto& v = q.slopes;
  if (!distinct(t)) return false;
  auto D = youngest_common_ancestor;
  if (D(t[0], t[1]) != *a.u) return false;
  const Address& u2 = type == 3 ? *a.u : *a.u2;
  if (D(t[2], t[3]) != u2) return false;
  if (slope_D(p, v[0], v[1]) != *a.omega || slope_D(p, v[2], v[3]) != *a.omega2) return false;
  if (type == 1) {
    if (D(*a.u, u2) != *a.z || D(*a.omega, *a.omega2) != *a.v) return false;
  } else if (type == 2) {
    if (D(t[1], t[3]) != *a.t || slope_D(p, v[1], v[3]) != *a.theta) return false;
  } else {
    if (D(t[0], t[2]) != *a.s1 || D(t[1], t[3]) != *a.s2) return false;
    if (slope_D(p, v[0], v[2]) != *a.theta1 || slope_D(p, v[1], v[3]) != *a.theta2) return false;
  }
  if (classify_roots(t).type != type) return false;
  return is_sticky_admissible(p, t, v);
}

bool matches_E3(int type, const Anchors& a, const TubeTuple& q, const PrunedSlopeTree& p) {
  const auto& t = q.roots;
  const auto& v = q.slopes;
  if (!distinct(t)) return false;
  auto D = youngest_common_ancestor;
  const Address& u2 = type == 1 ? *a.u2 : *a.u;
  if (D(t[0], t[1]) != *a.u || D(t[0], t[2]) != u2) return false;
  if (slope_D(p, v[0], v[1]) != *a.omega || slope_D(p, v[0], v[2]) != *a.omega2) return false;
  if (type == 2 && (D(t[1], t[2]) != *a.t || slope_D(p, v[1], v[2]) != *a.theta)) return false;
  if (classify_roots(t).type != type) return false;
  return is_sticky_admissible(p, t, v);
}

void fail(const std::string& what, const TubeTuple& q) {
  std::string roots;
  for (const auto& r : q.roots) roots += r.str() + " ";
  throw std::logic_error(what + " violated by roots " + roots);
}

// Boundary-distance and cylinder conditions that every E_42 / E_43 member satisfies.
void check_necessary(int type, const Anchors& a, const TubeTuple& q, const CountingWindow& w,
                     const PrunedSlopeTree& p) {
  if (type == 1) return;
  const int M = p.M;
  const double c1 = to_double(w.c1), rho = to_double(w.rho);
  const double tol = 1e-12;
  double r_w = rho * rho_of(p, *a.omega), r_w2 = rho * rho_of(p, *a.omega2);
  const Address& u = *a.u;
  if (type == 2) {
    const Address& t = *a.t;
    const Address& u2 = *a.u2;
    Address ustar = t == u ? u : t.ancestor(u.height() + 1);
    if (gap(t, ustar, M) > 4 * c1 * r_w + tol) fail("boundary distance to u*", q);
    if (u2.strictly_contains(t)) {
      Address u2star = t.ancestor(u2.height() + 1);
      if (gap(t, u2star, M) > 4 * c1 * r_w2 + tol) fail("boundary distance to u'*", q);
    }
    return;
  }
  const Address& s1 = *a.s1;
  const Address& s2 = *a.s2;
  double delta = std::min(r_w, r_w2);
  auto gap_u = [&](const Address& s) { return s == u ? 0.0 : gap(s, s.ancestor(u.height() + 1), M); };
  if (gap_u(s1) + gap_u(s2) > 8 * c1 * delta + tol) fail("summed boundary distance", q);
  double scale = mpow(M, -s1.height());
  if (delta <= scale) {
    bool inside = s1 == u && s1.strictly_contains(s2) && gap_u(s2) <= 8 * c1 * delta + tol;
    bool apart = !s1.contains(s2) && !s2.contains(s1) &&
                 std::sqrt(to_double(cube_distance_sq(s1, s2, M))) <= 8 * c1 * delta + tol;
    if (!inside && !apart) fail("small-Delta placement of s2", q);
  }
  if (delta >= scale) {
    double bound = 2 * (std::sqrt(static_cast<double>(p.d)) * (1 + c1 * rho) + 1) * scale;
    auto cs1 = centre_d(s1, M), cs2 = centre_d(s2, M);
    std::vector<double> base(cs1.size());
    for (size_t i = 0; i < base.size(); ++i) base[i] = cs2[i] - cs1[i];
    for (const Address* om : {&*a.omega, &*a.omega2}) {
      auto c2 = centre_d(deeper(*om, *a.theta2), M), c1v = centre_d(deeper(*om, *a.theta1), M);
      std::vector<double> dir(base.size());
      for (size_t i = 0; i < dir.size(); ++i) dir[i] = c2[i] - c1v[i];
      if (min_on_segment(base, dir, rho, c1 * rho) > bound + tol) fail("thin-cylinder inequality", q);
    }
  }
}

std::vector<TubeTuple> sorted_unique(std::vector<TubeTuple> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

SlabWindow CountingWindow::slab(const PrunedSlopeTree& p) const { return SlabWindow::scaled(rho, c1, p, a0); }

double rho_of(const PrunedSlopeTree& p, const Address& omega) {
  splitting_at(p, omega);
  return std::sqrt(to_double(slope_metrics(p, omega).rho_sq));
}

int nu_of(const PrunedSlopeTree& p, const Address& omega) { return splitting_at(p, omega).index; }

std::vector<TubeTuple> enumerate_E2(const Address& u, const Address& omega, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  const auto& sv = splitting_at(p, omega);
  require(u.d == p.d && u.height() < p.J, "u must be a root-tree vertex above height J");
  require(u.height() <= omega.height(), "h(u) <= h(omega) required");
  auto slab = w.slab(p);
  std::vector<TubeTuple> out;
  // Nonempty only if 2 C1 rho rho_omega >= M^{-J}.
  Rational reach = 2 * w.c1 * w.rho;
  if (reach * reach * slope_metrics(p, omega).rho_sq < rpow(Rational(p.M), -2 * p.J)) return out;

  TubeCache tubes(p, w.a0);
  Integer scale = ipow(p.M, p.J);
  Rational side = dilation_constant(p.d) / Rational(scale);
  int span = p.J - u.height();
  auto ulo = u.index(p.M);
  Integer width = ipow(p.M, span);
  std::array<std::vector<size_t>, 2> sides{slopes_below(p, sv.children[0]), slopes_below(p, sv.children[1])};

  for (const auto& t1 : roots_in(p, u)) {
    auto k1 = t1.index(p.M);
    for (int a = 0; a < 2; ++a)
      for (size_t v1 : sides[a])
        for (size_t v2 : sides[1 - a]) {
          // Per-coordinate range of k2 - k1 allowed by some x1 in the window.
          std::vector<Integer> lo(p.d), hi(p.d);
          for (int i = 0; i < p.d; ++i) {
            Rational sigma = p.slopes[v2][i] - p.slopes[v1][i];
            Rational s_lo = slab.lo * sigma, s_hi = slab.hi * sigma;
            Rational smax = std::max(s_lo, s_hi), smin = std::min(s_lo, s_hi);
            Rational dlo = (-side - smax) * scale, dhi = (side - smin) * scale;
            lo[i] = std::max(Integer(k1[i] + floor_q(dlo)), Integer(ulo[i] * width));
            hi[i] = std::min(Integer(k1[i] + ceil_q(dhi)), Integer((ulo[i] + 1) * width - 1));
          }
          std::vector<Integer> k2(lo);
          bool empty = false;
          for (int i = 0; i < p.d; ++i) empty |= lo[i] > hi[i];
          while (!empty) {
            Address t2 = address_from_index(k2, p.M, p.J);
            if (youngest_common_ancestor(t1, t2) == u && is_sticky_admissible(p, {t1, t2}, {v1, v2}) &&
                intersects(tubes.get(t1, v1), tubes.get(t2, v2), slab))
              out.push_back({{t1, t2}, {v1, v2}});
            int i = 0;
            while (i < p.d && k2[i] == hi[i]) k2[i] = lo[i], ++i;
            if (i == p.d) break;
            ++k2[i];
          }
        }
  }
  return sorted_unique(std::move(out));
}

std::vector<TubeTuple> enumerate_E2_bruteforce(const Address& u, const Address& omega, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  splitting_at(p, omega);
  require(u.height() <= omega.height(), "h(u) <= h(omega) required");
  auto slab = w.slab(p);
  TubeCache tubes(p, w.a0);
  auto roots = root_cubes(p);
  std::vector<TubeTuple> out;
  for (const auto& t1 : roots)
    for (const auto& t2 : roots) {
      if (t1 == t2) continue;
      for (size_t v1 = 0; v1 < p.slopes.size(); ++v1)
        for (size_t v2 = 0; v2 < p.slopes.size(); ++v2) {
          if (youngest_common_ancestor(t1, t2) != u || slope_D(p, v1, v2) != omega) continue;
          if (!is_sticky_admissible(p, {t1, t2}, {v1, v2})) continue;
          if (intersects(tubes.get(t1, v1), tubes.get(t2, v2), slab)) out.push_back({{t1, t2}, {v1, v2}});
        }
    }
  return sorted_unique(std::move(out));
}

double e2_bound(const Address& u, const Address& omega, const CountingWindow& w, const PrunedSlopeTree& p) {
  double r = to_double(w.rho) * rho_of(p, omega);
  int d = p.d;
  return r * r * std::pow(2.0, 2 * (p.N - nu_of(p, omega))) * mpow(p.M, -(d - 1) * u.height() + (d + 1) * p.J);
}

E2Diagnostics diagnose_E2(const std::vector<TubeTuple>& e2, const Address& u, const Address& omega,
                          const CountingWindow& w, const PrunedSlopeTree& p) {
  E2Diagnostics g;
  g.size = e2.size();
  std::set<Address> first;
  std::map<std::tuple<Address, size_t, size_t>, size_t> slice;
  for (const auto& q : e2) {
    first.insert(q.roots[0]);
    g.max_slice = std::max(g.max_slice, ++slice[{q.roots[0], q.slopes[0], q.slopes[1]}]);
  }
  g.first_roots = first.size();
  double r = to_double(w.rho) * rho_of(p, omega);
  int d = p.d;
  g.slice_constant = g.max_slice / (r * mpow(p.M, p.J));
  g.projection_ratio = g.first_roots / (r * mpow(p.M, -(d - 1) * u.height() + d * p.J));
  g.size_ratio = g.size / e2_bound(u, omega, w, p);
  return g;
}

SlopeTriple canonical_triple(const PrunedSlopeTree& p, std::vector<Address> vs) {
  require(vs.size() == 3 || vs.size() == 4, "slope complexity needs three or four vertices");
  for (const auto& v : vs) splitting_at(p, v);
  if (vs.size() == 4) {
    std::set<Address> distinct_set(vs.begin(), vs.end());
    require(distinct_set.size() <= 3, "at most three distinct vertices allowed");
    int drop = -1;
    for (size_t a = 0; a < 4; ++a)
      for (size_t b = a + 1; b < 4; ++b)
        if (vs[a] == vs[b] && (drop < 0 || vs[a].height() > vs[drop].height())) drop = static_cast<int>(b);
    vs.erase(vs.begin() + drop);
  }
  auto nested = [](const Address& x, const Address& y) { return x.contains(y) || y.contains(x); };
  SlopeTriple t;
  bool found = false;
  for (int c = 0; c < 3 && !found; ++c) {
    const Address& x = vs[(c + 1) % 3];
    const Address& y = vs[(c + 2) % 3];
    if (nested(x, y)) continue;
    require(vs[c].contains(x) && vs[c].contains(y), "two disjoint vertices need a common third container");
    t.w1 = vs[c];
    bool xdeeper = x.height() > y.height() || (x.height() == y.height() && y < x);
    t.w3 = xdeeper ? x : y;
    t.w2 = xdeeper ? y : x;
    found = true;
  }
  if (!found) {
    std::sort(vs.begin(), vs.end(), [](const Address& a, const Address& b) { return a.height() < b.height(); });
    t.w1 = vs[0], t.w2 = vs[1], t.w3 = vs[2];
  }
  std::vector<Address> seen;
  for (const Address* w : {&t.w1, &t.w2, &t.w3}) {
    auto it = std::find(seen.begin(), seen.end(), *w);
    if (it == seen.end()) seen.push_back(*w), it = seen.end() - 1;
    t.pattern += static_cast<char>('a' + (it - seen.begin()));
  }
  return t;
}

int slope_complexity(const PrunedSlopeTree& p, const SlopeTriple& t) {
  int n1 = nu_of(p, t.w1), n2 = nu_of(p, t.w2), n3 = nu_of(p, t.w3);
  return t.w2.contains(t.w3) ? 2 * n3 + n2 + n1 : 2 * (n3 + n2);
}

int slope_complexity(const PrunedSlopeTree& p, const std::vector<Address>& vertices) {
  return slope_complexity(p, canonical_triple(p, vertices));
}

int slope_complexity_hat(const PrunedSlopeTree& p, const std::vector<Address>& vertices) {
  require(vertices.size() == 2 || vertices.size() == 3, "m-hat needs two or three vertices");
  for (const auto& v : vertices) splitting_at(p, v);
  std::set<Address> ds(vertices.begin(), vertices.end());
  require(ds.size() <= 2, "at most two distinct vertices allowed");
  Address a = *ds.begin(), b = *ds.rbegin();
  require(a.contains(b) || b.contains(a), "vertices must be nested");
  if (b.contains(a)) std::swap(a, b);
  return 2 * nu_of(p, b) + nu_of(p, a);
}

namespace {

// rows[a][b]: splitting row of D(w_a, w_b), or -1 when a == b.
std::vector<std::vector<int>> ancestor_rows(const PrunedSlopeTree& p) {
  size_t n = p.slopes.size();
  std::vector<std::vector<int>> rows(n, std::vector<int>(n, -1));
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b)
      if (a != b) rows[a][b] = p.row_of(slope_D(p, a, b));
  return rows;
}

}  // namespace

size_t count_slope_quadruples(const PrunedSlopeTree& p, const SlopeTriple& t,
                              const std::array<std::pair<int, int>, 3>& pairs) {
  std::set<int> used;
  for (auto [i, j] : pairs) {
    require(i != j && i >= 0 && i < 4 && j >= 0 && j < 4, "index pairs must be distinct positions in 0..3");
    used.insert(i), used.insert(j);
  }
  require(used.size() == 4, "index pairs must cover all four positions");
  auto rows = ancestor_rows(p);
  std::array<int, 3> target{p.row_of(t.w1), p.row_of(t.w2), p.row_of(t.w3)};
  size_t n = p.slopes.size(), count = 0;
  std::array<size_t, 4> w{};
  for (w[0] = 0; w[0] < n; ++w[0])
    for (w[1] = 0; w[1] < n; ++w[1])
      for (w[2] = 0; w[2] < n; ++w[2])
        for (w[3] = 0; w[3] < n; ++w[3]) {
          bool ok = true;
          for (int k = 0; k < 3 && ok; ++k) ok = rows[w[pairs[k].first]][w[pairs[k].second]] == target[k];
          count += ok;
        }
  return count;
}

size_t count_slope_triples(const PrunedSlopeTree& p, const Address& w1, const Address& w2,
                           const std::array<std::pair<int, int>, 2>& pairs) {
  std::set<int> used;
  for (auto [i, j] : pairs) {
    require(i != j && i >= 0 && i < 3 && j >= 0 && j < 3, "index pairs must be distinct positions in 0..2");
    used.insert(i), used.insert(j);
  }
  require(used.size() == 3, "index pairs must cover all three positions");
  auto rows = ancestor_rows(p);
  std::array<int, 2> target{p.row_of(w1), p.row_of(w2)};
  size_t n = p.slopes.size(), count = 0;
  std::array<size_t, 3> w{};
  for (w[0] = 0; w[0] < n; ++w[0])
    for (w[1] = 0; w[1] < n; ++w[1])
      for (w[2] = 0; w[2] < n; ++w[2])
        count += rows[w[pairs[0].first]][w[pairs[0].second]] == target[0] &&
                 rows[w[pairs[1].first]][w[pairs[1].second]] == target[1];
  return count;
}

std::vector<TubeTuple> enumerate_E4(int type, const Anchors& anchors, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  validate_anchors(type, anchors, p, true);
  const Address& u2 = type == 3 ? *anchors.u : *anchors.u2;
  if (anchors.u->height() > anchors.omega->height() || u2.height() > anchors.omega2->height()) return {};
  auto first = enumerate_E2(*anchors.u, *anchors.omega, w, p, limits);
  auto second = enumerate_E2(u2, *anchors.omega2, w, p, limits);
  std::vector<TubeTuple> out;
  for (const auto& a : first)
    for (const auto& b : second) {
      TubeTuple q{{a.roots[0], a.roots[1], b.roots[0], b.roots[1]}, {a.slopes[0], a.slopes[1], b.slopes[0], b.slopes[1]}};
      if (!matches_E4(type, anchors, q, p)) continue;
      check_necessary(type, anchors, q, w, p);
      out.push_back(std::move(q));
    }
  return sorted_unique(std::move(out));
}

std::vector<TubeTuple> enumerate_E4_bruteforce(int type, const Anchors& anchors, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  validate_anchors(type, anchors, p, true);
  TubeCache tubes(p, w.a0);
  const Address& u2 = type == 3 ? *anchors.u : *anchors.u2;
  auto first = scan_pairs(p, w, tubes, *anchors.u, *anchors.omega);
  auto second = scan_pairs(p, w, tubes, u2, *anchors.omega2);
  std::vector<TubeTuple> out;
  for (const auto& a : first)
    for (const auto& b : second) {
      TubeTuple q{{a.roots[0], a.roots[1], b.roots[0], b.roots[1]}, {a.slopes[0], a.slopes[1], b.slopes[0], b.slopes[1]}};
      if (matches_E4(type, anchors, q, p)) out.push_back(std::move(q));
    }
  return sorted_unique(std::move(out));
}

std::vector<TubeTuple> enumerate_E3(int type, const Anchors& anchors, const CountingWindow& w,
                                    const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  validate_anchors(type, anchors, p, false);
  const Address& u2 = type == 1 ? *anchors.u2 : *anchors.u;
  if (anchors.u->height() > anchors.omega->height() || u2.height() > anchors.omega2->height()) return {};
  auto first = enumerate_E2(*anchors.u, *anchors.omega, w, p, limits);
  auto second = enumerate_E2(u2, *anchors.omega2, w, p, limits);
  std::map<std::pair<Address, size_t>, std::vector<const TubeTuple*>> by_first;
  for (const auto& b : second) by_first[{b.roots[0], b.slopes[0]}].push_back(&b);
  std::vector<TubeTuple> out;
  for (const auto& a : first) {
    auto it = by_first.find({a.roots[0], a.slopes[0]});
    if (it == by_first.end()) continue;
    for (const TubeTuple* b : it->second) {
      TubeTuple q{{a.roots[0], a.roots[1], b->roots[1]}, {a.slopes[0], a.slopes[1], b->slopes[1]}};
      if (matches_E3(type, anchors, q, p)) out.push_back(std::move(q));
    }
  }
  return sorted_unique(std::move(out));
}

std::vector<TubeTuple> enumerate_E3_bruteforce(int type, const Anchors& anchors, const CountingWindow& w,
                                               const PrunedSlopeTree& p, const CountingLimits& limits) {
  check_cap(p, limits);
  validate_anchors(type, anchors, p, false);
  TubeCache tubes(p, w.a0);
  const Address& u2 = type == 1 ? *anchors.u2 : *anchors.u;
  auto first = scan_pairs(p, w, tubes, *anchors.u, *anchors.omega);
  auto second = scan_pairs(p, w, tubes, u2, *anchors.omega2);
  std::vector<TubeTuple> out;
  for (const auto& a : first)
    for (const auto& b : second) {
      if (a.roots[0] != b.roots[0] || a.slopes[0] != b.slopes[0]) continue;
      TubeTuple q{{a.roots[0], a.roots[1], b.roots[1]}, {a.slopes[0], a.slopes[1], b.slopes[1]}};
      if (matches_E3(type, anchors, q, p)) out.push_back(std::move(q));
    }
  return sorted_unique(std::move(out));
}

int tuple_type(const TubeTuple& q) { return distinct(q.roots) ? classify_roots(q.roots).type : 0; }

Anchors anchors_of(int type, const TubeTuple& q, const PrunedSlopeTree& p) {
  const auto& t = q.roots;
  const auto& v = q.slopes;
  auto D = youngest_common_ancestor;
  Anchors a;
  if (t.size() == 3) {
    a.u = D(t[0], t[1]);
    a.omega = slope_D(p, v[0], v[1]);
    a.omega2 = slope_D(p, v[0], v[2]);
    if (type == 1) a.u2 = D(t[0], t[2]);
    else a.t = D(t[1], t[2]), a.theta = slope_D(p, v[1], v[2]);
    return a;
  }
  require(t.size() == 4, "anchors need a triple or a quadruple");
  a.u = D(t[0], t[1]);
  a.omega = slope_D(p, v[0], v[1]);
  a.omega2 = slope_D(p, v[2], v[3]);
  if (type != 3) a.u2 = D(t[2], t[3]);
  if (type == 1) a.z = D(*a.u, *a.u2), a.v = D(*a.omega, *a.omega2);
  if (type == 2) a.t = D(t[1], t[3]), a.theta = slope_D(p, v[1], v[3]);
  if (type == 3) {
    a.s1 = D(t[0], t[2]), a.s2 = D(t[1], t[3]);
    a.theta1 = slope_D(p, v[0], v[2]), a.theta2 = slope_D(p, v[1], v[3]);
  }
  return a;
}

double e3_bound(int type, const Anchors& a, const CountingWindow& w, const PrunedSlopeTree& p) {
  validate_anchors(type, a, p, false);
  const int d = p.d, J = p.J, M = p.M, N = p.N;
  double rho = to_double(w.rho);
  double r_w = rho * rho_of(p, *a.omega), r_w2 = rho * rho_of(p, *a.omega2);
  double delta = std::min(r_w, r_w2);
  if (type == 1) {
    int m = slope_complexity_hat(p, {*a.omega, *a.omega2});
    return delta * rho * r_w2 * rho_of(p, *a.omega) * std::pow(2.0, 3 * N - m) *
           mpow(M, -(d - 1) * (a.u->height() + a.u2->height()) + (2 * d + 1) * J);
  }
  int m = slope_complexity_hat(p, {*a.omega, *a.omega2, *a.theta});
  double side = mpow(M, -a.t->height());
  return delta * std::min(r_w, side) * std::min(r_w2, side) * std::pow(2.0, 3 * N - m) *
         mpow(M, -2 * (d - 1) * a.t->height() + (2 * d + 1) * J);
}

double e4_bound(int type, const Anchors& a, const CountingWindow& w, const PrunedSlopeTree& p) {
  validate_anchors(type, a, p, true);
  const int d = p.d, J = p.J, M = p.M, N = p.N;
  double rho = to_double(w.rho);
  double p_w = rho_of(p, *a.omega), p_w2 = rho_of(p, *a.omega2);
  double r_w = rho * p_w, r_w2 = rho * p_w2;
  if (type == 1) {
    double f = rho * rho * p_w * p_w2;
    return f * f * std::pow(2.0, 4 * N - 2 * (nu_of(p, *a.omega) + nu_of(p, *a.omega2))) *
           mpow(M, -(d - 1) * (a.u->height() + a.u2->height()) + 2 * (d + 1) * J);
  }
  if (type == 2) {
    int m = slope_complexity(p, std::vector<Address>{*a.omega, *a.omega2, *a.theta});
    double side = mpow(M, -a.t->height());
    if (a.t->contains(*a.u2))
      return rho * rho * rho * p_w2 * p_w2 * p_w * std::min(r_w, side) * std::pow(2.0, 4 * N - m) *
             mpow(M, -(d - 1) * (a.t->height() + a.u2->height()) + 2 * (d + 1) * J);
    return rho * rho * p_w * p_w2 * std::pow(2.0, 4 * N - m) * std::min(r_w, side) * std::min(r_w2, side) *
           mpow(M, -2 * (d - 1) * a.t->height() + 2 * (d + 1) * J);
  }
  int m = slope_complexity(p, std::vector<Address>{*a.omega, *a.omega2, *a.theta1, *a.theta2});
  double prod = 1;
  for (const Address* s : {&*a.s1, &*a.s2}) {
    double side = mpow(M, -s->height());
    prod *= std::min(r_w, side) * std::min(r_w2, side);
  }
  return std::pow(2.0, 4 * N - m) * mpow(M, -2 * (d - 1) * a.s2->height() + 2 * (d + 1) * J) * prod;
}

double SummationReport::max_ratio(const std::string& lemma, const std::string& regime) const {
  double best = 0;
  for (const auto& r : rows)
    if (r.lemma == lemma && r.regime == regime) best = std::max(best, r.ratio());
  return best;
}

SummationReport summation_diagnostics(const PrunedSlopeTree& p) {
  SummationReport rep;
  const int M = p.M, d = p.d, N = p.N;
  auto pow2 = [](double e) { return std::pow(2.0, e); };
  for (const auto& s0 : p.splitting) {
    const int nu0 = s0.index, h0 = s0.vertex.height();
    std::vector<const SplittingVertex*> below;
    for (const auto& s : p.splitting)
      if (s0.vertex.contains(s.vertex)) below.push_back(&s);
    Rational exact = 0;
    for (const auto* s : below) exact += Rational(Integer(1), ipow(2, s->index));
    if (exact > Rational(Integer(N), ipow(2, nu0))) rep.unit_exponent_holds = false;
    for (double alpha : {0.5, 1.0, 2.0}) {
      double lhs = 0;
      for (const auto* s : below) lhs += pow2(-alpha * s->index);
      double rhs = alpha > 1 ? pow2(-alpha * nu0) : alpha == 1 ? N * pow2(-nu0) : pow2(-alpha * nu0 + N * (1 - alpha));
      const char* regime = alpha > 1 ? "alpha>1" : alpha == 1 ? "alpha=1" : "alpha<1";
      rep.rows.push_back({"splitting", regime, fmt::format("{};alpha={}", s0.vertex.str(), alpha), lhs, rhs});
    }
    for (double alpha : {1.0, 2.0})
      for (double beta : {0.5, 1.0, 2.0}) {
        double lhs = 0;
        for (const auto* s : below) lhs += std::pow(M, -beta * s->vertex.height()) * pow2(-alpha * s->index);
        double rhs = std::pow(M, -beta * h0) * pow2(-alpha * nu0);
        rep.rows.push_back({"weighted-splitting", "alpha>=1",
                            fmt::format("{};alpha={};beta={}", s0.vertex.str(), alpha, beta), lhs, rhs});
      }
    // Root-tree sums over z inside y with h(y) <= h(z) <= h(varpi).
    std::vector<int> mus(h0 + 1);
    for (int k = 0; k <= h0; ++k) mus[k] = mu(p, s0.vertex, k);
    struct Beta {
      double value;
      const char* regime;
    };
    std::vector<Beta> betas{{d - 0.5, "beta<d"}, {d - 1.0, "beta<d"}, {double(d), "beta=d"},
                            {d + 0.5, "beta>d"}, {d + 2.0, "2M^d<M^beta"}};
    for (int hy = 0; hy <= h0; ++hy)
      for (const auto& b : betas) {
        double lhs = 0;
        for (int k = hy; k <= h0; ++k) lhs += mpow(M, d * (k - hy)) * std::pow(M, -b.value * k) * pow2(mus[k]);
        double rhs;
        std::string regime = b.regime;
        if (regime == "beta<d") rhs = pow2(nu0) * std::pow(M, (d - b.value) * h0 - d * hy);
        else if (regime == "beta=d") rhs = pow2(nu0) * std::max(h0, 1) * mpow(M, -d * hy);
        else if (regime == "beta>d") rhs = pow2(nu0) * std::pow(M, -b.value * hy);
        else rhs = mpow(M, -d * hy);
        rep.rows.push_back({"root-tree", regime, fmt::format("{};h(y)={};beta={}", s0.vertex.str(), hy, b.value), lhs, rhs});
      }
    if (d < 2) continue;
    // Parallelepiped [0, long]^{d-r} x [0, short]^r anchored at the origin.
    for (int r = 1; r <= d - 1; ++r)
      for (int lb = 0; lb <= 1; ++lb)
        for (int sg = lb; sg <= std::min(lb + 2, p.J); ++sg)
          for (int eps_e = 0; eps_e <= std::min(h0, sg); ++eps_e) {
            double lng = mpow(M, -lb), sht = mpow(M, -sg), eps = mpow(M, -eps_e);
            auto count_in = [&](int k) {
              double c = 1;
              for (int i = 0; i < d; ++i) c *= std::floor((i < d - r ? lng : sht) * mpow(M, k) + 1e-9);
              return c;
            };
            for (double alpha : {d - r + 0.5, d + 0.5, d + 1.0}) {
              double plus = 0, minus = 0;
              for (int k = 0; k <= h0; ++k) {
                double s = mpow(M, -k);
                if (s > eps * (1 + 1e-12)) continue;
                double term = count_in(k) * std::pow(M, -alpha * k) * pow2(mus[k]);
                if (s >= sht * (1 - 1e-12)) plus += term;
                if (s <= sht * (1 + 1e-12)) minus += term;
              }
              std::string params = fmt::format("{};r={};long=M^-{};short=M^-{};eps=M^-{};alpha={}", s0.vertex.str(), r,
                                               lb, sg, eps_e, alpha);
              if (alpha > d - r && eps >= sht)
                rep.rows.push_back({"finer+", "s+", params, plus, pow2(nu0) * std::pow(lng, d - r) * std::pow(eps, alpha - d + r)});
              if (alpha > d)
                rep.rows.push_back({"finer-", "s-", params, minus,
                                    pow2(nu0) * std::pow(lng, d - r) * std::pow(sht, r) * std::pow(std::min(eps, sht), alpha - d)});
            }
          }
  }
  return rep;
}

std::string to_csv(const SummationReport& report) {
  std::string out = "lemma,regime,params,lhs,rhs,ratio\n";
  for (const auto& r : report.rows)
    out += fmt::format("{},{},\"{}\",{:.10g},{:.10g},{:.6g}\n", r.lemma, r.regime, r.params, r.lhs, r.rhs, r.ratio());
  return out;
}

}  // namespace tubelab
