#include "tubelab/tubes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tubelab {

namespace {

Rational abs_q(const Rational& q) { return q < 0 ? Rational(-q) : q; }

void check_same(const Tube& a, const Tube& b) {
  if (a.instance == nullptr || a.instance != b.instance || a.length != b.length || a.side != b.side)
    throw ValidationError("tubes belong to different instances");
}

// Window clipped to the extent [0, length] of the tubes.
std::pair<Rational, Rational> clip(const SlabWindow& w, const Rational& length) {
  Rational lo = w.lo < 0 ? Rational(0) : w.lo;
  Rational hi = w.hi > length ? length : w.hi;
  return {lo, hi};
}

// Coefficients in increasing degree.
using Poly = std::vector<Rational>;

Poly multiply(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, Rational(0));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Rational integrate(const Poly& p, const Rational& a, const Rational& b) {
  Rational fa = 0, fb = 0;
  for (size_t k = p.size(); k-- > 0;) {
    Rational c = p[k] / Rational(static_cast<long>(k + 1));
    fa = (fa + c) * a;
    fb = (fb + c) * b;
  }
  return fb - fa;
}

// Measure of the union of boxes [lo, hi] in the coordinates axis..end.
Rational box_union(const std::vector<std::pair<RationalPoint, RationalPoint>>& boxes, size_t axis) {
  if (boxes.empty()) return 0;
  size_t dim = boxes.front().first.size();
  if (axis + 1 == dim) {
    std::vector<std::pair<Rational, Rational>> iv;
    iv.reserve(boxes.size());
    for (const auto& b : boxes) iv.emplace_back(b.first[axis], b.second[axis]);
    std::sort(iv.begin(), iv.end());
    Rational total = 0, cur_lo = iv[0].first, cur_hi = iv[0].second;
    for (size_t i = 1; i < iv.size(); ++i) {
      if (iv[i].first > cur_hi) {
        total += cur_hi - cur_lo;
        cur_lo = iv[i].first;
        cur_hi = iv[i].second;
      } else if (iv[i].second > cur_hi) {
        cur_hi = iv[i].second;
      }
    }
    return total + (cur_hi - cur_lo);
  }
  std::vector<Rational> cuts;
  for (const auto& b : boxes) {
    cuts.push_back(b.first[axis]);
    cuts.push_back(b.second[axis]);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Rational total = 0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    std::vector<std::pair<RationalPoint, RationalPoint>> active;
    for (const auto& b : boxes)
      if (b.first[axis] <= cuts[k] && b.second[axis] >= cuts[k + 1]) active.push_back(b);
    if (!active.empty()) total += (cuts[k + 1] - cuts[k]) * box_union(active, axis + 1);
  }
  return total;
}

}  // namespace

Rational dilation_constant(int d) {
  if (d < 1) throw ValidationError("dimension must be positive");
  if (d == 1) return Rational(1, 4);
  return Rational(Integer(1), ipow(d, 2L * d));
}

RationalPoint Tube::cross_centre(const Rational& x1) const {
  RationalPoint c = centre;
  for (size_t i = 0; i < c.size(); ++i) c[i] += x1 * direction[i];
  return c;
}

bool Tube::contains(const RationalPoint& x) const {
  if (x.size() != centre.size() + 1) throw ValidationError("point has the wrong dimension");
  if (x[0] < 0 || x[0] > length) return false;
  Rational half = side / 2;
  for (size_t i = 0; i < centre.size(); ++i)
    if (abs_q(x[i + 1] - centre[i] - x[0] * direction[i]) > half) return false;
  return true;
}

Tube make_tube(const PrunedSlopeTree& p, const Address& root, size_t slope, const Rational& a0) {
  if (root.d != p.d || root.height() != p.J) throw ValidationError("not a root cube: " + root.str());
  if (slope >= p.slopes.size()) throw ValidationError("slope index out of range");
  if (a0 <= 0) throw ValidationError("A0 must be positive");
  Tube t;
  t.instance = &p;
  t.root = root;
  t.slope = slope;
  t.centre = root.centre(p.M);
  t.direction = p.slopes[slope];
  t.side = dilation_constant(p.d) * Rational(Integer(1), ipow(p.M, p.J));
  t.length = 10 * a0;
  return t;
}

nlohmann::json to_json(const Tube& tube) {
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& q : tube.direction) dir.push_back(to_string(q));
  return {{"root", tube.root.str()}, {"slope", tube.slope}, {"direction", dir},
          {"side", to_string(tube.side)}, {"length", to_string(tube.length)}};
}

SlabWindow::SlabWindow(Rational a, Rational b) : lo(std::move(a)), hi(std::move(b)) {
  if (!(lo < hi)) throw ValidationError("slab window must have positive width");
}

SlabWindow SlabWindow::scaled(const Rational& rho, const Rational& c1, const PrunedSlopeTree& p,
                              const Rational& a0) {
  if (rho < Rational(Integer(1), ipow(p.M, p.J)) || rho > 10 * a0)
    throw ValidationError("window scale outside [M^-J, 10 A0]");
  if (c1 <= 1) throw ValidationError("window ratio must exceed 1");
  return SlabWindow(rho, c1 * rho);
}

SlabWindow SlabWindow::level(int M, int R) {
  if (R < 1) throw ValidationError("slab level must be positive");
  return SlabWindow(Rational(Integer(1), ipow(M, R)), Rational(Integer(1), ipow(M, R - 1)));
}

OverlapInterval overlap_interval(const Tube& a, const Tube& b, const SlabWindow& w) {
  check_same(a, b);
  auto [lo, hi] = clip(w, a.length);
  for (size_t i = 0; i < a.centre.size() && lo < hi; ++i) {
    Rational delta = b.centre[i] - a.centre[i];
    Rational slope = b.direction[i] - a.direction[i];
    if (slope == 0) {
      if (abs_q(delta) >= a.side) hi = lo;
      continue;
    }
    Rational e1 = (-a.side - delta) / slope, e2 = (a.side - delta) / slope;
    if (e1 > e2) std::swap(e1, e2);
    if (e1 > lo) lo = e1;
    if (e2 < hi) hi = e2;
  }
  return {lo, hi};
}

bool intersects(const Tube& a, const Tube& b, const SlabWindow& w) {
  auto iv = overlap_interval(a, b, w);
  if (iv.empty()) return false;
  if (a.root != b.root) {
    const auto& p = *a.instance;
    Rational x1 = (iv.lo + iv.hi) / 2;
    Rational unit = Rational(Integer(1), ipow(p.M, p.J));
    Rational gap = 0, spread = 0;
    for (size_t i = 0; i < a.centre.size(); ++i) {
      Rational g = b.centre[i] - a.centre[i] + x1 * (b.direction[i] - a.direction[i]);
      Rational s = b.direction[i] - a.direction[i];
      gap += g * g;
      spread += s * s;
    }
    Rational cd = dilation_constant(p.d);
    if (gap > 4 * cd * cd * p.d * unit * unit)
      throw std::logic_error("intersecting tubes violate the centre inequality");
    if (4 * x1 * x1 * spread < unit * unit)
      throw std::logic_error("intersecting tubes violate |x1||v - v'| >= M^-J / 2");
  }
  return true;
}

Rational pair_intersection_volume(const Tube& a, const Tube& b, const SlabWindow& w) {
  auto iv = overlap_interval(a, b, w);
  if (iv.empty()) return 0;
  size_t d = a.centre.size();
  std::vector<Rational> delta(d), slope(d);
  std::vector<Rational> cuts{iv.lo, iv.hi};
  for (size_t i = 0; i < d; ++i) {
    delta[i] = b.centre[i] - a.centre[i];
    slope[i] = b.direction[i] - a.direction[i];
    if (slope[i] == 0) continue;
    for (const Rational& target : {Rational(-a.side), Rational(0), a.side}) {
      Rational x = (target - delta[i]) / slope[i];
      if (x > iv.lo && x < iv.hi) cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Rational total = 0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    Rational mid = (cuts[k] + cuts[k + 1]) / 2;
    Poly prod{Rational(1)};
    for (size_t i = 0; i < d; ++i) {
      // side - |delta + slope x| on this piece.
      bool negative = delta[i] + slope[i] * mid < 0;
      Poly f = negative ? Poly{a.side + delta[i], slope[i]} : Poly{a.side - delta[i], Rational(-slope[i])};
      prod = multiply(prod, f);
    }
    total += integrate(prod, cuts[k], cuts[k + 1]);
  }
  return total;
}

Rational tube_slab_volume(const Tube& tube, const SlabWindow& w) {
  auto [lo, hi] = clip(w, tube.length);
  if (lo >= hi) return 0;
  Rational cross = 1;
  for (size_t i = 0; i < tube.centre.size(); ++i) cross *= tube.side;
  return cross * (hi - lo);
}

double intersection_size_ratio(const Tube& a, const Tube& b, const SlabWindow& w) {
  const auto& p = *a.instance;
  double unit = std::pow(static_cast<double>(p.M), -p.J);
  double dist = 0;
  for (size_t i = 0; i < a.direction.size(); ++i) {
    double s = to_double(b.direction[i] - a.direction[i]);
    dist += s * s;
  }
  double vol = to_double(pair_intersection_volume(a, b, w));
  return vol * (unit + std::sqrt(dist)) / std::pow(unit, p.d + 1);
}

Rational slice_union_measure(const std::vector<Tube>& tubes, const Rational& x1) {
  std::vector<std::pair<RationalPoint, RationalPoint>> boxes;
  for (const auto& t : tubes) {
    if (x1 < 0 || x1 > t.length) continue;
    RationalPoint c = t.cross_centre(x1), lo = c, hi = c;
    Rational half = t.side / 2;
    for (size_t i = 0; i < c.size(); ++i) {
      lo[i] -= half;
      hi[i] += half;
    }
    boxes.emplace_back(std::move(lo), std::move(hi));
  }
  return box_union(boxes, 0);
}

UnionVolume union_volume(const std::vector<Tube>& tubes, const SlabWindow& w, int slices) {
  if (tubes.empty()) throw ValidationError("union of an empty tube list");
  if (slices < 1) throw ValidationError("slice count must be positive");
  for (const auto& t : tubes) check_same(tubes.front(), t);
  UnionVolume out;
  Rational h = w.width() / slices;
  for (int k = 0; k < slices; ++k) out.estimate += h * slice_union_measure(tubes, w.lo + (Rational(k) + Rational(1, 2)) * h);
  Rational mass = 0, pairs = 0;
  for (size_t i = 0; i < tubes.size(); ++i) {
    mass += tube_slab_volume(tubes[i], w);
    pairs += tube_slab_volume(tubes[i], w);
    for (size_t j = i + 1; j < tubes.size(); ++j) pairs += 2 * pair_intersection_volume(tubes[i], tubes[j], w);
  }
  out.lower_bound = pairs == 0 ? Rational(0) : Rational(mass * mass / pairs);
  return out;
}

namespace {

void check_point(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0) {
  if (x.size() != static_cast<size_t>(p.d) + 1) throw ValidationError("point has the wrong dimension");
  if (x[0] < a0 || x[0] > 10 * a0) throw ValidationError("x1 must lie in [A0, 10 A0]");
}

// x' - x1 w when it lies in [0,1)^d.
std::optional<RationalPoint> trace(const RationalPoint& x, const RationalPoint& w) {
  RationalPoint y(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    y[i] = x[i + 1] - x[0] * w[i];
    if (y[i] < 0 || y[i] >= 1) return std::nullopt;
  }
  return y;
}

void sort_possible(Possible& out) {
  std::vector<size_t> order(out.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return out.roots[a] < out.roots[b]; });
  Possible sorted;
  for (size_t i : order) {
    sorted.roots.push_back(out.roots[i]);
    sorted.slopes.push_back(out.slopes[i]);
  }
  out = std::move(sorted);
}

}  // namespace

Possible poss(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0) {
  check_point(x, p, a0);
  Possible out;
  std::map<Address, size_t> seen;
  for (size_t s = 0; s < p.slopes.size(); ++s) {
    auto y = trace(x, p.slopes[s]);
    if (!y) continue;
    Address t = address_of(*y, p.M, p.J);
    if (!seen.emplace(t, s).second)
      throw InfeasibleError("root " + t.str() + " admits two slopes; C0 A0 too small");
    out.roots.push_back(t);
    out.slopes.push_back(s);
  }
  sort_possible(out);
  return out;
}

Possible poss_through_tubes(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0) {
  check_point(x, p, a0);
  Possible out;
  for (size_t s = 0; s < p.slopes.size(); ++s) {
    auto y = trace(x, p.slopes[s]);
    if (!y) continue;
    Address t = address_of(*y, p.M, p.J);
    if (make_tube(p, t, s, a0).contains(x)) {
      out.roots.push_back(t);
      out.slopes.push_back(s);
    }
  }
  sort_possible(out);
  return out;
}

std::vector<size_t> ReferenceTree::counts() const {
  std::vector<size_t> n;
  for (const auto& level : levels) n.push_back(level.size());
  return n;
}

double ReferenceTree::growth_constant() const {
  double c = 0;
  for (size_t j = 0; j < levels.size(); ++j) c = std::max(c, std::ldexp(static_cast<double>(levels[j].size()), -static_cast<int>(j + 1)));
  return c;
}

ReferenceTree reference_trees(const RationalPoint& x, const PrunedSlopeTree& p, const Rational& a0) {
  ReferenceTree tree;
  tree.x = x;
  tree.possible = poss(x, p, a0);
  const auto& roots = tree.possible.roots;
  const auto& slopes = tree.possible.slopes;
  for (size_t i = 0; i < roots.size(); ++i)
    for (size_t k = i + 1; k < roots.size(); ++k) {
      Address w = youngest_common_ancestor(p.slope_address(slopes[i]), p.slope_address(slopes[k]));
      int row = p.row_of(w);
      if (row < 0) throw std::logic_error("slopes meet outside a splitting vertex");
      if (youngest_common_ancestor(roots[i], roots[k]).height() >= p.splitting[row].lambda)
        throw InfeasibleError("possible roots " + roots[i].str() + " and " + roots[k].str() +
                              " are not weakly sticky; increase C0 or A0");
    }
  tree.levels.assign(p.N, {});
  tree.rays.assign(roots.size(), std::vector<int>(p.N, -1));
  std::vector<std::map<Address, int>> index(p.N);
  for (size_t i = 0; i < roots.size(); ++i) {
    auto bits = p.bits_of(slopes[i]);
    int parent = -1;
    for (int j = 1; j <= p.N; ++j) {
      ReferenceVertex v{roots[i].ancestor(p.eta(slopes[i], j)), p.basic_cube(slopes[i], j), bits[j - 1], parent};
      auto& level = tree.levels[j - 1];
      auto [it, inserted] = index[j - 1].emplace(v.cube, static_cast<int>(level.size()));
      if (inserted) {
        level.push_back(v);
      } else {
        const auto& old = level[it->second];
        if (old.image != v.image || old.label != v.label || old.parent != v.parent)
          throw std::logic_error("reference vertex " + v.cube.str() + " is not well defined");
      }
      if (parent >= 0 && !tree.levels[j - 2][parent].image.strictly_contains(v.image))
        throw std::logic_error("image map does not preserve lineage");
      parent = it->second;
      tree.rays[i][j - 1] = parent;
    }
  }
  return tree;
}

Inclusion inclusion_check(const RationalPoint& x, const StickyMap& sigma, const Rational& a0) {
  const auto& p = sigma.slope_tree();
  Inclusion out;
  auto possible = poss(x, p, a0);
  for (size_t i = 0; i < possible.size(); ++i) {
    const Address& t = possible.roots[i];
    size_t v = possible.slopes[i];
    auto bits = p.bits_of(v);
    bool ray = true;
    for (int j = 1; j <= p.N && ray; ++j) ray = sigma.warehouse().bit(t.ancestor(p.eta(v, j))) == bits[j - 1];
    bool on_tube = sigma.sigma(t) == v && make_tube(p, t, v, a0).contains(x);
    if (ray && (!out.witness || on_tube)) out.witness = t;
    if (on_tube) {
      out.member = true;
      break;
    }
  }
  return out;
}

}  // namespace tubelab
