#include "tubelab/lacunarity.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "tubelab/madic_tree.hpp"

namespace tubelab {

namespace {

Rational rabs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

std::vector<Rational> sorted_unique(std::vector<Rational> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Integer floor_scaled(const Rational& x, const Integer& scale) {
  Rational s = x * Rational(scale);
  Integer q;
  mpz_fdiv_q(q.get_mpz_t(), s.get_num_mpz_t(), s.get_den_mpz_t());
  return q;
}

}  // namespace

bool verify_sequence(const LacunarySequence& s, const Rational& lambda) {
  if (lambda <= 0 || lambda >= 1) return false;
  for (size_t j = 0; j + 1 < s.terms.size(); ++j)
    if (rabs(s.terms[j + 1] - s.limit) > lambda * rabs(s.terms[j] - s.limit)) return false;
  return true;
}

bool verify_witness(const std::vector<Rational>& set, const LacunaryWitness& w) {
  auto points = sorted_unique(set);
  if (w.order < 0) throw ValidationError("negative witness order");
  if (w.order == 0) return points.size() <= 1;
  if (w.lambda <= 0 || w.lambda >= 1) return false;
  if (w.sequence.empty()) return points.empty();
  if (!verify_sequence({w.sequence, w.limit}, w.lambda)) return false;
  auto terms = w.sequence;
  std::sort(terms.begin(), terms.end());
  if (std::adjacent_find(terms.begin(), terms.end()) != terms.end())
    throw ValidationError("special sequence has repeated terms");

  Rational lo = std::min(terms.front(), w.limit), hi = std::max(terms.back(), w.limit);
  auto gap_index = [&](const Rational& a) -> long {
    auto it = std::lower_bound(terms.begin(), terms.end(), a);
    if (it == terms.end() || *it != a) return -1;
    return it - terms.begin();
  };
  auto valid_gap = [&](long i) {
    if (i < 0 || i + 1 >= static_cast<long>(terms.size())) return false;
    return !(terms[i] < w.limit && w.limit < terms[i + 1]);
  };

  std::map<long, const LacunaryWitness*> child_of;
  for (const auto& [key, child] : w.children) {
    long i = gap_index(key);
    if (!valid_gap(i)) throw ValidationError("child witness key is not a gap endpoint: " + to_string(key));
    if (!child_of.emplace(i, &child).second) throw ValidationError("overlapping gap witnesses");
  }

  std::map<long, std::vector<Rational>> by_gap;
  for (const auto& u : points) {
    if (u <= lo || u >= hi) return false;
    auto it = std::upper_bound(terms.begin(), terms.end(), u);
    if (it == terms.begin()) return false;
    long i = (it - terms.begin()) - 1;
    if (!valid_gap(i)) return false;
    by_gap[i].push_back(u);
  }
  for (const auto& [i, pts] : by_gap) {
    auto c = child_of.find(i);
    if (c == child_of.end()) {
      if (pts.size() > 1) return false;
      continue;
    }
    if (c->second->order > w.order - 1) return false;
    if (!verify_witness(pts, *c->second)) return false;
  }
  return true;
}

int separating_height(const std::vector<Rational>& set, int M) {
  auto pts = sorted_unique(set);
  int J = 0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    int h = 0;
    Integer scale = 1;
    while (floor_scaled(pts[i], scale) == floor_scaled(pts[i + 1], scale)) {
      ++h;
      scale *= M;
      if (h > 8192) throw ValidationError("points too close to separate");
    }
    J = std::max(J, h);
  }
  return J;
}

namespace {

struct RayEntry {
  Rational value;  // point or cube left endpoint
  int height;      // h(D(star, value))
  int digit;       // digit of value at level height+1
  int side;        // +1 right of star, -1 left
  size_t tag;      // caller payload
};

// Groups off-ray entries by side and branching digit, then thins by index mod 3.
std::vector<std::vector<RayEntry>> split_one_groups(std::vector<RayEntry> entries) {
  std::map<std::pair<int, int>, std::vector<RayEntry>> groups;
  for (auto& e : entries) groups[{e.side, e.digit}].push_back(std::move(e));
  std::vector<std::vector<RayEntry>> out;
  for (auto& [key, g] : groups) {
    std::sort(g.begin(), g.end(), [](const RayEntry& a, const RayEntry& b) { return a.height < b.height; });
    for (size_t k = 1; k < g.size(); ++k)
      if (g[k].height == g[k - 1].height)
        throw ValidationError("two off-ray branches at the same height and digit: splitting number exceeds 1");
    for (size_t l = 0; l < 3; ++l) {
      std::vector<RayEntry> seq;
      for (size_t k = l; k < g.size(); k += 3) seq.push_back(g[k]);
      if (!seq.empty()) out.push_back(std::move(seq));
    }
  }
  return out;
}

std::vector<RationalPoint> as_points(const std::vector<Rational>& v) {
  std::vector<RationalPoint> p;
  p.reserve(v.size());
  for (const auto& x : v) p.push_back({x});
  return p;
}

// Ray from the root that follows a maximal-split child at every step (ties: first child).
Address descend_max_split(const MadicTree& tree, SplitCalculator& calc) {
  Address v = tree.root();
  while (true) {
    const auto& ch = tree.children(v);
    if (ch.empty()) return v;
    const Address* best = &ch.front();
    int bs = calc.split(ch.front());
    for (const auto& c : ch) {
      int s = calc.split(c);
      if (s > bs) {
        bs = s;
        best = &c;
      }
    }
    v = *best;
  }
}

void check_unit_interval(const std::vector<Rational>& pts) {
  for (const auto& x : pts)
    if (x < 0 || x >= 1) throw ValidationError("point outside [0,1): " + to_string(x));
}

}  // namespace

std::vector<LacunarySequence> decompose_split_one(const std::vector<Rational>& set, int M) {
  auto pts = sorted_unique(set);
  if (pts.empty()) return {};
  check_unit_interval(pts);
  if (pts.size() == 1) return {LacunarySequence{{pts[0]}, pts[0]}};
  int J = separating_height(pts, M);
  auto tree = MadicTree::encode_set(as_points(pts), M, J);
  SplitCalculator calc(tree);
  int s = calc.split(tree.root());
  if (s != 1) throw ValidationError("splitting number is " + std::to_string(s) + ", expected 1");
  Address leaf = descend_max_split(tree, calc);
  Rational star = tree.min_point(leaf)[0];
  std::vector<RayEntry> entries;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (pts[i] == star) continue;
    Address a = address_of({pts[i]}, M, J);
    int h = youngest_common_ancestor(a, leaf).height();
    entries.push_back({pts[i], h, a.digit(h, 0), pts[i] > star ? 1 : -1, i});
  }
  std::vector<LacunarySequence> out;
  for (auto& g : split_one_groups(std::move(entries))) {
    LacunarySequence seq{{}, star};
    for (auto& e : g) seq.terms.push_back(e.value);
    out.push_back(std::move(seq));
  }
  if (out.empty()) out.push_back({{}, star});
  out.front().terms.push_back(star);
  return out;
}

namespace {

LacunaryWitness order_zero() {
  LacunaryWitness w;
  w.order = 0;
  return w;
}

LacunaryDecomposition decompose_rec(const std::vector<Rational>& pts, int M) {
  LacunaryDecomposition out;
  if (pts.size() <= 1) {
    out.pieces.push_back({pts, order_zero()});
    return out;
  }
  int J = separating_height(pts, M);
  auto tree = MadicTree::encode_set(as_points(pts), M, J);
  SplitCalculator calc(tree);
  out.split = calc.split(tree.root());
  Address leaf = descend_max_split(tree, calc);
  Rational star = tree.min_point(leaf)[0];
  Rational lambda(1, M);

  struct OffRay {
    Address v;
    std::vector<Rational> points;
    LacunaryDecomposition sub;
  };
  std::vector<OffRay> off;
  for (int h = 0; h < leaf.height(); ++h) {
    Address r = leaf.ancestor(h);
    Address next = leaf.ancestor(h + 1);
    for (const auto& c : tree.children(r)) {
      if (c == next) continue;
      OffRay o{c, {}, {}};
      for (const auto& x : pts)
        if (c.contains(address_of({x}, M, J))) o.points.push_back(x);
      o.sub = decompose_rec(o.points, M);
      off.push_back(std::move(o));
    }
  }

  out.pieces.push_back({{star}, order_zero()});
  size_t C = 0;
  for (const auto& o : off) C = std::max(C, o.sub.pieces.size());
  for (size_t i = 0; i < C; ++i) {
    std::vector<RayEntry> entries;
    for (size_t k = 0; k < off.size(); ++k) {
      if (off[k].sub.pieces.size() <= i) continue;
      const Address& v = off[k].v;
      Rational a = v.corner(M)[0];
      entries.push_back({a, v.height() - 1, v.digit(v.height() - 1, 0), a > star ? 1 : -1, k});
    }
    for (const auto& seq : split_one_groups(std::move(entries))) {
      LacunaryPiece piece;
      LacunaryWitness& w = piece.witness;
      w.lambda = lambda;
      w.limit = star;
      int child_order = 0;
      const auto& first = seq.front();
      const auto& last = seq.back();
      Rational first_side = off[first.tag].v.side(M);
      if (first.side > 0) {
        Rational b = star + Rational(M) * (first.value - star);
        if (b < first.value + first_side) b = first.value + first_side;
        w.sequence.push_back(b);
      } else {
        w.sequence.push_back(star - Rational(M) * (star - first.value));
      }
      for (const auto& e : seq) {
        const auto& sub_piece = off[e.tag].sub.pieces[i];
        w.sequence.push_back(e.value);
        w.children.emplace_back(e.value, sub_piece.witness);
        child_order = std::max(child_order, sub_piece.witness.order);
        piece.points.insert(piece.points.end(), sub_piece.points.begin(), sub_piece.points.end());
      }
      if (last.side < 0) {
        const auto& lp = off[last.tag].sub.pieces[i].points;
        Rational top = *std::max_element(lp.begin(), lp.end());
        Rational c = star - lambda * (star - last.value);
        Rational mid = (top + star) / 2;
        w.sequence.push_back(c > mid ? c : mid);
      }
      w.order = std::max(1, child_order + 1);
      std::sort(piece.points.begin(), piece.points.end());
      out.pieces.push_back(std::move(piece));
    }
  }
  return out;
}

}  // namespace

LacunaryDecomposition decompose_lacunary_order(const std::vector<Rational>& set, int M) {
  auto pts = sorted_unique(set);
  check_unit_interval(pts);
  return decompose_rec(pts, M);
}

std::vector<Rational> project(const std::vector<RationalPoint>& points, const RationalPoint& direction) {
  Rational norm = 0;
  for (const auto& x : direction) norm += x * x;
  if (norm == 0) throw ValidationError("zero projection direction");
  std::vector<Rational> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != direction.size()) throw ValidationError("dimension mismatch in projection");
    Rational dot = 0;
    for (size_t i = 0; i < p.size(); ++i) dot += p[i] * direction[i];
    out.push_back(dot / norm);
  }
  return out;
}

std::vector<RationalPoint> cone_section(const std::vector<RationalPoint>& omega, int axis) {
  std::vector<RationalPoint> out;
  for (const auto& w : omega) {
    if (axis < 0 || axis >= static_cast<int>(w.size())) throw ValidationError("axis out of range");
    if (w[axis] == 0) throw ValidationError("direction has zero component on the section axis");
    RationalPoint p(w.size());
    for (size_t i = 0; i < w.size(); ++i) p[i] = w[i] / w[axis];
    out.push_back(std::move(p));
  }
  return out;
}

LacunaryWitness transform_witness(const LacunaryWitness& w, const Rational& c1, const Rational& c2) {
  if (c1 == 0) throw ValidationError("zero scale");
  LacunaryWitness t;
  t.order = w.order;
  t.lambda = w.lambda;
  t.limit = c1 * w.limit + c2;
  for (const auto& a : w.sequence) t.sequence.push_back(c1 * a + c2);
  if (w.children.empty()) return t;
  auto sorted = w.sequence;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [key, child] : w.children) {
    Rational new_key = c1 * key + c2;
    if (c1 < 0) {
      auto it = std::upper_bound(sorted.begin(), sorted.end(), key);
      if (it == sorted.end()) throw ValidationError("child key has no right gap endpoint");
      new_key = c1 * (*it) + c2;
    }
    t.children.emplace_back(new_key, transform_witness(child, c1, c2));
  }
  return t;
}

GeneratorSpec GeneratorSpec::parse(const std::string& text) {
  GeneratorSpec g;
  auto colon = text.find(':');
  g.kind = text.substr(0, colon);
  if (g.kind.empty()) throw ValidationError("empty generator kind");
  if (colon == std::string::npos) return g;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("generator parameter without value: " + item);
    g.params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return g;
}

std::string GeneratorSpec::param(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  if (it != params.end()) return it->second;
  if (fallback.empty()) throw ValidationError("generator " + kind + " needs parameter " + key);
  return fallback;
}

std::vector<Rational> stern_brocot(const Rational& lo, const Rational& hi, size_t count) {
  std::vector<Rational> out{lo, hi};
  std::vector<Rational> row{lo, hi};
  while (out.size() < count) {
    std::vector<Rational> next{row.front()};
    for (size_t i = 0; i + 1 < row.size(); ++i) {
      Rational m(row[i].get_num() + row[i + 1].get_num(), row[i].get_den() + row[i + 1].get_den());
      m.canonicalize();
      out.push_back(m);
      next.push_back(m);
      next.push_back(row[i + 1]);
    }
    row = std::move(next);
  }
  out.resize(count);
  return out;
}

namespace {

int int_param(const GeneratorSpec& g, const std::string& key, const std::string& fallback = "") {
  std::string s = g.param(key, fallback);
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("generator parameter " + key + " is not an integer: " + s);
  }
}

}  // namespace

std::vector<RationalPoint> generate(const GeneratorSpec& g, unsigned max_denominator_bits) {
  std::vector<RationalPoint> out;
  const std::string& k = g.kind;
  if (k == "cantor") {
    int L = int_param(g, "L");
    if (L < 0 || L > 24) throw ValidationError("cantor level out of range");
    for (long code = 0; code < (1L << L); ++code) {
      Rational x = 0;
      for (int i = 0; i < L; ++i)
        if (code & (1L << (L - 1 - i))) x += Rational(2) / Rational(ipow(3, i + 1));
      out.push_back({x});
    }
  } else if (k == "dyadic") {
    int m = int_param(g, "m");
    if (m < 0 || m > 24) throw ValidationError("dyadic level out of range");
    Integer den = ipow(2, m);
    for (long j = 0; j < (1L << m); ++j) out.push_back({Rational(Integer(j), den)});
  } else if (k == "power") {
    Rational lambda = parse_rational(g.param("lambda", "1/2"));
    int J = int_param(g, "J");
    if (lambda <= 0 || lambda >= 1) throw ValidationError("power ratio must lie in (0,1)");
    for (int j = 1; j <= J; ++j) out.push_back({rpow(lambda, j)});
  } else if (k == "two_scale") {
    int K = int_param(g, "K");
    std::set<Rational> s;
    for (int j = 1; j <= K; ++j)
      for (int l = 1; l <= K; ++l) s.insert(rpow(Rational(1, 2), j) + rpow(Rational(1, 3), l));
    for (const auto& x : s) out.push_back({x});
  } else if (k == "nsw") {
    Rational ratio = parse_rational(g.param("ratio", "1/2"));
    int J = int_param(g, "J");
    std::vector<int> ex;
    std::stringstream ss(g.param("exponents", "1;2"));
    std::string e;
    while (std::getline(ss, e, ';')) ex.push_back(std::stoi(e));
    for (size_t i = 1; i < ex.size(); ++i)
      if (ex[i] <= ex[i - 1]) throw ValidationError("nsw exponents must increase");
    for (int j = 1; j <= J; ++j) {
      RationalPoint p;
      for (int m : ex) p.push_back(rpow(ratio, static_cast<long>(j) * m));
      out.push_back(std::move(p));
    }
  } else if (k == "carbery") {
    Rational lambda = parse_rational(g.param("lambda", "1/2"));
    int d = int_param(g, "d", "2");
    int kmax = int_param(g, "kmax");
    std::vector<int> idx(d, 1);
    while (true) {
      RationalPoint p;
      for (int x : idx) p.push_back(rpow(lambda, x));
      out.push_back(std::move(p));
      int i = d - 1;
      while (i >= 0 && ++idx[i] > kmax) idx[i--] = 1;
      if (i < 0) break;
    }
  } else if (k == "counterexample") {
    int jmax = int_param(g, "jmax");
    std::string part = g.param("part", "sum");
    std::vector<Rational> U, V;
    long Nmax = 0;
    for (int j = 1; j <= jmax; ++j) {
      long Nj = 1L << (j * j);
      Nmax = Nj;
      long Mj = 1L << j;
      for (long kk = 1; kk <= Mj; ++kk) {
        Rational q = rpow(Rational(1, 2), Nj) * (1 + Rational(Integer(kk), ipow(2, j)));
        U.push_back(rpow(Rational(2), kk - Nj) + q);
      }
    }
    for (long i = 1; i <= Nmax; ++i) V.push_back(-rpow(Rational(1, 2), i));
    if (part == "U") {
      for (const auto& u : U) out.push_back({u});
    } else if (part == "V") {
      for (const auto& v : V) out.push_back({v});
    } else if (part == "sum") {
      std::set<Rational> s;
      for (const auto& u : U)
        for (const auto& v : V) s.insert(u + v);
      for (const auto& x : s) out.push_back({x});
    } else if (part == "product") {
      for (const auto& u : U)
        for (const auto& v : V) out.push_back({u, v});
    } else {
      throw ValidationError("unknown counterexample part: " + part);
    }
  } else if (k == "parcet_rogers") {
    int lmax = int_param(g, "lmax");
    auto q = stern_brocot(Rational(1, 2), Rational(2, 3), static_cast<size_t>(lmax));
    for (int l = 1; l <= lmax; ++l) {
      Rational p = rpow(Rational(1, 2), l);
      out.push_back({q[l - 1] * p, p, Rational(1)});
    }
  } else {
    throw ValidationError("unknown generator kind: " + k);
  }
  for (const auto& p : out)
    for (const auto& x : p)
      if (mpz_sizeinbase(x.get_den_mpz_t(), 2) > max_denominator_bits)
        throw ValidationError("denominator exceeds cap of 2^" + std::to_string(max_denominator_bits));
  return out;
}

std::vector<Rational> first_coordinates(const std::vector<RationalPoint>& points) {
  std::vector<Rational> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.at(0));
  return out;
}

}  // namespace tubelab
