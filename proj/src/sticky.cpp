#include "tubelab/sticky.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "tubelab/madic_tree.hpp"

namespace tubelab {

namespace {

std::vector<Address> all_cubes(int M, int d, int h) {
  size_t len = static_cast<size_t>(d) * h;
  Integer total = ipow(M, static_cast<long>(len));
  if (total > Integer(1L << 24)) throw ValidationError("too many cubes to enumerate");
  size_t count = total.get_ui();
  std::vector<Address> out;
  out.reserve(count);
  std::vector<uint8_t> digits(len, 0);
  for (size_t n = 0; n < count; ++n) {
    out.emplace_back(d, digits);
    for (size_t pos = len; pos-- > 0;) {
      if (++digits[pos] < M) break;
      digits[pos] = 0;
    }
  }
  return out;
}

Address first_root(const Address& q, int J) {
  Address t = q;
  t.digits.resize(static_cast<size_t>(q.d) * J, 0);
  return t;
}

Rational half_power(int n) { return Rational(Integer(1), ipow(2, n)); }

void require(bool cond, const std::string& what) {
  if (!cond) throw std::logic_error("height relation violated: " + what);
}

}  // namespace

int warehouse_bit(uint64_t seed, const Address& q) {
  uint64_t h = derive_seed(seed, static_cast<uint64_t>(q.d), static_cast<uint64_t>(q.height()));
  for (uint8_t digit : q.digits) h = mix64(h ^ (0x100U + digit));
  return static_cast<int>(h >> 63);
}

BernoulliWarehouse::BernoulliWarehouse(uint64_t seed) : seed_(seed), mutex_(std::make_unique<std::mutex>()) {}

BernoulliWarehouse::BernoulliWarehouse(const BernoulliWarehouse& other)
    : seed_(other.seed_), mutex_(std::make_unique<std::mutex>()) {
  std::lock_guard<std::mutex> lock(*other.mutex_);
  bits_ = other.bits_;
}

BernoulliWarehouse& BernoulliWarehouse::operator=(const BernoulliWarehouse& other) {
  if (this == &other) return *this;
  std::unordered_map<Address, int, AddressHash> copy;
  {
    std::lock_guard<std::mutex> lock(*other.mutex_);
    copy = other.bits_;
  }
  std::lock_guard<std::mutex> lock(*mutex_);
  seed_ = other.seed_;
  bits_ = std::move(copy);
  return *this;
}

int BernoulliWarehouse::bit(const Address& q) const {
  std::lock_guard<std::mutex> lock(*mutex_);
  auto it = bits_.find(q);
  if (it != bits_.end()) return it->second;
  int b = warehouse_bit(seed_, q);
  bits_.emplace(q, b);
  return b;
}

void BernoulliWarehouse::set(const Address& q, int value) {
  if (value != 0 && value != 1) throw ValidationError("warehouse bits are 0 or 1");
  std::lock_guard<std::mutex> lock(*mutex_);
  bits_[q] = value;
}

size_t BernoulliWarehouse::realized() const {
  std::lock_guard<std::mutex> lock(*mutex_);
  return bits_.size();
}

StickyMap::StickyMap(const PrunedSlopeTree& tree, BernoulliWarehouse x) : p_(&tree), x_(std::move(x)) {
  if (tree.splitting.empty()) throw ValidationError("slope tree has no splitting vertices");
}

void StickyMap::check_root(const Address& root) const {
  if (root.d != p_->d || root.height() != p_->J) throw ValidationError("not a root cube: " + root.str());
}

std::vector<Address> StickyMap::chain(const Address& root) const {
  check_root(root);
  std::vector<Address> out;
  int r = 0;
  for (int j = 1; j <= p_->N; ++j) {
    const auto& sv = p_->splitting[r];
    Address q = root.ancestor(sv.lambda);
    int b = x_.bit(q);
    out.push_back(std::move(q));
    if (j < p_->N) r = sv.next[b];
  }
  return out;
}

std::vector<int> StickyMap::bits(const Address& root) const {
  std::vector<int> out;
  for (const auto& q : chain(root)) out.push_back(x_.bit(q));
  return out;
}

size_t StickyMap::sigma(const Address& root) const {
  size_t s = 0;
  for (int b : bits(root)) s = 2 * s + static_cast<size_t>(b);
  return s;
}

Address StickyMap::sigma_address(const Address& root) const { return p_->psi(bits(root)); }

Address StickyMap::extend(const Address& q) const {
  if (q.d != p_->d || q.height() > p_->J) throw ValidationError("not a root-tree vertex: " + q.str());
  return sigma_address(first_root(q, p_->J)).ancestor(q.height());
}

StickyMap sample_assignment(const PrunedSlopeTree& tree, uint64_t seed) {
  return StickyMap(tree, BernoulliWarehouse(seed));
}

Address extend_sticky(const StickyMap& map, const Address& q) { return map.extend(q); }

bool sticky_on_root_tree(const StickyMap& map, int max_height) {
  const auto& p = map.slope_tree();
  int top = max_height < 0 ? p.J : std::min(max_height, p.J);
  std::vector<std::pair<Address, Address>> f;
  for (int h = 0; h <= top; ++h)
    for (const auto& q : all_cubes(p.M, p.d, h)) f.emplace_back(q, map.extend(q));
  return is_sticky(f);
}

std::vector<Address> root_cubes(const PrunedSlopeTree& tree) { return all_cubes(tree.M, tree.d, tree.J); }

namespace {

// Basic slope cubes of height <= k containing omega, outermost first.
std::vector<Address> basic_cubes_above(const PrunedSlopeTree& p, const Address& omega, int k) {
  int limit = std::min(k, omega.height());
  std::vector<Address> out;
  int r = 0;
  for (int j = 1; j <= p.N; ++j) {
    const auto& sv = p.splitting[r];
    if (sv.lambda > limit) break;
    int b = sv.basic[0].contains(omega) ? 0 : sv.basic[1].contains(omega) ? 1 : -1;
    if (b < 0) throw ValidationError("not a slope-tree vertex: " + omega.str());
    out.push_back(sv.basic[b]);
    if (j < p.N) r = sv.next[b];
  }
  return out;
}

}  // namespace

Address theta(const PrunedSlopeTree& tree, const Address& omega, int k) {
  auto cubes = basic_cubes_above(tree, omega, k);
  return cubes.empty() ? tree.splitting.at(0).vertex : cubes.back();
}

int mu(const PrunedSlopeTree& tree, const Address& omega, int k) {
  return static_cast<int>(basic_cubes_above(tree, omega, k).size());
}

Address q_u(const PrunedSlopeTree& tree, const Address& u, const Address& omega, int k) {
  auto cubes = basic_cubes_above(tree, omega, k);
  if (cubes.empty()) return Address(u.d);
  int h = cubes.back().height();
  if (h > u.height()) throw ValidationError("vertex lies above theta(omega, k)");
  return u.ancestor(h);
}

std::vector<Address> reference_cubes(const PrunedSlopeTree& tree, const Address& root, size_t slope) {
  if (root.d != tree.d || root.height() != tree.J) throw ValidationError("not a root cube: " + root.str());
  std::vector<Address> out;
  for (int j = 1; j <= tree.N; ++j) out.push_back(root.ancestor(tree.eta(slope, j)));
  return out;
}

Admissibility check_admissible(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                               const std::vector<size_t>& slopes) {
  if (roots.size() != slopes.size()) throw ValidationError("roots and slopes differ in length");
  Admissibility a;
  a.realizable = true;
  for (size_t i = 0; i < roots.size() && a.realizable; ++i) {
    auto cubes = reference_cubes(tree, roots[i], slopes[i]);
    auto bits = tree.bits_of(slopes[i]);
    for (int j = 0; j < tree.N; ++j) {
      auto [it, inserted] = a.certificate.emplace(cubes[j], bits[j]);
      if (!inserted && it->second != bits[j]) {
        a.realizable = false;
        a.reason = "conflicting bits on " + cubes[j].str();
        break;
      }
    }
  }
  if (!a.realizable) a.certificate.clear();
  a.heights_ok = true;
  std::vector<Address> images;
  for (size_t s : slopes) images.push_back(tree.slope_address(s));
  for (size_t i = 0; i < roots.size() && a.heights_ok; ++i)
    for (size_t j = i + 1; j < roots.size(); ++j) {
      if (youngest_common_ancestor(images[i], images[j]).height() <
          youngest_common_ancestor(roots[i], roots[j]).height()) {
        a.heights_ok = false;
        if (a.reason.empty()) a.reason = "slopes of roots " + std::to_string(i) + " and " + std::to_string(j) +
                                         " separate above their roots";
        break;
      }
    }
  return a;
}

bool is_sticky_admissible(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                          const std::vector<size_t>& slopes) {
  return check_admissible(tree, roots, slopes).admissible();
}

int vertex_count(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                 const std::vector<size_t>& slopes) {
  std::set<Address> cubes;
  for (size_t i = 0; i < roots.size(); ++i)
    for (auto& q : reference_cubes(tree, roots[i], slopes.at(i))) cubes.insert(std::move(q));
  return static_cast<int>(cubes.size());
}

Rational prob_exact(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                    const std::vector<size_t>& slopes) {
  auto a = check_admissible(tree, roots, slopes);
  if (!a.realizable) throw ValidationError("prescription not realizable: " + a.reason);
  return half_power(static_cast<int>(a.certificate.size()));
}

std::string RootClassification::label() const {
  static const char* names[] = {"single", "pair", "triple", "quadruple"};
  std::string s = size >= 1 && size <= 4 ? names[size - 1] : "tuple";
  if (size >= 3) s += " type " + std::to_string(type);
  return s;
}

RootClassification classify_roots(const std::vector<Address>& roots) {
  RootClassification c;
  c.size = roots.size();
  if (c.size < 1 || c.size > 4) throw ValidationError("classification needs 1 to 4 roots");
  for (size_t a = 0; a < c.size; ++a)
    for (size_t b = a + 1; b < c.size; ++b)
      if (roots[a] == roots[b]) throw ValidationError("roots must be distinct");
  auto D = [&](int a, int b) { return youngest_common_ancestor(roots[c.order[a]], roots[c.order[b]]); };
  if (c.size <= 2) {
    for (size_t a = 0; a < c.size; ++a) c.order.push_back(static_cast<int>(a));
    return c;
  }
  if (c.size == 3) {
    c.order = {0, 1, 2};
    if (D(0, 2).strictly_contains(D(0, 1))) c.order = {0, 2, 1};
    Address u = D(0, 1), u2 = D(0, 2);
    bool a = u.strictly_contains(u2);
    bool b = u == u2 && D(1, 2) == u;
    c.type = (a != b) ? 1 : 2;
    return c;
  }
  c.order = {0, 1, 2, 3};
  if (D(0, 1).height() > D(2, 3).height()) c.order = {2, 3, 0, 1};
  Address u = D(0, 1), u2 = D(2, 3);
  bool disjoint = !u.contains(u2) && !u2.contains(u);
  bool all_meet = u == u2;
  int best_i = 0, best_j = 0, best_h = -1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Address dij = D(i, 2 + j);
      if (dij != u) all_meet = false;
      if (dij.height() > best_h) best_h = dij.height(), best_i = i, best_j = j;
    }
  if (disjoint || all_meet) {
    c.type = 1;
  } else if (u.strictly_contains(u2)) {
    c.type = 2;
  } else {
    c.type = 3;
  }
  if (c.type >= 2) {
    c.i = {1 - best_i, best_i};
    c.j = {1 - best_j, best_j};
  }
  return c;
}

Rational prob_closed_form(const PrunedSlopeTree& tree, const std::vector<Address>& roots,
                          const std::vector<size_t>& slopes) {
  auto adm = check_admissible(tree, roots, slopes);
  if (!adm.admissible()) throw ValidationError("tuple is not sticky-admissible: " + adm.reason);
  auto c = classify_roots(roots);
  const int N = tree.N;
  if (c.size == 1) return half_power(N);
  std::vector<Address> t, v;
  for (int pos : c.order) {
    t.push_back(roots[pos]);
    v.push_back(tree.slope_address(slopes[pos]));
  }
  auto D = youngest_common_ancestor;
  auto mu_checked = [&](const Address& w, int k, const char* what) {
    require(k <= w.height(), what);
    return mu(tree, w, k);
  };
  if (c.size == 2) return half_power(2 * N - mu_checked(D(v[0], v[1]), D(t[0], t[1]).height(), "k <= h(omega)"));
  if (c.size == 3) {
    Address u = D(t[0], t[1]), u2 = D(t[0], t[2]);
    Address w = D(v[0], v[1]), w2 = D(v[0], v[2]);
    int k = u.height(), k2 = u2.height();
    int m = mu_checked(w, k, "k <= h(omega)");
    if (c.type == 1) return half_power(3 * N - m - mu_checked(w2, k2, "k' <= h(omega')"));
    require(mu(tree, w2, k) == m, "mu(omega, k) = mu(omega', k)");
    int l = D(t[1], t[2]).height();
    return half_power(3 * N - m - mu_checked(D(v[1], v[2]), l, "l <= h(theta)"));
  }
  Address u = D(t[0], t[1]), u2 = D(t[2], t[3]);
  Address w = D(v[0], v[1]), w2 = D(v[2], v[3]);
  int k = u.height(), k2 = u2.height();
  int m = mu_checked(w, k, "k <= h(omega)");
  if (c.type == 1) {
    int m2 = mu_checked(w2, k2, "k' <= h(omega')");
    int l = D(u, u2).height();
    return half_power(4 * N - m - m2 - mu_checked(D(w, w2), l, "l <= h(v)"));
  }
  int i1 = c.i[0], i2 = c.i[1], j1 = 2 + c.j[0], j2 = 2 + c.j[1];
  if (c.type == 2) {
    int m2 = mu_checked(w2, k2, "k' <= h(omega')");
    int l = D(t[i2], t[j2]).height();
    Address th = D(v[i2], v[j2]);
    int m3 = mu_checked(th, l, "l <= h(theta)");
    require(w.contains(th) || th.contains(w), "omega and theta nested");
    require(w2.contains(th) || th.contains(w2), "omega' and theta nested");
    return half_power(4 * N - m - m2 - m3);
  }
  Address s1 = D(t[i1], t[j1]), s2 = D(t[i2], t[j2]);
  Address th1 = D(v[i1], v[j1]), th2 = D(v[i2], v[j2]);
  int l1 = s1.height(), l2 = s2.height();
  require(u.contains(s1) && u.strictly_contains(s2), "s1 in u, s2 strictly in u");
  require(k <= l1 && l1 <= l2, "k <= l1 <= l2");
  require(mu_checked(w2, k, "k <= h(omega')") == m, "mu(omega, k) = mu(omega', k)");
  for (const auto* x : {&w, &w2})
    for (const auto* y : {&th1, &th2}) require(x->contains(*y) || y->contains(*x), "slope vertices nested");
  return half_power(4 * N - m - mu_checked(th1, l1, "l1 <= h(theta1)") - mu_checked(th2, l2, "l2 <= h(theta2)"));
}

std::vector<Address> warehouse_cubes(const PrunedSlopeTree& tree) {
  std::set<int> heights;
  for (const auto& sv : tree.splitting) heights.insert(sv.lambda);
  std::vector<Address> out;
  for (int h : heights)
    for (auto& q : all_cubes(tree.M, tree.d, h)) out.push_back(std::move(q));
  return out;
}

EnumerationOracle::EnumerationOracle(const PrunedSlopeTree& tree, int max_bits) : p_(&tree) {
  if (tree.N > 8) throw ValidationError("enumeration supports N <= 8");
  std::set<int> heights;
  for (const auto& sv : tree.splitting) heights.insert(sv.lambda);
  Integer bits = 0;
  for (int h : heights) bits += ipow(tree.M, static_cast<long>(tree.d) * h);
  if (bits > max_bits) throw ValidationError("warehouse has " + bits.get_str() + " bits, more than " +
                                             std::to_string(max_bits));
  cubes_ = warehouse_cubes(tree);
  std::map<Address, int> cube_id;
  for (size_t i = 0; i < cubes_.size(); ++i) cube_id[cubes_[i]] = static_cast<int>(i);
  roots_ = root_cubes(tree);
  size_t rows = tree.splitting.size();
  vars_.resize(roots_.size() * rows);
  for (size_t id = 0; id < roots_.size(); ++id) {
    root_ids_[roots_[id]] = id;
    for (size_t r = 0; r < rows; ++r) vars_[id * rows + r] = cube_id.at(roots_[id].ancestor(tree.splitting[r].lambda));
  }
  uint64_t count = realizations();
  table_.resize(count * roots_.size());
  for (uint64_t x = 0; x < count; ++x) {
    for (size_t id = 0; id < roots_.size(); ++id) {
      const int* var = &vars_[id * rows];
      size_t s = 0;
      int r = 0;
      for (int j = 1; j <= tree.N; ++j) {
        int b = static_cast<int>((x >> var[r]) & 1U);
        s = 2 * s + static_cast<size_t>(b);
        if (j < tree.N) r = tree.splitting[r].next[b];
      }
      table_[x * roots_.size() + id] = static_cast<uint8_t>(s);
    }
  }
}

size_t EnumerationOracle::root_id(const Address& root) const {
  auto it = root_ids_.find(root);
  if (it == root_ids_.end()) throw ValidationError("not a root cube: " + root.str());
  return it->second;
}

size_t EnumerationOracle::sigma(uint64_t realization, size_t id) const {
  return table_.at(realization * roots_.size() + id);
}

uint64_t EnumerationOracle::count(const std::vector<size_t>& ids, const std::vector<size_t>& slopes) const {
  if (ids.size() != slopes.size()) throw ValidationError("roots and slopes differ in length");
  uint64_t hits = 0;
  size_t n = roots_.size();
  for (uint64_t x = 0; x < realizations(); ++x) {
    bool ok = true;
    for (size_t i = 0; i < ids.size() && ok; ++i) ok = table_[x * n + ids[i]] == slopes[i];
    hits += ok;
  }
  return hits;
}

Rational EnumerationOracle::probability(const std::vector<size_t>& ids, const std::vector<size_t>& slopes) const {
  return Rational(Integer(static_cast<unsigned long>(count(ids, slopes))),
                  Integer(static_cast<unsigned long>(realizations())));
}

std::vector<uint64_t> EnumerationOracle::dense_histogram(const std::vector<size_t>& ids) const {
  int width = p_->N;
  if (width * static_cast<int>(ids.size()) > 24) throw ValidationError("too many roots for a dense histogram");
  std::vector<uint64_t> counts(size_t(1) << (width * ids.size()), 0);
  size_t n = roots_.size();
  for (uint64_t x = 0; x < realizations(); ++x) {
    size_t code = 0;
    for (size_t id : ids) code = (code << width) | table_[x * n + id];
    ++counts[code];
  }
  return counts;
}

std::map<std::vector<size_t>, uint64_t> EnumerationOracle::histogram(const std::vector<size_t>& ids) const {
  std::map<std::vector<size_t>, uint64_t> out;
  size_t n = roots_.size();
  std::vector<size_t> key(ids.size());
  for (uint64_t x = 0; x < realizations(); ++x) {
    for (size_t i = 0; i < ids.size(); ++i) key[i] = table_[x * n + ids[i]];
    ++out[key];
  }
  return out;
}

}  // namespace tubelab
