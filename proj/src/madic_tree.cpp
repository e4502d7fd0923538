#include "tubelab/madic_tree.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <unordered_set>

namespace tubelab {

namespace {

bool has_prefix(const Address& a, const Address& prefix) { return prefix.contains(a); }

}  // namespace

MadicTree MadicTree::encode_set(std::vector<RationalPoint> points, int M, int J) {
  if (M < 2) throw ValidationError("base must be >= 2");
  if (J < 0) throw ValidationError("height must be >= 0");
  if (points.empty()) throw ValidationError("empty point set");
  int d = static_cast<int>(points.front().size());
  if (d < 1) throw ValidationError("dimension must be >= 1");
  std::vector<std::pair<Address, RationalPoint>> tagged;
  tagged.reserve(points.size());
  for (auto& p : points) {
    if (static_cast<int>(p.size()) != d) throw ValidationError("mixed point dimensions");
    tagged.emplace_back(address_of(p, M, J), std::move(p));
  }
  std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  tagged.erase(std::unique(tagged.begin(), tagged.end(),
                           [](const auto& a, const auto& b) { return a.second == b.second; }),
               tagged.end());
  MadicTree t(M, d, J);
  t.points_ = std::make_shared<std::vector<RationalPoint>>();
  t.leaf_of_point_ = std::make_shared<std::vector<Address>>();
  t.leaves_ = std::make_shared<std::vector<Address>>();
  for (auto& [a, p] : tagged) {
    t.leaf_of_point_->push_back(a);
    t.points_->push_back(p);
    if (t.leaves_->empty() || t.leaves_->back() != a) t.leaves_->push_back(a);
  }
  return t;
}

MadicTree MadicTree::from_vertices(int M, int d, int J, const std::vector<Address>& vertices) {
  auto set = std::make_shared<std::unordered_set<Address, AddressHash>>();
  set->insert(Address(d));
  for (const auto& v : vertices) {
    if (v.d != d) throw ValidationError("vertex dimension mismatch");
    if (v.height() > J) throw ValidationError("vertex deeper than tree height");
    for (int h = 0; h <= v.height(); ++h) set->insert(v.ancestor(h));
  }
  MadicTree t(M, d, J);
  t.member_ = [set](const Address& a) { return set->count(a) > 0; };
  return t;
}

MadicTree MadicTree::from_predicate(int M, int d, int J, Predicate member, KeyFn key) {
  if (M < 2 || d < 1 || J < 0) throw ValidationError("invalid tree parameters");
  MadicTree t(M, d, J);
  t.member_ = std::move(member);
  t.key_ = std::move(key);
  return t;
}

bool MadicTree::contains(const Address& v) const {
  if (v.d != d_ || v.height() > J_) return false;
  if (leaves_) {
    auto it = std::lower_bound(leaves_->begin(), leaves_->end(), v);
    return it != leaves_->end() && has_prefix(*it, v);
  }
  return member_(v);
}

const std::vector<Address>& MadicTree::children(const Address& v) const {
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->children.find(v);
    if (it != cache_->children.end()) return it->second;
  }
  std::vector<Address> out;
  if (v.height() < J_ && contains(v)) {
    if (leaves_) {
      auto it = std::lower_bound(leaves_->begin(), leaves_->end(), v);
      while (it != leaves_->end() && has_prefix(*it, v)) {
        Address c = it->ancestor(v.height() + 1);
        out.push_back(c);
        while (it != leaves_->end() && has_prefix(*it, c)) ++it;
      }
    } else {
      std::vector<uint8_t> tuple(d_, 0);
      long total = 1;
      for (int i = 0; i < d_; ++i) total *= M_;
      for (long code = 0; code < total; ++code) {
        long c = code;
        for (int i = d_ - 1; i >= 0; --i) {
          tuple[i] = static_cast<uint8_t>(c % M_);
          c /= M_;
        }
        Address ch = v.child(tuple);
        if (member_(ch)) out.push_back(std::move(ch));
      }
    }
  }
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto [it, inserted] = cache_->children.emplace(v, std::move(out));
  return it->second;
}

std::vector<Address> MadicTree::level(int h) const {
  std::vector<Address> cur{root()};
  for (int k = 0; k < h; ++k) {
    std::vector<Address> next;
    for (const auto& v : cur)
      for (const auto& c : children(v)) next.push_back(c);
    cur = std::move(next);
  }
  return cur;
}

std::vector<Address> MadicTree::vertices() const {
  std::vector<Address> out, stack{root()};
  while (!stack.empty()) {
    Address v = std::move(stack.back());
    stack.pop_back();
    const auto& ch = children(v);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    out.push_back(std::move(v));
  }
  return out;
}

size_t MadicTree::vertex_count() const { return vertices().size(); }

std::optional<std::string> MadicTree::key(const Address& v) const {
  if (!key_) return std::nullopt;
  return key_(v);
}

RationalPoint MadicTree::min_point(const Address& v) const {
  if (points_) {
    auto it = std::lower_bound(leaf_of_point_->begin(), leaf_of_point_->end(), v);
    if (it == leaf_of_point_->end() || !has_prefix(*it, v))
      throw ValidationError("vertex not in tree: " + v.str());
    return (*points_)[static_cast<size_t>(it - leaf_of_point_->begin())];
  }
  if (!contains(v)) throw ValidationError("vertex not in tree: " + v.str());
  Address cur = v;
  while (cur.height() < J_) {
    const auto& ch = children(cur);
    if (ch.empty()) break;
    cur = ch.front();
  }
  return cur.corner(M_);
}

int SplitCalculator::split(const Address& v) {
  auto lookup = [&](const Address& a, int& out) {
    auto k = tree_.key(a);
    if (k) {
      auto it = by_key_.find(*k);
      if (it == by_key_.end()) return false;
      out = it->second;
      return true;
    }
    auto it = by_vertex_.find(a);
    if (it == by_vertex_.end()) return false;
    out = it->second;
    return true;
  };
  int result = 0;
  if (lookup(v, result)) return result;
  // Explicit post-order traversal: deep lazy trees would overflow the call stack.
  std::vector<std::pair<Address, bool>> stack{{v, false}};
  while (!stack.empty()) {
    auto [a, expanded] = stack.back();
    stack.pop_back();
    int known = 0;
    if (lookup(a, known)) continue;
    const auto& ch = tree_.children(a);
    if (!expanded) {
      stack.emplace_back(a, true);
      for (const auto& c : ch)
        if (!lookup(c, known)) stack.emplace_back(c, false);
      continue;
    }
    int best = -1, second = -1;
    for (const auto& c : ch) {
      int s = 0;
      lookup(c, s);
      if (s > best) {
        second = best;
        best = s;
      } else if (s > second) {
        second = s;
      }
    }
    int value = 0;
    if (best >= 0) value = std::max(best, second >= 0 ? second + 1 : 0);
    auto k = tree_.key(a);
    if (k) by_key_.emplace(*k, value);
    else by_vertex_.emplace(a, value);
  }
  lookup(v, result);
  return result;
}

SplitResult splitting_number(const MadicTree& tree, size_t max_vertices) {
  SplitCalculator calc(tree);
  SplitResult r;
  r.value = calc.split(tree.root());
  if (!tree.has_key() || tree.height() <= 24) {
    std::vector<Address> stack{tree.root()};
    size_t seen = 0;
    std::unordered_map<Address, int, AddressHash> values;
    while (!stack.empty() && seen <= max_vertices) {
      Address v = std::move(stack.back());
      stack.pop_back();
      ++seen;
      values.emplace(v, calc.split(v));
      for (const auto& c : tree.children(v)) stack.push_back(c);
    }
    if (seen <= max_vertices && stack.empty()) r.per_vertex = std::move(values);
  }
  return r;
}

namespace {

// Every subtree rooted at v (each vertex keeps a nonempty subset of its children),
// returned as explicit vertex lists with v first.
void enumerate_subtrees(const MadicTree& tree, const Address& v,
                        std::vector<std::vector<Address>>& out) {
  const auto& ch = tree.children(v);
  if (ch.empty()) {
    out.push_back({v});
    return;
  }
  std::vector<std::vector<std::vector<Address>>> per_child(ch.size());
  for (size_t i = 0; i < ch.size(); ++i) enumerate_subtrees(tree, ch[i], per_child[i]);
  for (unsigned mask = 1; mask < (1u << ch.size()); ++mask) {
    std::vector<size_t> chosen;
    for (size_t i = 0; i < ch.size(); ++i)
      if (mask & (1u << i)) chosen.push_back(i);
    std::vector<size_t> pick(chosen.size(), 0);
    while (true) {
      std::vector<Address> s{v};
      for (size_t k = 0; k < chosen.size(); ++k) {
        const auto& sub = per_child[chosen[k]][pick[k]];
        s.insert(s.end(), sub.begin(), sub.end());
      }
      out.push_back(std::move(s));
      size_t k = 0;
      while (k < chosen.size() && ++pick[k] == per_child[chosen[k]].size()) pick[k++] = 0;
      if (k == chosen.size()) break;
    }
  }
}

int min_ray_splits(const std::vector<Address>& subtree) {
  std::unordered_set<Address, AddressHash> in(subtree.begin(), subtree.end());
  std::unordered_map<Address, std::vector<Address>, AddressHash> kids;
  for (const auto& a : subtree)
    if (a != subtree.front()) kids[a.parent()].push_back(a);
  // Enumerate rays explicitly: root-to-leaf paths.
  int best = -1;
  std::vector<std::pair<Address, int>> stack{{subtree.front(), 0}};
  while (!stack.empty()) {
    auto [a, count] = stack.back();
    stack.pop_back();
    auto it = kids.find(a);
    if (it == kids.end()) {
      if (best < 0 || count < best) best = count;
      continue;
    }
    int add = it->second.size() >= 2 ? 1 : 0;
    for (const auto& c : it->second) stack.emplace_back(c, count + add);
  }
  return best;
}

}  // namespace

int splitting_number_bruteforce(const MadicTree& tree, size_t max_vertices) {
  auto all = tree.vertices();
  if (all.size() > max_vertices)
    throw ValidationError("tree exceeds brute-force size cap (" + std::to_string(all.size()) + ")");
  int best = 0;
  for (const auto& v : all) {
    std::vector<std::vector<Address>> subtrees;
    enumerate_subtrees(tree, v, subtrees);
    for (const auto& s : subtrees) best = std::max(best, min_ray_splits(s));
  }
  return best;
}

bool is_sticky(const std::vector<std::pair<Address, Address>>& f) {
  std::unordered_map<Address, Address, AddressHash> map;
  for (const auto& [u, w] : f) {
    if (u.height() != w.height()) return false;
    auto [it, inserted] = map.emplace(u, w);
    if (!inserted && it->second != w) return false;
  }
  for (const auto& [u, w] : f) {
    for (int h = u.height() - 1; h >= 0; --h) {
      auto it = map.find(u.ancestor(h));
      if (it != map.end() && !it->second.contains(w)) return false;
    }
  }
  return true;
}

MadicTree random_tree(uint64_t seed, int M, int max_height, int max_branch, size_t max_vertices) {
  std::mt19937_64 rng(seed);
  std::vector<Address> verts{Address(1)};
  std::vector<Address> frontier{Address(1)};
  int branch = std::min(max_branch, M);
  while (!frontier.empty()) {
    std::vector<Address> next;
    for (const auto& v : frontier) {
      if (v.height() >= max_height) continue;
      int k = static_cast<int>(rng() % static_cast<uint64_t>(branch + 1));
      std::vector<uint8_t> digits(M);
      for (int i = 0; i < M; ++i) digits[i] = static_cast<uint8_t>(i);
      std::shuffle(digits.begin(), digits.end(), rng);
      for (int i = 0; i < k && verts.size() < max_vertices; ++i) {
        Address c = v.child(&digits[i]);
        verts.push_back(c);
        next.push_back(c);
      }
    }
    frontier = std::move(next);
  }
  return MadicTree::from_vertices(M, 1, max_height, verts);
}

MadicTree digit_tree(int M, int d, int J, std::vector<uint8_t> allowed) {
  std::vector<bool> ok(M, false);
  for (uint8_t a : allowed) {
    if (a >= M) throw ValidationError("digit out of range");
    ok[a] = true;
  }
  return MadicTree::from_predicate(
      M, d, J,
      [ok](const Address& a) {
        for (uint8_t x : a.digits)
          if (!ok[x]) return false;
        return true;
      },
      [](const Address& a) { return std::to_string(a.height()); });
}

MadicTree full_tree(int M, int d, int J) {
  std::vector<uint8_t> all(M);
  for (int i = 0; i < M; ++i) all[i] = static_cast<uint8_t>(i);
  return digit_tree(M, d, J, all);
}

MadicTree::Predicate prefix_predicate(std::vector<Address> generators) {
  auto g = std::make_shared<std::vector<Address>>(std::move(generators));
  return [g](const Address& a) {
    for (const auto& x : *g)
      if (a.contains(x) || x.contains(a)) return true;
    return false;
  };
}

}  // namespace tubelab
