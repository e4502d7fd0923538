#include "tubelab/pruning.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>

namespace tubelab {

namespace {

long separation_threshold(int c0, int d) {
  long t = 1;
  for (int i = 0; i < d; ++i) t *= 2L * c0 + 1;
  return t;
}

// Children of v in the working subtree in which every ray below v splits at least `budget`
// times, with the budget each child inherits.
std::vector<std::pair<Address, int>> budget_children(SplitCalculator& calc, const MadicTree& tree,
                                                     const Address& v, int budget) {
  std::vector<std::pair<Address, int>> out;
  const auto& ch = tree.children(v);
  if (budget <= 0) {
    for (const auto& c : ch) out.emplace_back(c, 0);
    return out;
  }
  for (const auto& c : ch)
    if (calc.split(c) >= budget - 1) out.emplace_back(c, budget - 1);
  if (out.size() >= 2) return out;
  out.clear();
  for (const auto& c : ch)
    if (calc.split(c) >= budget) out.emplace_back(c, budget);
  return out;
}

SeparatedPair separated_pair(SplitCalculator& calc, const MadicTree& tree, const Address& v0, int c0, int n0) {
  long threshold = separation_threshold(c0, tree.dim());
  if (n0 < threshold)
    throw ValidationError(fmt::format("split budget {} below (2C0+1)^d = {}", n0, threshold));
  int s = calc.split(v0);
  if (s < n0) throw InfeasibleError(fmt::format("insufficient splits below {}: {} < {}", v0.str(), s, n0));
  std::vector<std::pair<Address, int>> level{{v0, n0}};
  while (true) {
    std::vector<std::pair<Address, int>> next;
    for (const auto& [v, b] : level) {
      auto ch = budget_children(calc, tree, v, b);
      next.insert(next.end(), ch.begin(), ch.end());
    }
    if (next.empty()) throw InfeasibleError("subtree ended before exceeding the separation threshold");
    level = std::move(next);
    if (static_cast<long>(level.size()) > threshold) break;
  }
  int M = tree.base();
  SeparatedPair best;
  best.k = level.front().first.height();
  Rational best_dist = -1;
  for (size_t i = 0; i < level.size(); ++i)
    for (size_t j = i + 1; j < level.size(); ++j) {
      Rational dist = cube_distance_sq(level[i].first, level[j].first, M);
      if (dist > best_dist) {
        best_dist = dist;
        best.v1 = level[i].first;
        best.v2 = level[j].first;
        best.budget1 = level[i].second;
        best.budget2 = level[j].second;
      }
    }
  Rational side = Rational(1) / Rational(ipow(M, best.k));
  if (best_dist < Rational(c0 * c0) * side * side)
    throw InfeasibleError(fmt::format("no pair at height {} separated by C0 M^-k", best.k));
  return best;
}

Address first_split_or_leaf(const MadicTree& tree, Address v) {
  while (v.height() < tree.height() && tree.children(v).size() == 1) v = tree.children(v).front();
  return v;
}

// delta <= rho <= (1 + 2 sqrt(d)/c0) delta, from squared distances a = rho^2, b = delta^2.
bool comparable(const Rational& a, const Rational& b, int d, int c0) {
  if (a < b) return false;
  Rational c2 = Rational(c0 * c0);
  Rational lhs = a - b * (1 + Rational(4 * d) / c2);
  if (lhs <= 0) return true;
  return lhs * lhs <= Rational(16 * d) * b * b / c2;
}

int smallest_separating_height(const std::vector<RationalPoint>& pts, int M) {
  for (int h = 0;; ++h) {
    std::vector<Address> a;
    for (const auto& p : pts) a.push_back(address_of(p, M, h));
    std::sort(a.begin(), a.end());
    if (std::adjacent_find(a.begin(), a.end()) == a.end()) return h;
    if (h > 4096) throw ValidationError("points do not separate");
  }
}

}  // namespace

SeparatedPair find_separated_pair(const MadicTree& tree, const Address& v0, int c0, int n0) {
  if (c0 < 1) throw ValidationError("C0 must be >= 1");
  SplitCalculator calc(tree);
  return separated_pair(calc, tree, v0, c0, n0);
}

Address PrunedSlopeTree::psi(const std::vector<int>& bits) const {
  if (static_cast<int>(bits.size()) > N) throw ValidationError("bit string longer than N");
  int r = 0;
  Address cube = splitting.at(0).vertex;
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) throw ValidationError("bits must be 0 or 1");
    cube = splitting[r].basic[bits[i]];
    if (i + 1 < bits.size()) r = splitting[r].next[bits[i]];
  }
  return cube;
}

std::vector<int> PrunedSlopeTree::psi_inverse(const Address& cube) const {
  auto it = psi_table_.find(cube);
  if (it == psi_table_.end()) throw ValidationError("not a basic slope cube: " + cube.str());
  return it->second;
}

std::vector<int> PrunedSlopeTree::bits_of(size_t slope) const {
  if (slope >= slopes.size()) throw ValidationError("slope index out of range");
  std::vector<int> bits(N);
  for (int i = 0; i < N; ++i) bits[i] = static_cast<int>((slope >> (N - 1 - i)) & 1U);
  return bits;
}

Address PrunedSlopeTree::slope_address(size_t slope) const { return address_of(slopes.at(slope), M, J); }

int PrunedSlopeTree::splitting_row(size_t slope, int j) const {
  if (j < 1 || j > N) throw ValidationError("splitting index out of range");
  auto bits = bits_of(slope);
  int r = 0;
  for (int i = 1; i < j; ++i) r = splitting[r].next[bits[i - 1]];
  return r;
}

int PrunedSlopeTree::eta(size_t slope, int j) const {
  if (j == 0) return splitting.at(0).vertex.height();
  return splitting[splitting_row(slope, j)].lambda;
}

Address PrunedSlopeTree::basic_cube(size_t slope, int j) const {
  if (j == 0) return splitting.at(0).vertex;
  return splitting[splitting_row(slope, j)].basic[bits_of(slope)[j - 1]];
}

long PrunedSlopeTree::slope_index(const Address& leaf) const {
  auto it = slope_of_leaf_.find(leaf);
  return it == slope_of_leaf_.end() ? -1 : static_cast<long>(it->second);
}

int PrunedSlopeTree::row_of(const Address& v) const {
  auto it = row_of_.find(v);
  return it == row_of_.end() ? -1 : it->second;
}

MadicTree PrunedSlopeTree::tree() const { return MadicTree::encode_set(slopes, M, J); }

PrunedSlopeTree build_slope_tree(std::vector<RationalPoint> omega, int M, int J, int c0) {
  if (omega.empty()) throw ValidationError("empty slope set");
  if (c0 < 1) throw ValidationError("C0 must be >= 1");
  size_t count = omega.size();
  int N = 0;
  while ((size_t(1) << N) < count) ++N;
  if ((size_t(1) << N) != count || N < 1) throw ValidationError("slope count must be 2^N with N >= 1");
  PrunedSlopeTree p;
  p.M = M;
  p.d = static_cast<int>(omega.front().size());
  p.N = N;
  p.J = J;
  p.C0 = c0;
  auto tree = MadicTree::encode_set(omega, M, J);
  if (tree.level(J).size() != count) throw ValidationError("slopes share a cube of height J");
  std::map<Address, RationalPoint> point_of_leaf;
  for (const auto& w : omega) point_of_leaf[address_of(w, M, J)] = w;

  Address first = first_split_or_leaf(tree, tree.root());
  if (first.height() == J) throw ValidationError("slope tree does not split");
  std::vector<std::vector<int>> row_bits;
  std::deque<int> queue;
  p.splitting.push_back(SplittingVertex{first, 1, 0, {}, {}, {-1, -1}});
  row_bits.push_back({});
  queue.push_back(0);
  p.slopes.assign(count, {});
  p.psi_table_[first] = {};
  while (!queue.empty()) {
    int r = queue.front();
    queue.pop_front();
    SplittingVertex sv = p.splitting[r];
    const auto& ch = tree.children(sv.vertex);
    if (ch.size() != 2)
      throw ValidationError(fmt::format("splitting vertex {} has {} children", sv.vertex.str(), ch.size()));
    sv.children = {ch[1], ch[0]};
    std::array<Address, 2> desc;
    for (int i = 0; i < 2; ++i) {
      desc[i] = first_split_or_leaf(tree, sv.children[i]);
      bool leaf = desc[i].height() == J;
      if (leaf != (sv.index == N)) throw ValidationError("a ray does not split exactly N times");
    }
    sv.lambda = sv.index == N ? J : std::min(desc[0].height(), desc[1].height());
    for (int i = 0; i < 2; ++i) {
      sv.basic[i] = desc[i].ancestor(sv.lambda);
      auto bits = row_bits[r];
      bits.push_back(i);
      p.psi_table_[sv.basic[i]] = bits;
      if (sv.index < N) {
        sv.next[i] = static_cast<int>(p.splitting.size());
        p.splitting.push_back(SplittingVertex{desc[i], sv.index + 1, 0, {}, {}, {-1, -1}});
        row_bits.push_back(bits);
        queue.push_back(sv.next[i]);
      } else {
        size_t s = 0;
        for (int b : bits) s = (s << 1) | static_cast<size_t>(b);
        p.slopes[s] = point_of_leaf.at(desc[i]);
        p.slope_of_leaf_[desc[i]] = s;
      }
    }
    p.splitting[r] = sv;
  }
  std::vector<int> heights;
  for (size_t r = 0; r < p.splitting.size(); ++r) {
    p.row_of_[p.splitting[r].vertex] = static_cast<int>(r);
    heights.push_back(p.splitting[r].lambda);
  }
  std::sort(heights.begin(), heights.end());
  heights.erase(std::unique(heights.begin(), heights.end()), heights.end());
  p.fundamental_heights = heights;
  return p;
}

PrunedSlopeTree prune(const MadicTree& tree, int N, int c0) {
  if (N < 1) throw ValidationError("N must be >= 1");
  if (c0 < 1) throw ValidationError("C0 must be >= 1");
  int M = tree.base(), d = tree.dim();
  long threshold = separation_threshold(c0, d);
  long need = (N + 1) * threshold;
  SplitCalculator calc(tree);
  int s = calc.split(tree.root());
  if (s <= need)
    throw InfeasibleError(fmt::format("split = {} but pruning to N = {} needs split > {}", s, N, need));
  std::vector<std::pair<Address, int>> W{{tree.root(), static_cast<int>(need)}};
  for (int step = 1; step <= N; ++step) {
    std::vector<std::pair<Address, int>> next;
    for (const auto& [w, budget] : W) {
      auto pair = separated_pair(calc, tree, w, c0, budget);
      next.emplace_back(pair.v1, pair.budget1);
      next.emplace_back(pair.v2, pair.budget2);
    }
    W = std::move(next);
  }
  std::vector<RationalPoint> omega;
  for (const auto& [w, budget] : W) omega.push_back(tree.min_point(w));

  Rational delta_sq = -1;
  for (size_t i = 0; i < omega.size(); ++i)
    for (size_t j = i + 1; j < omega.size(); ++j) {
      Rational q = dist_sq(omega[i], omega[j]);
      if (delta_sq < 0 || q < delta_sq) delta_sq = q;
    }
  int J = std::max(N, smallest_separating_height(omega, M));
  Rational c2 = Rational(c0 * c0);
  while (c2 > delta_sq * Rational(ipow(M, 2L * J))) ++J;
  auto p = build_slope_tree(std::move(omega), M, J, c0);
  if (p.N != N) throw InfeasibleError("pruned tree has the wrong number of splits");
  return p;
}

SlopeMetrics slope_metrics(const PrunedSlopeTree& p, const Address& gamma) {
  int r = p.row_of(gamma);
  if (r < 0) throw ValidationError("not a splitting vertex: " + gamma.str());
  const auto& sv = p.splitting[r];
  std::array<std::vector<const RationalPoint*>, 2> side;
  for (size_t s = 0; s < p.slopes.size(); ++s) {
    Address a = p.slope_address(s);
    for (int i = 0; i < 2; ++i)
      if (sv.children[i].contains(a)) side[i].push_back(&p.slopes[s]);
  }
  SlopeMetrics m;
  bool first = true;
  for (const auto* a : side[0])
    for (const auto* b : side[1]) {
      Rational q = dist_sq(*a, *b);
      if (first || q > m.rho_sq) m.rho_sq = q;
      if (first || q < m.delta_sq) m.delta_sq = q;
      first = false;
    }
  m.comparable = comparable(m.rho_sq, m.delta_sq, p.d, p.C0);
  Rational side_len = Rational(1) / Rational(ipow(p.M, gamma.height()));
  m.within_diameter = m.rho_sq <= Rational(p.d) * side_len * side_len;
  return m;
}

PruneCheck check_pruned(const PrunedSlopeTree& p) {
  PruneCheck c;
  c.splits_exactly_n = c.binary_splits = c.separated_descendants = c.j_separation = c.metrics_comparable = true;
  auto tree = p.tree();
  int M = p.M;
  auto fail = [&](bool& flag, std::string msg) {
    flag = false;
    c.failures.push_back(std::move(msg));
  };
  if (p.slopes.size() != (size_t(1) << p.N)) fail(c.splits_exactly_n, "slope count is not 2^N");
  for (const auto& leaf : tree.level(p.J)) {
    int splits = 0;
    for (int h = 0; h < p.J; ++h)
      if (tree.children(leaf.ancestor(h)).size() >= 2) ++splits;
    if (splits != p.N) fail(c.splits_exactly_n, fmt::format("ray {} splits {} times", leaf.str(), splits));
  }
  for (const auto& v : tree.vertices()) {
    const auto& ch = tree.children(v);
    if (ch.size() > 2) fail(c.binary_splits, fmt::format("vertex {} has {} children", v.str(), ch.size()));
    if (ch.size() != 2) continue;
    Address v1 = first_split_or_leaf(tree, ch[0]), v2 = first_split_or_leaf(tree, ch[1]);
    // Last-level splitting vertices have no splitting descendants; the J bound covers them.
    if (v1.height() < p.J && v2.height() < p.J) {
      int h = std::min(v1.height(), v2.height());
      Rational side = Rational(1) / Rational(ipow(M, h));
      if (cube_distance_sq(v1, v2, M) < Rational(p.C0 * p.C0) * side * side)
        fail(c.separated_descendants, fmt::format("descendants of {} closer than C0 M^-{}", v.str(), h));
    }
    auto m = slope_metrics(p, v);
    if (!m.comparable || !m.within_diameter)
      fail(c.metrics_comparable, fmt::format("metrics at {} not comparable", v.str()));
  }
  Rational side = Rational(1) / Rational(ipow(M, p.J));
  for (size_t i = 0; i < p.slopes.size(); ++i)
    for (size_t j = i + 1; j < p.slopes.size(); ++j)
      if (dist_sq(p.slopes[i], p.slopes[j]) < Rational(p.C0 * p.C0) * side * side)
        fail(c.j_separation, fmt::format("slopes {} and {} closer than C0 M^-J", i, j));
  return c;
}

std::pair<std::vector<RationalPoint>, int> normalize_slopes(const std::vector<RationalPoint>& slopes, int M) {
  Rational biggest = 0;
  for (const auto& p : slopes)
    for (const auto& x : p) {
      if (x < 0) throw ValidationError("slopes must be nonnegative");
      biggest = std::max(biggest, x);
    }
  int L = 0;
  while (biggest >= Rational(ipow(M, L))) ++L;
  Rational scale = Rational(1) / Rational(ipow(M, L));
  std::vector<RationalPoint> out = slopes;
  for (auto& p : out)
    for (auto& x : p) x *= scale;
  return {out, L};
}

nlohmann::json to_json(const PrunedSlopeTree& p) {
  nlohmann::json j;
  j["M"] = p.M;
  j["d"] = p.d;
  j["N"] = p.N;
  j["J"] = p.J;
  j["C0"] = p.C0;
  auto& slopes = j["slopes"] = nlohmann::json::array();
  for (size_t s = 0; s < p.slopes.size(); ++s) {
    std::string bits;
    for (int b : p.bits_of(s)) bits.push_back(static_cast<char>('0' + b));
    std::vector<std::string> coords;
    for (const auto& x : p.slopes[s]) coords.push_back(to_string(x));
    slopes.push_back({{"bits", bits}, {"point", coords}, {"address", p.slope_address(s).str()}});
  }
  auto& table = j["splitting_vertices"] = nlohmann::json::array();
  for (const auto& sv : p.splitting)
    table.push_back({{"address", sv.vertex.str()},
                     {"nu", sv.index},
                     {"lambda", sv.lambda},
                     {"children", {sv.children[0].str(), sv.children[1].str()}},
                     {"basic", {sv.basic[0].str(), sv.basic[1].str()}}});
  j["fundamental_heights"] = p.fundamental_heights;
  return j;
}

}  // namespace tubelab
