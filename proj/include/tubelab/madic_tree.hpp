#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tubelab/core.hpp"

namespace tubelab {

// Rooted M^d-adic tree of explicit height J.  Immutable after construction;
// child enumeration is memoized behind a mutex so shared reads are safe.
class MadicTree {
 public:
  using Predicate = std::function<bool(const Address&)>;
  // Optional isomorphism-class key: vertices with equal keys root isomorphic subtrees.
  using KeyFn = std::function<std::string(const Address&)>;

  static MadicTree encode_set(std::vector<RationalPoint> points, int M, int J);
  static MadicTree from_vertices(int M, int d, int J, const std::vector<Address>& vertices);
  static MadicTree from_predicate(int M, int d, int J, Predicate member, KeyFn key = {});

  int base() const { return M_; }
  int dim() const { return d_; }
  int height() const { return J_; }
  Address root() const { return Address(d_); }

  bool contains(const Address& v) const;
  const std::vector<Address>& children(const Address& v) const;
  std::vector<Address> level(int h) const;
  std::vector<Address> vertices() const;
  size_t vertex_count() const;

  const std::vector<RationalPoint>* points() const { return points_ ? &*points_ : nullptr; }
  std::optional<std::string> key(const Address& v) const;
  bool has_key() const { return static_cast<bool>(key_); }
  // Lexicographically minimal point of the encoded set inside v.
  RationalPoint min_point(const Address& v) const;

 private:
  MadicTree(int M, int d, int J) : M_(M), d_(d), J_(J), cache_(std::make_shared<Cache>()) {}

  struct Cache {
    std::mutex mu;
    std::unordered_map<Address, std::vector<Address>, AddressHash> children;
  };

  int M_, d_, J_;
  Predicate member_;
  KeyFn key_;
  std::shared_ptr<std::vector<Address>> leaves_;  // sorted height-J addresses (point/vertex backing)
  std::shared_ptr<std::vector<RationalPoint>> points_;  // sorted parallel to leaf order
  std::shared_ptr<std::vector<Address>> leaf_of_point_;
  std::shared_ptr<Cache> cache_;
};

// Memoized splitting-number recursion split(v) = max(max_c split(c), 1 + secondmax_c split(c)).
class SplitCalculator {
 public:
  explicit SplitCalculator(const MadicTree& tree) : tree_(tree) {}
  int split(const Address& v);

 private:
  const MadicTree& tree_;
  std::unordered_map<std::string, int> by_key_;
  std::unordered_map<Address, int, AddressHash> by_vertex_;
};

struct SplitResult {
  int value = 0;
  // Per-vertex values; filled only when the tree has at most `max_vertices` vertices.
  std::unordered_map<Address, int, AddressHash> per_vertex;
};

SplitResult splitting_number(const MadicTree& tree, size_t max_vertices = 200000);

// Exhaustive max over subtrees of the min over rays of the number of splits.
int splitting_number_bruteforce(const MadicTree& tree, size_t max_vertices = 20);

// f given as (domain vertex, image vertex) pairs.
bool is_sticky(const std::vector<std::pair<Address, Address>>& f);

// Random tree with height <= max_height, branching <= max_branch and at most max_vertices vertices.
MadicTree random_tree(uint64_t seed, int M, int max_height, int max_branch, size_t max_vertices);

// Lazy self-similar trees keyed by height: every digit of every coordinate drawn from `allowed`.
// digit_tree(3, 1, J, {0, 2}) is the middle-thirds Cantor tree; allowed = all digits gives the full tree.
MadicTree digit_tree(int M, int d, int J, std::vector<uint8_t> allowed);
MadicTree full_tree(int M, int d, int J);

// Subtree of the full M-adic tree generated by a finite set of addresses of any heights.
MadicTree::Predicate prefix_predicate(std::vector<Address> generators);

}  // namespace tubelab
