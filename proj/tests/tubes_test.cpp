#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tubelab/madic_tree.hpp"
#include "tubelab/tubes.hpp"

using namespace tubelab;

namespace {

const PrunedSlopeTree& cantor_n2() {
  static const PrunedSlopeTree p = prune(digit_tree(3, 1, 19, {0, 2}), 2, 1);
  return p;
}

const PrunedSlopeTree& cantor_n3() {
  static const PrunedSlopeTree p = prune(digit_tree(3, 1, 19, {0, 2}), 3, 1);
  return p;
}

const PrunedSlopeTree& planar() {
  static const PrunedSlopeTree p = prune(full_tree(2, 2, 20), 1, 1);
  return p;
}

Address random_root(const PrunedSlopeTree& p, std::mt19937_64& rng) {
  Address a(p.d);
  for (int k = 0; k < p.J * p.d; ++k) a.digits.push_back(static_cast<uint8_t>(rng() % p.M));
  return a;
}

Rational random_unit(std::mt19937_64& rng, long den = 1000) { return Rational(static_cast<long>(rng() % den), den); }

// Fine-grid estimate of |P cap P' cap slab| for d = 1 over the bounding box of the
// intersection, with the boundary-layer error bound for a convex region.
struct Raster {
  double estimate = 0, bound = 0;
};

Raster rasterize(const Tube& a, const Tube& b, const SlabWindow& w, int cells) {
  auto iv = overlap_interval(a, b, w);
  Raster r;
  if (iv.empty()) return r;
  double x0 = to_double(iv.lo), x1 = to_double(iv.hi);
  double c0 = to_double(a.centre[0]), c1 = to_double(b.centre[0]);
  double w0 = to_double(a.direction[0]), w1 = to_double(b.direction[0]);
  double half = to_double(a.side) / 2;
  double y0 = std::max(std::min(c0 + x0 * w0, c0 + x1 * w0), std::min(c1 + x0 * w1, c1 + x1 * w1)) - half;
  double y1 = std::min(std::max(c0 + x0 * w0, c0 + x1 * w0), std::max(c1 + x0 * w1, c1 + x1 * w1)) + half;
  double hx = (x1 - x0) / cells, hy = (y1 - y0) / cells;
  long hits = 0;
  for (int i = 0; i < cells; ++i) {
    double x = x0 + (i + 0.5) * hx;
    double a_lo = c0 + x * w0 - half, a_hi = c0 + x * w0 + half;
    double b_lo = c1 + x * w1 - half, b_hi = c1 + x * w1 + half;
    for (int j = 0; j < cells; ++j) {
      double y = y0 + (j + 0.5) * hy;
      hits += (y >= a_lo && y <= a_hi && y >= b_lo && y <= b_hi);
    }
  }
  r.estimate = hits * hx * hy;
  double diag = std::hypot(hx, hy);
  r.bound = 4 * ((x1 - x0) + (y1 - y0)) * diag + M_PI * diag * diag;
  return r;
}

}  // namespace

TEST(Dilation, ConstantMeetsBothConstraints) {
  EXPECT_EQ(dilation_constant(1), Rational(1, 4));
  EXPECT_EQ(dilation_constant(2), Rational(1, 16));
  EXPECT_EQ(dilation_constant(3), Rational(1, 729));
  for (int d = 1; d <= 5; ++d) {
    Rational c = dilation_constant(d);
    EXPECT_LE(16 * d * c * c, 1);
    EXPECT_LE(c, Rational(Integer(1), ipow(d, 2L * d)));
  }
}

TEST(Tube, CrossSectionAndMembership) {
  const auto& p = cantor_n2();
  ASSERT_EQ(p.J, 3);
  Address t(1, {1, 0, 2});
  auto tube = make_tube(p, t, 0, 10);
  EXPECT_EQ(tube.side, Rational(1, 108));
  EXPECT_EQ(tube.length, 100);
  EXPECT_EQ(tube.centre[0], Rational(23, 54));
  RationalPoint x{Rational(3), tube.cross_centre(3)[0] + tube.side / 2};
  EXPECT_TRUE(tube.contains(x));
  x[1] += Rational(1, 100000);
  EXPECT_FALSE(tube.contains(x));
  EXPECT_FALSE(tube.contains({Rational(101), tube.cross_centre(101)[0]}));
  EXPECT_EQ(to_json(tube)["root"], "<1,0,2>");
}

TEST(Window, ValidatesScaleAndRatio) {
  const auto& p = cantor_n2();
  EXPECT_NO_THROW(SlabWindow::scaled(Rational(1, 27), 3, p));
  EXPECT_THROW(SlabWindow::scaled(Rational(1, 28), 3, p), ValidationError);
  EXPECT_THROW(SlabWindow::scaled(1, 1, p), ValidationError);
  EXPECT_THROW(SlabWindow(1, 1), ValidationError);
  auto w = SlabWindow::level(3, 2);
  EXPECT_EQ(w.lo, Rational(1, 9));
  EXPECT_EQ(w.hi, Rational(1, 3));
}

TEST(Intersects, IdenticalAndParallelTubes) {
  const auto& p = cantor_n2();
  SlabWindow w(10, 11);
  Address t(1, {0, 1, 2}), t2(1, {0, 2, 0});
  auto a = make_tube(p, t, 1);
  EXPECT_TRUE(intersects(a, a, w));
  EXPECT_FALSE(intersects(a, make_tube(p, t2, 1), w));
  EXPECT_EQ(pair_intersection_volume(a, make_tube(p, t2, 1), w), 0);
  EXPECT_EQ(pair_intersection_volume(a, a, w), a.side);
  EXPECT_THROW(intersects(a, make_tube(cantor_n3(), Address(1, {0, 0, 0, 0, 0}), 0), w), ValidationError);
}

TEST(Intersects, PlanarIdenticalTubeVolume) {
  const auto& p = planar();
  Address t(2, std::vector<uint8_t>(2 * p.J, 1));
  auto a = make_tube(p, t, 0);
  EXPECT_EQ(pair_intersection_volume(a, a, SlabWindow(10, 11)), a.side * a.side);
}

TEST(PairVolume, MatchesRasterizationOnRandomPairs) {
  const auto& p = cantor_n3();
  std::mt19937_64 rng(11);
  int checked = 0;
  double worst_ratio = 0;
  while (checked < 100) {
    size_t s1 = rng() % p.slopes.size(), s2 = rng() % p.slopes.size();
    if (s1 == s2) continue;
    Address t1 = random_root(p, rng);
    auto a = make_tube(p, t1, s1);
    auto w = SlabWindow::scaled(Rational(1, 1 + static_cast<long>(rng() % 9)), 3, p);
    // Root of a tube crossing a at a random height inside the window.
    Rational x = w.lo + random_unit(rng) * w.width();
    Rational y = a.cross_centre(x)[0] - x * p.slopes[s2][0];
    if (y < 0 || y >= 1) continue;
    auto b = make_tube(p, address_of({y}, p.M, p.J), s2);
    if (b.root == a.root) continue;
    Rational exact = pair_intersection_volume(a, b, w);
    ASSERT_EQ(exact > 0, intersects(a, b, w));
    if (exact == 0) continue;
    auto r = rasterize(a, b, w, 1000);
    EXPECT_NEAR(r.estimate, to_double(exact), r.bound) << checked;
    EXPECT_EQ(exact, pair_intersection_volume(b, a, w));
    worst_ratio = std::max(worst_ratio, intersection_size_ratio(a, b, w));
    ++checked;
  }
  EXPECT_LE(worst_ratio, 16.0);
}

TEST(PairVolume, PlanarAgreesWithFineQuadrature) {
  const auto& p = planar();
  std::mt19937_64 rng(3);
  int checked = 0;
  while (checked < 10) {
    Address t1 = random_root(p, rng);
    auto a = make_tube(p, t1, 0);
    SlabWindow w(Rational(1, 4), 1);
    Rational x = w.lo + random_unit(rng) * w.width();
    RationalPoint y = a.cross_centre(x);
    for (size_t i = 0; i < 2; ++i) y[i] -= x * p.slopes[1][i];
    if (y[0] < 0 || y[0] >= 1 || y[1] < 0 || y[1] >= 1) continue;
    auto b = make_tube(p, address_of(y, p.M, p.J), 1);
    Rational exact = pair_intersection_volume(a, b, w);
    if (exact == 0) continue;
    // Cross-section overlap is a product of tents; integrate it on a fine midpoint grid.
    auto iv = overlap_interval(a, b, w);
    double lo = to_double(iv.lo), hi = to_double(iv.hi), s = to_double(a.side), sum = 0;
    int n = 200000;
    for (int k = 0; k < n; ++k) {
      double xm = lo + (k + 0.5) * (hi - lo) / n, prod = 1;
      for (size_t i = 0; i < 2; ++i) {
        double g = to_double(b.centre[i] - a.centre[i]) + xm * to_double(b.direction[i] - a.direction[i]);
        prod *= std::max(0.0, s - std::abs(g));
      }
      sum += prod * (hi - lo) / n;
    }
    EXPECT_NEAR(sum, to_double(exact), 1e-6 * to_double(exact));
    EXPECT_LE(intersection_size_ratio(a, b, w), 64.0);
    ++checked;
  }
}

TEST(Union, SingleAndDisjointTubes) {
  const auto& p = cantor_n2();
  SlabWindow w(10, 11);
  auto a = make_tube(p, Address(1, {0, 0, 0}), 0);
  auto u = union_volume({a}, w, 8);
  EXPECT_EQ(u.estimate, a.side);
  EXPECT_EQ(u.lower_bound, a.side);
  auto b = make_tube(p, Address(1, {2, 2, 2}), 0);
  auto u2 = union_volume({a, b}, w, 8);
  EXPECT_EQ(u2.estimate, 2 * a.side);
  EXPECT_EQ(u2.lower_bound, 2 * a.side);
  EXPECT_THROW(union_volume({}, w), ValidationError);
  EXPECT_THROW(union_volume({a}, w, 0), ValidationError);
}

TEST(Union, LowerBoundBelowEstimateOnRandomFamilies) {
  const auto& p = cantor_n2();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tube> tubes;
    for (int i = 0; i < 12; ++i) tubes.push_back(make_tube(p, random_root(p, rng), rng() % p.slopes.size()));
    SlabWindow w(Rational(1, 3), 1);
    auto u = union_volume(tubes, w, 64);
    EXPECT_LE(to_double(u.lower_bound), to_double(u.estimate) * 1.01) << trial;
    Rational mass = 0;
    for (const auto& t : tubes) mass += tube_slab_volume(t, w);
    EXPECT_LE(u.estimate, mass);
  }
}

TEST(Union, QuadratureConvergesAtLeastLinearly) {
  const auto& p = cantor_n2();
  std::mt19937_64 rng(8);
  SlabWindow w(0, 1);
  // Slices resolve the crossings once S exceeds roughly |v - v'| / side.
  std::vector<double> err(4, 0.0);
  for (int family = 0; family < 3; ++family) {
    std::vector<Tube> tubes;
    for (int i = 0; i < 27; ++i) tubes.push_back(make_tube(p, random_root(p, rng), rng() % p.slopes.size()));
    double reference = to_double(union_volume(tubes, w, 4096).estimate);
    for (int k = 0; k < 4; ++k) err[k] += std::abs(to_double(union_volume(tubes, w, 128 << k).estimate) - reference);
  }
  for (int k = 1; k < 4; ++k) EXPECT_LE(err[k], 0.5 * err[k - 1] + 1e-9) << (128 << k);
}

TEST(Slice, PlanarUnionOfOverlappingSquares) {
  const auto& p = planar();
  Address t(2, std::vector<uint8_t>(2 * p.J, 0));
  auto a = make_tube(p, t, 0);
  EXPECT_EQ(slice_union_measure({a, a}, 5), a.side * a.side);
  EXPECT_EQ(slice_union_measure({a}, 1000), 0);
}

TEST(Poss, ChosenTubeAndEmptyCase) {
  const auto& p = cantor_n3();
  Address t(1, {1, 2, 0, 1, 1});
  for (size_t s = 0; s < p.slopes.size(); ++s) {
    auto tube = make_tube(p, t, s);
    RationalPoint x{Rational(17), tube.cross_centre(17)[0]};
    auto ps = poss(x, p);
    bool found = false;
    for (size_t i = 0; i < ps.size(); ++i)
      if (ps.roots[i] == t) found = ps.slopes[i] == s;
    EXPECT_TRUE(found) << s;
    EXPECT_GE(ps.size(), 1u);
  }
  EXPECT_EQ(poss({Rational(10), Rational(-1)}, p).size(), 0u);
  EXPECT_THROW(poss({Rational(9), Rational(1, 2)}, p), ValidationError);
  EXPECT_THROW(poss({Rational(101), Rational(1, 2)}, p), ValidationError);
}

TEST(Poss, TubeDefinitionIsContainedInTraceDefinition) {
  const auto& p = cantor_n3();
  std::mt19937_64 rng(4);
  size_t strict = 0, wide = 0;
  for (int trial = 0; trial < 300; ++trial) {
    RationalPoint x{10 + 90 * random_unit(rng), 20 * random_unit(rng, 100000)};
    auto a = poss_through_tubes(x, p), b = poss(x, p);
    for (size_t i = 0; i < a.size(); ++i) {
      auto it = std::find(b.roots.begin(), b.roots.end(), a.roots[i]);
      ASSERT_NE(it, b.roots.end());
      EXPECT_EQ(b.slopes[it - b.roots.begin()], a.slopes[i]);
    }
    // The two sets differ only by roots whose trace misses the dilated cube.
    for (size_t i = 0; i < b.size(); ++i) {
      Rational y = x[1] - x[0] * p.slopes[b.slopes[i]][0];
      EXPECT_TRUE(address_of({y}, p.M, p.J) == b.roots[i]);
    }
    strict += a.size();
    wide += b.size();
  }
  EXPECT_LT(strict, wide);
  EXPECT_GT(strict, 0u);
}

TEST(ReferenceTree, SinglePossibleRootGivesOneRay) {
  const auto& p = cantor_n3();
  // Below every other trace: only the smallest slope can reach a root.
  size_t s0 = 0;
  for (size_t s = 0; s < p.slopes.size(); ++s)
    if (p.slopes[s][0] < p.slopes[s0][0]) s0 = s;
  RationalPoint x{Rational(10), 10 * p.slopes[s0][0] + Rational(1, 1000000)};
  auto tree = reference_trees(x, p);
  ASSERT_EQ(tree.possible.size(), 1u);
  EXPECT_EQ(tree.counts(), (std::vector<size_t>{1, 1, 1}));
  EXPECT_EQ(tree.levels[2][0].cube, tree.possible.roots[0]);
  EXPECT_EQ(tree.levels[2][0].image, p.slope_address(s0));
}

TEST(ReferenceTree, WeakStickinessAndGrowthOverRandomPoints) {
  for (const auto* p : {&cantor_n2(), &cantor_n3()}) {
    std::mt19937_64 rng(p->N);
    double c = 0;
    size_t nonempty = 0;
    for (int trial = 0; trial < 300; ++trial) {
      Rational x1 = 10 + 90 * random_unit(rng);
      RationalPoint x{x1, x1 * p->slopes[rng() % p->slopes.size()][0] + random_unit(rng, 1000000)};
      auto tree = reference_trees(x, *p);
      nonempty += tree.possible.size() > 0;
      if (tree.possible.size() == 0) continue;
      auto n = tree.counts();
      EXPECT_EQ(n.back(), tree.possible.size());
      for (int j = 2; j <= p->N; ++j) EXPECT_LE(n[j - 2], n[j - 1]);
      for (size_t i = 0; i < tree.possible.size(); ++i)
        for (int j = 1; j <= p->N; ++j) {
          const auto& v = tree.levels[j - 1][tree.rays[i][j - 1]];
          EXPECT_EQ(v.cube.height(), p->eta(tree.possible.slopes[i], j));
          EXPECT_TRUE(v.cube.contains(tree.possible.roots[i]));
        }
      c = std::max(c, tree.growth_constant());
    }
    EXPECT_EQ(nonempty, 300u);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Inclusion, WitnessOnTubesAndNoneOffThem) {
  const auto& p = cantor_n3();
  auto sigma = sample_assignment(p, 99);
  Address t(1, {0, 2, 1, 1, 0});
  size_t s = sigma.sigma(t);
  auto tube = make_tube(p, t, s);
  RationalPoint x{Rational(23), tube.cross_centre(23)[0]};
  auto inc = inclusion_check(x, sigma);
  EXPECT_TRUE(inc.member);
  ASSERT_TRUE(inc.witness.has_value());
  EXPECT_EQ(*inc.witness, t);
  auto none = inclusion_check({Rational(10), Rational(-5)}, sigma);
  EXPECT_FALSE(none.member);
  EXPECT_FALSE(none.witness.has_value());
}

TEST(Inclusion, AgreesWithMembershipInEveryTube) {
  const auto& p = cantor_n2();
  auto roots = root_cubes(p);
  std::mt19937_64 rng(31);
  int members = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto sigma = sample_assignment(p, rng());
    RationalPoint x;
    if (trial % 2 == 0) {
      const Address& t = roots[rng() % roots.size()];
      auto tube = make_tube(p, t, sigma.sigma(t));
      Rational x1 = 10 + 90 * random_unit(rng);
      x = {x1, tube.cross_centre(x1)[0] + (random_unit(rng) - Rational(1, 2)) * tube.side};
    } else {
      x = {10 + 90 * random_unit(rng), 40 * random_unit(rng, 100000)};
    }
    bool brute = false;
    for (const auto& t : roots) brute = brute || make_tube(p, t, sigma.sigma(t)).contains(x);
    auto inc = inclusion_check(x, sigma);
    EXPECT_EQ(inc.member, brute) << trial;
    if (brute) EXPECT_TRUE(inc.witness.has_value());
    members += brute;
  }
  EXPECT_GE(members, 100);
}
