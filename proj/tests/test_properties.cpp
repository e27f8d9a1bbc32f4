// Seeded property tests. Each case fixes its seed so failures reproduce.
#include "nikodym/classifier.hpp"
#include "nikodym/katetov.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace nikodym;
using testutil::Gen;
using testutil::Q;

namespace {

std::vector<BigInt> subset_of(const std::vector<BigInt> &ground, size_t mask) {
  std::vector<BigInt> out;
  for (size_t k = 0; k < ground.size(); ++k)
    if (mask >> k & 1)
      out.push_back(ground[k]);
  return out;
}

FinMeasure random_measure(Gen &g, long lo, long hi, bool signed_weights) {
  FinMeasure m;
  for (long x = lo; x <= hi; ++x)
    if (g.coin()) {
      Rational w = g.rational(12, 9);
      m.add(Point(BigInt(x)), signed_weights && g.coin() ? -w : w);
    }
  return m;
}

// Consecutive positive blocks tiling [0, ground).
std::vector<FinMeasure> random_blocks(Gen &g, long ground) {
  std::vector<FinMeasure> blocks;
  long at = 0;
  while (at < ground) {
    long len = std::min(ground - at, g.range(1, 3));
    FinMeasure m;
    while (m.empty())
      m = random_measure(g, at, at + len - 1, false);
    blocks.push_back(m);
    at += len;
  }
  return blocks;
}

std::set<long> to_set(const IntervalList &l, long hi) {
  std::set<long> out;
  for (long x = 0; x < hi; ++x)
    if (l.contains(BigInt(x)))
      out.insert(x);
  return out;
}

IntervalList random_intervals(Gen &g, std::set<long> &points) {
  std::vector<BigInt> pts;
  for (long x = 0; x < 40; ++x)
    if (g.range(0, 2) == 0) {
      pts.emplace_back(x);
      points.insert(x);
    }
  return IntervalList::from_points(pts);
}

} // namespace

TEST(Property, TransportBoundHoldsOnEverySubset) {
  Gen g(101);
  for (int trial = 0; trial < 100; ++trial) {
    auto t = g.transport_instance();
    TransportResult r = transport(t.lam, t.mu, t.eps);
    Rational worst = brute_force_worst(t.lam, t.mu, r);
    EXPECT_LE(worst, t.eps) << "trial " << trial;
    EXPECT_TRUE(part_bounds_hold(t.lam, r)) << "trial " << trial;
    std::vector<Rational> lv;
    for (const auto &[p, w] : t.lam.atoms())
      lv.push_back(w);
    TransportCheck c = check_transport(lv, pushed_masses(r), t.eps);
    EXPECT_EQ(c.worst_checked, worst) << "trial " << trial;
    // every atom of mu lands somewhere in A
    for (const auto &[p, w] : t.mu.atoms())
      EXPECT_GT(t.lam.weight(Point(r.map.at(p.index))), 0);
  }
}

TEST(Property, PushforwardIsLinear) {
  Gen g(202);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BigInt> values;
    for (int k = 0; k < 10; ++k)
      values.push_back(g.range(0, 4));
    ReductionTable f = ReductionTable::from_values(values);
    FinMeasure a = random_measure(g, 0, 9, true), b = random_measure(g, 0, 9, true);
    Rational ca = g.rational(5, 5), cb = -g.rational(5, 5);
    EXPECT_EQ(pushforward(combine(ca, a, cb, b), f), combine(ca, pushforward(a, f), cb, pushforward(b, f)));
    EXPECT_EQ(pushforward(a, f).total(), a.total());
    EXPECT_LE(norm(pushforward(a, f)), norm(a));
  }
}

TEST(Property, VariationIsAdditiveOnDisjointSets) {
  Gen g(303);
  for (int trial = 0; trial < 200; ++trial) {
    FinMeasure m = random_measure(g, 0, 15, true);
    std::vector<BigInt> left, right;
    for (long x = 0; x <= 15; ++x)
      (g.coin() ? left : right).emplace_back(x);
    auto l = sets::finite(left), r = sets::finite(right);
    EXPECT_EQ(variation(m, *l) + variation(m, *r), norm(m));
    EXPECT_EQ(restrict(m, *l).total() + restrict(m, *r).total(), m.total());
  }
}

TEST(Property, IntervalAlgebraMatchesPointSets) {
  Gen g(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<long> pa, pb;
    IntervalList a = random_intervals(g, pa), b = random_intervals(g, pb);
    std::set<long> u = pa, i, c;
    u.insert(pb.begin(), pb.end());
    for (long x : pa)
      if (pb.count(x))
        i.insert(x);
    for (long x = 0; x < 40; ++x)
      if (!pa.count(x))
        c.insert(x);
    EXPECT_EQ(to_set(IntervalList::unite(a, b), 40), u);
    EXPECT_EQ(to_set(IntervalList::intersect(a, b), 40), i);
    EXPECT_EQ(to_set(a.complement(0, 40), 40), c);
    EXPECT_EQ(a.count(), BigInt(static_cast<long>(pa.size())));
  }
}

TEST(Property, RationalTextRoundTrip) {
  Gen g(505);
  for (int trial = 0; trial < 500; ++trial) {
    Rational q = g.rational(1000, 100000);
    if (g.coin())
      q = -q;
    EXPECT_EQ(parse_rational(to_string(q)), q);
  }
}

TEST(Property, DensityEvaluationMatchesBruteForce) {
  Gen g(606);
  for (int trial = 0; trial < 50; ++trial) {
    auto blocks = random_blocks(g, 8);
    auto phi = submeasures::density(std::make_shared<BlockGenerator>(BlockGenerator::table(blocks, 1)));
    std::vector<BigInt> ground;
    for (long x = 0; x < 8; ++x)
      ground.emplace_back(x);
    for (size_t mask = 0; mask < 256; mask += static_cast<size_t>(g.range(1, 17))) {
      auto s = subset_of(ground, mask);
      Rational expect = 0;
      for (const auto &b : blocks) {
        Rational v = 0;
        for (const auto &x : s)
          v += b.weight(Point(x));
        expect = std::max(expect, v);
      }
      EXPECT_EQ(eval_submeasure(*phi, s), expect);
    }
  }
}

TEST(Property, DensityTruncationsHaveZeroDefect) {
  Gen g(707);
  for (int trial = 0; trial < 20; ++trial) {
    long size = g.range(1, 6);
    auto blocks = random_blocks(g, size);
    auto phi = submeasures::density(std::make_shared<BlockGenerator>(BlockGenerator::table(blocks, 1)));
    std::vector<BigInt> ground;
    for (long x = 0; x < size; ++x)
      ground.emplace_back(x);
    FiniteTable t = FiniteTable::tabulate(ground, [&](const std::vector<BigInt> &s) { return eval_submeasure(*phi, s); });
    size_t mask = static_cast<size_t>(g.range(0, (1L << size) - 1));
    DefectResult d = nonpathology_defect(t, subset_of(ground, mask));
    EXPECT_EQ(d.defect(), 0) << "trial " << trial;
  }
}

TEST(Property, LPValueNeverExceedsTheSubmeasure) {
  Gen g(808);
  for (int trial = 0; trial < 20; ++trial) {
    long size = g.range(1, 5);
    std::vector<BigInt> ground;
    std::vector<Rational> w;
    for (long x = 0; x < size; ++x) {
      ground.emplace_back(x);
      w.push_back(g.rational(4, 4));
    }
    Rational cap = g.rational(2, 4);
    // capped measure: monotone and subadditive
    FiniteTable t = FiniteTable::tabulate(ground, [&](const std::vector<BigInt> &s) {
      Rational v = 0;
      for (const auto &x : s)
        v += w[x.get_ui()];
      return std::min(v, cap);
    });
    DefectResult d = nonpathology_defect(t, ground);
    EXPECT_GE(d.defect(), 0);
    EXPECT_LE(d.lp_value, d.phi_value);
    Rational mass = 0;
    for (const auto &x : d.measure)
      mass += x;
    EXPECT_EQ(mass, d.lp_value);
  }
}

TEST(Property, PhiBlocksTile) {
  Gen g(909);
  for (int trial = 0; trial < 10; ++trial) {
    std::string f = "(mul " + std::to_string(g.range(1, 5)) + " (pow n " + std::to_string(g.range(0, 3)) + "))";
    BlockGenerator gen = BlockGenerator::phi(Function::parse(f));
    for (const auto &row : check_phi_blocks(gen, 8)) {
      EXPECT_TRUE(row.norm_ok) << f;
      EXPECT_TRUE(row.atoms_ok) << f;
      EXPECT_TRUE(row.tiles_ok) << f;
    }
  }
}

TEST(Property, DisjointifyReplaysAndSeparates) {
  Gen g(1010);
  int ran = 0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<FinMeasure> positives;
    long at = 0;
    for (long n = 0; n < 12; ++n) {
      FinMeasure m;
      for (int k = 0; k < g.range(1, 3); ++k)
        m.add(Point(BigInt(at += g.range(1, 2))), Rational(n + 1) * g.rational(3, 3));
      positives.push_back(m);
    }
    MeasureSeq seq = positive_to_AN(MeasureSeq::from_list(positives), 12);
    Disjointified d;
    try {
      d = disjointify(seq, FilterContext::make(ideals::fin()), 12);
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), "HorizonExhausted") << e.what();
      continue;
    }
    ++ran;
    auto again = replay_disjointify(seq, d.log);
    for (long k = 0; d.output.has(k); ++k) {
      EXPECT_EQ(again[static_cast<size_t>(k)], d.output.at(k));
      for (long j = k + 1; d.output.has(j); ++j)
        EXPECT_TRUE(disjoint_supports(d.output.at(k), d.output.at(j)));
    }
  }
  EXPECT_GT(ran, 0);
}

TEST(Property, FiniteSetsAlwaysBelong) {
  Gen g(1111);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<BigInt> pts;
    for (int k = 0; k < g.range(0, 6); ++k)
      pts.emplace_back(g.range(0, 500));
    auto x = sets::finite(pts);
    EXPECT_EQ(membership(*ideals::asymptotic_density(), *x, {16, Q("1/1000")}).verdict, Membership::Verdict::In);
    EXPECT_EQ(membership(*ideals::phi(Function::parse("n")), *x, {16, Q("1/1000")}).verdict, Membership::Verdict::In);
  }
}
