#include "nikodym/setspec.hpp"
#include "nikodym/transport.hpp"
#include "nikodym/reduction_table.hpp"
#include "nikodym/asymptotics.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nikodym;
using testutil::Q;
using testutil::measure;

// ---------------------------------------------------------------- rationals

TEST(Rational, CanonicalText) {
  EXPECT_EQ(to_string(Q("4/6")), "2/3");
  EXPECT_EQ(to_string(Q("2")), "2/1");
  EXPECT_EQ(to_string(Q("-3/-6")), "1/2");
  EXPECT_EQ(to_string(Q("0/5")), "0/1");
}

TEST(Rational, ParseErrors) {
  testutil::expect_code("ParseError", [] { parse_rational("1/0"); });
  testutil::expect_code("ParseError", [] { parse_rational("x/2"); });
  testutil::expect_code("ParseError", [] { parse_rational(""); });
  testutil::expect_code("ParseError", [] { parse_bigint("12a"); });
}

TEST(Rational, ErrorCarriesCodeAndDetail) {
  Error e("Code", "detail text");
  EXPECT_EQ(e.code(), "Code");
  EXPECT_EQ(e.detail(), "detail text");
  EXPECT_STREQ(e.what(), "Code: detail text");
}

TEST(Rational, FloorCeilNegative) {
  EXPECT_EQ(floor(Q("-1/2")), -1);
  EXPECT_EQ(ceil(Q("-1/2")), 0);
  EXPECT_EQ(floor(Q("7/2")), 3);
  EXPECT_EQ(ceil(Q("7/2")), 4);
}

// ---------------------------------------------------------------- expressions

TEST(Expr, EvaluatesOperators) {
  EXPECT_EQ(Function::parse("(mul 2 (pow n 2))")(5), 50);
  EXPECT_EQ(Function::parse("(sub 3 n)")(5), 0); // truncated subtraction
  EXPECT_EQ(Function::parse("(floordiv (exp2 n) (add n 1))")(4), 3);
  EXPECT_EQ(Function::parse("(div 1 (add n 1))")(3), Q("1/4"));
  EXPECT_EQ(Function::parse("(prefix_sum (pow n 4) n)")(4), 1 + 16 + 81);
}

TEST(Expr, BigValuesStayExact) {
  BigInt v = Function::parse("(exp2 (pow n 2))").at_int(9);
  EXPECT_EQ(v, pow2(81));
}

TEST(Expr, ParseErrors) {
  testutil::expect_code("ParseError", [] { Function::parse("(mul 2"); });
  testutil::expect_code("UnknownFunction", [] { Function::parse("(frob n)")(1); });
  testutil::expect_code("ParseError", [] { Function::parse("k"); });
}

TEST(Expr, DivisionByZero) {
  testutil::expect_code("DivisionByZero", [] { Function::parse("(div 1 (sub n n))")(3); });
}

TEST(Asymptotics, Limits) {
  EXPECT_EQ(limit_of(Function::parse("(div 1 (exp2 n))")), Limit::Zero);
  EXPECT_EQ(limit_of(Function::parse("n")), Limit::PlusInfinity);
  EXPECT_EQ(limit_of(Function::parse("(div n (add n 1))")), Limit::Finite);
  EXPECT_EQ(growth::series(analyze_growth(Function::parse("(div 1 (add n 1))"))), Series::Diverges);
  EXPECT_EQ(growth::series(analyze_growth(Function::parse("(div 1 (pow n 2))"))), Series::Converges);
}

// ---------------------------------------------------------------- measures

TEST(Measure, Norm) {
  EXPECT_EQ(norm(measure({{0, "2"}, {1, "-3"}})), 5);
  EXPECT_EQ(norm(FinMeasure()), 0);
  FinMeasure m = measure({{0, "1/2"}, {5, "1/3"}});
  m.add(Point::PF(), Q("1/6"));
  EXPECT_EQ(norm(m), 1);
}

TEST(Measure, VariationAndRestriction) {
  FinMeasure m = measure({{0, "2"}, {1, "-3"}});
  EXPECT_EQ(variation(m, *sets::finite({BigInt(1)})), 3);
  EXPECT_EQ(variation(m, *sets::empty()), 0);
  FinMeasure alt = measure({{0, "1"}, {2, "-1"}, {4, "1"}});
  auto evens = sets::interval_rule(Function::parse("(mul 2 n)"), Function::parse("1"), 0);
  auto odds = sets::interval_rule(Function::parse("(add (mul 2 n) 1)"), Function::parse("1"), 0);
  EXPECT_EQ(variation(alt, *evens), 3);
  EXPECT_EQ(restrict(m, *sets::finite({BigInt(0)})), measure({{0, "2"}}));
  EXPECT_EQ(restrict(m, *sets::everything()), m);
  EXPECT_TRUE(restrict(alt, *odds).empty());
}

TEST(Measure, RestrictionKeepsPFOnlyWhenTheSetHasIt) {
  FinMeasure m = measure({{3, "1"}});
  m.add(Point::PF(), 2);
  EXPECT_EQ(restrict(m, *sets::everything(true)).weight(Point::PF()), 2);
  EXPECT_EQ(restrict(m, *sets::everything(false)).weight(Point::PF()), 0);
}

TEST(Measure, AtomBounds) {
  AtomBounds a = atom_bounds(measure({{0, "1"}, {1, "3"}}));
  EXPECT_EQ(a.at_plus, 3);
  EXPECT_EQ(a.at_minus, 1);
  AtomBounds u = atom_bounds(FinMeasure::uniform(0, 4, Q("1/4")));
  EXPECT_EQ(u.at_plus, Q("1/4"));
  EXPECT_EQ(u.at_minus, Q("1/4"));
  AtomBounds c = atom_bounds(measure({{0, "1/2"}, {1, "1/3"}, {2, "1/6"}}));
  EXPECT_EQ(c.at_plus, Q("1/2"));
  EXPECT_EQ(c.at_minus, Q("1/6"));
  testutil::expect_code("EmptyMeasure", [] { atom_bounds(FinMeasure()); });
  testutil::expect_code("NegativeMeasure", [] { atom_bounds(measure({{0, "-1"}})); });
}

TEST(Measure, Combine) {
  FinMeasure d0 = FinMeasure::dirac(Point(0)), d1 = FinMeasure::dirac(Point(1));
  EXPECT_TRUE(combine(1, d0, -1, d0).empty());
  EXPECT_EQ(combine(2, d0, 3, d1), measure({{0, "2"}, {1, "3"}}));
  FinMeasure expect = measure({{3, "-1"}});
  expect.add(Point::PF(), 1);
  EXPECT_EQ(combine(1, FinMeasure::dirac(Point::PF()), Q("-1/2"), FinMeasure::dirac(Point(3), 2)), expect);
}

TEST(Measure, ZeroWeightsNeverStored) {
  EXPECT_TRUE(FinMeasure::from_pairs({{Point(0), Rational(0)}}).empty());
  EXPECT_EQ(FinMeasure::from_pairs({{Point(0), Rational(1)}, {Point(0), Rational(2)}}), measure({{0, "3"}}));
}

TEST(Measure, Pushforward) {
  EXPECT_EQ(pushforward(measure({{0, "1"}, {1, "1"}}), ReductionTable::from_values({0, 0})), measure({{0, "2"}}));
  FinMeasure m = measure({{0, "2"}, {1, "-3"}});
  EXPECT_EQ(pushforward(m, ReductionTable::identity()), m);
  EXPECT_TRUE(pushforward(measure({{0, "1"}, {1, "-1"}}), ReductionTable::from_values({5, 5})).empty());
}

TEST(Measure, PushforwardErrors) {
  testutil::expect_code("UndefinedAt", [] { pushforward(measure({{3, "1"}}), ReductionTable::from_values({0, 0})); });
  testutil::expect_code("HasPFAtom", [] { pushforward(FinMeasure::dirac(Point::PF()), ReductionTable::identity()); });
}

// ---------------------------------------------------------------- intervals

TEST(Intervals, UnionIntersectComplement) {
  IntervalList a = IntervalList::single(0, 5), b = IntervalList::single(3, 9);
  EXPECT_EQ(IntervalList::unite(a, b), IntervalList::single(0, 9));
  EXPECT_EQ(IntervalList::intersect(a, b), IntervalList::single(3, 5));
  IntervalList c = IntervalList::from_points({BigInt(1), BigInt(2), BigInt(7)});
  EXPECT_EQ(c.pieces().size(), 2u);
  EXPECT_EQ(c.count(), 3);
  IntervalList comp = c.complement(0, 8);
  EXPECT_EQ(comp.count(), 5);
  EXPECT_FALSE(comp.contains(7));
  EXPECT_TRUE(comp.contains(0));
}

TEST(SetSpec, ComplementOfComplementCollapses) {
  auto x = sets::finite({BigInt(0)});
  EXPECT_EQ(sets::complement(sets::complement(x)), x);
  EXPECT_EQ(sets::complement(x)->finite(), std::optional<bool>(false));
}

// ---------------------------------------------------------------- transport

namespace {

Rational subset_worst(const FinMeasure &lam, const FinMeasure &mu, const TransportResult &r) {
  std::vector<BigInt> targets;
  for (const auto &[p, w] : lam.atoms())
    targets.push_back(p.index);
  Rational worst = 0;
  for (size_t mask = 0; mask < (size_t(1) << targets.size()); ++mask) {
    Rational err = 0;
    for (size_t k = 0; k < targets.size(); ++k)
      if (mask >> k & 1)
        err += lam.weight(Point(targets[k]));
    for (const auto &[p, w] : mu.atoms()) {
      const BigInt &img = r.map.at(p.index);
      for (size_t k = 0; k < targets.size(); ++k)
        if ((mask >> k & 1) && targets[k] == img)
          err -= w;
    }
    worst = std::max(worst, abs(err));
  }
  return worst;
}

} // namespace

TEST(Transport, SingleTarget) {
  FinMeasure lam = measure({{7, "1"}});
  FinMeasure mu = FinMeasure::uniform(0, 4, Q("1/4"));
  TransportResult r = transport(lam, mu, Q("1/2"));
  for (const auto &[b, a] : r.map)
    EXPECT_EQ(a, 7);
  EXPECT_EQ(subset_worst(lam, mu, r), 0);
}

TEST(Transport, EvenSplit) {
  FinMeasure lam = measure({{0, "1/2"}, {1, "1/2"}});
  FinMeasure mu = FinMeasure::uniform(10, 8, Q("1/8"));
  TransportResult r = transport(lam, mu, Q("1/2"));
  ASSERT_EQ(r.parts.size(), 2u);
  EXPECT_EQ(r.parts[0].atoms.size(), 4u);
  EXPECT_EQ(r.parts[1].atoms.size(), 4u);
  EXPECT_TRUE(r.leftover.empty());
  EXPECT_EQ(subset_worst(lam, mu, r), 0);
}

TEST(Transport, UnevenSplitLeavesOneAtom) {
  FinMeasure lam = measure({{0, "2/3"}, {1, "1/3"}});
  FinMeasure mu = FinMeasure::uniform(10, 8, Q("1/8"));
  TransportResult r = transport(lam, mu, Q("1/2"));
  ASSERT_EQ(r.parts.size(), 2u);
  EXPECT_EQ(r.parts[0].atoms.size(), 5u);
  EXPECT_EQ(r.parts[1].atoms.size(), 2u);
  EXPECT_EQ(r.leftover.size(), 1u);
  EXPECT_EQ(r.leftover_mass, Q("1/8"));
  EXPECT_EQ(subset_worst(lam, mu, r), Q("1/12"));
  EXPECT_EQ(brute_force_worst(lam, mu, r), Q("1/12"));
  EXPECT_TRUE(part_bounds_hold(lam, r));
}

TEST(Transport, PreconditionErrors) {
  FinMeasure lam = measure({{0, "1"}});
  testutil::expect_code("MassMismatch", [&] { transport(lam, FinMeasure::uniform(0, 2, Q("1/4")), Q("1/2")); });
  testutil::expect_code("AtomTooLarge", [&] { transport(lam, FinMeasure::uniform(0, 2, Q("1/2")), Q("1/2")); });
}
