#include "nikodym/katetov.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nikodym;
using testutil::Q;

namespace {

std::vector<BigInt> pts(std::initializer_list<long> xs) {
  std::vector<BigInt> out;
  for (long x : xs)
    out.emplace_back(x);
  return out;
}

SetPtr powers_of_two() {
  auto zd = std::make_shared<BlockGenerator>(BlockGenerator::asymptotic_density());
  return sets::block_select(zd, Function::parse("1"), SetSpec::Mode::First);
}

SetPtr half_blocks() {
  auto zd = std::make_shared<BlockGenerator>(BlockGenerator::asymptotic_density());
  return sets::block_select(zd, Function::parse("(floordiv (exp2 n) 2)"), SetSpec::Mode::First);
}

// X = union over k >= 1 of [2^k, 2^k + floor(2^k / k))
SetPtr thin_segments() {
  return sets::interval_rule(Function::parse("(exp2 n)"), Function::parse("(floordiv (exp2 n) n)"), 1);
}

FiniteTable pathological() {
  return FiniteTable({BigInt(0), BigInt(1), BigInt(2)}, {0, 1, 1, 1, 1, 1, 1, 2});
}

FiniteTable density_truncation() {
  std::vector<FinMeasure> blocks = {testutil::measure({{0, "1"}, {1, "1"}}), FinMeasure::uniform(2, 4, Q("1/2"))};
  auto gen = std::make_shared<BlockGenerator>(BlockGenerator::table(blocks, 1));
  auto phi = submeasures::density(gen);
  return FiniteTable::tabulate(pts({0, 1, 2, 3, 4, 5}),
                               [&](const std::vector<BigInt> &s) { return eval_submeasure(*phi, s); });
}

} // namespace

// ---------------------------------------------------------------- evaluation

TEST(EvalSubmeasure, AsymptoticDensity) {
  auto zd = submeasures::asymptotic_density();
  EXPECT_EQ(eval_submeasure(*zd, pts({2, 3})), 1);
  EXPECT_EQ(eval_submeasure(*zd, pts({4, 5})), Q("1/2"));
  EXPECT_EQ(eval_submeasure(*zd, {}), 0);
}

TEST(EvalSubmeasure, Summable) {
  auto h = submeasures::summable(Function::parse("(div 1 (add n 1))"));
  EXPECT_EQ(eval_submeasure(*h, pts({0, 1, 3})), Q("7/4"));
  EXPECT_EQ(eval_submeasure(*h, {}), 0);
}

TEST(EvalSubmeasure, DensityOfPhi) {
  auto phi = submeasures::density(std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse("n"))));
  // block 2 = [1, 4] with atoms 1/2, block 3 = [5, 13] with atoms 1/3
  EXPECT_EQ(eval_submeasure(*phi, pts({1, 2, 5})), 1);
  EXPECT_EQ(eval_submeasure(*phi, pts({5, 6, 7, 8})), Q("4/3"));
  EXPECT_EQ(eval_submeasure(*phi, {}), 0);
}

TEST(EvalSubmeasure, MaxMerge) {
  auto m = submeasures::max_merge(submeasures::asymptotic_density(),
                                  submeasures::summable(Function::parse("(div 1 (add n 1))")));
  EXPECT_EQ(eval_submeasure(*m, pts({0, 1, 3})), Q("7/4"));
  EXPECT_EQ(eval_submeasure(*m, pts({2, 3})), 1);
}

TEST(EvalSubmeasure, FiniteTableOutOfGround) {
  auto t = submeasures::finite_table(pathological());
  EXPECT_EQ(eval_submeasure(*t, pts({0, 2})), 1);
  testutil::expect_code("OutOfGround", [&] { eval_submeasure(*t, pts({3})); });
}

TEST(FiniteTable, RejectsNonSubmeasures) {
  testutil::expect_code("ValidationError", [] { FiniteTable(pts({0}), {1, 1}); });         // phi(empty) != 0
  testutil::expect_code("ValidationError", [] { FiniteTable(pts({0, 1}), {0, 2, 1, 1}); }); // not monotone
  testutil::expect_code("ValidationError", [] { FiniteTable(pts({0, 1}), {0, 1, 1, 3}); }); // not subadditive
  testutil::expect_code("ValidationError", [] { FiniteTable(pts({0, 1}), {0, 1, 1}); });    // wrong length
}

// ---------------------------------------------------------------- block values

TEST(BlockValues, HalfBlocksOfZ) {
  auto v = block_values(*ideals::asymptotic_density(), *half_blocks(), 3);
  ASSERT_EQ(v.size(), 3u);
  for (long k = 0; k < 3; ++k) {
    EXPECT_EQ(v[static_cast<size_t>(k)].first, k + 1);
    EXPECT_EQ(v[static_cast<size_t>(k)].second, Q("1/2"));
  }
}

TEST(BlockValues, Singleton) {
  auto v = block_values(*ideals::asymptotic_density(), *sets::finite(pts({5})), 10);
  for (const auto &[n, x] : v)
    EXPECT_EQ(x, n == 2 ? Q("1/4") : Rational(0)) << n;
}

TEST(BlockValues, EmptySetOnPhi) {
  auto v = block_values(*ideals::phi(Function::parse("n")), *sets::empty(), 5);
  ASSERT_EQ(v.size(), 5u);
  for (const auto &[n, x] : v)
    EXPECT_EQ(x, 0);
}

TEST(BlockValues, NotBlockStructured) {
  testutil::expect_code("NotBlockStructured", [] {
    block_values(*ideals::summable(Function::parse("(div 1 (add n 1))")), *sets::empty(), 5);
  });
}

// ---------------------------------------------------------------- membership

TEST(Membership, PowersOfTwoInZ) {
  Membership m = membership(*ideals::asymptotic_density(), *powers_of_two(), {20, Q("1/1000000")});
  EXPECT_EQ(m.verdict, Membership::Verdict::In);
  EXPECT_TRUE(m.closed_form);
}

TEST(Membership, HalfBlocksNotInZ) {
  Membership m = membership(*ideals::asymptotic_density(), *half_blocks(), {20, Q("1/1000000")});
  EXPECT_EQ(m.verdict, Membership::Verdict::NotIn);
  EXPECT_EQ(m.epsilon, Q("1/2"));
  ASSERT_FALSE(m.witnesses.empty());
  for (const auto &[n, v] : m.witnesses)
    EXPECT_GE(v, m.epsilon);
}

TEST(Membership, FiniteSetsAreInEveryIdeal) {
  auto x = sets::finite(pts({0, 3, 17}));
  for (const auto &ideal : {ideals::asymptotic_density(), ideals::phi(Function::parse("n")),
                            ideals::summable(Function::parse("(div 1 (add n 1))")), ideals::fin(),
                            ideals::simple_density(Function::parse("(exp2 (pow n 2))"))}) {
    for (long h : {1, 8, 64})
      EXPECT_EQ(membership(*ideal, *x, {h, Q("1/1000000")}).verdict, Membership::Verdict::In) << ideal->describe();
  }
}

TEST(Membership, SummableSegments) {
  auto h = ideals::summable(Function::parse("(div 1 (add n 1))"));
  EXPECT_EQ(membership(*h, *thin_segments()).verdict, Membership::Verdict::NotIn);
  auto squares = sets::interval_rule(Function::parse("(pow n 2)"), Function::parse("1"), 1);
  EXPECT_EQ(membership(*h, *squares).verdict, Membership::Verdict::In);
}

TEST(Membership, UndeterminedTraceHasHorizonLength) {
  auto zd = std::make_shared<BlockGenerator>(BlockGenerator::asymptotic_density());
  auto weird = sets::block_select(zd, Function::parse("(sub (exp2 n) (floordiv (exp2 n) n))"), SetSpec::Mode::Last);
  Membership m = membership(*ideals::asymptotic_density(), *weird, {8, Q("1/1000000")});
  EXPECT_EQ(m.verdict, Membership::Verdict::Undetermined);
  EXPECT_EQ(m.trace.size(), 8u);
}

TEST(Membership, FinIdealNeedsFiniteness) {
  EXPECT_EQ(membership(*ideals::fin(), *powers_of_two()).verdict, Membership::Verdict::NotIn);
}

// ---------------------------------------------------------------- non-pathology

TEST(Nonpathology, DensityTruncation) {
  DefectResult d = nonpathology_defect(density_truncation(), pts({0, 2, 3}));
  EXPECT_EQ(d.lp_value, 1);
  EXPECT_EQ(d.phi_value, 1);
  EXPECT_EQ(d.defect(), 0);
}

TEST(Nonpathology, PathologicalTable) {
  DefectResult d = nonpathology_defect(pathological(), pts({0, 1, 2}));
  EXPECT_EQ(d.lp_value, Q("3/2"));
  EXPECT_EQ(d.phi_value, 2);
  EXPECT_EQ(d.defect(), Q("1/2"));
  for (const auto &w : d.measure)
    EXPECT_EQ(w, Q("1/2"));
}

TEST(Nonpathology, EmptySet) {
  DefectResult d = nonpathology_defect(pathological(), {});
  EXPECT_EQ(d.lp_value, 0);
  EXPECT_EQ(d.phi_value, 0);
}

TEST(Nonpathology, GroundTooLarge) {
  testutil::expect_code("GroundTooLarge", [] {
    std::vector<BigInt> g;
    for (long k = 0; k < 13; ++k)
      g.emplace_back(k);
    FiniteTable::tabulate(g, [](const std::vector<BigInt> &s) { return Rational(static_cast<long>(s.size())); });
  });
}

// ---------------------------------------------------------------- unboundedness

TEST(Unboundedness, Harmonic) {
  UnboundednessResult r = unboundedness_check(*submeasures::summable(Function::parse("(div 1 (add n 1))")), 2, 100);
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.m, 3);
  EXPECT_EQ(r.value, Q("25/12"));
}

TEST(Unboundedness, AsymptoticDensityIsBounded) {
  UnboundednessResult r = unboundedness_check(*submeasures::asymptotic_density(), 2, 1 << 12);
  EXPECT_FALSE(r.found);
}

TEST(Unboundedness, ZeroBound) {
  UnboundednessResult r = unboundedness_check(*submeasures::summable(Function::parse("1")), 0, 10);
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.m, 0);
}

// ---------------------------------------------------------------- max-merge probe

TEST(MergeProbe, SameSubmeasure) {
  auto zd = submeasures::asymptotic_density();
  auto rows = max_merge_exh_probe(zd, zd, {powers_of_two()}, {});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].psi.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[0].phi.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[0].merged.verdict, Membership::Verdict::In);
}

TEST(MergeProbe, DensityAgainstHarmonic) {
  auto zd = submeasures::asymptotic_density();
  auto h = submeasures::summable(Function::parse("(div 1 (add n 1))"));
  auto rows = max_merge_exh_probe(zd, h, {sets::finite(pts({1, 2})), thin_segments()}, {});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].psi.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[0].phi.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[0].merged.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[1].psi.verdict, Membership::Verdict::In);
  EXPECT_EQ(rows[1].phi.verdict, Membership::Verdict::NotIn);
  EXPECT_EQ(rows[1].merged.verdict, Membership::Verdict::NotIn);
}
