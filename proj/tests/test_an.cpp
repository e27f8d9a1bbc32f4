#include "nikodym/classifier.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nikodym;
using testutil::Q;
using K = ConditionVerdict::Kind;

namespace {

FilterContext frechet() { return FilterContext::make(ideals::fin()); }

MeasureSeq pf_sequence() { return MeasureSeq::from_descriptor("PF=n; n=(neg n)", 1); }

bool pairwise_disjoint(const MeasureSeq &s) {
  for (long a = s.first(); s.has(a); ++a)
    for (long b = a + 1; s.has(b); ++b)
      if (!disjoint_supports(s.at(a), s.at(b)))
        return false;
  return true;
}

} // namespace

// ---------------------------------------------------------------- descriptors

TEST(Descriptor, RoundTrip) {
  MeasureSeq s = MeasureSeq::from_descriptor("PF=n; n=(neg n)", 1);
  MeasureSeq t = MeasureSeq::from_descriptor(s.descriptor(), 1);
  for (long n = 1; n <= 5; ++n)
    EXPECT_EQ(s.at(n), t.at(n));
  FinMeasure three;
  three.add(Point::PF(), 3);
  three.add(Point(3), -3);
  EXPECT_EQ(s.at(3), three);
}

TEST(Descriptor, ParseErrors) {
  testutil::expect_code("ParseError", [] { parse_descriptor("PF"); });
  testutil::expect_code("ParseError", [] { parse_descriptor("n=(mul"); });
}

// ---------------------------------------------------------------- verify_AN

TEST(VerifyAN, PFSequencePasses) {
  ANReport r = verify_AN(pf_sequence(), frechet(), 16);
  EXPECT_TRUE(r.passes());
  EXPECT_EQ(r.norms_verdict.kind, K::Pass);
  EXPECT_EQ(r.totals_verdict.kind, K::Pass);
  for (const auto &[n, v] : r.norms)
    EXPECT_EQ(v, 2 * n);
  for (const auto &[n, v] : r.totals)
    EXPECT_EQ(v, 0);
  for (const auto &trace : r.variations)
    for (const auto &[n, v] : trace)
      EXPECT_TRUE(v == 0 || v == n) << n;
}

TEST(VerifyAN, DiracsFailNorms) {
  ANReport r = verify_AN(MeasureSeq::from_descriptor("n=1", 0), frechet(), 16);
  EXPECT_EQ(r.norms_verdict.kind, K::Fail);
  EXPECT_TRUE(r.fails());
  for (const auto &[n, v] : r.norms)
    EXPECT_EQ(v, 1);
}

TEST(VerifyAN, MassAtZeroFailsVariation) {
  // n delta_0 never leaves omega \ A when A = omega \ {0}
  auto tail = sets::complement(sets::finite({BigInt(0)}));
  ANReport r = verify_AN(MeasureSeq::from_descriptor("0=n", 0), FilterContext::make(ideals::fin(), {tail}, false), 16);
  ASSERT_EQ(r.variation_verdicts.size(), 1u);
  EXPECT_EQ(r.variation_verdicts[0].kind, K::Fail);
  EXPECT_EQ(r.totals_verdict.kind, K::Fail);
  EXPECT_TRUE(r.fails());
  auto other = sets::complement(sets::finite({BigInt(1)}));
  ANReport s = verify_AN(MeasureSeq::from_descriptor("0=n", 0), FilterContext::make(ideals::fin(), {other}, false), 16);
  EXPECT_EQ(s.variation_verdicts[0].kind, K::Pass);
}

TEST(VerifyAN, UncertifiedSampleIsRejected) {
  auto evens = sets::interval_rule(Function::parse("(mul 2 n)"), Function::parse("1"), 0);
  testutil::expect_code("ValidationError", [&] { FilterContext::make(ideals::fin(), {evens}); });
}

TEST(VerifyAN, RawPrefixIsOnlyPassAtHorizon) {
  std::vector<FinMeasure> items;
  for (long n = 1; n <= 8; ++n) {
    FinMeasure m;
    m.add(Point::PF(), n);
    m.add(Point(BigInt(n)), -n);
    items.push_back(m);
  }
  ANReport r = verify_AN(MeasureSeq::from_list(items, 1), frechet(), 8);
  EXPECT_EQ(r.norms_verdict.kind, K::PassAtHorizon);
}

// ---------------------------------------------------------------- disjointify

TEST(Disjointify, AlreadyDisjointUsesCaseA) {
  MeasureSeq s = MeasureSeq::from_descriptor("(mul 2 n)=n; (add (mul 2 n) 1)=(neg n)", 1);
  Disjointified d = disjointify(s, frechet(), 24);
  EXPECT_EQ(d.log.step2_case, 'a');
  EXPECT_TRUE(pairwise_disjoint(d.output));
  EXPECT_TRUE(pairwise_disjoint(d.theta));
  Rational prev = -1;
  for (long k = 0; d.output.has(k); ++k) {
    Rational v = norm(d.output.at(k));
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Disjointify, PFSequenceUsesCaseB) {
  Disjointified d = disjointify(pf_sequence(), frechet(), 16);
  EXPECT_EQ(d.log.step2_case, 'b');
  ASSERT_FALSE(d.log.pairs.empty());
  for (const auto &p : d.log.pairs)
    EXPECT_LT(abs(p.alpha), 1);
  EXPECT_TRUE(pairwise_disjoint(d.output));
  for (long k = 0; d.output.has(k); ++k)
    EXPECT_FALSE(d.output.at(k).charges_pf());
}

TEST(Disjointify, ReplayReproducesOutput) {
  Disjointified d = disjointify(pf_sequence(), frechet(), 16);
  std::vector<FinMeasure> again = replay_disjointify(pf_sequence(), d.log);
  ASSERT_EQ(static_cast<long>(again.size()), *d.output.size());
  for (long k = 0; d.output.has(k); ++k)
    EXPECT_EQ(again[static_cast<size_t>(k)], d.output.at(k));
}

TEST(Disjointify, HorizonOneKeepsTheFirstMeasure) {
  MeasureSeq s = MeasureSeq::from_descriptor("(mul 2 n)=n; (add (mul 2 n) 1)=(neg n)", 1);
  Disjointified d = disjointify(s, frechet(), 1, 1);
  ASSERT_EQ(d.log.step1.size(), 1u);
  EXPECT_FALSE(d.log.step1[0].a_max.has_value());
  EXPECT_EQ(d.theta.at(0), s.at(1));
}

TEST(Disjointify, HorizonExhausted) {
  MeasureSeq s = MeasureSeq::from_descriptor("(mul 2 n)=n; (add (mul 2 n) 1)=(neg n)", 1);
  testutil::expect_code("HorizonExhausted", [&] { disjointify(s, frechet(), 4, 50); });
}

TEST(Disjointify, RejectsNonAN) {
  testutil::expect_code("ValidationError", [] { disjointify(MeasureSeq::from_descriptor("n=1", 0), frechet(), 8); });
}

// ---------------------------------------------------------------- positive <-> AN

TEST(PositiveToAN, Diracs) {
  MeasureSeq nu = positive_to_AN(MeasureSeq::from_descriptor("n=n", 0), 8);
  for (long n = 0; n <= 8; ++n) {
    FinMeasure expect;
    expect.add(Point(BigInt(n)), -n);
    expect.add(Point::PF(), n);
    EXPECT_EQ(nu.at(n), expect);
    EXPECT_EQ(nu.at(n).total(), 0);
  }
}

TEST(PositiveToAN, EmptyAndHalfHalf) {
  MeasureSeq nu = positive_to_AN(MeasureSeq::from_list({FinMeasure(), testutil::measure({{0, "1/2"}, {1, "1/2"}})}), 2);
  EXPECT_TRUE(nu.at(0).empty());
  EXPECT_EQ(norm(nu.at(1)), 2);
  EXPECT_EQ(nu.at(1).weight(Point::PF()), 1);
  EXPECT_EQ(nu.at(1).weight(Point(0)), Q("-1/2"));
}

TEST(PositiveToAN, Errors) {
  FinMeasure pf;
  pf.add(Point::PF(), 1);
  testutil::expect_code("HasPFAtom", [&] { positive_to_AN(MeasureSeq::from_list({pf}), 1); });
  testutil::expect_code("ValidationError",
                        [] { positive_to_AN(MeasureSeq::from_list({testutil::measure({{0, "-1"}})}), 1); });
}

TEST(ANToPositive, PFSequence) {
  PositiveResult r = AN_to_positive(pf_sequence(), frechet(), 16);
  Rational prev = 0;
  for (long k = 0; r.positives.has(k); ++k) {
    const FinMeasure &m = r.positives.at(k);
    EXPECT_TRUE(m.nonnegative());
    EXPECT_FALSE(m.charges_pf());
    EXPECT_GT(m.total(), prev);
    prev = m.total();
  }
}

TEST(ANToPositive, DiracInputPairsConsecutiveTerms) {
  MeasureSeq s = positive_to_AN(MeasureSeq::from_descriptor("n=n", 1), 16);
  PositiveResult r = AN_to_positive(s, frechet(), 16);
  EXPECT_EQ(r.construction.log.step2_case, 'b');
  EXPECT_TRUE(pairwise_disjoint(r.positives));
  for (long k = 0; r.positives.has(k); ++k) {
    FinMeasure m = r.positives.at(k);
    EXPECT_TRUE(m.nonnegative());
    EXPECT_EQ(m.size(), 2u);
    EXPECT_EQ(m.weight(Point(BigInt(2 * k + 1))), 2 * k + 1);
  }
}

TEST(ANToDensity, Diracs) {
  MeasureSeq s = positive_to_AN(MeasureSeq::from_descriptor("n=n", 1), 16);
  DensityExtraction d = AN_to_density(s, frechet(), 16);
  EXPECT_TRUE(d.probe_passes);
  EXPECT_TRUE(d.unbounded.found);
  std::optional<BigInt> last;
  for (long n = first_reported_block(*d.generator); d.generator->has_block(n); ++n) {
    FinMeasure b = d.generator->block(n);
    EXPECT_TRUE(b.nonnegative());
    if (last)
      EXPECT_GT(*b.min_index(), *last);
    last = b.max_index();
  }
}

// ---------------------------------------------------------------- submeasure_to_AN

TEST(SubmeasureToAN, Harmonic) {
  SubmeasureAN r = submeasure_to_AN(*submeasures::summable(Function::parse("(div 1 (add n 1))")), 4);
  ASSERT_FALSE(r.steps.empty());
  EXPECT_EQ(r.steps[0].lo, 0);
  EXPECT_EQ(r.steps[0].hi, 3);
  EXPECT_EQ(r.steps[0].phi_value, Q("25/12"));
  if (r.steps.size() > 1)
    EXPECT_EQ(r.steps[1].lo, 4);
}

TEST(SubmeasureToAN, PhiOfN) {
  auto phi = submeasures::density(std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse("n"))));
  SubmeasureAN r = submeasure_to_AN(*phi, 4);
  ASSERT_GE(r.steps.size(), 2u);
  for (size_t k = 0; k < r.steps.size(); ++k) {
    EXPECT_GT(r.steps[k].mass, Rational(static_cast<long>(k)));
    if (k > 0)
      EXPECT_EQ(r.steps[k].lo, r.steps[k - 1].hi + 1);
  }
  EXPECT_EQ(r.steps[0].hi, 11);
  EXPECT_EQ(r.steps[0].mass, Q("7/3"));
}

TEST(SubmeasureToAN, AsymptoticDensityIsBounded) {
  testutil::expect_code("BoundedSubmeasure", [] { submeasure_to_AN(*submeasures::asymptotic_density(), 4); });
}

TEST(SubmeasureToAN, OtherKindsRejected) {
  auto t = submeasures::finite_table(FiniteTable({BigInt(0)}, {0, 1}));
  testutil::expect_code("ValidationError", [&] { submeasure_to_AN(*t, 4); });
}

// ---------------------------------------------------------------- BJN normalization

TEST(BJN, HalvesThePFSequence) {
  Normalized r = bjn_normalize(pf_sequence(), 8);
  for (long k = 0; r.seq.has(k); ++k) {
    long n = r.source_index[static_cast<size_t>(k)];
    FinMeasure expect;
    expect.add(Point::PF(), Q("1/2"));
    expect.add(Point(BigInt(n)), Q("-1/2"));
    EXPECT_EQ(r.seq.at(k), expect);
  }
}

TEST(BJN, NormalizedInputUnchanged) {
  MeasureSeq s = MeasureSeq::from_descriptor("PF=(div 1 2); n=(div -1 2)", 1);
  Normalized r = bjn_normalize(s, 6);
  for (long k = 0; r.seq.has(k); ++k)
    EXPECT_EQ(r.seq.at(k), s.at(r.source_index[static_cast<size_t>(k)]));
}

TEST(BJN, SingletonAndZeros) {
  Normalized r = bjn_normalize(MeasureSeq::from_list({testutil::measure({{0, "3"}})}), 1);
  EXPECT_EQ(r.seq.at(0), testutil::measure({{0, "1"}}));
  testutil::expect_code("AllZeroPrefix", [] { bjn_normalize(MeasureSeq::from_list({FinMeasure(), FinMeasure()}), 2); });
}
