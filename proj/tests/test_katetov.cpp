#include "nikodym/katetov.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nikodym;
using testutil::Q;

namespace {

std::shared_ptr<const BlockGenerator> phi_gen(const char *f) {
  return std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse(f)));
}

// lambda_n = (n + 1) delta_n for n >= 0
std::shared_ptr<const BlockGenerator> growing_diracs() {
  return std::make_shared<BlockGenerator>(
      BlockGenerator::rule(0, Function::parse("1"), Function::parse("(add n 1)"), Function::parse("n")));
}

std::vector<BigInt> blockwise_shift(const Function &f, long horizon) {
  BlockGenerator src = BlockGenerator::phi(f), tgt = BlockGenerator::phi(successor_function(f));
  std::vector<BigInt> out;
  for (long n = 1; n <= horizon; ++n)
    for (BigInt b = src.start(n); b < src.end(n); ++b)
      out.push_back(tgt.start(n) + (b - src.start(n)));
  return out;
}

} // namespace

// ---------------------------------------------------------------- Phi

TEST(Phi, BlocksOfIdentity) {
  auto g = phi_gen("n");
  EXPECT_EQ(g->start(1), 0);
  EXPECT_EQ(g->length(1), 1);
  EXPECT_EQ(g->uniform_weight(1), 1);
  EXPECT_EQ(g->start(2), 1);
  EXPECT_EQ(g->end(2), 5);
  EXPECT_EQ(g->uniform_weight(2), Q("1/2"));
  EXPECT_EQ(g->start(3), 5);
  EXPECT_EQ(g->end(3), 14);
  EXPECT_EQ(g->uniform_weight(3), Q("1/3"));
}

TEST(Phi, ConstantOne) {
  auto g = phi_gen("1");
  for (long n = 1; n <= 6; ++n) {
    EXPECT_EQ(g->length(n), n);
    EXPECT_EQ(g->uniform_weight(n), 1);
  }
}

TEST(Phi, TwoNSquared) {
  auto g = phi_gen("(mul 2 (pow n 2))");
  for (long n = 1; n <= 8; ++n) {
    EXPECT_EQ(g->length(n), 2 * n * n * n);
    EXPECT_EQ(g->uniform_weight(n), make_rational(1, 2 * n * n));
    EXPECT_EQ(g->norm(n), n);
  }
}

TEST(Phi, BlockChecksPass) {
  for (const char *f : {"1", "n", "(mul 2 (pow n 2))", "(exp2 (pow n 2))"})
    for (const auto &row : check_phi_blocks(*phi_gen(f), 16))
      EXPECT_TRUE(row.norm_ok && row.atoms_ok && row.tiles_ok) << f << " n=" << row.n;
}

TEST(Phi, NonPositiveValue) {
  testutil::expect_code("NonPositiveValue", [] { phi_ideal(Function::parse("(sub n 3)"), 10); });
}

TEST(Phi, IndexOfFindsTheBlock) {
  auto g = phi_gen("n");
  EXPECT_EQ(g->index_of(0), std::optional<long>(1));
  EXPECT_EQ(g->index_of(4), std::optional<long>(2));
  EXPECT_EQ(g->index_of(5), std::optional<long>(3));
  EXPECT_EQ(g->index_of(13), std::optional<long>(3));
}

// ---------------------------------------------------------------- blockwise reduction

TEST(Reduction, SingleAtomCollapsesBlocks) {
  auto lam = std::make_shared<BlockGenerator>(
      BlockGenerator::rule(1, Function::parse("1"), Function::parse("n"), Function::parse("n")));
  ReductionResult r = build_reduction_density(lam, phi_gen("(mul 2 (pow n 2))"), 6);
  EXPECT_TRUE(r.certificate.ok());
  for (const auto &b : r.certificate.blocks) {
    ASSERT_TRUE(b.worst.has_value());
    EXPECT_EQ(*b.worst, 0) << b.n;
  }
}

TEST(Reduction, IdenticalGenerators) {
  ReductionResult r = build_reduction_density(phi_gen("n"), phi_gen("n"), 8);
  EXPECT_TRUE(r.certificate.ok());
  for (const auto &b : r.certificate.blocks)
    EXPECT_EQ(*b.worst, 0);
}

TEST(Reduction, PhiNIntoPhiTwoNCubed) {
  ReductionResult r = build_reduction_density(phi_gen("n"), phi_gen("(mul 2 (pow n 3))"), 12);
  EXPECT_TRUE(r.certificate.ok());
  ASSERT_EQ(r.certificate.blocks.size(), 12u);
  for (const auto &b : r.certificate.blocks) {
    EXPECT_LE(*b.worst, make_rational(1, b.n));
    EXPECT_EQ(b.eps, make_rational(1, b.n));
  }
  ReductionAudit audit = audit_reduction(*phi_gen("n"), *phi_gen("(mul 2 (pow n 3))"), r.table,
                                         r.certificate.threshold, 12);
  EXPECT_TRUE(audit.ok());
}

TEST(Reduction, AuditCatchesATamperedTable) {
  ReductionResult r = build_reduction_density(phi_gen("n"), phi_gen("(mul 2 (pow n 3))"), 6);
  ReductionTable bad = r.table;
  bad.rule.reset();
  bad.blocks.reset();
  BlockGenerator mu = BlockGenerator::phi(Function::parse("(mul 2 (pow n 3))"));
  for (BigInt x = mu.start(4); x < mu.end(4); ++x)
    bad.table[x.get_ui()] = 0;
  EXPECT_FALSE(audit_reduction(*phi_gen("n"), mu, bad, r.certificate.threshold, 6).ok());
}

TEST(Reduction, NormMismatch) {
  auto lam = std::make_shared<BlockGenerator>(
      BlockGenerator::rule(1, Function::parse("1"), Function::parse("(mul 2 n)"), Function::parse("n")));
  testutil::expect_code("NormMismatch", [&] { build_reduction_density(lam, phi_gen("n"), 4); });
}

TEST(Reduction, AtomConditionFails) {
  // mu atoms are larger than lambda atoms: n * at+(mu_n) <= at-(lambda_n) fails
  testutil::expect_code("AtomConditionFails",
                        [] { build_reduction_density(phi_gen("(mul 2 (pow n 3))"), phi_gen("n"), 4); });
}

// ---------------------------------------------------------------- reduce_to_phi, domination, Tukey

TEST(ReduceToPhi, GrowingDiracs) {
  PhiReduction p = reduce_to_phi(growing_diracs(), 6);
  ASSERT_EQ(p.f_values.size(), 6u);
  for (long n = 1; n <= 6; ++n)
    EXPECT_EQ(p.f_values[static_cast<size_t>(n - 1)], 2 * n * n);
  EXPECT_TRUE(p.reduction.certificate.ok());
}

TEST(ReduceToPhi, UniformAtomsOne) {
  // lambda_n uniform with unit atoms and n + 1 points: at-(nu_n) = 1
  auto lam = std::make_shared<BlockGenerator>(BlockGenerator::rule(0, Function::parse("(add n 1)"), Function::parse("1")));
  PhiReduction p = reduce_to_phi(lam, 5);
  for (long n = 1; n <= 5; ++n)
    EXPECT_EQ(p.f_values[static_cast<size_t>(n - 1)], 2 * n * n);
}

TEST(ReduceToPhi, AtomsTwoThirds) {
  // nu_n has atoms 2/3 (plus one atom 1 when n is odd); lambda_{n-1} = nu_n (n+1)/n.
  // A norm-one nu_1 cannot have minimum 2/3, so block 1 is a single unit atom.
  std::vector<FinMeasure> blocks;
  BigInt pos = 0;
  for (long n = 1; n <= 5; ++n) {
    FinMeasure nu;
    if (n == 1) {
      nu.add(Point(pos), 1);
      pos += 1;
    } else {
      for (long k = 0; k < 3 * (n / 2); ++k)
        nu.add(Point(pos + BigInt(k)), Q("2/3"));
      pos += 3 * (n / 2);
      if (n % 2) {
        nu.add(Point(pos), 1);
        pos += 1;
      }
    }
    blocks.push_back(scale(nu, make_rational(n + 1, n)));
  }
  auto lam = std::make_shared<BlockGenerator>(BlockGenerator::table(blocks, 0));
  PhiReduction p = reduce_to_phi(lam, 5);
  EXPECT_EQ(p.f_values[0], 2);
  for (long n = 2; n <= 5; ++n)
    EXPECT_EQ(p.f_values[static_cast<size_t>(n - 1)], 4 * n * n) << n;
  EXPECT_TRUE(p.reduction.certificate.ok());
}

TEST(ReduceToPhi, NormTooSmall) {
  auto dirac = std::make_shared<BlockGenerator>(
      BlockGenerator::rule(1, Function::parse("1"), Function::parse("1"), Function::parse("n")));
  testutil::expect_code("NormTooSmall", [&] { reduce_to_phi(dirac, 4); });
}

TEST(Domination, HoldsAndEmitsReduction) {
  DominationReport r = domination_reduction(Function::parse("n"), Function::parse("(mul 2 (pow n 3))"), 8);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.threshold, 1);
  EXPECT_TRUE(r.reduction.certificate.ok());
  DominationReport c = domination_reduction(Function::parse("1"), Function::parse("(mul 2 (pow n 2))"), 8);
  EXPECT_TRUE(c.violations.empty());
}

TEST(Domination, FailsForEqualFunctions) {
  try {
    domination_reduction(Function::parse("n"), Function::parse("n"), 10);
    FAIL() << "expected DominationFails";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "DominationFails");
    EXPECT_NE(e.detail().find("n = 10"), std::string::npos) << e.detail();
  }
}

TEST(Tukey, GrowingDiracs) {
  TukeyMap t = tukey_map(growing_diracs(), 6);
  for (long n = 1; n <= 6; ++n)
    EXPECT_EQ(t.psi_values[static_cast<size_t>(n - 1)], 4 * n * n * n * n);
  ASSERT_TRUE(t.psi.has_value());
  TukeyContract c = tukey_contract(t, *t.psi, 6);
  EXPECT_TRUE(c.dominated);
  EXPECT_TRUE(c.reduction_ok);
}

TEST(Tukey, UnderdominatingH) {
  TukeyMap t = tukey_map(growing_diracs(), 6);
  TukeyContract c = tukey_contract(t, Function::parse("(pow n 4)"), 6);
  EXPECT_FALSE(c.dominated);
}

// ---------------------------------------------------------------- KB upgrade

TEST(KBUpgrade, FiniteToOneUnchanged) {
  ReductionTable f = ReductionTable::from_values({0, 1, 2, 3, 4}, true);
  ReductionTable g = kb_upgrade(f, *ideals::asymptotic_density(), *sets::empty(), 4);
  EXPECT_EQ(g.table, f.table);
}

TEST(KBUpgrade, CollapsedPowersOfTwo) {
  std::vector<BigInt> values;
  for (long k = 0; k <= 64; ++k)
    values.emplace_back(k > 0 && (k & (k - 1)) == 0 ? 0 : k);
  auto a = sets::unite(sets::interval_rule(Function::parse("(exp2 n)"), Function::parse("1"), 0),
                       sets::finite({BigInt(0)}));
  ReductionTable g = kb_upgrade(ReductionTable::from_values(values), *ideals::asymptotic_density(), *a, 64);
  for (long k = 0; k <= 64; ++k)
    EXPECT_EQ(g.table[static_cast<size_t>(k)], k);
  EXPECT_EQ(g.finite_to_one, std::optional<bool>(true));
}

TEST(KBUpgrade, TwoToOne) {
  std::vector<BigInt> values;
  for (long k = 0; k < 64; ++k)
    values.emplace_back(k / 2);
  ReductionTable g = kb_upgrade(ReductionTable::from_values(values), *ideals::asymptotic_density(), *sets::empty(), 63);
  EXPECT_EQ(g.table, values);
  ASSERT_TRUE(g.fiber_bound.has_value());
  EXPECT_EQ(*g.fiber_bound, 2);
}

TEST(KBUpgrade, NotPseudoUnion) {
  std::vector<BigInt> values;
  for (long k = 0; k <= 64; ++k)
    values.emplace_back(k % 2 ? 0 : k);
  testutil::expect_code("NotPseudoUnion", [&] {
    kb_upgrade(ReductionTable::from_values(values), *ideals::asymptotic_density(), *sets::empty(), 64);
  });
}

// ---------------------------------------------------------------- verify_reduction

TEST(VerifyReduction, FinIntoZ) {
  auto v = verify_reduction(ReductionTable::identity(), *ideals::fin(), *ideals::asymptotic_density(),
                            {sets::finite({BigInt(1), BigInt(9)}), sets::empty()});
  EXPECT_EQ(v.kind, ReductionVerdict::Kind::NoCounterexample);
}

TEST(VerifyReduction, ZIntoHarmonicIsRefuted) {
  auto x = sets::interval_rule(Function::parse("(exp2 n)"), Function::parse("(floordiv (exp2 n) n)"), 1);
  auto v = verify_reduction(ReductionTable::identity(), *ideals::asymptotic_density(),
                            *ideals::summable(Function::parse("(div 1 (add n 1))")), {x});
  EXPECT_EQ(v.kind, ReductionVerdict::Kind::Refuted);
  ASSERT_TRUE(v.witness.has_value());
  EXPECT_EQ(v.rows[0].source.verdict, Membership::Verdict::In);
  EXPECT_EQ(v.rows[0].preimage.verdict, Membership::Verdict::NotIn);
}

TEST(VerifyReduction, OwnTestsTransfer) {
  DominationReport dr = domination_reduction(Function::parse("n"), Function::parse("(mul 2 (pow n 3))"), 12);
  auto pg = phi_gen("n");
  auto t1 = sets::block_select(pg, Function::parse("1"), SetSpec::Mode::First);
  auto v = verify_reduction(dr.reduction.table, *ideals::phi(Function::parse("n")),
                            *ideals::phi(Function::parse("(mul 2 (pow n 3))")), {t1}, {12, Q("1/1000000")});
  EXPECT_EQ(v.kind, ReductionVerdict::Kind::NoCounterexample);
  EXPECT_EQ(v.rows[0].preimage.verdict, Membership::Verdict::In);
}

// ---------------------------------------------------------------- successor and refuter

TEST(Successor, DoubleExponential) {
  SuccessorReport r = successor(Function::parse("(exp2 (pow n 2))"), 16);
  EXPECT_TRUE(r.hypotheses.holds());
  EXPECT_EQ(r.g.at_int(2), 2 * pow2(256));
  for (const auto &[n, ok] : r.domination)
    EXPECT_TRUE(ok) << n;
  ASSERT_TRUE(r.forward.has_value());
  EXPECT_TRUE(r.forward->reduction.certificate.ok());
}

TEST(Successor, QuarticFailsTheSumHypothesis) {
  SuccessorReport r = successor(Function::parse("(pow n 4)"), 16);
  EXPECT_FALSE(r.hypotheses.quartic_fails.has_value());
  ASSERT_TRUE(r.hypotheses.sum_fails.has_value());
  EXPECT_EQ(*r.hypotheses.sum_fails, 8); // 1 + 16 + ... + 7^4 = 4676 > 4096
  EXPECT_FALSE(r.forward.has_value());
  testutil::expect_code("HypothesisFails", [&] { r.require_hypotheses(); });
}

TEST(Successor, ConstantFailsQuartic) {
  SuccessorReport r = successor(Function::parse("1"), 8);
  ASSERT_TRUE(r.hypotheses.quartic_fails.has_value());
  EXPECT_EQ(*r.hypotheses.quartic_fails, 2);
}

TEST(Refuter, EverythingIntoFirstBlock) {
  Function f = Function::parse("(pow n 2)");
  BlockGenerator src = BlockGenerator::phi(f);
  std::vector<BigInt> zero(src.end(5).get_ui(), 0);
  RefutationWitness w = refute_reduction(f, ReductionTable::from_values(zero), 5);
  EXPECT_TRUE(w.found);
  EXPECT_EQ(w.case_tag, 2);
  EXPECT_TRUE(w.partial);
  for (const auto &p : w.pieces)
    EXPECT_EQ(p.i, std::optional<long>(1));
  EXPECT_TRUE(w.checks_pass());
  EXPECT_FALSE(w.hypotheses.holds());
}

TEST(Refuter, BlockwiseShiftGivesCaseOne) {
  Function f = Function::parse("(pow n 2)");
  RefutationWitness w = refute_reduction(f, ReductionTable::from_values(blockwise_shift(f, 5)), 5);
  EXPECT_TRUE(w.found);
  EXPECT_EQ(w.case_tag, 1);
  EXPECT_FALSE(w.partial);
  for (const auto &p : w.pieces)
    EXPECT_EQ(p.mu_value, 1);
  EXPECT_TRUE(w.checks_pass());
}

TEST(Refuter, ThreadCountDoesNotChangeTheWitness) {
  Function f = Function::parse("(pow n 2)");
  auto table = ReductionTable::from_values(blockwise_shift(f, 5));
  ReductionOptions four;
  four.threads = 4;
  RefutationWitness a = refute_reduction(f, table, 5), b = refute_reduction(f, table, 5, four);
  EXPECT_EQ(a.case1_hits, b.case1_hits);
  EXPECT_EQ(a.x, b.x);
}

TEST(Refuter, Errors) {
  Function f = Function::parse("(pow n 2)");
  testutil::expect_code("DomainTooSmall", [&] { refute_reduction(f, ReductionTable::from_values({}), 5); });
  testutil::expect_code("DomainTooSmall", [&] { refute_reduction(f, ReductionTable::from_values({0, 0, 0}), 5); });
  testutil::expect_code("NotFiniteToOne",
                        [&] { refute_reduction(f, ReductionTable::from_values({0, 0, 0}, false), 5); });
}
