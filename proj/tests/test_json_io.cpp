#include "nikodym/json_io.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace nikodym;
using namespace nikodym::io;
using testutil::Q;

#ifndef NIKODYM_EXAMPLES
#define NIKODYM_EXAMPLES "examples/specs"
#endif

namespace {

std::string example(const std::string &name) { return std::string(NIKODYM_EXAMPLES) + "/" + name; }

std::string error_detail(const std::function<void()> &body) {
  try {
    body();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "ParseError") << e.what();
    return e.detail();
  }
  ADD_FAILURE() << "expected ParseError";
  return "";
}

} // namespace

TEST(JsonIO, AtomsParse) {
  FinMeasure m = measure_from(Json::parse(R"({"atoms": [[0, "2/1"], [1, "-3/1"]]})"), "");
  EXPECT_EQ(m, testutil::measure({{0, "2"}, {1, "-3"}}));
  EXPECT_EQ(to_json(m).dump(), R"({"atoms":[[0,"2/1"],[1,"-3/1"]]})");
}

TEST(JsonIO, PFAtomAndIntegerWeights) {
  FinMeasure m = measure_from(Json::parse(R"({"atoms": [["PF", 1], [4, "-1/2"]]})"), "");
  EXPECT_EQ(m.weight(Point::PF()), 1);
  EXPECT_EQ(m.weight(Point(4)), Q("-1/2"));
}

TEST(JsonIO, RejectsZeroAndDuplicateAtoms) {
  testutil::expect_code("ValidationError", [] { measure_from(Json::parse(R"({"atoms": [[0, "0/1"]]})"), ""); });
  testutil::expect_code("ValidationError",
                        [] { measure_from(Json::parse(R"({"atoms": [[0, "1/2"], [0, "1/2"]]})"), ""); });
}

TEST(JsonIO, BadWeightReportsPath) {
  std::string d = error_detail([] { measure_from(Json::parse(R"({"atoms": [[0, "1/x"]]})"), ""); });
  EXPECT_NE(d.find("/atoms/0/1"), std::string::npos) << d;
}

TEST(JsonIO, SyntaxErrorReportsLine) {
  std::string d = error_detail([] { read_json_text("{\n  \"atoms\": [\n   [0, \"1/2\"\n}", "broken.json"); });
  EXPECT_NE(d.find("broken.json"), std::string::npos) << d;
  EXPECT_NE(d.find("line 4"), std::string::npos) << d;
}

TEST(JsonIO, MissingFile) {
  testutil::expect_code("ParseError", [] { load("/nonexistent/spec.json"); });
}

TEST(JsonIO, PhiIdealExample) {
  IdealPtr ideal = ideal_from(load(example("phi_2n2.json")), "");
  const BlockGenerator *g = ideal->generator();
  ASSERT_NE(g, nullptr);
  EXPECT_EQ(g->norm(3), 3);
  EXPECT_EQ(g->atoms(3).at_plus, Q("1/18"));
}

TEST(JsonIO, EveryExampleLoads) {
  for (const char *name : {"phi_n.json", "zdensity.json", "fin.json", "summable_harmonic_ideal.json"})
    EXPECT_NO_THROW(ideal_from(load(example(name)), "")) << name;
  for (const char *name : {"lambda.json", "mu.json"})
    EXPECT_NO_THROW(measure_from(load(example(name)), "")) << name;
  for (const char *name : {"seq_pf.json", "seq_dirac.json", "seq_shift.json"})
    EXPECT_NO_THROW(sequence_from(load(example(name)), "")) << name;
  for (const char *name : {"harmonic.json", "phi_n_submeasure.json", "asymptotic_density_submeasure.json",
                           "pathological.json", "density_table.json"})
    EXPECT_NO_THROW(submeasure_from(load(example(name)), "")) << name;
}

TEST(JsonIO, MeasureRoundTrip) {
  FinMeasure m = testutil::measure({{0, "1/2"}, {7, "-5/3"}});
  m.add(Point::PF(), Q("7/6"));
  EXPECT_EQ(measure_from(to_json(m), ""), m);
}

TEST(JsonIO, SequenceRoundTrip) {
  MeasureSeq s = sequence_from(load(example("seq_pf.json")), "");
  MeasureSeq t = sequence_from(to_json(s, 6), "");
  for (long n = 1; n <= 6; ++n)
    EXPECT_EQ(s.at(n), t.at(n));
}

TEST(JsonIO, GeneratorRoundTrip) {
  auto g = std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse("(mul 2 (pow n 3))")));
  auto h = generator_from(to_json(*g), "");
  EXPECT_EQ(h->key(), g->key());
  for (long n = 1; n <= 4; ++n)
    EXPECT_EQ(h->block(n), g->block(n));
}

TEST(JsonIO, ReductionTableRoundTrip) {
  ReductionTable r = ReductionTable::from_values({0, 0, 1, 1, 2});
  r.finite_to_one = true;
  ReductionTable s = reduction_from(to_json(r), "");
  EXPECT_EQ(s.table, r.table);
  EXPECT_EQ(s.finite_to_one, r.finite_to_one);
}

TEST(JsonIO, ReductionTableOrderIsChecked) {
  std::string d = error_detail([] { reduction_from(Json::parse(R"({"table": [[1, 0]]})"), ""); });
  EXPECT_NE(d.find("/table/0"), std::string::npos) << d;
}

TEST(JsonIO, CertificateRoundTripReverifies) {
  auto lam = std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse("n")));
  auto mu = std::make_shared<BlockGenerator>(BlockGenerator::phi(Function::parse("(mul 2 (pow n 3))")));
  ReductionResult res = build_reduction_density(lam, mu, 5, {});
  ASSERT_TRUE(res.certificate.ok());
  Json j = to_json(res.table, 1u << 20);
  ReductionTable back = reduction_from(j, "");
  EXPECT_EQ(back.table, res.table.table);
  ReductionAudit audit = audit_reduction(*lam, *mu, back, res.certificate.threshold, 5);
  EXPECT_TRUE(audit.ok());
  // the serialized form is a fixed point
  EXPECT_EQ(to_json(back, 1u << 20).dump(), j.dump());
}

TEST(JsonIO, ErrorJson) {
  Json j = error_json(Error("HorizonExhausted", "ran out"));
  EXPECT_EQ(j["error"]["code"], "HorizonExhausted");
  EXPECT_EQ(j["error"]["detail"], "ran out");
}
