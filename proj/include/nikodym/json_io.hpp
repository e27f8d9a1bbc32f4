#pragma once

// JSON reading and writing for specs, reduction tables, sequences and all
// reports. Rationals are canonical "p/q" strings; expressions are s-expression
// strings; objects keep insertion order so that output is byte-stable.

#include "nikodym/classifier.hpp"
#include "nikodym/katetov.hpp"

#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace nikodym::io {

using Json = nlohmann::ordered_json;

[[noreturn]] inline void fail(const std::string &path, const std::string &what) {
  throw Error("ParseError", (path.empty() ? std::string("/") : path) + ": " + what);
}

inline Json read_json_text(const std::string &text, const std::string &origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw Error("ParseError", origin + ": " + e.what());
  }
}

/// Reads a file, or stdin for "-", or inline JSON text starting with '{' or '['.
inline Json load(const std::string &source) {
  if (!source.empty() && (source.front() == '{' || source.front() == '['))
    return read_json_text(source, "inline");
  std::stringstream buf;
  if (source == "-") {
    buf << std::cin.rdbuf();
  } else {
    std::ifstream in(source);
    if (!in)
      throw Error("ParseError", "cannot open " + source);
    buf << in.rdbuf();
  }
  return read_json_text(buf.str(), source);
}

// ---------------------------------------------------------------- scalars

inline Json to_json(const Rational &q) { return to_string(q); }

inline Json to_json(const BigInt &z) {
  if (z.fits_slong_p())
    return z.get_si();
  return z.get_str();
}

inline Rational rational_from(const Json &j, const std::string &path) {
  try {
    if (j.is_string())
      return parse_rational(j.get<std::string>());
    if (j.is_number_integer())
      return Rational(j.get<long>());
  } catch (const Error &e) {
    fail(path, e.detail());
  }
  fail(path, "expected a rational string \"p/q\"");
}

inline BigInt bigint_from(const Json &j, const std::string &path) {
  try {
    if (j.is_number_unsigned())
      return BigInt(j.get<unsigned long>());
    if (j.is_number_integer())
      return BigInt(j.get<long>());
    if (j.is_string())
      return parse_bigint(j.get<std::string>());
  } catch (const Error &e) {
    fail(path, e.detail());
  }
  fail(path, "expected an integer");
}

inline BigInt natural_from(const Json &j, const std::string &path) {
  BigInt z = bigint_from(j, path);
  if (z < 0)
    fail(path, "expected a natural number");
  return z;
}

inline long long_from(const Json &j, const std::string &path) {
  if (!j.is_number_integer())
    fail(path, "expected an integer");
  return j.get<long>();
}

inline const Json &field(const Json &j, const std::string &key, const std::string &path) {
  if (!j.is_object())
    fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end())
    fail(path, "missing field \"" + key + "\"");
  return *it;
}

inline std::string string_field(const Json &j, const std::string &key, const std::string &path) {
  const Json &v = field(j, key, path);
  if (!v.is_string())
    fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

inline Definitions defs_from(const Json &j, const Definitions &inherited, const std::string &path) {
  if (!j.is_object() || !j.contains("defs"))
    return inherited;
  const Json &d = j["defs"];
  if (!d.is_object())
    fail(path + "/defs", "expected an object of named expressions");
  std::map<std::string, std::string> texts;
  for (const auto &[k, v] : d.items()) {
    if (!v.is_string())
      fail(path + "/defs/" + k, "expected an expression string");
    texts[k] = v.get<std::string>();
  }
  Definitions out;
  try {
    out = parse_definitions(texts);
  } catch (const Error &e) {
    fail(path + "/defs", e.detail());
  }
  for (const auto &[k, v] : inherited)
    out.emplace(k, v);
  return out;
}

inline Function function_from(const Json &j, const std::string &path, const Definitions &defs) {
  if (!j.is_string())
    fail(path, "expected an expression string");
  try {
    return Function::parse(j.get<std::string>(), defs);
  } catch (const Error &e) {
    fail(path, e.detail());
  }
}

inline Json defs_json(const Definitions &defs) {
  Json out = Json::object();
  for (const auto &[k, v] : defs)
    out[k] = to_string(v);
  return out;
}

/// Expression plus the named functions it needs.
inline Json function_json(const Function &f) { return f.str(); }

inline Json trace_json(const std::vector<std::pair<long, Rational>> &t) {
  Json out = Json::array();
  for (const auto &[n, v] : t)
    out.push_back(Json::array({n, to_json(v)}));
  return out;
}

inline Json trace_json(const std::vector<std::pair<BigInt, Rational>> &t) {
  Json out = Json::array();
  for (const auto &[n, v] : t)
    out.push_back(Json::array({to_json(n), to_json(v)}));
  return out;
}

inline Json intervals_json(const IntervalList &l) {
  Json out = Json::array();
  for (const auto &iv : l.pieces())
    out.push_back(Json::array({to_json(iv.lo), to_json(iv.hi)}));
  return out;
}

template <class T> Json optional_json(const std::optional<T> &v) {
  if (!v)
    return nullptr;
  if constexpr (std::is_same_v<T, Rational> || std::is_same_v<T, BigInt>)
    return to_json(*v);
  else
    return *v;
}

// ---------------------------------------------------------------- measures

inline Json point_json(const Point &p) { return p.pf ? Json("PF") : to_json(p.index); }

inline Json to_json(const FinMeasure &m) {
  Json atoms = Json::array();
  for (const auto &[p, w] : m.atoms())
    atoms.push_back(Json::array({point_json(p), to_json(w)}));
  return Json{{"atoms", atoms}};
}

inline FinMeasure measure_from(const Json &j, const std::string &path) {
  const Json &atoms = field(j, "atoms", path);
  if (!atoms.is_array())
    fail(path + "/atoms", "expected an array of [point, weight] pairs");
  FinMeasure m;
  std::set<Point> seen;
  for (size_t k = 0; k < atoms.size(); ++k) {
    std::string p = path + "/atoms/" + std::to_string(k);
    const Json &a = atoms[k];
    if (!a.is_array() || a.size() != 2)
      fail(p, "expected [point, weight]");
    Point pt = a[0].is_string() && a[0].get<std::string>() == "PF" ? Point::PF() : Point(natural_from(a[0], p + "/0"));
    Rational w = rational_from(a[1], p + "/1");
    if (w == 0)
      throw Error("ValidationError", p + ": zero weight");
    if (!seen.insert(pt).second)
      throw Error("ValidationError", p + ": duplicate point " + to_string(pt));
    m.add(pt, w);
  }
  return m;
}

// ---------------------------------------------------------------- generators

inline Json to_json(const BlockGenerator &g) {
  Json out;
  switch (g.kind()) {
  case BlockGenerator::Kind::Phi:
    out["kind"] = "phi";
    out["f"] = g.phi_function().str();
    if (!g.phi_function().defs().empty())
      out["defs"] = defs_json(g.phi_function().defs());
    break;
  case BlockGenerator::Kind::AsymptoticDensity:
    out["kind"] = "asymptotic_density";
    break;
  case BlockGenerator::Kind::Rule:
    out["kind"] = "rule";
    out["first"] = g.first_index();
    out["length"] = g.length_fn().str();
    out["weight"] = g.weight_fn().str();
    if (!g.consecutive())
      out["start"] = g.start_fn().str();
    if (!g.length_fn().defs().empty())
      out["defs"] = defs_json(g.length_fn().defs());
    break;
  case BlockGenerator::Kind::Table: {
    out["kind"] = "table";
    out["first"] = g.first_index();
    Json blocks = Json::array();
    for (long n = g.first_index(); g.has_block(n); ++n)
      blocks.push_back(to_json(g.block(n)));
    out["blocks"] = blocks;
    break;
  }
  }
  return out;
}

inline std::shared_ptr<const BlockGenerator> generator_from(const Json &j, const std::string &path,
                                                            const Definitions &inherited = {}) {
  Definitions defs = defs_from(j, inherited, path);
  std::string kind = string_field(j, "kind", path);
  try {
    if (kind == "phi")
      return phi_ideal(function_from(field(j, "f", path), path + "/f", defs), 16)->gen;
    if (kind == "asymptotic_density")
      return std::make_shared<BlockGenerator>(BlockGenerator::asymptotic_density());
    if (kind == "rule") {
      long first = j.contains("first") ? long_from(j["first"], path + "/first") : 1;
      std::optional<Function> start;
      if (j.contains("start"))
        start = function_from(j["start"], path + "/start", defs);
      return std::make_shared<BlockGenerator>(BlockGenerator::rule(
          first, function_from(field(j, "length", path), path + "/length", defs),
          function_from(field(j, "weight", path), path + "/weight", defs), start));
    }
    if (kind == "table") {
      long first = j.contains("first") ? long_from(j["first"], path + "/first") : 1;
      const Json &blocks = field(j, "blocks", path);
      if (!blocks.is_array())
        fail(path + "/blocks", "expected an array of measures");
      std::vector<FinMeasure> ms;
      for (size_t k = 0; k < blocks.size(); ++k)
        ms.push_back(measure_from(blocks[k], path + "/blocks/" + std::to_string(k)));
      return std::make_shared<BlockGenerator>(BlockGenerator::table(std::move(ms), first));
    }
  } catch (const Error &e) {
    if (e.code() == "ParseError")
      throw;
    throw Error(e.code(), path + ": " + e.detail());
  }
  fail(path + "/kind", "unknown generator kind \"" + kind + "\"");
}

// ---------------------------------------------------------------- submeasures and ideals

inline Json to_json(const SubmeasureSpec &phi) {
  Json out;
  switch (phi.kind) {
  case SubmeasureSpec::Kind::Density:
    out["kind"] = "density";
    out["generator"] = to_json(*phi.gen);
    break;
  case SubmeasureSpec::Kind::AsymptoticDensity:
    out["kind"] = "asymptotic_density";
    break;
  case SubmeasureSpec::Kind::Summable:
    out["kind"] = "summable";
    out["weight"] = phi.weight.str();
    if (!phi.weight.defs().empty())
      out["defs"] = defs_json(phi.weight.defs());
    break;
  case SubmeasureSpec::Kind::MaxMerge:
    out["kind"] = "max_merge";
    out["left"] = to_json(*phi.left);
    out["right"] = to_json(*phi.right);
    break;
  case SubmeasureSpec::Kind::FiniteTable: {
    out["kind"] = "finite_table";
    Json ground = Json::array(), values = Json::array();
    for (const auto &x : phi.table->ground())
      ground.push_back(to_json(x));
    for (const auto &v : phi.table->values())
      values.push_back(to_json(v));
    out["ground"] = ground;
    out["values"] = values;
    break;
  }
  }
  return out;
}

inline SubmeasurePtr submeasure_from(const Json &j, const std::string &path, const Definitions &inherited = {}) {
  Definitions defs = defs_from(j, inherited, path);
  std::string kind = string_field(j, "kind", path);
  if (kind == "density")
    return submeasures::density(generator_from(field(j, "generator", path), path + "/generator", defs));
  if (kind == "asymptotic_density")
    return submeasures::asymptotic_density();
  if (kind == "summable")
    return submeasures::summable(function_from(field(j, "weight", path), path + "/weight", defs));
  if (kind == "max_merge")
    return submeasures::max_merge(submeasure_from(field(j, "left", path), path + "/left", defs),
                                  submeasure_from(field(j, "right", path), path + "/right", defs));
  if (kind == "finite_table") {
    const Json &g = field(j, "ground", path);
    if (!g.is_array())
      fail(path + "/ground", "expected an array of naturals");
    std::vector<BigInt> ground;
    for (size_t k = 0; k < g.size(); ++k)
      ground.push_back(natural_from(g[k], path + "/ground/" + std::to_string(k)));
    if (j.contains("truncate")) {
      // tabulate another submeasure on the ground set
      SubmeasurePtr inner = submeasure_from(j["truncate"], path + "/truncate", defs);
      return submeasures::finite_table(
          FiniteTable::tabulate(ground, [&](const std::vector<BigInt> &s) { return eval_submeasure(*inner, s); }));
    }
    const Json &v = field(j, "values", path);
    if (!v.is_array())
      fail(path + "/values", "expected an array indexed by subset bitmask");
    std::vector<Rational> values;
    for (size_t k = 0; k < v.size(); ++k)
      values.push_back(rational_from(v[k], path + "/values/" + std::to_string(k)));
    return submeasures::finite_table(FiniteTable(std::move(ground), std::move(values)));
  }
  fail(path + "/kind", "unknown submeasure kind \"" + kind + "\"");
}

inline Json to_json(const IdealSpec &ideal) {
  Json out;
  auto with_f = [&](const char *kind) {
    out["kind"] = kind;
    out["f"] = ideal.f.str();
    if (!ideal.f.defs().empty())
      out["defs"] = defs_json(ideal.f.defs());
  };
  switch (ideal.kind) {
  case IdealSpec::Kind::Exh:
    out["kind"] = "exh";
    out["submeasure"] = to_json(*ideal.phi);
    break;
  case IdealSpec::Kind::Phi: with_f("phi"); break;
  case IdealSpec::Kind::SimpleDensity: with_f("simple_density"); break;
  case IdealSpec::Kind::Summable: with_f("summable"); break;
  case IdealSpec::Kind::Fin: out["kind"] = "fin"; break;
  }
  return out;
}

inline IdealPtr ideal_from(const Json &j, const std::string &path, long horizon = 64, const Definitions &inherited = {}) {
  Definitions defs = defs_from(j, inherited, path);
  std::string kind = string_field(j, "kind", path);
  auto f = [&] { return function_from(field(j, "f", path), path + "/f", defs); };
  if (kind == "exh")
    return ideals::exh(submeasure_from(field(j, "submeasure", path), path + "/submeasure", defs));
  if (kind == "phi")
    return phi_ideal(f(), horizon);
  if (kind == "simple_density") {
    Function g = f();
    phi_ideal(g, horizon); // same admissibility as Phi(f)
    return ideals::simple_density(g);
  }
  if (kind == "summable")
    return ideals::summable(f());
  if (kind == "fin")
    return ideals::fin();
  if (kind == "asymptotic_density")
    return ideals::asymptotic_density();
  fail(path + "/kind", "unknown ideal kind \"" + kind + "\"");
}

// ---------------------------------------------------------------- sets

inline Json to_json(const SetSpec &s) {
  Json out;
  switch (s.kind) {
  case SetSpec::Kind::Finite: {
    out["kind"] = "finite";
    Json pts = Json::array();
    for (const auto &iv : s.intervals.pieces())
      for (BigInt x = iv.lo; x < iv.hi; ++x)
        pts.push_back(to_json(x));
    out["points"] = pts;
    break;
  }
  case SetSpec::Kind::IntervalUnion:
    out["kind"] = "interval_union";
    out["intervals"] = intervals_json(s.intervals);
    break;
  case SetSpec::Kind::IntervalRule:
    out["kind"] = "interval_rule";
    out["lo"] = s.lo.str();
    out["len"] = s.len.str();
    out["from"] = s.from;
    break;
  case SetSpec::Kind::BlockSelect:
    out["kind"] = "block_select";
    out["generator"] = to_json(*s.gen);
    out["count"] = s.count.str();
    out["mode"] = s.mode == SetSpec::Mode::First ? "first" : "last";
    out["from"] = s.from;
    break;
  case SetSpec::Kind::Complement:
    out["kind"] = "complement";
    out["of"] = to_json(*s.children[0]);
    break;
  case SetSpec::Kind::Union:
  case SetSpec::Kind::Intersect:
    out["kind"] = s.kind == SetSpec::Kind::Union ? "union" : "intersect";
    out["left"] = to_json(*s.children[0]);
    out["right"] = to_json(*s.children[1]);
    break;
  }
  out["pf"] = s.pf;
  return out;
}

/// `context` resolves "generator": "ideal" inside block_select.
inline SetPtr set_from(const Json &j, const std::string &path, std::shared_ptr<const BlockGenerator> context = nullptr,
                       const Definitions &inherited = {}) {
  Definitions defs = defs_from(j, inherited, path);
  std::string kind = string_field(j, "kind", path);
  bool pf = false;
  if (j.contains("pf")) {
    if (!j["pf"].is_boolean())
      fail(path + "/pf", "expected a boolean");
    pf = j["pf"].get<bool>();
  }
  SetPtr out;
  if (kind == "finite") {
    const Json &pts = field(j, "points", path);
    if (!pts.is_array())
      fail(path + "/points", "expected an array of naturals");
    std::vector<BigInt> v;
    for (size_t k = 0; k < pts.size(); ++k)
      v.push_back(natural_from(pts[k], path + "/points/" + std::to_string(k)));
    return sets::finite(std::move(v), pf);
  }
  if (kind == "interval_union") {
    const Json &ivs = field(j, "intervals", path);
    if (!ivs.is_array())
      fail(path + "/intervals", "expected an array of [a, b) pairs");
    std::vector<std::pair<BigInt, BigInt>> v;
    for (size_t k = 0; k < ivs.size(); ++k) {
      std::string p = path + "/intervals/" + std::to_string(k);
      if (!ivs[k].is_array() || ivs[k].size() != 2)
        fail(p, "expected [a, b)");
      v.emplace_back(natural_from(ivs[k][0], p + "/0"), natural_from(ivs[k][1], p + "/1"));
    }
    return sets::interval_union(std::move(v), pf);
  }
  if (kind == "interval_rule") {
    long from = j.contains("from") ? long_from(j["from"], path + "/from") : 1;
    return sets::interval_rule(function_from(field(j, "lo", path), path + "/lo", defs),
                               function_from(field(j, "len", path), path + "/len", defs), from, pf);
  }
  if (kind == "block_select") {
    const Json &g = field(j, "generator", path);
    std::shared_ptr<const BlockGenerator> gen;
    if (g.is_string() && g.get<std::string>() == "ideal") {
      if (!context)
        fail(path + "/generator", "\"ideal\" needs an ideal given by blocks");
      gen = context;
    } else {
      gen = generator_from(g, path + "/generator", defs);
    }
    std::string mode = j.contains("mode") ? string_field(j, "mode", path) : "first";
    if (mode != "first" && mode != "last")
      fail(path + "/mode", "expected \"first\" or \"last\"");
    std::optional<long> from;
    if (j.contains("from"))
      from = long_from(j["from"], path + "/from");
    return sets::block_select(gen, function_from(field(j, "count", path), path + "/count", defs),
                              mode == "first" ? SetSpec::Mode::First : SetSpec::Mode::Last, from, pf);
  }
  if (kind == "complement") {
    out = sets::complement(set_from(field(j, "of", path), path + "/of", context, defs));
    if (j.contains("pf") && out->pf != pf)
      fail(path + "/pf", "complement decides PF membership itself");
    return out;
  }
  if (kind == "union" || kind == "intersect") {
    SetPtr a = set_from(field(j, "left", path), path + "/left", context, defs);
    SetPtr b = set_from(field(j, "right", path), path + "/right", context, defs);
    return kind == "union" ? sets::unite(a, b) : sets::intersect(a, b);
  }
  fail(path + "/kind", "unknown set kind \"" + kind + "\"");
}

// ---------------------------------------------------------------- sequences

inline MeasureSeq sequence_from(const Json &j, const std::string &path, const Definitions &inherited = {}) {
  if (j.is_array()) {
    std::vector<FinMeasure> items;
    for (size_t k = 0; k < j.size(); ++k)
      items.push_back(measure_from(j[k], path + "/" + std::to_string(k)));
    return MeasureSeq::from_list(std::move(items), 0);
  }
  Definitions defs = defs_from(j, inherited, path);
  long first = j.contains("first") ? long_from(j["first"], path + "/first") : 0;
  if (j.contains("descriptor")) {
    try {
      return MeasureSeq::from_descriptor(string_field(j, "descriptor", path), first, defs);
    } catch (const Error &e) {
      if (e.code() == "ParseError")
        fail(path + "/descriptor", e.detail());
      throw;
    }
  }
  const Json &ms = field(j, "measures", path);
  if (!ms.is_array())
    fail(path + "/measures", "expected an array of measures");
  std::vector<FinMeasure> items;
  for (size_t k = 0; k < ms.size(); ++k)
    items.push_back(measure_from(ms[k], path + "/measures/" + std::to_string(k)));
  return MeasureSeq::from_list(std::move(items), first);
}

/// Descriptor (when present) plus the materialized prefix up to the horizon.
inline Json to_json(const MeasureSeq &s, long horizon) {
  Json out;
  out["first"] = s.first();
  if (!s.descriptor().empty())
    out["descriptor"] = s.descriptor();
  Json ms = Json::array();
  for (const auto &[n, m] : s.prefix(horizon))
    ms.push_back(to_json(m));
  out["measures"] = ms;
  return out;
}

// ---------------------------------------------------------------- reduction tables

inline constexpr size_t kTableEcho = 256; // table entries emitted when a closed form extends them

inline Json to_json(const ReductionTable &r, size_t echo = kTableEcho) {
  Json out;
  Json table = Json::array();
  const bool closed = r.rule || r.blocks;
  size_t count = closed ? std::min(echo, r.table.size()) : r.table.size();
  for (size_t k = 0; k < count; ++k)
    table.push_back(Json::array({static_cast<long>(k), to_json(r.table[k])}));
  out["table"] = table;
  if (closed && count < r.table.size())
    out["table_size"] = r.table.size();
  if (r.rule) {
    out["rule"] = r.rule->str();
    if (!r.rule->defs().empty())
      out["defs"] = defs_json(r.rule->defs());
  }
  if (r.blocks) {
    out["block_transport"] = Json{{"domain", to_json(*r.blocks->domain)},
                                  {"target", to_json(*r.blocks->target)},
                                  {"threshold", r.blocks->threshold}};
  }
  if (r.finite_to_one)
    out["finite_to_one"] = *r.finite_to_one;
  if (r.fiber_bound)
    out["fiber_bound"] = to_json(*r.fiber_bound);
  if (!r.fiber_evidence.empty())
    out["fiber_evidence"] = r.fiber_evidence;
  if (!r.provenance.empty())
    out["provenance"] = r.provenance;
  return out;
}

inline ReductionTable reduction_from(const Json &j, const std::string &path, const Definitions &inherited = {}) {
  Definitions defs = defs_from(j, inherited, path);
  ReductionTable r;
  const Json &t = field(j, "table", path);
  if (!t.is_array())
    fail(path + "/table", "expected an array of [n, f(n)] pairs");
  for (size_t k = 0; k < t.size(); ++k) {
    std::string p = path + "/table/" + std::to_string(k);
    if (!t[k].is_array() || t[k].size() != 2)
      fail(p, "expected [n, f(n)]");
    BigInt n = natural_from(t[k][0], p + "/0");
    if (n != BigInt(static_cast<unsigned long>(k)))
      fail(p, "table must list 0, 1, 2, ... in order");
    r.table.push_back(natural_from(t[k][1], p + "/1"));
  }
  if (j.contains("rule"))
    r.rule = function_from(j["rule"], path + "/rule", defs);
  if (j.contains("block_transport")) {
    const Json &b = j["block_transport"];
    auto rule = std::make_shared<BlockTransportRule>();
    rule->domain = generator_from(field(b, "domain", path + "/block_transport"), path + "/block_transport/domain", defs);
    rule->target = generator_from(field(b, "target", path + "/block_transport"), path + "/block_transport/target", defs);
    rule->threshold = long_from(field(b, "threshold", path + "/block_transport"), path + "/block_transport/threshold");
    r.blocks = rule;
  }
  if (j.contains("finite_to_one")) {
    if (!j["finite_to_one"].is_boolean())
      fail(path + "/finite_to_one", "expected a boolean");
    r.finite_to_one = j["finite_to_one"].get<bool>();
  }
  if (j.contains("fiber_bound"))
    r.fiber_bound = natural_from(j["fiber_bound"], path + "/fiber_bound");
  if (j.contains("fiber_evidence"))
    r.fiber_evidence = string_field(j, "fiber_evidence", path);
  r.provenance = j.contains("provenance") ? string_field(j, "provenance", path) : "loaded";
  r.validate();
  return r;
}

// ---------------------------------------------------------------- reports

inline Json to_json(const Membership &m) {
  Json out;
  out["verdict"] = to_string(m.verdict);
  out["certificate"] = m.certificate;
  out["closed_form"] = m.closed_form;
  if (m.verdict == Membership::Verdict::NotIn) {
    out["epsilon"] = to_json(m.epsilon);
    out["witnesses"] = trace_json(m.witnesses);
  }
  out["trace"] = trace_json(m.trace);
  if (m.verdict == Membership::Verdict::Undetermined)
    out["below_tolerance"] = m.below_tolerance;
  return out;
}

inline Json to_json(const TransportCheck &c) {
  return Json{{"mode", c.mode},           {"subsets", c.subsets}, {"worst_checked", to_json(c.worst_checked)},
              {"worst", to_json(c.worst)}, {"eps", to_json(c.eps)}, {"ok", c.ok}};
}

inline Json to_json(const TransportResult &r) {
  Json out;
  Json map = Json::array();
  for (const auto &[b, a] : r.map)
    map.push_back(Json::array({to_json(b), to_json(a)}));
  out["map"] = map;
  Json parts = Json::array();
  for (const auto &p : r.parts) {
    Json atoms = Json::array();
    for (const auto &x : p.atoms)
      atoms.push_back(to_json(x));
    parts.push_back(Json{{"target", to_json(p.target)}, {"atoms", atoms}, {"mass", to_json(p.mass)},
                         {"exhausted", p.exhausted}});
  }
  out["parts"] = parts;
  Json left = Json::array();
  for (const auto &x : r.leftover)
    left.push_back(to_json(x));
  out["leftover"] = left;
  out["leftover_mass"] = to_json(r.leftover_mass);
  out["sink"] = to_json(r.sink);
  out["eps"] = to_json(r.eps);
  return out;
}

inline Json to_json(const BlockCertificate &b) {
  Json out{{"n", b.n},           {"eps", to_json(b.eps)},   {"mode", b.mode},         {"targets", b.targets},
           {"sources", b.sources}, {"parts", b.parts},       {"leftover", b.leftover}, {"subsets", b.subsets},
           {"worst", optional_json(b.worst)}, {"worst_checked", to_json(b.worst_checked)}, {"ok", b.ok}};
  if (!b.note.empty())
    out["note"] = b.note;
  return out;
}

inline Json to_json(const ReductionCertificate &c) {
  Json blocks = Json::array();
  for (const auto &b : c.blocks)
    blocks.push_back(to_json(b));
  return Json{{"threshold", c.threshold}, {"horizon", c.horizon}, {"lambda", c.lambda_key}, {"mu", c.mu_key},
              {"ok", c.ok()},             {"blocks", blocks},     {"notes", c.notes}};
}

inline Json to_json(const ReductionResult &r) {
  return Json{{"reduction", to_json(r.table)}, {"certificate", to_json(r.certificate)}};
}

inline Json to_json(const PhiReduction &p) {
  Json out;
  out["f"] = p.f ? Json(p.f->str()) : Json(nullptr);
  Json fv = Json::array();
  for (const auto &v : p.f_values)
    fv.push_back(to_json(v));
  out["f_values"] = fv;
  out["subsequence"] = p.subsequence;
  out["nu"] = to_json(*p.nu);
  out["phi"] = to_json(*p.phi);
  out["reduction"] = to_json(p.reduction);
  out["notes"] = p.notes;
  return out;
}

inline Json to_json(const DominationReport &d) {
  return Json{{"threshold", d.threshold}, {"violations", d.violations}, {"result", to_json(d.reduction)}};
}

inline Json to_json(const TukeyMap &t) {
  Json psi = Json::array();
  for (const auto &v : t.psi_values)
    psi.push_back(to_json(v));
  return Json{{"psi", t.psi ? Json(t.psi->str()) : Json(nullptr)}, {"psi_values", psi}, {"base", to_json(t.base)}};
}

inline Json to_json(const TukeyContract &c) {
  return Json{{"dominated", c.dominated}, {"reduction_ok", c.reduction_ok}, {"detail", c.detail}};
}

inline Json to_json(const HypothesisReport &h) {
  return Json{{"horizon", h.horizon},
              {"holds", h.holds()},
              {"quartic_fails", optional_json(h.quartic_fails)},
              {"sum_fails", optional_json(h.sum_fails)}};
}

inline Json to_json(const SuccessorReport &s) {
  Json out;
  out["g"] = s.g.str();
  out["defs"] = defs_json(s.g.defs());
  out["hypotheses"] = to_json(s.hypotheses);
  Json dom = Json::array(), cube = Json::array();
  for (const auto &[n, ok] : s.domination)
    dom.push_back(Json::array({n, ok}));
  for (const auto &[n, ok] : s.cube_route)
    cube.push_back(Json::array({n, ok}));
  out["domination"] = dom;
  out["cube_route"] = cube;
  out["forward"] = s.forward ? to_json(*s.forward) : Json(nullptr);
  out["note"] = s.note;
  return out;
}

inline Json to_json(const RefutationWitness &w) {
  Json out;
  out["found"] = w.found;
  out["case"] = w.case_tag;
  out["partial"] = w.partial;
  out["checks_pass"] = w.checks_pass();
  Json pieces = Json::array();
  for (const auto &p : w.pieces) {
    Json pj{{"n", p.n}, {"points", intervals_json(p.points)}, {"mu_value", to_json(p.mu_value)}};
    if (w.case_tag == 2) {
      pj["i"] = optional_json(p.i);
      pj["j"] = optional_json(p.j);
      pj["block_mass"] = to_json(p.block_mass);
      pj["fi_ok"] = p.fi_ok;
      pj["sqrt_ok"] = p.sqrt_ok;
    }
    pieces.push_back(pj);
  }
  out["pieces"] = pieces;
  out["x"] = intervals_json(w.x);
  Json lam = Json::array();
  for (const auto &l : w.lambda)
    lam.push_back(Json{{"m", l.m}, {"value", to_json(l.value)}, {"bound", to_json(l.bound)}, {"ok", l.ok}});
  out["lambda"] = lam;
  out["case1_hits"] = w.case1_hits;
  out["horizon"] = w.horizon;
  out["hypotheses"] = to_json(w.hypotheses);
  out["unexplored"] = w.unexplored;
  out["notes"] = w.notes;
  return out;
}

inline Json to_json(const ReductionVerdict &v) {
  Json rows = Json::array();
  for (const auto &r : v.rows)
    rows.push_back(Json{{"test", r.test},
                        {"method", r.method},
                        {"skipped", r.skipped},
                        {"source", to_json(r.source)},
                        {"preimage", to_json(r.preimage)}});
  return Json{{"verdict", v.kind == ReductionVerdict::Kind::Refuted ? "Refuted" : "NoCounterexample"},
              {"horizon", v.horizon},
              {"witness", optional_json(v.witness)},
              {"rows", rows}};
}

inline Json to_json(const ConditionVerdict &c) {
  Json out{{"verdict", to_string(c.kind)}, {"reason", c.reason}};
  if (c.kind == ConditionVerdict::Kind::Fail) {
    out["witness"] = optional_json(c.witness);
    out["value"] = to_json(c.value);
  }
  return out;
}

inline Json to_json(const ANReport &r) {
  Json out;
  out["horizon"] = r.horizon;
  out["passes"] = r.passes();
  out["norms"] = Json{{"verdict", to_json(r.norms_verdict)}, {"trace", trace_json(r.norms)}};
  out["totals"] = Json{{"verdict", to_json(r.totals_verdict)}, {"trace", trace_json(r.totals)}};
  Json vars = Json::array();
  for (size_t s = 0; s < r.sample_names.size(); ++s)
    vars.push_back(Json{{"sample", r.sample_names[s]},
                        {"verdict", to_json(r.variation_verdicts[s])},
                        {"trace", trace_json(r.variations[s])}});
  out["variations"] = vars;
  return out;
}

inline Json to_json(const DisjointifyLog &log) {
  Json out;
  out["horizon"] = log.horizon;
  out["precondition_passed"] = log.precondition_passed;
  out["skipped_zero"] = log.skipped_zero;
  Json step1 = Json::array();
  for (const auto &e : log.step1)
    step1.push_back(Json{{"k", e.k},
                         {"n", e.n},
                         {"a_max", optional_json(e.a_max)},
                         {"inside", to_json(e.inside)},
                         {"theta_norm", to_json(e.theta_norm)},
                         {"mu_norm", to_json(e.mu_norm)}});
  out["step1"] = step1;
  out["case"] = std::string(1, log.step2_case);
  out["rule"] = log.rule;
  Json pairs = Json::array();
  for (const auto &p : log.pairs)
    pairs.push_back(Json{{"p", p.p}, {"q", p.q}, {"alpha", to_json(p.alpha)}});
  out["pairs"] = pairs;
  return out;
}

inline DisjointifyLog disjointify_log_from(const Json &j, const std::string &path) {
  DisjointifyLog log;
  log.horizon = long_from(field(j, "horizon", path), path + "/horizon");
  const Json &s1 = field(j, "step1", path);
  for (size_t k = 0; k < s1.size(); ++k) {
    std::string p = path + "/step1/" + std::to_string(k);
    Step1Entry e;
    e.k = long_from(field(s1[k], "k", p), p + "/k");
    e.n = long_from(field(s1[k], "n", p), p + "/n");
    if (s1[k].contains("a_max") && !s1[k]["a_max"].is_null())
      e.a_max = natural_from(s1[k]["a_max"], p + "/a_max");
    log.step1.push_back(e);
  }
  std::string c = string_field(j, "case", path);
  if (c != "a" && c != "b")
    fail(path + "/case", "expected \"a\" or \"b\"");
  log.step2_case = c[0];
  const Json &pairs = field(j, "pairs", path);
  for (size_t k = 0; k < pairs.size(); ++k) {
    std::string p = path + "/pairs/" + std::to_string(k);
    PairEntry e{long_from(field(pairs[k], "p", p), p + "/p"), long_from(field(pairs[k], "q", p), p + "/q"),
                rational_from(field(pairs[k], "alpha", p), p + "/alpha")};
    if (e.p < 0 || e.q < 0 || static_cast<size_t>(std::max(e.p, e.q)) >= log.step1.size())
      fail(p, "pair refers to a missing Step-1 selection");
    log.pairs.push_back(e);
  }
  return log;
}

inline Json to_json(const ClassificationVerdict &v) {
  Json out;
  out["verdict"] = to_string(v.kind);
  out["reason"] = v.reason.empty() ? Json(nullptr) : Json(v.reason);
  out["text"] = v.text();
  out["norms_certificate"] = v.norms_certificate;
  out["atoms_certificate"] = v.atoms_certificate;
  out["norms"] = trace_json(v.norms);
  out["at_plus"] = trace_json(v.at_plus);
  if (v.evidence)
    out["evidence"] = Json{{"found", v.evidence->found},
                           {"prefix_end", to_json(v.evidence->m)},
                           {"value", to_json(v.evidence->value)}};
  out["implied"] = v.implied;
  return out;
}

inline Json to_json(const SimpleDensityReport &r) {
  Json blocks = Json::array();
  for (const auto &[n, s, e, f] : r.g_blocks)
    blocks.push_back(Json{{"n", n}, {"start", to_json(s)}, {"end", to_json(e)}, {"g", to_json(f)}});
  return Json{{"passes", r.passes},         {"certified", r.certified}, {"reason", r.reason},
              {"ratios", trace_json(r.ratios)}, {"g", r.g_description}, {"g_blocks", blocks}};
}

inline Json to_json(const SubmeasureAN &s) {
  Json steps = Json::array();
  for (const auto &st : s.steps)
    steps.push_back(Json{{"k", st.k},
                         {"lo", to_json(st.lo)},
                         {"hi", to_json(st.hi)},
                         {"phi", to_json(st.phi_value)},
                         {"block", optional_json(st.block)},
                         {"mass", to_json(st.mass)}});
  return Json{{"steps", steps}, {"truncated", s.truncated}, {"log", s.log}};
}

inline Json to_json(const DefectResult &d) {
  Json mu = Json::array();
  for (const auto &v : d.measure)
    mu.push_back(to_json(v));
  return Json{{"phi_value", to_json(d.phi_value)},
              {"lp_value", to_json(d.lp_value)},
              {"defect", to_json(d.defect())},
              {"measure", mu}};
}

inline Json to_json(const MergeProbeRow &r) {
  return Json{{"test", r.test}, {"psi", to_json(r.psi)}, {"phi", to_json(r.phi)}, {"merged", to_json(r.merged)}};
}

inline Json to_json(const PhiBlockCheck &c) {
  return Json{{"n", c.n}, {"norm_ok", c.norm_ok}, {"atoms_ok", c.atoms_ok}, {"tiles_ok", c.tiles_ok}};
}

inline Json to_json(const ReductionAudit &a) {
  Json rows = Json::array();
  for (const auto &r : a.rows) {
    Json row{{"n", r.n}, {"checked", r.checked}, {"ok", r.ok}};
    if (r.checked) {
      row["worst"] = to_json(r.worst);
      row["eps"] = to_json(r.eps);
    }
    if (!r.note.empty())
      row["note"] = r.note;
    rows.push_back(row);
  }
  return Json{{"ok", a.ok()}, {"rows", rows}};
}

inline Json error_json(const Error &e) {
  return Json{{"error", Json{{"code", e.code()}, {"detail", e.detail()}}}};
}

} // namespace nikodym::io
