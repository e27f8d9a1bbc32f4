// Command-line workbench over the nikodym library.
//
// Exit codes: 0 positive verdict, 1 negative verdict or counterexample,
// 2 undetermined, 3 input error.

#include "nikodym/json_io.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <functional>
#include <iostream>

using namespace nikodym;
using io::Json;

namespace {

enum Exit { kPositive = 0, kNegative = 1, kUndetermined = 2, kInputError = 3 };

struct Config {
  long horizon = 64;
  std::string tolerance = "1/1000000";
  uint64_t seed = 0;
  std::string format = "json";
  std::string out;
  unsigned threads = 1;

  Rational tol() const { return parse_rational(tolerance); }
  MembershipOptions membership() const { return {horizon, tol()}; }
  ReductionOptions reduction() const {
    ReductionOptions o;
    o.threads = threads;
    o.seed = seed;
    return o;
  }
};

struct Outcome {
  int code = kPositive;
  Json result;
};

// Error codes that state a negative finding rather than bad input.
int exit_for(const Error &e) {
  static const std::set<std::string> negative = {"BoundedSubmeasure", "NotAnIdeal",     "ConditionFails",
                                                 "DominationFails",   "AtomConditionFails", "HypothesisFails",
                                                 "NotPseudoUnion",    "InconsistentVerdicts"};
  static const std::set<std::string> undetermined = {"HorizonExhausted", "ValueTooLarge", "TooManyPieces"};
  if (negative.count(e.code()))
    return kNegative;
  if (undetermined.count(e.code()))
    return kUndetermined;
  return kInputError;
}

int membership_exit(Membership::Verdict v) {
  switch (v) {
  case Membership::Verdict::In: return kPositive;
  case Membership::Verdict::NotIn: return kNegative;
  case Membership::Verdict::Undetermined: return kUndetermined;
  }
  return kUndetermined;
}

std::vector<BigInt> parse_points(const std::string &text) {
  std::vector<BigInt> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(parse_bigint(item));
  return out;
}

Function expr_arg(const std::string &text, const std::string &what) {
  if (text.empty())
    throw Error("ParseError", what + " is required");
  return Function::parse(text);
}

std::shared_ptr<const BlockGenerator> generator_arg(const std::string &src, const char *what) {
  if (src.empty())
    throw Error("ParseError", std::string(what) + " is required");
  return io::generator_from(io::load(src), what);
}

// ---------------------------------------------------------------- text rendering

bool scalar(const Json &j) { return !j.is_object() && !j.is_array(); }

std::string scalar_text(const Json &j) {
  if (j.is_string())
    return j.get<std::string>();
  return j.dump();
}

bool flat_array(const Json &j) {
  for (const auto &x : j)
    if (!scalar(x) && !(x.is_array() && std::all_of(x.begin(), x.end(), scalar)))
      return false;
  return true;
}

std::string inline_text(const Json &j) {
  if (scalar(j))
    return scalar_text(j);
  std::string out = "[";
  bool first = true;
  for (const auto &x : j) {
    out += (first ? "" : ", ") + inline_text(x);
    first = false;
  }
  return out + "]";
}

void render(const Json &j, const std::string &indent, std::ostream &os) {
  if (j.is_object()) {
    for (const auto &[k, v] : j.items()) {
      if (scalar(v) || (v.is_array() && flat_array(v))) {
        os << indent << k << ": " << inline_text(v) << "\n";
      } else {
        os << indent << k << ":\n";
        render(v, indent + "  ", os);
      }
    }
  } else if (j.is_array()) {
    for (const auto &v : j) {
      if (scalar(v) || (v.is_array() && flat_array(v))) {
        os << indent << "- " << inline_text(v) << "\n";
      } else {
        os << indent << "-\n";
        render(v, indent + "  ", os);
      }
    }
  } else {
    os << indent << scalar_text(j) << "\n";
  }
}

// ---------------------------------------------------------------- commands

struct Args {
  std::string lambda, mu, eps, f, h, ideal, set, seq, submeasure, generator, table, points, replay, to, verify, psi,
      phi, summable, simple_density, from_positive;
  std::vector<std::string> samples, sets;
  bool all = false, no_default_samples = false;
};

Outcome cmd_transport(const Args &a, const Config &c) {
  if (a.lambda.empty() || a.mu.empty() || a.eps.empty())
    throw Error("ParseError", "transport needs --lambda, --mu and --eps");
  FinMeasure lam = io::measure_from(io::load(a.lambda), "lambda");
  FinMeasure mu = io::measure_from(io::load(a.mu), "mu");
  TransportResult r = transport(lam, mu, parse_rational(a.eps));
  std::vector<Rational> lv;
  for (const auto &[p, w] : lam.atoms())
    lv.push_back(w);
  TransportCheck check = check_transport(lv, pushed_masses(r), r.eps, c.seed);
  Outcome o;
  o.result = Json{{"transport", io::to_json(r)}, {"check", io::to_json(check)},
                  {"part_bounds", part_bounds_hold(lam, r)}};
  if (lam.size() <= kExhaustiveTargets)
    o.result["brute_force_worst"] = io::to_json(brute_force_worst(lam, mu, r));
  o.code = check.ok ? kPositive : kNegative;
  return o;
}

Outcome cmd_reduce(const Args &a, const Config &c) {
  Outcome o;
  if (!a.verify.empty()) {
    Json report = io::load(a.verify);
    // a full report wraps the fields in "result"
    const Json &prior = report.contains("result") ? report["result"] : report;
    auto lams = io::generator_from(io::field(prior, "lambda", ""), "/lambda");
    auto mus = io::generator_from(io::field(prior, "mu", ""), "/mu");
    ReductionTable t = io::reduction_from(io::field(prior, "reduction", ""), "/reduction");
    const Json &cert = io::field(prior, "certificate", "");
    long threshold = io::long_from(io::field(cert, "threshold", "/certificate"), "/certificate/threshold");
    long horizon = io::long_from(io::field(cert, "horizon", "/certificate"), "/certificate/horizon");
    ReductionAudit audit = audit_reduction(*lams, *mus, t, threshold, horizon);
    o.result = Json{{"audit", io::to_json(audit)}};
    o.code = audit.ok() ? kPositive : kNegative;
    return o;
  }
  auto lams = generator_arg(a.lambda, "--lambda");
  auto mus = generator_arg(a.mu, "--mu");
  ReductionResult r = build_reduction_density(lams, mus, c.horizon, c.reduction());
  ReductionAudit audit = audit_reduction(*lams, *mus, r.table, r.certificate.threshold, c.horizon);
  o.result = Json{{"lambda", io::to_json(*lams)},
                  {"mu", io::to_json(*mus)},
                  {"reduction", io::to_json(r.table)},
                  {"certificate", io::to_json(r.certificate)},
                  {"audit", io::to_json(audit)}};
  o.code = r.certificate.ok() && audit.ok() ? kPositive : kNegative;
  return o;
}

Outcome cmd_phi(const Args &a, const Config &c) {
  Outcome o;
  if (!a.generator.empty()) {
    PhiReduction p = reduce_to_phi(generator_arg(a.generator, "--generator"), c.horizon, c.reduction());
    o.result = io::to_json(p);
    o.code = p.reduction.certificate.ok() ? kPositive : kNegative;
    return o;
  }
  IdealPtr ideal = phi_ideal(expr_arg(a.f, "--f"), c.horizon);
  Json checks = Json::array();
  bool ok = true;
  for (const auto &row : check_phi_blocks(*ideal->gen, c.horizon)) {
    ok = ok && row.norm_ok && row.atoms_ok && row.tiles_ok;
    checks.push_back(io::to_json(row));
  }
  o.result = Json{{"ideal", io::to_json(*ideal)}, {"generator", io::to_json(*ideal->gen)}, {"blocks_ok", ok},
                  {"blocks", checks}};
  o.code = ok ? kPositive : kNegative;
  return o;
}

FilterContext context_arg(const Args &a, const Config &c) {
  IdealPtr ideal = a.ideal.empty() ? ideals::fin() : io::ideal_from(io::load(a.ideal), "ideal", c.horizon);
  std::vector<SetPtr> extra;
  for (size_t k = 0; k < a.samples.size(); ++k)
    extra.push_back(io::set_from(io::load(a.samples[k]), "sample/" + std::to_string(k), ideal->gen));
  return FilterContext::make(ideal, extra, !a.no_default_samples, c.membership());
}

Json context_json(const FilterContext &ctx) {
  Json samples = Json::array();
  for (size_t k = 0; k < ctx.samples.size(); ++k)
    samples.push_back(Json{{"set", ctx.samples[k]->describe()}, {"complement_in_ideal", ctx.certificates[k]}});
  return Json{{"ideal", io::to_json(*ctx.ideal)}, {"samples", samples}};
}

MeasureSeq seq_arg(const Args &a) {
  if (a.seq.empty())
    throw Error("ParseError", "--seq is required");
  return io::sequence_from(io::load(a.seq), "seq");
}

Outcome cmd_verify_an(const Args &a, const Config &c) {
  MeasureSeq seq = seq_arg(a);
  FilterContext ctx = context_arg(a, c);
  ANReport r = verify_AN(seq, ctx, c.horizon);
  Outcome o;
  o.result = Json{{"context", context_json(ctx)}, {"report", io::to_json(r)}};
  o.code = r.passes() ? kPositive : r.fails() ? kNegative : kUndetermined;
  return o;
}

Outcome cmd_disjointify(const Args &a, const Config &c) {
  MeasureSeq seq = seq_arg(a);
  FilterContext ctx = context_arg(a, c);
  Outcome o;
  if (!a.replay.empty()) {
    Json report = io::load(a.replay);
    const Json &prior = report.contains("result") ? report["result"] : report;
    DisjointifyLog log = io::disjointify_log_from(io::field(prior, "log", ""), "/log");
    std::vector<FinMeasure> again = replay_disjointify(seq, log);
    MeasureSeq replayed = MeasureSeq::from_list(again, 0);
    Json out = io::to_json(replayed, static_cast<long>(again.size()));
    bool same = out["measures"] == io::field(io::field(prior, "output", ""), "measures", "/output");
    o.result = Json{{"replay_matches", same}, {"output", out}};
    o.code = same ? kPositive : kNegative;
    return o;
  }
  if (a.to == "positive") {
    PositiveResult r = AN_to_positive(seq, ctx, c.horizon);
    o.result = Json{{"context", context_json(ctx)},
                    {"log", io::to_json(r.construction.log)},
                    {"positives", io::to_json(r.positives, c.horizon)}};
    return o;
  }
  if (a.to == "density") {
    DensityExtraction d = AN_to_density(seq, ctx, c.horizon, c.membership());
    Json probe = Json::array();
    for (const auto &[name, m] : d.probe)
      probe.push_back(Json{{"complement_of", name}, {"membership", io::to_json(m)}});
    o.result = Json{{"context", context_json(ctx)},
                    {"log", io::to_json(d.positive.construction.log)},
                    {"kept", d.kept},
                    {"submeasure", io::to_json(*d.phi)},
                    {"probe_passes", d.probe_passes},
                    {"probe", probe},
                    {"unbounded", Json{{"found", d.unbounded.found},
                                       {"prefix_end", io::to_json(d.unbounded.m)},
                                       {"value", io::to_json(d.unbounded.value)}}}};
    o.code = d.probe_passes ? kPositive : kUndetermined;
    return o;
  }
  if (!a.to.empty() && a.to != "signed")
    throw Error("ParseError", "--to expects signed, positive or density");
  Disjointified d = disjointify(seq, ctx, c.horizon);
  o.result = Json{{"context", context_json(ctx)},
                  {"log", io::to_json(d.log)},
                  {"output", io::to_json(d.output, *d.output.last())}};
  return o;
}

Outcome cmd_extract_an(const Args &a, const Config &c) {
  Outcome o;
  if (!a.from_positive.empty()) {
    MeasureSeq seq = io::sequence_from(io::load(a.from_positive), "from-positive");
    o.result = Json{{"sequence", io::to_json(positive_to_AN(seq, c.horizon), c.horizon)}};
    return o;
  }
  if (a.submeasure.empty())
    throw Error("ParseError", "extract-an needs --submeasure or --from-positive");
  SubmeasurePtr phi = io::submeasure_from(io::load(a.submeasure), "submeasure");
  SubmeasureAN r = submeasure_to_AN(*phi, c.horizon);
  o.result = Json{{"submeasure", io::to_json(*phi)},
                  {"extraction", io::to_json(r)},
                  {"sequence", io::to_json(r.seq, r.seq.last().value_or(-1))}};
  return o;
}

int classification_exit(const ClassificationVerdict &v) {
  switch (v.kind) {
  case ClassificationVerdict::Kind::InAN: return kPositive;
  case ClassificationVerdict::Kind::NotInAN: return kNegative;
  case ClassificationVerdict::Kind::Undetermined: return kUndetermined;
  }
  return kUndetermined;
}

Outcome cmd_classify(const Args &a, const Config &c) {
  Outcome o;
  if (!a.simple_density.empty()) {
    SimpleDensityReport r = simple_density_check(Function::parse(a.simple_density), c.horizon);
    o.result = io::to_json(r);
    o.code = r.certified ? kPositive : kUndetermined;
    return o;
  }
  ClassificationVerdict v;
  if (!a.summable.empty())
    v = classify_summable(Function::parse(a.summable), c.horizon);
  else if (!a.generator.empty())
    v = classify_density(*generator_arg(a.generator, "--generator"), c.horizon);
  else if (!a.ideal.empty())
    v = classify_ideal(*io::ideal_from(io::load(a.ideal), "ideal", c.horizon), c.horizon);
  else
    throw Error("ParseError", "classify needs --ideal, --generator, --summable or --simple-density");
  o.result = io::to_json(v);
  o.code = classification_exit(v);
  return o;
}

Outcome cmd_membership(const Args &a, const Config &c) {
  if (a.ideal.empty() || a.set.empty())
    throw Error("ParseError", "membership needs --ideal and --set");
  IdealPtr ideal = io::ideal_from(io::load(a.ideal), "ideal", c.horizon);
  SetPtr x = io::set_from(io::load(a.set), "set", ideal->gen);
  Membership m = membership(*ideal, *x, c.membership());
  Outcome o;
  o.result = Json{{"ideal", io::to_json(*ideal)}, {"set", io::to_json(*x)}, {"membership", io::to_json(m)}};
  o.code = membership_exit(m.verdict);
  return o;
}

Outcome cmd_refute(const Args &a, const Config &c) {
  Function f = expr_arg(a.f, "--f");
  if (a.table.empty())
    throw Error("ParseError", "--table is required");
  ReductionTable t = io::reduction_from(io::load(a.table), "table");
  RefutationWitness w = refute_reduction(f, t, c.horizon, c.reduction());
  Outcome o;
  o.result = io::to_json(w);
  o.code = w.found && w.checks_pass() ? kNegative : kUndetermined;
  return o;
}

Outcome cmd_nonpath(const Args &a, const Config &) {
  if (a.submeasure.empty())
    throw Error("ParseError", "--submeasure is required");
  SubmeasurePtr phi = io::submeasure_from(io::load(a.submeasure), "submeasure");
  if (phi->kind != SubmeasureSpec::Kind::FiniteTable)
    throw Error("ValidationError", "nonpath needs a finite_table submeasure");
  const FiniteTable &t = *phi->table;
  Outcome o;
  if (a.all) {
    Rational worst = 0;
    Json rows = Json::array();
    for (size_t mask = 0; mask < (size_t(1) << t.size()); ++mask) {
      std::vector<BigInt> s;
      for (size_t k = 0; k < t.size(); ++k)
        if (mask >> k & 1)
          s.push_back(t.ground()[k]);
      DefectResult d = nonpathology_defect(t, s);
      if (d.defect() > worst)
        worst = d.defect();
      if (d.defect() > 0) {
        Json pts = Json::array();
        for (const auto &x : s)
          pts.push_back(io::to_json(x));
        rows.push_back(Json{{"set", pts}, {"defect", io::to_json(d.defect())}});
      }
    }
    o.result = Json{{"max_defect", io::to_json(worst)}, {"pathological_sets", rows}};
    o.code = worst == 0 ? kPositive : kNegative;
    return o;
  }
  DefectResult d = nonpathology_defect(t, parse_points(a.points));
  o.result = io::to_json(d);
  o.code = d.defect() == 0 ? kPositive : kNegative;
  return o;
}

Outcome cmd_successor(const Args &a, const Config &c) {
  SuccessorReport r = successor(expr_arg(a.f, "--f"), c.horizon, c.reduction());
  Outcome o;
  o.result = io::to_json(r);
  bool forward_ok = r.forward && r.forward->reduction.certificate.ok();
  o.code = r.hypotheses.holds() && forward_ok ? kPositive : kNegative;
  return o;
}

Outcome cmd_tukey(const Args &a, const Config &c) {
  TukeyMap t = tukey_map(generator_arg(a.generator, "--generator"), c.horizon, c.reduction());
  Outcome o;
  o.result = Json{{"map", io::to_json(t)}};
  if (!a.h.empty()) {
    TukeyContract k = tukey_contract(t, Function::parse(a.h), c.horizon, c.reduction());
    o.result["contract"] = io::to_json(k);
    o.code = k.dominated ? (k.reduction_ok ? kPositive : kNegative) : kUndetermined;
  }
  return o;
}

Outcome cmd_merge_probe(const Args &a, const Config &c) {
  if (a.psi.empty() || a.phi.empty())
    throw Error("ParseError", "merge-probe needs --psi and --phi");
  SubmeasurePtr psi = io::submeasure_from(io::load(a.psi), "psi");
  SubmeasurePtr phi = io::submeasure_from(io::load(a.phi), "phi");
  std::vector<SetPtr> tests;
  for (size_t k = 0; k < a.sets.size(); ++k)
    tests.push_back(io::set_from(io::load(a.sets[k]), "set/" + std::to_string(k), phi->gen ? phi->gen : psi->gen));
  Json rows = Json::array();
  for (const auto &r : max_merge_exh_probe(psi, phi, tests, c.membership()))
    rows.push_back(io::to_json(r));
  Outcome o;
  o.result = Json{{"rows", rows}};
  return o;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Exact workbench for Nikodym-type properties of ideals on omega"};
  app.require_subcommand(1);
  Config cfg;
  Args args;
  app.add_option("--horizon", cfg.horizon, "Working horizon")->check(CLI::PositiveNumber);
  app.add_option("--tolerance", cfg.tolerance, "Tolerance p/q for undetermined traces");
  app.add_option("--seed", cfg.seed, "Seed for sampled subset checks");
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--out", cfg.out, "Write the report to PATH");
  app.add_option("--threads", cfg.threads, "Worker threads")->check(CLI::Range(1u, 256u));

  std::map<std::string, std::function<Outcome(const Args &, const Config &)>> handlers;
  auto sub = [&](const char *name, const char *help, auto handler) {
    handlers[name] = handler;
    return app.add_subcommand(name, help);
  };

  auto *t = sub("transport", "Greedy transport of mu onto lambda", cmd_transport);
  t->add_option("--lambda", args.lambda, "Target measure (JSON)");
  t->add_option("--mu", args.mu, "Source measure (JSON)");
  t->add_option("--eps", args.eps, "Error bound p/q");

  auto *r = sub("reduce", "Blockwise reduction between two density generators", cmd_reduce);
  r->add_option("--lambda", args.lambda, "Generator of the reduced ideal (JSON)");
  r->add_option("--mu", args.mu, "Generator of the target ideal (JSON)");
  r->add_option("--verify", args.verify, "Re-verify a previously emitted reduction report");

  auto *p = sub("phi", "Phi(f) block checks, or reduction of a generator to some Phi(f)", cmd_phi);
  p->add_option("--f", args.f, "Expression for f");
  p->add_option("--generator", args.generator, "Generator to reduce (JSON)");

  auto add_context = [&](CLI::App *c) {
    c->add_option("--seq", args.seq, "Measure sequence (JSON)");
    c->add_option("--ideal", args.ideal, "Ideal whose dual filter defines N_F (default Fin)");
    c->add_option("--sample", args.samples, "Extra filter set (JSON); its complement must be in the ideal");
    c->add_flag("--no-default-samples", args.no_default_samples, "Only use the given samples");
  };
  add_context(sub("verify-an", "Check the AN conditions on a sequence prefix", cmd_verify_an));
  auto *d = sub("disjointify", "Disjointly supported AN-sequence from an AN-sequence", cmd_disjointify);
  add_context(d);
  d->add_option("--to", args.to, "signed (default), positive or density");
  d->add_option("--replay", args.replay, "Replay the log of a previous disjointify report");

  auto *e = sub("extract-an", "AN-sequence from an unbounded submeasure", cmd_extract_an);
  e->add_option("--submeasure", args.submeasure, "Density or summable submeasure (JSON)");
  e->add_option("--from-positive", args.from_positive, "Positive sequence to turn into an AN-sequence");

  auto *c = sub("classify", "Nikodym classification", cmd_classify);
  c->add_option("--ideal", args.ideal, "Ideal (JSON)");
  c->add_option("--generator", args.generator, "Density generator (JSON)");
  c->add_option("--summable", args.summable, "Weight expression of a summable ideal");
  c->add_option("--simple-density", args.simple_density, "f for the simple density check");

  auto *m = sub("membership", "Exh-membership of a set", cmd_membership);
  m->add_option("--ideal", args.ideal, "Ideal (JSON)");
  m->add_option("--set", args.set, "Set (JSON); block_select may use \"generator\": \"ideal\"");

  auto *rf = sub("refute", "Search for a witness against a reduction into Phi(f)", cmd_refute);
  rf->add_option("--f", args.f, "Expression for f");
  rf->add_option("--table", args.table, "Candidate reduction (JSON)");

  auto *np = sub("nonpath", "Non-pathology defect of a finite table", cmd_nonpath);
  np->add_option("--submeasure", args.submeasure, "finite_table submeasure (JSON)");
  np->add_option("--points", args.points, "Comma separated subset of the ground");
  np->add_flag("--all", args.all, "Maximize the defect over all subsets");

  auto *s = sub("successor", "Successor g(n) = n f(f(n)) and its hypotheses", cmd_successor);
  s->add_option("--f", args.f, "Expression for f");

  auto *tk = sub("tukey", "Tukey map psi = 2n^2 f(n) of a generator", cmd_tukey);
  tk->set_help_flag("--help", "Print this help message and exit"); // frees the name h
  tk->add_option("--generator", args.generator, "Generator (JSON)");
  tk->add_option("--h", args.h, "Check the contract against Phi(h)");

  auto *mp = sub("merge-probe", "Exh of max(psi, phi) against Exh(psi) and Exh(phi)", cmd_merge_probe);
  mp->add_option("--psi", args.psi, "Submeasure (JSON)");
  mp->add_option("--phi", args.phi, "Submeasure (JSON)");
  mp->add_option("--set", args.sets, "Test set (JSON), repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    int rc = app.exit(err);
    return err.get_exit_code() == 0 ? 0 : (rc == 0 ? 0 : kInputError);
  }

  std::string name = app.get_subcommands().front()->get_name();
  Json report;
  report["command"] = name;
  report["config"] = Json{{"horizon", cfg.horizon}, {"tolerance", cfg.tolerance}, {"seed", cfg.seed}};
  int code;
  try {
    cfg.tol(); // validates the tolerance
    if (cfg.tol() <= 0)
      throw Error("ValidationError", "tolerance must be positive");
    Outcome o = handlers.at(name)(args, cfg);
    report["result"] = std::move(o.result);
    code = o.code;
  } catch (const Error &err) {
    code = exit_for(err);
    report.update(io::error_json(err));
  } catch (const std::exception &err) {
    code = kInputError;
    report.update(Json{{"error", Json{{"code", "InternalError"}, {"detail", err.what()}}}});
  }
  report["exit"] = code;

  std::ostringstream text;
  if (cfg.format == "json")
    text << report.dump(2) << "\n";
  else
    render(report, "", text);
  if (cfg.out.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream f(cfg.out);
    if (!f) {
      std::cerr << "cannot write " << cfg.out << "\n";
      return kInputError;
    }
    f << text.str();
  }
  return code;
}
