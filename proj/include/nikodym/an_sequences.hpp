#pragma once

// Sequences of finitely supported measures on N_F: AN verification,
// disjointification, positive <-> signed translations, extraction from
// unbounded submeasures, and normalization.

#include "nikodym/submeasure.hpp"

#include <functional>

namespace nikodym {

// ---------------------------------------------------------------- descriptors

/// Closed form "POINT=WEIGHT; ..." where POINT is PF or an expression in n
/// and WEIGHT an expression in n. Atoms at coinciding points add up.
struct SeqTerm {
  bool pf = false;
  Function point, weight;
};

inline std::vector<SeqTerm> parse_descriptor(const std::string &text, const Definitions &defs = {}) {
  std::vector<SeqTerm> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t semi = text.find(';', pos);
    std::string item = text.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
    pos = semi == std::string::npos ? text.size() + 1 : semi + 1;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\n"), b = s.find_last_not_of(" \t\n");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    item = trim(item);
    if (item.empty())
      continue;
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw Error("ParseError", "descriptor term '" + item + "' lacks '='");
    std::string p = trim(item.substr(0, eq)), w = trim(item.substr(eq + 1));
    SeqTerm t;
    t.pf = p == "PF";
    if (!t.pf)
      t.point = Function::parse(p, defs);
    t.weight = Function::parse(w, defs);
    out.push_back(std::move(t));
  }
  if (out.empty())
    throw Error("ParseError", "empty descriptor");
  return out;
}

inline std::string descriptor_text(const std::vector<SeqTerm> &terms) {
  std::string out;
  for (const auto &t : terms) {
    if (!out.empty())
      out += "; ";
    out += (t.pf ? std::string("PF") : t.point.str()) + "=" + t.weight.str();
  }
  return out;
}

class MeasureSeq {
public:
  using Generator = std::function<FinMeasure(long)>;

  MeasureSeq() = default;

  static MeasureSeq from_list(std::vector<FinMeasure> items, long first = 0) {
    MeasureSeq s;
    s.first_ = first;
    s.size_ = static_cast<long>(items.size());
    auto shared = std::make_shared<const std::vector<FinMeasure>>(std::move(items));
    s.gen_ = [shared, first](long n) { return (*shared)[static_cast<size_t>(n - first)]; };
    return s;
  }

  static MeasureSeq from_descriptor(const std::string &text, long first = 0, const Definitions &defs = {}) {
    MeasureSeq s;
    s.first_ = first;
    s.terms_ = parse_descriptor(text, defs);
    s.descriptor_ = descriptor_text(s.terms_);
    auto terms = s.terms_;
    s.gen_ = [terms](long n) {
      FinMeasure m;
      for (const auto &t : terms) {
        Rational w = t.weight(n);
        if (t.pf) {
          m.add(Point::PF(), w);
          continue;
        }
        Rational p = t.point(n);
        if (!is_integer(p) || p < 0)
          throw Error("ValidationError", "descriptor point " + t.point.str() + " is not a natural at n = " +
                                             std::to_string(n));
        m.add(Point(p.get_num()), w);
      }
      return m;
    };
    return s;
  }

  long first() const { return first_; }
  /// Number of elements for finite lists.
  std::optional<long> size() const { return size_; }
  std::optional<long> last() const {
    if (!size_)
      return std::nullopt;
    return first_ + *size_ - 1;
  }
  bool has(long n) const { return n >= first_ && (!size_ || n < first_ + *size_); }
  const std::string &descriptor() const { return descriptor_; }
  const std::vector<SeqTerm> &terms() const { return terms_; }

  FinMeasure at(long n) const {
    if (!has(n))
      throw Error("IndexOutOfRange", "sequence has no element " + std::to_string(n));
    {
      std::lock_guard<std::mutex> lock(*mutex_);
      auto it = cache_->find(n);
      if (it != cache_->end())
        return it->second;
    }
    FinMeasure m = gen_(n);
    std::lock_guard<std::mutex> lock(*mutex_);
    cache_->emplace(n, m);
    return m;
  }

  /// Elements first..min(horizon, last).
  std::vector<std::pair<long, FinMeasure>> prefix(long horizon) const {
    std::vector<std::pair<long, FinMeasure>> out;
    for (long n = first_; n <= horizon && has(n); ++n)
      out.emplace_back(n, at(n));
    return out;
  }

private:
  long first_ = 0;
  std::optional<long> size_;
  Generator gen_;
  std::string descriptor_;
  std::vector<SeqTerm> terms_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::map<long, FinMeasure>> cache_ = std::make_shared<std::map<long, FinMeasure>>();
};

// ---------------------------------------------------------------- filter context

struct FilterContext {
  IdealPtr ideal;
  std::vector<SetPtr> samples;          // sets A of the dual filter
  std::vector<std::string> certificates; // why omega \ A is in the ideal

  /// Default samples: cofinite sets and, for block ideals, the complement of the
  /// first point of every block. Extra sets must be certified as well.
  static FilterContext make(IdealPtr ideal, std::vector<SetPtr> extra = {}, bool defaults = true,
                            const MembershipOptions &opt = {}) {
    FilterContext ctx;
    ctx.ideal = std::move(ideal);
    std::vector<SetPtr> candidates;
    if (defaults) {
      for (long k : {1, 2, 4, 8, 16}) {
        std::vector<BigInt> head;
        for (long x = 0; x < k; ++x)
          head.emplace_back(x);
        candidates.push_back(sets::complement(sets::finite(head)));
      }
      if (const BlockGenerator *g = ctx.ideal->generator()) {
        auto gen = std::make_shared<BlockGenerator>(*g);
        auto firsts = sets::block_select(gen, Function::parse("1"), SetSpec::Mode::First);
        if (membership(*ctx.ideal, *firsts, opt).verdict == Membership::Verdict::In)
          candidates.push_back(sets::complement(firsts));
      }
    }
    for (auto &s : extra)
      candidates.push_back(s);
    for (auto &a : candidates) {
      Membership m = membership(*ctx.ideal, *sets::complement(a), opt);
      if (m.verdict != Membership::Verdict::In) {
        if (!defaults || std::find(extra.begin(), extra.end(), a) != extra.end())
          throw Error("ValidationError", "complement of sample " + a->describe() + " is not certified in " +
                                             ctx.ideal->describe());
        continue;
      }
      ctx.samples.push_back(a);
      ctx.certificates.push_back(m.certificate);
    }
    return ctx;
  }
};

// ---------------------------------------------------------------- verify_AN

struct ConditionVerdict {
  enum class Kind { Pass, PassAtHorizon, Fail, Inconclusive } kind = Kind::Inconclusive;
  std::optional<long> witness;
  Rational value;
  std::string reason;
};

inline const char *to_string(ConditionVerdict::Kind k) {
  switch (k) {
  case ConditionVerdict::Kind::Pass: return "Pass";
  case ConditionVerdict::Kind::PassAtHorizon: return "Pass@horizon";
  case ConditionVerdict::Kind::Fail: return "Fail";
  case ConditionVerdict::Kind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct ANReport {
  long horizon = 0;
  std::vector<std::pair<long, Rational>> norms, totals;
  std::vector<std::string> sample_names;
  std::vector<std::vector<std::pair<long, Rational>>> variations; // per sample
  ConditionVerdict norms_verdict, totals_verdict;
  std::vector<ConditionVerdict> variation_verdicts;
  bool passes() const {
    auto good = [](const ConditionVerdict &v) {
      return v.kind == ConditionVerdict::Kind::Pass || v.kind == ConditionVerdict::Kind::PassAtHorizon;
    };
    if (!good(norms_verdict) || !good(totals_verdict))
      return false;
    for (const auto &v : variation_verdicts)
      if (!good(v))
        return false;
    return true;
  }
  bool fails() const {
    if (norms_verdict.kind == ConditionVerdict::Kind::Fail || totals_verdict.kind == ConditionVerdict::Kind::Fail)
      return true;
    for (const auto &v : variation_verdicts)
      if (v.kind == ConditionVerdict::Kind::Fail)
        return true;
    return false;
  }
};

namespace detail {

/// Growth class of |w|.
inline Growth absolute_growth(const Function &w) {
  Growth g = analyze_growth(w);
  if (g.kind == Growth::Kind::Term && g.coeff < 0)
    g = growth::neg(g);
  return g;
}

/// Natural-point terms are pairwise distinct for every n, and distinct from PF.
inline bool distinct_points(const std::vector<SeqTerm> &terms) {
  for (size_t a = 0; a < terms.size(); ++a)
    for (size_t b = a + 1; b < terms.size(); ++b) {
      if (terms[a].pf != terms[b].pf)
        continue;
      if (terms[a].pf)
        return false;
      auto diff = linear_form(*make_op(Op::Add, {terms[a].point.expr, make_op(Op::Neg, {terms[b].point.expr})}));
      if (diff.size() != 1 || !diff.count("1"))
        return false;
    }
  return true;
}

inline ConditionVerdict trend(const std::vector<std::pair<long, Rational>> &trace, bool to_zero) {
  ConditionVerdict v;
  if (trace.size() < 2) {
    v.reason = "trace too short";
    return v;
  }
  size_t half = trace.size() / 2;
  bool ok = true;
  for (size_t k = half; k < trace.size(); ++k) {
    if (to_zero ? trace[k].second != 0 : (k > half && trace[k].second <= trace[k - 1].second))
      ok = false;
  }
  if (ok) {
    v.kind = ConditionVerdict::Kind::PassAtHorizon;
    v.reason = to_zero ? "zero on the second half of the prefix" : "strictly increasing on the second half of the prefix";
  } else {
    v.reason = "no closed form and the prefix is not conclusive";
  }
  v.value = trace.back().second;
  return v;
}

} // namespace detail

inline ANReport verify_AN(const MeasureSeq &seq, const FilterContext &ctx, long horizon) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  ANReport r;
  r.horizon = horizon;
  auto items = seq.prefix(horizon);
  for (const auto &[n, m] : items) {
    r.norms.emplace_back(n, norm(m));
    r.totals.emplace_back(n, m.total());
  }
  for (const auto &a : ctx.samples) {
    r.sample_names.push_back(a->describe());
    std::vector<std::pair<long, Rational>> tr;
    for (const auto &[n, m] : items)
      tr.emplace_back(n, variation(m, [&](const Point &p) { return !p.pf && !a->contains(p.index); }));
    r.variations.push_back(std::move(tr));
  }

  const auto &terms = seq.terms();
  const bool closed = !terms.empty() && detail::distinct_points(terms);
  using K = ConditionVerdict::Kind;
  // (1) norms -> infinity
  if (closed) {
    Growth total = Growth::zero();
    for (const auto &t : terms)
      total = growth::add(total, detail::absolute_growth(t.weight));
    Limit l = growth::limit(total);
    if (l == Limit::PlusInfinity)
      r.norms_verdict = {K::Pass, std::nullopt, 0, "||mu_n|| ~ " + to_string(total) + " -> inf"};
    else if ((l == Limit::Finite || l == Limit::Zero) && !r.norms.empty())
      r.norms_verdict = {K::Fail, r.norms.back().first, r.norms.back().second,
                         "||mu_n|| ~ " + to_string(total) + " stays bounded"};
    else
      r.norms_verdict = detail::trend(r.norms, false);
  } else {
    r.norms_verdict = detail::trend(r.norms, false);
  }
  // (2) mu_n(N_F) -> 0
  if (!terms.empty()) {
    std::vector<ExprPtr> ws;
    Definitions defs;
    for (const auto &t : terms) {
      ws.push_back(t.weight.expr);
      defs = detail::merged(defs, t.weight.defs());
    }
    Growth total = analyze_growth(make_op(Op::Add, ws), defs);
    Limit l = growth::limit(total);
    if (l == Limit::Zero)
      r.totals_verdict = {K::Pass, std::nullopt, 0, "mu_n(N_F) ~ " + to_string(total) + " -> 0"};
    else if ((l == Limit::Finite || l == Limit::PlusInfinity || l == Limit::MinusInfinity) && !r.totals.empty())
      r.totals_verdict = {K::Fail, r.totals.back().first, r.totals.back().second,
                          "mu_n(N_F) ~ " + to_string(total) + " does not vanish"};
    else
      r.totals_verdict = detail::trend(r.totals, true);
  } else {
    r.totals_verdict = detail::trend(r.totals, true);
  }
  // (3) ||mu_n restricted to omega \ A|| -> 0
  for (size_t s = 0; s < ctx.samples.size(); ++s) {
    const SetSpec &a = *ctx.samples[s];
    ConditionVerdict v;
    bool decided = false;
    if (closed) {
      SetPtr c = sets::complement(ctx.samples[s]);
      auto cfin = c->finite();
      bool all_vanish = true;
      std::optional<std::string> stuck;
      for (const auto &t : terms) {
        if (t.pf)
          continue;
        bool leaves = cfin && *cfin && limit_of(t.point) == Limit::PlusInfinity;
        bool constant_point = !has_variables(*t.point.expr);
        bool weight_vanishes = growth::limit(detail::absolute_growth(t.weight)) == Limit::Zero;
        if (leaves || weight_vanishes)
          continue;
        if (constant_point) {
          BigInt p = t.point.at_int(0L);
          if (!a.contains(p)) {
            stuck = "atom at " + p.get_str() + " outside A with weight " + t.weight.str();
            continue;
          }
          continue; // stays inside A
        }
        all_vanish = false;
      }
      const auto &tr = r.variations[s];
      if (stuck && !tr.empty()) {
        v = {K::Fail, tr.back().first, tr.back().second, *stuck};
        decided = true;
      } else if (all_vanish) {
        v = {K::Pass, std::nullopt, 0, "every atom eventually lies in A or has vanishing weight"};
        decided = true;
      }
    }
    if (!decided)
      v = detail::trend(r.variations[s], true);
    r.variation_verdicts.push_back(v);
  }
  return r;
}

// ---------------------------------------------------------------- disjointify

struct Step1Entry {
  long k, n;
  std::optional<BigInt> a_max; // A_k = [0, a_max], empty when absent
  Rational inside;             // |mu_n|(A_k)
  Rational theta_norm, mu_norm;
};

struct PairEntry {
  long p, q; // Step-1 positions
  Rational alpha;
};

struct DisjointifyLog {
  long horizon = 0;
  bool precondition_passed = false;
  std::vector<long> skipped_zero;
  std::vector<Step1Entry> step1;
  char step2_case = 'a';
  std::string rule;
  std::vector<PairEntry> pairs;
};

struct Disjointified {
  MeasureSeq theta; // Step-1 output, indexed 0..
  MeasureSeq output;
  DisjointifyLog log;
};

namespace detail {

inline FinMeasure outside_prefix(const FinMeasure &m, const std::optional<BigInt> &a_max) {
  if (!a_max)
    return m;
  return restrict(m, [&](const Point &p) { return p.pf || p.index > *a_max; });
}

inline std::vector<FinMeasure> step2_output(const std::vector<FinMeasure> &theta, const std::vector<PairEntry> &pairs) {
  std::vector<FinMeasure> out;
  for (const auto &pr : pairs)
    out.push_back(restrict_omega(combine(1, theta[static_cast<size_t>(pr.p)], -pr.alpha, theta[static_cast<size_t>(pr.q)])));
  return out;
}

} // namespace detail

/// Replays a construction log on the same input sequence.
inline std::vector<FinMeasure> replay_disjointify(const MeasureSeq &seq, const DisjointifyLog &log) {
  std::vector<FinMeasure> theta;
  for (const auto &e : log.step1)
    theta.push_back(detail::outside_prefix(seq.at(e.n), e.a_max));
  return detail::step2_output(theta, log.pairs);
}

inline Disjointified disjointify(const MeasureSeq &seq, const FilterContext &ctx, long horizon,
                                 std::optional<long> steps = std::nullopt) {
  ANReport pre = verify_AN(seq, ctx, horizon);
  if (pre.fails())
    throw Error("ValidationError", "input is not an AN-sequence at the horizon");
  Disjointified d;
  DisjointifyLog &log = d.log;
  log.horizon = horizon;
  log.precondition_passed = pre.passes();

  // Step 1
  std::vector<FinMeasure> theta;
  std::optional<BigInt> a_max;
  long n = seq.first();
  for (long k = 0; seq.has(n) && n <= horizon; ++k) {
    Rational bound = k == 0 ? Rational(0) : make_rational(1, k);
    std::optional<long> found;
    for (; seq.has(n) && n <= horizon; ++n) {
      FinMeasure m = seq.at(n);
      if (m.empty()) {
        log.skipped_zero.push_back(n);
        continue;
      }
      Rational inside = a_max ? variation(m, [&](const Point &p) { return !p.pf && p.index <= *a_max; }) : Rational(0);
      if (k == 0 || inside < bound) {
        found = n;
        FinMeasure t = detail::outside_prefix(m, a_max);
        log.step1.push_back({k, n, a_max, inside, norm(t), norm(m)});
        theta.push_back(std::move(t));
        if (auto mx = m.max_index(); mx && (!a_max || *mx > *a_max))
          a_max = mx;
        ++n;
        break;
      }
    }
    if (!found)
      break;
    if (steps && static_cast<long>(theta.size()) >= *steps)
      break;
  }
  if (theta.empty() || (steps && static_cast<long>(theta.size()) < *steps))
    throw Error("HorizonExhausted", "Step 1 reached k = " + std::to_string(theta.size()) + " below horizon " +
                                        std::to_string(horizon));

  // Step 2: case b when |theta_k(PF)| increases strictly along the selection
  std::vector<Rational> pf;
  for (const auto &t : theta)
    pf.push_back(t.weight(Point::PF()));
  bool increasing = pf.size() >= 2;
  for (size_t k = 1; k < pf.size(); ++k)
    if (!(abs(pf[k]) > abs(pf[k - 1])))
      increasing = false;
  if (increasing) {
    log.step2_case = 'b';
    log.rule = "|theta_k(PF)| strictly increases over all " + std::to_string(pf.size()) +
               " selections up to the horizon: case b with alpha = theta_2j(PF)/theta_2j+1(PF)";
    for (size_t j = 0; 2 * j + 1 < theta.size(); ++j)
      log.pairs.push_back({static_cast<long>(2 * j), static_cast<long>(2 * j + 1), pf[2 * j] / pf[2 * j + 1]});
  } else {
    log.step2_case = 'a';
    std::vector<Rational> sorted;
    for (const auto &v : pf)
      sorted.push_back(abs(v));
    std::sort(sorted.begin(), sorted.end());
    Rational bound = sorted[sorted.size() / 2];
    std::vector<long> bounded;
    for (size_t k = 0; k < pf.size(); ++k)
      if (abs(pf[k]) <= bound)
        bounded.push_back(static_cast<long>(k));
    log.rule = "PF masses bounded by their median " + to_string(bound) + " on " + std::to_string(bounded.size()) +
               " selections: case a, pairs are the earliest indices with gap < 1/(j+1)";
    size_t from = 0;
    for (long j = 0;; ++j) {
      Rational gap = make_rational(1, j + 1);
      std::optional<std::pair<long, long>> pick;
      for (size_t b = from + 1; b < bounded.size() && !pick; ++b)
        for (size_t a = from; a < b && !pick; ++a)
          if (abs(pf[static_cast<size_t>(bounded[a])] - pf[static_cast<size_t>(bounded[b])]) < gap) {
            pick = {bounded[a], bounded[b]};
            from = b + 1;
          }
      if (!pick)
        break;
      log.pairs.push_back({pick->first, pick->second, 1});
    }
  }
  d.theta = MeasureSeq::from_list(theta, 0);
  d.output = MeasureSeq::from_list(detail::step2_output(theta, log.pairs), 0);
  return d;
}

// ---------------------------------------------------------------- positive <-> signed

inline MeasureSeq positive_to_AN(const MeasureSeq &seq, long horizon) {
  auto convert = [](const FinMeasure &m) {
    if (m.charges_pf())
      throw Error("HasPFAtom", "positive measures must live on omega");
    if (!m.nonnegative())
      throw Error("ValidationError", "measure has a negative atom");
    FinMeasure out = scale(m, -1);
    out.add(Point::PF(), m.total());
    return out;
  };
  if (!seq.terms().empty()) {
    std::vector<ExprPtr> ws;
    Definitions defs;
    std::string text;
    for (const auto &t : seq.terms()) {
      if (t.pf)
        throw Error("HasPFAtom", "descriptor charges PF");
      ws.push_back(t.weight.expr);
      defs = detail::merged(defs, t.weight.defs());
    }
    text = "PF=" + to_string(ws.size() == 1 ? ws[0] : make_op(Op::Add, ws));
    for (const auto &t : seq.terms())
      text += "; " + t.point.str() + "=" + to_string(make_op(Op::Neg, {t.weight.expr}));
    MeasureSeq out = MeasureSeq::from_descriptor(text, seq.first(), defs);
    for (const auto &[n, m] : seq.prefix(horizon))
      convert(m); // validates the prefix
    return out;
  }
  std::vector<FinMeasure> items;
  for (const auto &[n, m] : seq.prefix(horizon))
    items.push_back(convert(m));
  return MeasureSeq::from_list(std::move(items), seq.first());
}

struct PositiveResult {
  MeasureSeq positives;
  Disjointified construction;
};

inline PositiveResult AN_to_positive(const MeasureSeq &seq, const FilterContext &ctx, long horizon) {
  PositiveResult r;
  r.construction = disjointify(seq, ctx, horizon);
  std::vector<FinMeasure> items;
  const MeasureSeq &out = r.construction.output;
  for (long k = 0; out.has(k); ++k)
    items.push_back(absolute(out.at(k)));
  r.positives = MeasureSeq::from_list(std::move(items), 0);
  return r;
}

struct DensityExtraction {
  std::shared_ptr<const BlockGenerator> generator;
  SubmeasurePtr phi;
  std::vector<long> kept; // positions of the positive sequence used as blocks
  std::vector<std::pair<std::string, Membership>> probe; // complement of each sample in Exh(phi)
  bool probe_passes = true;
  UnboundednessResult unbounded;
  PositiveResult positive;
};

inline DensityExtraction AN_to_density(const MeasureSeq &seq, const FilterContext &ctx, long horizon,
                                       const MembershipOptions &opt = {}) {
  DensityExtraction d;
  d.positive = AN_to_positive(seq, ctx, horizon);
  std::vector<FinMeasure> blocks;
  std::optional<BigInt> last_max;
  const MeasureSeq &pos = d.positive.positives;
  for (long k = 0; pos.has(k); ++k) {
    FinMeasure m = pos.at(k);
    if (m.empty())
      continue;
    if (last_max && *m.min_index() <= *last_max)
      continue;
    last_max = m.max_index();
    d.kept.push_back(k);
    blocks.push_back(std::move(m));
  }
  if (blocks.empty())
    throw Error("AllZeroPrefix", "no non-zero positive measure below the horizon");
  auto gen = std::make_shared<BlockGenerator>(BlockGenerator::table(blocks, 1));
  d.generator = gen;
  d.phi = submeasures::density(gen);
  IdealPtr ideal = ideals::exh(d.phi);
  for (const auto &a : ctx.samples) {
    Membership m = membership(*ideal, *sets::complement(a), opt);
    d.probe_passes = d.probe_passes && m.verdict == Membership::Verdict::In;
    d.probe.emplace_back(a->describe(), std::move(m));
  }
  Rational top = 0;
  for (const auto &b : blocks)
    top = std::max(top, norm(b));
  d.unbounded = unboundedness_check(*d.phi, top / 2, *blocks.back().max_index());
  return d;
}

// ---------------------------------------------------------------- submeasure -> AN

struct IntervalStep {
  long k;
  BigInt lo, hi; // [lo, hi]
  Rational phi_value;
  std::optional<long> block; // density: block whose restriction is mu_k
  Rational mass;
};

struct SubmeasureAN {
  std::vector<IntervalStep> steps;
  MeasureSeq seq;
  bool truncated = false;
  std::string log;
};

inline SubmeasureAN submeasure_to_AN(const SubmeasureSpec &phi, long horizon, unsigned long interval_limit = 1u << 16) {
  using K = SubmeasureSpec::Kind;
  if (phi.kind != K::Density && phi.kind != K::AsymptoticDensity && phi.kind != K::Summable)
    throw Error("ValidationError", "submeasure_to_AN needs a density or summable submeasure");
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  SubmeasureAN out;
  std::vector<FinMeasure> items;
  BigInt lo = 0;
  for (long k = 0; k < horizon; ++k) {
    Rational bound(k + 2);
    std::optional<BigInt> m = least_exceeding(phi, lo, bound, SearchLimits{});
    if (!m) {
      if (k == 0)
        throw Error("BoundedSubmeasure", "no interval [0, m] has phi > " + to_string(bound) + " within the search budget");
      out.truncated = true;
      out.log += "step " + std::to_string(k) + ": no interval from " + lo.get_str() + " exceeds " + to_string(bound) +
                 " within the search budget; output truncated\n";
      break;
    }
    IntervalStep st{k, lo, *m, eval_interval(phi, lo, *m), std::nullopt, 0};
    FinMeasure mu;
    if (phi.kind == K::Summable) {
      if (*m - lo + 1 > BigInt(interval_limit)) {
        out.truncated = true;
        out.log += "step " + std::to_string(k) + ": interval too long to materialize; output truncated\n";
        break;
      }
      for (BigInt x = lo; x <= *m; ++x)
        mu.add(Point(x), summable_weight_at(phi.weight, x));
    } else {
      IntervalList iv = IntervalList::single(lo, *m + 1);
      long best = -1;
      Rational best_v = -1;
      for (long n : phi.gen->blocks_meeting(lo, *m + 1)) {
        Rational v = phi.gen->mass(n, iv);
        if (v > best_v) {
          best_v = v;
          best = n;
        }
      }
      st.block = best;
      BigInt s = std::max(lo, phi.gen->start(best)), e = std::min(BigInt(*m + 1), phi.gen->end(best));
      if (e - s > BigInt(interval_limit)) {
        out.truncated = true;
        out.log += "step " + std::to_string(k) + ": block restriction too large to materialize; output truncated\n";
        break;
      }
      for (BigInt x = s; x < e; ++x)
        mu.add(Point(x), phi.gen->weight(best, x - phi.gen->start(best)));
    }
    st.mass = mu.total();
    out.log += "step " + std::to_string(k) + ": [" + lo.get_str() + ", " + m->get_str() + "] phi = " +
               to_string(st.phi_value) + " > " + to_string(bound) + ", mass " + to_string(st.mass) + "\n";
    out.steps.push_back(st);
    items.push_back(std::move(mu));
    lo = *m + 1;
  }
  out.seq = MeasureSeq::from_list(std::move(items), 0);
  return out;
}

// ---------------------------------------------------------------- normalization

struct Normalized {
  MeasureSeq seq;
  std::vector<long> source_index; // original index of each output element
};

inline Normalized bjn_normalize(const MeasureSeq &seq, long horizon) {
  Normalized out;
  std::vector<FinMeasure> items;
  for (const auto &[n, m] : seq.prefix(horizon)) {
    if (m.empty())
      continue;
    items.push_back(scale(m, Rational(1) / norm(m)));
    out.source_index.push_back(n);
  }
  if (items.empty())
    throw Error("AllZeroPrefix", "every element up to the horizon is zero");
  out.seq = MeasureSeq::from_list(std::move(items), 0);
  return out;
}

} // namespace nikodym
