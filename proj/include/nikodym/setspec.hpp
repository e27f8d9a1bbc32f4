#pragma once

// Symbolic subsets of omega (optionally with PF, for clopen sets of N_F).

#include "nikodym/generator.hpp"

namespace nikodym {

struct SetSpec;
using SetPtr = std::shared_ptr<const SetSpec>;

struct SetSpec {
  enum class Kind { Finite, IntervalUnion, IntervalRule, BlockSelect, Complement, Union, Intersect };
  enum class Mode { First, Last };

  Kind kind = Kind::Finite;
  bool pf = false;
  IntervalList intervals;      // Finite, IntervalUnion
  Function lo, len;            // IntervalRule: k-th interval [lo(k), lo(k) + len(k)), k >= from
  std::shared_ptr<const BlockGenerator> gen; // BlockSelect
  Function count;              // BlockSelect: min(count(n), length(n)) points of block n
  Mode mode = Mode::First;
  long from = 0;               // IntervalRule, BlockSelect
  std::vector<SetPtr> children;

  bool contains(const BigInt &x) const;
  bool contains(const Point &p) const { return p.pf ? pf : contains(p.index); }

  /// Members inside [a, b) as interval pieces.
  IntervalList pieces(const BigInt &a, const BigInt &b) const;

  /// true/false when finiteness is certified, nullopt otherwise.
  std::optional<bool> finite() const;

  std::string describe() const;

  // interval_rule helpers
  BigInt rule_lo(long k) const { return lo.at_int(Rational(k)); }
  BigInt rule_len(long k) const {
    BigInt v = floor(len(Rational(k)));
    return v < 0 ? BigInt(0) : v;
  }
  BigInt select_count(long n) const {
    BigInt c = floor(count(Rational(n)));
    if (c < 0)
      c = 0;
    BigInt l = gen->length(n);
    return c < l ? c : l;
  }
  /// The selected interval of block n for BlockSelect.
  Interval selected(long n) const {
    BigInt c = select_count(n);
    if (mode == Mode::First) {
      BigInt s = gen->start(n);
      return {s, s + c};
    }
    BigInt e = gen->end(n);
    return {e - c, e};
  }
  /// Largest rule index k >= from with lo(k) <= x, or nullopt.
  std::optional<long> rule_index_at_most(const BigInt &x) const;
};

namespace sets {

inline SetPtr finite(std::vector<BigInt> points, bool pf = false) {
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::Finite;
  s->intervals = IntervalList::from_points(std::move(points));
  s->pf = pf;
  return s;
}

inline SetPtr empty() { return finite({}); }

inline SetPtr interval_union(std::vector<std::pair<BigInt, BigInt>> ivs, bool pf = false) {
  std::sort(ivs.begin(), ivs.end());
  IntervalList acc;
  for (const auto &[a, b] : ivs) {
    if (b < a)
      throw Error("ValidationError", "interval [" + a.get_str() + ", " + b.get_str() + ") is reversed");
    acc = IntervalList::unite(acc, IntervalList::single(a, b));
  }
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::IntervalUnion;
  s->intervals = acc;
  s->pf = pf;
  return s;
}

inline SetPtr interval_rule(Function lo, Function len, long from, bool pf = false) {
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::IntervalRule;
  s->lo = std::move(lo);
  s->len = std::move(len);
  s->from = from;
  s->pf = pf;
  return s;
}

inline SetPtr block_select(std::shared_ptr<const BlockGenerator> gen, Function count, SetSpec::Mode mode,
                           std::optional<long> from = {}, bool pf = false) {
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::BlockSelect;
  s->from = from ? std::max(*from, gen->first_index()) : gen->first_index();
  s->gen = std::move(gen);
  s->count = std::move(count);
  s->mode = mode;
  s->pf = pf;
  return s;
}

inline SetPtr complement(SetPtr x) {
  if (x->kind == SetSpec::Kind::Complement)
    return x->children[0];
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::Complement;
  s->pf = !x->pf;
  s->children = {std::move(x)};
  return s;
}

inline SetPtr unite(SetPtr a, SetPtr b) {
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::Union;
  s->pf = a->pf || b->pf;
  s->children = {std::move(a), std::move(b)};
  return s;
}

inline SetPtr intersect(SetPtr a, SetPtr b) {
  auto s = std::make_shared<SetSpec>();
  s->kind = SetSpec::Kind::Intersect;
  s->pf = a->pf && b->pf;
  s->children = {std::move(a), std::move(b)};
  return s;
}

/// The whole of omega (with PF when `pf`).
inline SetPtr everything(bool pf = true) {
  auto s = complement(empty());
  if (!pf) {
    auto copy = std::make_shared<SetSpec>(*s);
    copy->pf = false;
    return copy;
  }
  return s;
}

inline SetPtr with_pf(const SetPtr &x, bool pf) {
  auto copy = std::make_shared<SetSpec>(*x);
  copy->pf = pf;
  return copy;
}

} // namespace sets

inline std::optional<long> SetSpec::rule_index_at_most(const BigInt &x) const {
  if (rule_lo(from) > x)
    return std::nullopt;
  long step = 1, lo_k = from, hi_k;
  for (;;) {
    long probe = from + step;
    if (rule_lo(probe) > x) {
      hi_k = probe;
      break;
    }
    lo_k = probe;
    if (step > (1L << 40))
      throw Error("ValueTooLarge", "interval rule search past 2^40 intervals");
    step *= 2;
  }
  while (hi_k - lo_k > 1) {
    long mid = lo_k + (hi_k - lo_k) / 2;
    if (rule_lo(mid) <= x)
      lo_k = mid;
    else
      hi_k = mid;
  }
  return lo_k;
}

inline bool SetSpec::contains(const BigInt &x) const {
  if (x < 0)
    return false;
  switch (kind) {
  case Kind::Finite:
  case Kind::IntervalUnion:
    return intervals.contains(x);
  case Kind::IntervalRule: {
    auto k = rule_index_at_most(x);
    return k && x < rule_lo(*k) + rule_len(*k);
  }
  case Kind::BlockSelect: {
    auto n = gen->index_of(x);
    if (!n || *n < from)
      return false;
    return selected(*n).contains(x);
  }
  case Kind::Complement:
    return !children[0]->contains(x);
  case Kind::Union:
    return children[0]->contains(x) || children[1]->contains(x);
  case Kind::Intersect:
    return children[0]->contains(x) && children[1]->contains(x);
  }
  return false;
}

inline IntervalList SetSpec::pieces(const BigInt &a, const BigInt &b) const {
  BigInt lo_b = a < 0 ? BigInt(0) : a;
  if (b <= lo_b)
    return {};
  switch (kind) {
  case Kind::Finite:
  case Kind::IntervalUnion:
    return intervals.clip(lo_b, b);
  case Kind::IntervalRule: {
    IntervalList out;
    auto start = rule_index_at_most(lo_b);
    long k = start ? *start : from;
    BigInt prev_end = -1;
    for (;; ++k) {
      BigInt l = rule_lo(k);
      if (l >= b)
        break;
      if (l < prev_end)
        throw Error("ValidationError", "interval rule pieces overlap at k = " + std::to_string(k));
      BigInt e = l + rule_len(k);
      prev_end = e;
      BigInt pl = l < lo_b ? lo_b : l;
      BigInt pe = e > b ? b : e;
      if (pl < pe)
        out.push(pl, pe);
    }
    return out;
  }
  case Kind::BlockSelect: {
    IntervalList out;
    for (long n : gen->blocks_meeting(lo_b, b)) {
      if (n < from)
        continue;
      Interval iv = selected(n);
      BigInt pl = iv.lo < lo_b ? lo_b : iv.lo;
      BigInt pe = iv.hi > b ? b : iv.hi;
      if (pl < pe)
        out.push(pl, pe);
    }
    return out;
  }
  case Kind::Complement:
    return children[0]->pieces(lo_b, b).complement(lo_b, b);
  case Kind::Union:
    return IntervalList::unite(children[0]->pieces(lo_b, b), children[1]->pieces(lo_b, b));
  case Kind::Intersect:
    return IntervalList::intersect(children[0]->pieces(lo_b, b), children[1]->pieces(lo_b, b));
  }
  return {};
}

namespace sets {

// eventually >= 1 (true), eventually 0 (false), or unknown, for an integer-valued expression
inline std::optional<bool> eventually_positive(const Function &f) {
  Growth g = analyze_growth(f);
  switch (growth::limit(g)) {
  case Limit::Zero:
    return false;
  case Limit::PlusInfinity:
    return true;
  case Limit::Finite:
    return g.coeff > 0 ? std::optional<bool>(true) : std::nullopt;
  default:
    return std::nullopt;
  }
}

} // namespace sets

inline std::optional<bool> SetSpec::finite() const {
  switch (kind) {
  case Kind::Finite:
  case Kind::IntervalUnion:
    return true;
  case Kind::IntervalRule: {
    auto pos = sets::eventually_positive(Function(make_op(Op::Floor, {len.expr}), len.defs()));
    if (!pos)
      return std::nullopt;
    return !*pos;
  }
  case Kind::BlockSelect: {
    if (gen->last_index())
      return true;
    auto pos = sets::eventually_positive(Function(make_op(Op::Floor, {count.expr}), count.defs()));
    if (!pos)
      return std::nullopt;
    return !*pos;
  }
  case Kind::Complement: {
    auto f = children[0]->finite();
    if (f && *f)
      return false;
    return std::nullopt;
  }
  case Kind::Union: {
    auto a = children[0]->finite(), b = children[1]->finite();
    if ((a && !*a) || (b && !*b))
      return false;
    if (a && b)
      return true;
    return std::nullopt;
  }
  case Kind::Intersect: {
    auto a = children[0]->finite(), b = children[1]->finite();
    if ((a && *a) || (b && *b))
      return true;
    return std::nullopt;
  }
  }
  return std::nullopt;
}

inline std::string SetSpec::describe() const {
  std::string tail = pf ? " + PF" : "";
  switch (kind) {
  case Kind::Finite: {
    std::string out = "{";
    bool first = true;
    for (const auto &x : intervals.points()) {
      out += first ? "" : ",";
      out += x.get_str();
      first = false;
    }
    return out + "}" + tail;
  }
  case Kind::IntervalUnion: {
    std::string out;
    for (const auto &iv : intervals.pieces())
      out += (out.empty() ? "" : " u ") + ("[" + iv.lo.get_str() + "," + iv.hi.get_str() + ")");
    return (out.empty() ? "{}" : out) + tail;
  }
  case Kind::IntervalRule:
    return "U_{k>=" + std::to_string(from) + "} [" + lo.str() + ", +" + len.str() + ")" + tail;
  case Kind::BlockSelect:
    return std::string(mode == Mode::First ? "first " : "last ") + count.str() + " of each block of " +
           gen->label() + " from " + std::to_string(from) + tail;
  case Kind::Complement:
    return "complement(" + children[0]->describe() + ")" + (pf ? " with PF" : "");
  case Kind::Union:
    return "(" + children[0]->describe() + ") u (" + children[1]->describe() + ")";
  case Kind::Intersect:
    return "(" + children[0]->describe() + ") n (" + children[1]->describe() + ")";
  }
  return "?";
}

/// |m|(S) and m restricted to S for a symbolic set.
inline Rational variation(const FinMeasure &m, const SetSpec &s) {
  return variation(m, [&](const Point &p) { return s.contains(p); });
}

inline FinMeasure restrict(const FinMeasure &m, const SetSpec &s) {
  return restrict(m, [&](const Point &p) { return s.contains(p); });
}

} // namespace nikodym
