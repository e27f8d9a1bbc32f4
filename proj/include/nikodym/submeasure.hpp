#pragma once

// Symbolic lsc submeasures, their exhaustive ideals, exact evaluation, and the
// three-valued membership oracle.

#include "nikodym/lp.hpp"
#include "nikodym/setspec.hpp"

#include <functional>

namespace nikodym {

/// A submeasure on a finite ground set given by all of its values.
/// Bit k of a mask stands for ground[k].
class FiniteTable {
public:
  static constexpr size_t kMaxGround = 12;

  FiniteTable(std::vector<BigInt> ground, std::vector<Rational> values)
      : ground_(std::move(ground)), values_(std::move(values)) {
    if (!std::is_sorted(ground_.begin(), ground_.end()) ||
        std::adjacent_find(ground_.begin(), ground_.end()) != ground_.end())
      throw Error("ValidationError", "ground set must be strictly increasing");
    if (ground_.size() > kMaxGround)
      throw Error("GroundTooLarge", "ground has " + std::to_string(ground_.size()) + " points, limit " +
                                        std::to_string(kMaxGround));
    if (values_.size() != (size_t(1) << ground_.size()))
      throw Error("ValidationError", "expected " + std::to_string(size_t(1) << ground_.size()) + " values");
    validate();
  }

  /// Tabulates phi on every subset of `ground`.
  static FiniteTable tabulate(std::vector<BigInt> ground, const std::function<Rational(const std::vector<BigInt> &)> &phi) {
    std::sort(ground.begin(), ground.end());
    if (ground.size() > kMaxGround)
      throw Error("GroundTooLarge", "ground has " + std::to_string(ground.size()) + " points");
    std::vector<Rational> values(size_t(1) << ground.size());
    for (size_t mask = 0; mask < values.size(); ++mask) {
      std::vector<BigInt> s;
      for (size_t k = 0; k < ground.size(); ++k)
        if (mask >> k & 1)
          s.push_back(ground[k]);
      values[mask] = phi(s);
    }
    return FiniteTable(std::move(ground), std::move(values));
  }

  const std::vector<BigInt> &ground() const { return ground_; }
  const std::vector<Rational> &values() const { return values_; }
  size_t size() const { return ground_.size(); }
  const Rational &value(size_t mask) const { return values_.at(mask); }

  size_t mask_of(const std::vector<BigInt> &set) const {
    size_t mask = 0;
    for (const auto &x : set) {
      auto it = std::lower_bound(ground_.begin(), ground_.end(), x);
      if (it == ground_.end() || *it != x)
        throw Error("OutOfGround", x.get_str() + " is not in the ground set");
      mask |= size_t(1) << (it - ground_.begin());
    }
    return mask;
  }

private:
  std::vector<BigInt> ground_;
  std::vector<Rational> values_;

  void validate() const {
    const size_t full = values_.size() - 1;
    if (values_[0] != 0)
      throw Error("ValidationError", "value of the empty set must be 0");
    for (size_t mask = 0; mask <= full; ++mask)
      for (size_t k = 0; k < ground_.size(); ++k)
        if (!(mask >> k & 1) && values_[mask] > values_[mask | (size_t(1) << k)])
          throw Error("ValidationError", "table is not monotone at mask " + std::to_string(mask));
    // monotone + subadditive on disjoint pairs gives subadditivity everywhere
    for (size_t x = 1; x <= full; ++x) {
      size_t rest = full & ~x;
      for (size_t y = rest; y > 0; y = (y - 1) & rest)
        if (y > x && values_[x | y] > values_[x] + values_[y])
          throw Error("ValidationError", "table is not subadditive at masks " + std::to_string(x) + ", " +
                                             std::to_string(y));
    }
  }
};

struct SubmeasureSpec;
using SubmeasurePtr = std::shared_ptr<const SubmeasureSpec>;

struct SubmeasureSpec {
  enum class Kind { Density, Summable, AsymptoticDensity, MaxMerge, FiniteTable };
  Kind kind = Kind::Density;
  std::shared_ptr<const BlockGenerator> gen; // Density, AsymptoticDensity
  Function weight;                           // Summable
  SubmeasurePtr left, right;                 // MaxMerge
  std::shared_ptr<const nikodym::FiniteTable> table;

  std::string describe() const {
    switch (kind) {
    case Kind::Density: return "density(" + gen->label() + ")";
    case Kind::Summable: return "summable(" + weight.str() + ")";
    case Kind::AsymptoticDensity: return "asymptotic_density";
    case Kind::MaxMerge: return "max(" + left->describe() + ", " + right->describe() + ")";
    case Kind::FiniteTable: return "finite_table(" + std::to_string(table->size()) + " points)";
    }
    return "?";
  }
};

namespace submeasures {

inline SubmeasurePtr density(std::shared_ptr<const BlockGenerator> gen) {
  auto s = std::make_shared<SubmeasureSpec>();
  s->kind = SubmeasureSpec::Kind::Density;
  s->gen = std::move(gen);
  return s;
}

inline SubmeasurePtr asymptotic_density() {
  auto s = std::make_shared<SubmeasureSpec>();
  s->kind = SubmeasureSpec::Kind::AsymptoticDensity;
  s->gen = std::make_shared<BlockGenerator>(BlockGenerator::asymptotic_density());
  return s;
}

inline SubmeasurePtr summable(Function f) {
  auto s = std::make_shared<SubmeasureSpec>();
  s->kind = SubmeasureSpec::Kind::Summable;
  s->weight = std::move(f);
  return s;
}

inline SubmeasurePtr max_merge(SubmeasurePtr a, SubmeasurePtr b) {
  auto s = std::make_shared<SubmeasureSpec>();
  s->kind = SubmeasureSpec::Kind::MaxMerge;
  s->left = std::move(a);
  s->right = std::move(b);
  return s;
}

inline SubmeasurePtr finite_table(FiniteTable t) {
  auto s = std::make_shared<SubmeasureSpec>();
  s->kind = SubmeasureSpec::Kind::FiniteTable;
  s->table = std::make_shared<const FiniteTable>(std::move(t));
  return s;
}

} // namespace submeasures

struct IdealSpec;
using IdealPtr = std::shared_ptr<const IdealSpec>;

struct IdealSpec {
  enum class Kind { Exh, Phi, SimpleDensity, Summable, Fin };
  Kind kind = Kind::Exh;
  SubmeasurePtr phi; // Exh
  Function f;        // Phi, SimpleDensity, Summable
  std::shared_ptr<const BlockGenerator> gen; // cached block structure

  /// Block generator when the ideal is a density ideal given by blocks.
  const BlockGenerator *generator() const { return gen.get(); }

  /// The weight f when the ideal is a summable ideal.
  std::optional<Function> summable_weight() const {
    if (kind == Kind::Summable)
      return f;
    if (kind == Kind::Exh && phi->kind == SubmeasureSpec::Kind::Summable)
      return phi->weight;
    return std::nullopt;
  }

  /// The submeasure whose Exh this ideal is (Fin has none).
  SubmeasurePtr submeasure() const {
    switch (kind) {
    case Kind::Exh: return phi;
    case Kind::Phi:
    case Kind::SimpleDensity: return submeasures::density(gen);
    case Kind::Summable: return submeasures::summable(f);
    case Kind::Fin: return nullptr;
    }
    return nullptr;
  }

  std::string describe() const {
    switch (kind) {
    case Kind::Exh: return "Exh(" + phi->describe() + ")";
    case Kind::Phi: return "Phi(" + f.str() + ")";
    case Kind::SimpleDensity: return "Z_g for f = " + f.str();
    case Kind::Summable: return "I_f for f = " + f.str();
    case Kind::Fin: return "Fin";
    }
    return "?";
  }
};

namespace ideals {

inline IdealPtr exh(SubmeasurePtr phi) {
  auto s = std::make_shared<IdealSpec>();
  s->kind = IdealSpec::Kind::Exh;
  if (phi->kind == SubmeasureSpec::Kind::Density || phi->kind == SubmeasureSpec::Kind::AsymptoticDensity)
    s->gen = phi->gen;
  s->phi = std::move(phi);
  return s;
}

inline IdealPtr phi(Function f) {
  auto s = std::make_shared<IdealSpec>();
  s->kind = IdealSpec::Kind::Phi;
  s->gen = std::make_shared<BlockGenerator>(BlockGenerator::phi(f));
  s->f = std::move(f);
  return s;
}

/// Z_g for the block step function g of f; realized through the Phi(f) blocks.
inline IdealPtr simple_density(Function f) {
  auto s = std::make_shared<IdealSpec>();
  s->kind = IdealSpec::Kind::SimpleDensity;
  s->gen = std::make_shared<BlockGenerator>(BlockGenerator::phi(f));
  s->f = std::move(f);
  return s;
}

inline IdealPtr summable(Function f) {
  auto s = std::make_shared<IdealSpec>();
  s->kind = IdealSpec::Kind::Summable;
  s->f = std::move(f);
  return s;
}

inline IdealPtr fin() {
  auto s = std::make_shared<IdealSpec>();
  s->kind = IdealSpec::Kind::Fin;
  return s;
}

inline IdealPtr asymptotic_density() { return exh(submeasures::asymptotic_density()); }

} // namespace ideals

// ---------------------------------------------------------------- evaluation

inline Rational summable_weight_at(const Function &f, const BigInt &x) {
  Rational w = f(x);
  if (w < 0)
    throw Error("ValidationError", "summable weight is negative at " + x.get_str());
  return w;
}

inline Rational eval_submeasure(const SubmeasureSpec &phi, std::vector<BigInt> a) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  switch (phi.kind) {
  case SubmeasureSpec::Kind::Density:
  case SubmeasureSpec::Kind::AsymptoticDensity: {
    std::map<long, std::vector<BigInt>> by_block;
    for (const auto &x : a)
      if (auto n = phi.gen->index_of(x))
        by_block[*n].push_back(x);
    Rational best = 0;
    for (const auto &[n, pts] : by_block) {
      Rational v = phi.gen->mass(n, IntervalList::from_points(pts));
      if (v > best)
        best = v;
    }
    return best;
  }
  case SubmeasureSpec::Kind::Summable: {
    Rational s = 0;
    for (const auto &x : a)
      s += summable_weight_at(phi.weight, x);
    return s;
  }
  case SubmeasureSpec::Kind::MaxMerge: {
    Rational l = eval_submeasure(*phi.left, a), r = eval_submeasure(*phi.right, a);
    return l > r ? l : r;
  }
  case SubmeasureSpec::Kind::FiniteTable:
    return phi.table->value(phi.table->mask_of(a));
  }
  return 0;
}

/// phi([a, b]) for a closed interval of naturals.
inline Rational eval_interval(const SubmeasureSpec &phi, const BigInt &a, const BigInt &b,
                              unsigned long point_limit = 1u << 16) {
  if (b < a)
    return 0;
  switch (phi.kind) {
  case SubmeasureSpec::Kind::Density:
  case SubmeasureSpec::Kind::AsymptoticDensity: {
    IntervalList iv = IntervalList::single(a, b + 1);
    Rational best = 0;
    for (long n : phi.gen->blocks_meeting(a, b + 1)) {
      Rational v = phi.gen->mass(n, iv);
      if (v > best)
        best = v;
    }
    return best;
  }
  case SubmeasureSpec::Kind::Summable: {
    if (b - a + 1 > BigInt(point_limit))
      throw Error("ValueTooLarge", "summable interval too long to sum exactly");
    Rational s = 0;
    for (BigInt x = a; x <= b; ++x)
      s += summable_weight_at(phi.weight, x);
    return s;
  }
  case SubmeasureSpec::Kind::MaxMerge: {
    Rational l = eval_interval(*phi.left, a, b, point_limit), r = eval_interval(*phi.right, a, b, point_limit);
    return l > r ? l : r;
  }
  case SubmeasureSpec::Kind::FiniteTable: {
    std::vector<BigInt> in;
    for (const auto &x : phi.table->ground())
      if (a <= x && x <= b)
        in.push_back(x);
    return phi.table->value(phi.table->mask_of(in));
  }
  }
  return 0;
}

struct SearchLimits {
  BigInt point_limit = BigInt(1) << 64; // largest m considered
  unsigned long summable_budget = 4096; // points summed per search for summable weights
  unsigned long block_budget = 1u << 16;
};

/// Least m >= from with phi([from, m]) > bound, searching m <= limits.point_limit.
inline std::optional<BigInt> least_exceeding(const SubmeasureSpec &phi, const BigInt &from, const Rational &bound,
                                             const SearchLimits &limits = {}) {
  switch (phi.kind) {
  case SubmeasureSpec::Kind::Density:
  case SubmeasureSpec::Kind::AsymptoticDensity: {
    const BlockGenerator &g = *phi.gen;
    long n;
    if (auto k = g.index_of(from)) {
      n = *k;
    } else {
      n = g.first_index();
      while (g.has_block(n) && g.end(n) <= from)
        ++n;
    }
    for (unsigned long steps = 0; g.has_block(n) && steps < limits.block_budget; ++n, ++steps) {
      BigInt s = g.start(n);
      if (s > limits.point_limit)
        return std::nullopt;
      BigInt lo = s < from ? from : s;
      BigInt e = g.end(n);
      if (g.mass(n, IntervalList::single(lo, e)) <= bound)
        continue;
      BigInt m;
      if (g.uniform()) {
        Rational w = g.uniform_weight(n);
        BigInt c = floor(bound / w) + 1;
        m = lo + c - 1;
      } else {
        Rational acc = 0;
        for (const auto &x : IntervalList::single(lo, e).points()) {
          acc += g.mass(n, IntervalList::single(x, x + 1));
          if (acc > bound) {
            m = x;
            break;
          }
        }
      }
      if (m > limits.point_limit)
        return std::nullopt;
      return m;
    }
    return std::nullopt;
  }
  case SubmeasureSpec::Kind::Summable: {
    Rational acc = 0;
    unsigned long steps = 0;
    for (BigInt x = from; x <= limits.point_limit && steps < limits.summable_budget; ++x, ++steps) {
      acc += summable_weight_at(phi.weight, x);
      if (acc > bound)
        return x;
    }
    return std::nullopt;
  }
  case SubmeasureSpec::Kind::MaxMerge: {
    auto l = least_exceeding(*phi.left, from, bound, limits);
    auto r = least_exceeding(*phi.right, from, bound, limits);
    if (l && r)
      return *l < *r ? *l : *r;
    return l ? l : r;
  }
  case SubmeasureSpec::Kind::FiniteTable: {
    for (const auto &x : phi.table->ground())
      if (x >= from && x <= limits.point_limit && eval_interval(phi, from, x) > bound)
        return x;
    return std::nullopt;
  }
  }
  return std::nullopt;
}

struct UnboundednessResult {
  bool found = false;
  BigInt m;       // prefix [0, m]
  Rational value; // phi([0, m])
  BigInt horizon;
};

/// Least prefix [0, m] with m <= horizon and phi([0, m]) > bound.
inline UnboundednessResult unboundedness_check(const SubmeasureSpec &phi, const Rational &bound, const BigInt &horizon) {
  if (bound < 0)
    throw Error("ValidationError", "bound must be non-negative");
  SearchLimits limits;
  limits.point_limit = horizon;
  UnboundednessResult r;
  r.horizon = horizon;
  if (auto m = least_exceeding(phi, 0, bound, limits)) {
    r.found = true;
    r.m = *m;
    r.value = eval_interval(phi, 0, *m);
  }
  return r;
}

// ---------------------------------------------------------------- block values

/// First block index reported in traces (blocks are indexed from 1 in reports).
inline long first_reported_block(const BlockGenerator &g) { return std::max(1L, g.first_index()); }

inline std::vector<std::pair<long, Rational>> block_values(const BlockGenerator &g, const SetSpec &x, long horizon) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  std::vector<std::pair<long, Rational>> out;
  for (long n = first_reported_block(g); n <= horizon && g.has_block(n); ++n)
    out.emplace_back(n, g.mass(n, x.pieces(g.start(n), g.end(n))));
  return out;
}

inline std::vector<std::pair<long, Rational>> block_values(const IdealSpec &ideal, const SetSpec &x, long horizon) {
  if (!ideal.generator())
    throw Error("NotBlockStructured", ideal.describe() + " is not given by blocks");
  return block_values(*ideal.generator(), x, horizon);
}

// ---------------------------------------------------------------- membership

struct Membership {
  enum class Verdict { In, NotIn, Undetermined };
  Verdict verdict = Verdict::Undetermined;
  std::string certificate;    // closed-form reason or "finite set"
  bool closed_form = false;   // In/NotIn backed by the limit rule table
  Rational epsilon;           // NotIn
  std::vector<std::pair<BigInt, Rational>> witnesses; // NotIn: (index, value >= epsilon)
  std::vector<std::pair<BigInt, Rational>> trace;     // block values or prefix sums
  bool below_tolerance = false; // Undetermined: last trace value below tolerance (not a proof)
};

inline const char *to_string(Membership::Verdict v) {
  switch (v) {
  case Membership::Verdict::In: return "In";
  case Membership::Verdict::NotIn: return "NotIn";
  case Membership::Verdict::Undetermined: return "Undetermined";
  }
  return "?";
}

struct MembershipOptions {
  long horizon = 64;
  Rational tolerance = make_rational(1, 1000000);
};

namespace detail {

struct Cert {
  Membership::Verdict verdict = Membership::Verdict::Undetermined;
  std::string why;
  bool closed_form = false;
  std::optional<Rational> limit; // NotIn: certified positive limit (nullopt = +inf)
};

inline Cert undetermined(std::string why = "outside the rule table") {
  return {Membership::Verdict::Undetermined, std::move(why), false, std::nullopt};
}

inline Definitions merged(const Definitions &a, const Definitions &b) {
  Definitions out = a;
  for (const auto &[k, v] : b)
    out.emplace(k, v);
  return out;
}

/// Count of X inside block n when X picks the first (or last) c(n) points of
/// every block of g from some index on.
struct Profile {
  Function count; // already capped by the block length
  bool last = false;
};

inline std::optional<Profile> profile(const BlockGenerator &g, const SetSpec &x) {
  if (x.kind == SetSpec::Kind::BlockSelect && x.gen->key() == g.key()) {
    Definitions defs = merged(x.count.defs(), g.length_fn().defs());
    ExprPtr c = make_op(Op::Min, {make_op(Op::Floor, {x.count.expr}), g.length_fn().expr});
    return Profile{Function(c, defs), x.mode == SetSpec::Mode::Last};
  }
  if (x.kind == SetSpec::Kind::IntervalRule) {
    // the k-th interval must start exactly where block k starts
    ExprPtr diff = make_op(Op::Add, {x.lo.expr, make_op(Op::Neg, {g.start_fn().expr})});
    if (!identically_zero(*diff))
      return std::nullopt;
    Definitions defs = merged(x.len.defs(), g.length_fn().defs());
    ExprPtr len = make_op(Op::Floor, {x.len.expr});
    // interval must stay inside its block eventually
    Growth over = analyze_growth(make_op(Op::Sub, {len, g.length_fn().expr}), defs);
    if (!over.is_zero())
      return std::nullopt;
    return Profile{Function(make_op(Op::Min, {len, g.length_fn().expr}), defs), false};
  }
  return std::nullopt;
}

inline Cert certify_block(const BlockGenerator &g, const SetSpec &x) {
  using V = Membership::Verdict;
  if (auto fin = x.finite(); fin && *fin)
    return {V::In, "finite set", false, std::nullopt};
  if (g.last_index())
    return {V::In, "generator has finitely many blocks", false, std::nullopt};
  switch (x.kind) {
  case SetSpec::Kind::BlockSelect:
  case SetSpec::Kind::IntervalRule: {
    auto p = profile(g, x);
    if (!p || !g.uniform())
      return undetermined("set is not aligned with the blocks");
    Function v(make_op(Op::Mul, {p->count.expr, g.weight_fn().expr}), merged(p->count.defs(), g.weight_fn().defs()));
    Growth gr = analyze_growth(v);
    std::string why = "mu_n(X) = " + v.str() + " ~ " + to_string(gr);
    switch (growth::limit(gr)) {
    case Limit::Zero:
      return {V::In, why + " -> 0", true, std::nullopt};
    case Limit::Finite:
      if (gr.coeff > 0)
        return {V::NotIn, why + " -> " + to_string(gr.coeff), true, gr.coeff};
      return undetermined(why);
    case Limit::PlusInfinity:
      return {V::NotIn, why + " -> inf", true, std::nullopt};
    default:
      return undetermined(why);
    }
  }
  case SetSpec::Kind::Complement: {
    Cert c = certify_block(g, *x.children[0]);
    if (c.verdict != V::In || !g.norm_fn())
      return undetermined("complement of a set not certified small");
    Growth gr = analyze_growth(*g.norm_fn());
    Limit l = growth::limit(gr);
    if (l == Limit::Finite && gr.coeff > 0)
      return {V::NotIn, "||mu_n|| -> " + to_string(gr.coeff) + " and the complement is small", true, gr.coeff};
    if (l == Limit::PlusInfinity)
      return {V::NotIn, "||mu_n|| -> inf and the complement is small", true, std::nullopt};
    return undetermined("norms not certified away from 0");
  }
  case SetSpec::Kind::Union: {
    Cert a = certify_block(g, *x.children[0]), b = certify_block(g, *x.children[1]);
    if (a.verdict == V::In && b.verdict == V::In)
      return {V::In, "union of members (" + a.why + "; " + b.why + ")", a.closed_form || b.closed_form, std::nullopt};
    if (a.verdict == V::NotIn)
      return {V::NotIn, "contains a non-member: " + a.why, a.closed_form, a.limit};
    if (b.verdict == V::NotIn)
      return {V::NotIn, "contains a non-member: " + b.why, b.closed_form, b.limit};
    return undetermined("union with an undetermined part");
  }
  case SetSpec::Kind::Intersect: {
    Cert a = certify_block(g, *x.children[0]), b = certify_block(g, *x.children[1]);
    if (a.verdict == V::In)
      return {V::In, "subset of a member: " + a.why, a.closed_form, std::nullopt};
    if (b.verdict == V::In)
      return {V::In, "subset of a member: " + b.why, b.closed_form, std::nullopt};
    return undetermined("intersection of non-members");
  }
  default:
    return undetermined();
  }
}

/// Segments [lo(k), lo(k) + len(k)) of a set, as expressions in k (= n).
struct Segments {
  Function lo, len;
  long from;
};

inline std::optional<Segments> segments(const SetSpec &x) {
  if (x.kind == SetSpec::Kind::IntervalRule)
    return Segments{x.lo, Function(make_op(Op::Floor, {x.len.expr}), x.len.defs()), x.from};
  if (x.kind == SetSpec::Kind::BlockSelect && x.gen->consecutive() && x.gen->uniform()) {
    const BlockGenerator &g = *x.gen;
    Definitions defs = merged(x.count.defs(), g.length_fn().defs());
    ExprPtr c = make_op(Op::Min, {make_op(Op::Floor, {x.count.expr}), g.length_fn().expr});
    ExprPtr lo = x.mode == SetSpec::Mode::First
                     ? g.start_fn().expr
                     : make_op(Op::Sub, {make_op(Op::Add, {g.start_fn().expr, g.length_fn().expr}), c});
    return Segments{Function(lo, defs), Function(c, defs), x.from};
  }
  if (x.kind == SetSpec::Kind::BlockSelect && x.gen->kind() == BlockGenerator::Kind::AsymptoticDensity) {
    const BlockGenerator &g = *x.gen;
    Definitions defs = x.count.defs();
    ExprPtr c = make_op(Op::Min, {make_op(Op::Floor, {x.count.expr}), g.length_fn().expr});
    ExprPtr lo = x.mode == SetSpec::Mode::First
                     ? g.start_fn().expr
                     : make_op(Op::Sub, {make_op(Op::Add, {g.start_fn().expr, g.length_fn().expr}), c});
    return Segments{Function(lo, defs), Function(c, defs), x.from};
  }
  return std::nullopt;
}

struct SummableCert {
  Cert cert;
  std::optional<Function> lower; // per-segment lower bound behind a divergence certificate
  long from = 0;
};

inline SummableCert certify_summable(const Function &f, const SetSpec &x) {
  using V = Membership::Verdict;
  if (auto fin = x.finite(); fin && *fin)
    return {{V::In, "finite set", false, std::nullopt}, std::nullopt};
  Growth fg = analyze_growth(f);
  Series total = growth::series(fg);
  if (total == Series::Converges)
    return {{V::In, "sum of f converges (f ~ " + to_string(fg) + ")", true, std::nullopt}, std::nullopt};
  switch (x.kind) {
  case SetSpec::Kind::Complement: {
    auto fin = x.children[0]->finite();
    if (fin && *fin && total == Series::Diverges)
      return {{V::NotIn, "cofinite set and sum of f diverges (f ~ " + to_string(fg) + ")", true, std::nullopt},
              std::nullopt, 0};
    return {undetermined("complement of an infinite set"), std::nullopt};
  }
  case SetSpec::Kind::IntervalRule:
  case SetSpec::Kind::BlockSelect: {
    auto seg = segments(x);
    if (!seg)
      return {undetermined("set has no segment form"), std::nullopt};
    Shape shape = analyze_shape(f, 0);
    if (!shape.nonneg || shape.mono == Mono::Unknown)
      return {undetermined("weight not certified monotone"), std::nullopt};
    Definitions defs = merged(merged(seg->lo.defs(), seg->len.defs()), f.defs());
    ExprPtr first = seg->lo.expr;
    ExprPtr last = make_op(Op::Sub, {make_op(Op::Add, {seg->lo.expr, seg->len.expr}), constant(1)});
    ExprPtr at_first = substitute(f.expr, "n", first);
    ExprPtr at_last = substitute(f.expr, "n", last);
    bool decreasing = shape.mono == Mono::NonIncreasing || shape.mono == Mono::Constant;
    ExprPtr upper = make_op(Op::Mul, {seg->len.expr, decreasing ? at_first : at_last});
    ExprPtr lower = make_op(Op::Mul, {seg->len.expr, decreasing ? at_last : at_first});
    Growth gu = analyze_growth(upper, defs), gl = analyze_growth(lower, defs);
    if (growth::series(gu) == Series::Converges)
      return {{V::In, "segment sums <= " + to_string(upper) + " ~ " + to_string(gu) + ", summable", true, std::nullopt},
              std::nullopt, 0};
    if (growth::series(gl) == Series::Diverges)
      return {{V::NotIn, "segment sums >= " + to_string(lower) + " ~ " + to_string(gl) + ", divergent", true, std::nullopt},
              Function(lower, defs), seg->from};
    return {undetermined("segment bounds outside the rule table"), std::nullopt};
  }
  case SetSpec::Kind::Union: {
    auto a = certify_summable(f, *x.children[0]), b = certify_summable(f, *x.children[1]);
    if (a.cert.verdict == V::In && b.cert.verdict == V::In)
      return {{V::In, "union of members", a.cert.closed_form || b.cert.closed_form, std::nullopt}, std::nullopt};
    if (a.cert.verdict == V::NotIn)
      return a;
    if (b.cert.verdict == V::NotIn)
      return b;
    return {undetermined("union with an undetermined part"), std::nullopt};
  }
  case SetSpec::Kind::Intersect: {
    auto a = certify_summable(f, *x.children[0]), b = certify_summable(f, *x.children[1]);
    if (a.cert.verdict == V::In || b.cert.verdict == V::In)
      return {{V::In, "subset of a member", true, std::nullopt}, std::nullopt};
    return {undetermined("intersection of non-members"), std::nullopt};
  }
  default:
    return {undetermined(), std::nullopt};
  }
}

} // namespace detail

inline Membership block_membership(const BlockGenerator &g, const SetSpec &x, const MembershipOptions &opt) {
  using V = Membership::Verdict;
  Membership out;
  for (const auto &[n, v] : block_values(g, x, opt.horizon))
    out.trace.emplace_back(BigInt(n), v);
  detail::Cert c = detail::certify_block(g, x);
  out.certificate = c.why;
  out.closed_form = c.closed_form;
  if (c.verdict == V::In) {
    out.verdict = V::In;
    return out;
  }
  if (c.verdict == V::NotIn) {
    // epsilon: the certified limit, lowered to the tail values when they approach it from below
    std::vector<std::pair<BigInt, Rational>> tail;
    for (auto it = out.trace.rbegin(); it != out.trace.rend() && tail.size() < 3; ++it)
      tail.push_back(*it);
    std::reverse(tail.begin(), tail.end());
    if (tail.size() == 3) {
      Rational eps = c.limit ? *c.limit : tail[0].second;
      for (const auto &t : tail)
        if (t.second < eps)
          eps = t.second;
      if (eps > 0) {
        out.verdict = V::NotIn;
        out.epsilon = eps;
        for (const auto &t : out.trace)
          if (t.second >= eps)
            out.witnesses.push_back(t);
        if (out.witnesses.size() > 3)
          out.witnesses.erase(out.witnesses.begin(), out.witnesses.end() - 3);
        return out;
      }
    }
    out.certificate += " (certified, but the horizon is too short to exhibit 3 witnesses)";
  }
  out.verdict = V::Undetermined;
  if (!out.trace.empty() && out.trace.back().second < opt.tolerance)
    out.below_tolerance = true;
  return out;
}

inline Membership summable_membership(const Function &f, const SetSpec &x, const MembershipOptions &opt) {
  using V = Membership::Verdict;
  Membership out;
  // trace: partial sums of f over X below n
  IntervalList members = x.pieces(0, BigInt(opt.horizon) + 1);
  Rational acc = 0;
  std::vector<BigInt> pts = members.points();
  size_t idx = 0;
  for (long n = 1; n <= opt.horizon; ++n) {
    while (idx < pts.size() && pts[idx] < n)
      acc += summable_weight_at(f, pts[idx++]);
    out.trace.emplace_back(BigInt(n), acc);
  }
  detail::SummableCert sc = detail::certify_summable(f, x);
  out.certificate = sc.cert.why;
  out.closed_form = sc.cert.closed_form;
  if (sc.cert.verdict == V::In) {
    out.verdict = V::In;
    return out;
  }
  if (sc.cert.verdict == V::NotIn) {
    out.verdict = V::NotIn;
    out.epsilon = 1;
    // tails past each witness carry mass >= 1 again and again
    const long budget = std::max<long>(opt.horizon, 4096);
    if (sc.lower) {
      Rational run = 0;
      std::optional<BigInt> run_start;
      for (long k = sc.from; k < sc.from + budget && out.witnesses.size() < 3; ++k) {
        Rational lower = (*sc.lower)(Rational(k));
        if (!run_start)
          run_start = BigInt(k);
        run += lower;
        if (run >= 1) {
          out.witnesses.emplace_back(*run_start, run);
          run = 0;
          run_start.reset();
        }
      }
      out.certificate += "; witnesses are segment indices k where consecutive segment lower bounds reach 1";
    } else {
      Rational run = 0;
      std::optional<BigInt> run_start;
      long steps = 0;
      for (BigInt xpt = 0; steps < 100000 && out.witnesses.size() < 3; ++xpt, ++steps) {
        if (!x.contains(xpt))
          continue;
        if (!run_start)
          run_start = xpt;
        run += summable_weight_at(f, xpt);
        if (run >= 1) {
          out.witnesses.emplace_back(*run_start, run);
          run = 0;
          run_start.reset();
        }
      }
      out.certificate += "; witnesses are tail starts t with sum over X in [t, next) >= 1";
    }
    return out;
  }
  out.verdict = V::Undetermined;
  if (out.trace.size() >= 2) {
    Rational last_step = out.trace.back().second - out.trace[out.trace.size() / 2].second;
    out.below_tolerance = last_step < opt.tolerance;
  }
  return out;
}

inline Membership membership(const IdealSpec &ideal, const SetSpec &x, const MembershipOptions &opt = {}) {
  using V = Membership::Verdict;
  if (opt.horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  if (opt.tolerance <= 0)
    throw Error("ValidationError", "tolerance must be > 0");
  if (ideal.generator())
    return block_membership(*ideal.generator(), x, opt);
  if (auto f = ideal.summable_weight())
    return summable_membership(*f, x, opt);
  Membership out;
  switch (ideal.kind) {
  case IdealSpec::Kind::Fin: {
    auto fin = x.finite();
    IntervalList inside = x.pieces(0, BigInt(opt.horizon) + 1);
    BigInt seen = 0;
    for (long n = 1; n <= opt.horizon; ++n)
      out.trace.emplace_back(BigInt(n), Rational(inside.clip(0, n).count()));
    if (fin && *fin) {
      out.verdict = V::In;
      out.certificate = "finite set";
    } else if (fin && !*fin) {
      out.verdict = V::NotIn;
      out.certificate = "set is certified infinite";
      out.closed_form = true;
      out.epsilon = 1;
      for (const auto &p : x.pieces(0, BigInt(opt.horizon) * 64 + 64).points(1u << 20)) {
        out.witnesses.emplace_back(p, Rational(1));
        if (out.witnesses.size() == 3)
          break;
      }
    } else {
      out.verdict = V::Undetermined;
      out.certificate = "finiteness not certified";
    }
    return out;
  }
  case IdealSpec::Kind::Exh: {
    const SubmeasureSpec &phi = *ideal.phi;
    if (phi.kind == SubmeasureSpec::Kind::FiniteTable) {
      out.verdict = V::In;
      out.certificate = "finite ground: every tail is eventually empty";
      return out;
    }
    if (phi.kind == SubmeasureSpec::Kind::MaxMerge) {
      // Exh(max(psi, phi)) = Exh(psi) n Exh(phi)
      Membership a = membership(*ideals::exh(phi.left), x, opt);
      Membership b = membership(*ideals::exh(phi.right), x, opt);
      if (a.verdict == V::NotIn)
        return a;
      if (b.verdict == V::NotIn)
        return b;
      if (a.verdict == V::In && b.verdict == V::In) {
        a.certificate = "member of both parts (" + a.certificate + "; " + b.certificate + ")";
        a.closed_form = a.closed_form || b.closed_form;
        return a;
      }
      Membership u = a.verdict == V::Undetermined ? a : b;
      u.certificate = "one part undetermined: " + u.certificate;
      return u;
    }
    break;
  }
  default:
    break;
  }
  out.verdict = V::Undetermined;
  out.certificate = "no membership rule for " + ideal.describe();
  return out;
}

// ---------------------------------------------------------------- max-merge probe

struct MergeProbeRow {
  std::string test;
  Membership psi, phi, merged;
};

inline std::vector<MergeProbeRow> max_merge_exh_probe(const SubmeasurePtr &psi, const SubmeasurePtr &phi,
                                                      const std::vector<SetPtr> &tests, const MembershipOptions &opt) {
  using V = Membership::Verdict;
  auto merged = submeasures::max_merge(psi, phi);
  std::vector<MergeProbeRow> rows;
  for (const auto &t : tests) {
    MergeProbeRow r{t->describe(), membership(*ideals::exh(psi), *t, opt), membership(*ideals::exh(phi), *t, opt),
                    membership(*ideals::exh(merged), *t, opt)};
    if (r.psi.verdict == V::In && r.phi.verdict == V::In && r.merged.verdict == V::NotIn)
      throw Error("InconsistentVerdicts", "In(psi) and In(phi) but NotIn(max) for " + r.test);
    if (r.merged.verdict == V::In && r.phi.verdict == V::NotIn)
      throw Error("InconsistentVerdicts", "In(max) but NotIn(phi) for " + r.test);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- non-pathology

struct DefectResult {
  Rational lp_value, phi_value;
  std::vector<Rational> measure; // optimal mu on a (ascending points)
  Rational defect() const { return phi_value - lp_value; }
};

/// max mu(a) over measures mu >= 0 on the ground with mu <= phi on every subset.
/// Atoms outside a only use up capacity, so the program lives on a alone.
inline DefectResult nonpathology_defect(const FiniteTable &table, const std::vector<BigInt> &a) {
  size_t amask = table.mask_of(a);
  std::vector<size_t> bits;
  for (size_t k = 0; k < table.size(); ++k)
    if (amask >> k & 1)
      bits.push_back(k);
  DefectResult r;
  r.phi_value = table.value(amask);
  if (bits.empty()) {
    r.lp_value = 0;
    return r;
  }
  const size_t m = bits.size();
  std::vector<std::vector<Rational>> A;
  std::vector<Rational> b;
  for (size_t s = 1; s < (size_t(1) << m); ++s) {
    std::vector<Rational> row(m, 0);
    size_t full = 0;
    for (size_t j = 0; j < m; ++j)
      if (s >> j & 1) {
        row[j] = 1;
        full |= size_t(1) << bits[j];
      }
    A.push_back(std::move(row));
    b.push_back(table.value(full));
  }
  lp::Result res = lp::maximize(std::vector<Rational>(m, 1), A, b);
  if (res.status != lp::Result::Status::Optimal)
    throw Error("InternalError", "non-pathology program unbounded");
  r.lp_value = res.value;
  r.measure = res.x;
  return r;
}

} // namespace nikodym
