#pragma once

// Small rule table for eventual behaviour of expressions in n.
// A growth class is either eventually 0, unknown, or
//   value ~ coeff * n^p * b^n * 2^(s n^2)
// with rational coeff != 0, p, s and b > 0.

#include "nikodym/expr.hpp"

#include <algorithm>

namespace nikodym {

struct Growth {
  enum class Kind { Zero, Term, Unknown };
  Kind kind = Kind::Unknown;
  Rational coeff = 1, p = 0, b = 1, s = 0;

  static Growth zero() { return {Kind::Zero, 0, 0, 1, 0}; }
  static Growth unknown() { return {}; }
  static Growth term(Rational c, Rational p, Rational b = 1, Rational s = 0) {
    if (c == 0)
      return zero();
    return {Kind::Term, std::move(c), std::move(p), std::move(b), std::move(s)};
  }
  bool known() const { return kind != Kind::Unknown; }
  bool is_zero() const { return kind == Kind::Zero; }
  bool is_term() const { return kind == Kind::Term; }
};

inline std::string to_string(const Growth &g) {
  switch (g.kind) {
  case Growth::Kind::Zero:
    return "0";
  case Growth::Kind::Unknown:
    return "unknown";
  case Growth::Kind::Term:
    break;
  }
  std::string out = to_string(g.coeff);
  if (g.p != 0)
    out += " * n^(" + to_string(g.p) + ")";
  if (g.b != 1)
    out += " * (" + to_string(g.b) + ")^n";
  if (g.s != 0)
    out += " * 2^(" + to_string(g.s) + " n^2)";
  return out;
}

enum class Series { Converges, Diverges, Unknown };

enum class Limit { Zero, Finite, PlusInfinity, MinusInfinity, Unknown };

inline const char *to_string(Limit l) {
  switch (l) {
  case Limit::Zero: return "0";
  case Limit::Finite: return "finite";
  case Limit::PlusInfinity: return "+inf";
  case Limit::MinusInfinity: return "-inf";
  case Limit::Unknown: return "unknown";
  }
  return "unknown";
}

namespace growth {

// compares the (s, b, p) keys of two terms
inline int compare_rate(const Growth &x, const Growth &y) {
  if (x.s != y.s)
    return x.s < y.s ? -1 : 1;
  if (x.b != y.b)
    return x.b < y.b ? -1 : 1;
  if (x.p != y.p)
    return x.p < y.p ? -1 : 1;
  return 0;
}

inline Limit limit(const Growth &g) {
  if (g.is_zero())
    return Limit::Zero;
  if (!g.is_term())
    return Limit::Unknown;
  int r = compare_rate(g, Growth::term(1, 0));
  if (r < 0)
    return Limit::Zero;
  if (r == 0)
    return Limit::Finite;
  return g.coeff > 0 ? Limit::PlusInfinity : Limit::MinusInfinity;
}

inline Growth neg(Growth g) {
  if (g.is_term())
    g.coeff = -g.coeff;
  return g;
}

inline Growth add(const Growth &x, const Growth &y) {
  if (!x.known() || !y.known())
    return Growth::unknown();
  if (x.is_zero())
    return y;
  if (y.is_zero())
    return x;
  int r = compare_rate(x, y);
  if (r > 0)
    return x;
  if (r < 0)
    return y;
  Rational c = x.coeff + y.coeff;
  if (c == 0)
    return Growth::unknown(); // leading terms cancel; lower order unknown
  Growth out = x;
  out.coeff = c;
  return out;
}

inline Growth mul(const Growth &x, const Growth &y) {
  if (x.is_zero() || y.is_zero())
    return Growth::zero();
  if (!x.known() || !y.known())
    return Growth::unknown();
  return Growth::term(x.coeff * y.coeff, x.p + y.p, x.b * y.b, x.s + y.s);
}

inline Growth reciprocal(const Growth &x) {
  if (!x.is_term())
    return Growth::unknown();
  return Growth::term(1 / x.coeff, -x.p, 1 / x.b, -x.s);
}

inline Growth power(const Growth &x, long k) {
  if (k == 0)
    return Growth::term(1, 0);
  if (x.is_zero())
    return k > 0 ? Growth::zero() : Growth::unknown();
  if (!x.is_term())
    return Growth::unknown();
  return Growth::term(nikodym::pow(x.coeff, k), x.p * k, nikodym::pow(x.b, k), x.s * k);
}

// Is the rational q = 2^m for an integer m?
inline std::optional<long> log2_exact(const Rational &q) {
  if (q <= 0)
    return std::nullopt;
  const BigInt &num = q.get_num();
  const BigInt &den = q.get_den();
  if (den == 1 && mpz_popcount(num.get_mpz_t()) == 1)
    return static_cast<long>(bit_length(num) - 1);
  if (num == 1 && mpz_popcount(den.get_mpz_t()) == 1)
    return -static_cast<long>(bit_length(den) - 1);
  return std::nullopt;
}

// 2^(r) as a rational when r is an integer of moderate size
inline std::optional<Rational> exp2_rational(const Rational &r) {
  if (!is_integer(r) || !r.get_num().fits_slong_p())
    return std::nullopt;
  long e = r.get_num().get_si();
  if (e > 4096 || e < -4096)
    return std::nullopt;
  return nikodym::pow(Rational(2), e);
}

/// Coefficients (constant first) of an eventual polynomial in n, or nullopt.
inline std::optional<std::vector<Rational>> polynomial(const Expr &e, const Definitions &defs, int depth = 0);

inline void trim(std::vector<Rational> &c) {
  while (!c.empty() && c.back() == 0)
    c.pop_back();
}

inline std::vector<Rational> poly_add(std::vector<Rational> a, const std::vector<Rational> &b, const Rational &scale = 1) {
  if (a.size() < b.size())
    a.resize(b.size());
  for (size_t k = 0; k < b.size(); ++k)
    a[k] += scale * b[k];
  trim(a);
  return a;
}

inline std::vector<Rational> poly_mul(const std::vector<Rational> &a, const std::vector<Rational> &b) {
  if (a.empty() || b.empty())
    return {};
  std::vector<Rational> c(a.size() + b.size() - 1);
  for (size_t x = 0; x < a.size(); ++x)
    for (size_t y = 0; y < b.size(); ++y)
      c[x + y] += a[x] * b[y];
  trim(c);
  return c;
}

inline std::optional<std::vector<Rational>> polynomial(const Expr &e, const Definitions &defs, int depth) {
  if (depth > 64)
    return std::nullopt;
  switch (e.op) {
  case Op::Const: {
    std::vector<Rational> c{e.value};
    trim(c);
    return c;
  }
  case Op::Var:
    if (e.name != "n")
      return std::nullopt;
    return std::vector<Rational>{0, 1};
  case Op::Add:
  case Op::Mul: {
    std::vector<Rational> acc = e.op == Op::Add ? std::vector<Rational>{} : std::vector<Rational>{1};
    for (const auto &a : e.args) {
      auto p = polynomial(*a, defs, depth + 1);
      if (!p)
        return std::nullopt;
      acc = e.op == Op::Add ? poly_add(acc, *p) : poly_mul(acc, *p);
    }
    return acc;
  }
  case Op::Neg: {
    auto p = polynomial(*e.args[0], defs, depth + 1);
    if (!p)
      return std::nullopt;
    return poly_add({}, *p, -1);
  }
  case Op::Sub: {
    auto a = polynomial(*e.args[0], defs, depth + 1);
    auto b = polynomial(*e.args[1], defs, depth + 1);
    if (!a || !b)
      return std::nullopt;
    auto d = poly_add(*a, *b, -1);
    if (d.empty() || d.back() < 0)
      return std::vector<Rational>{}; // eventually truncated to 0
    return d;
  }
  case Op::Div: {
    auto a = polynomial(*e.args[0], defs, depth + 1);
    auto b = polynomial(*e.args[1], defs, depth + 1);
    if (!a || !b || b->size() != 1)
      return std::nullopt;
    return poly_add({}, *a, 1 / (*b)[0]);
  }
  case Op::Pow: {
    if (has_variables(*e.args[1]))
      return std::nullopt;
    Rational k = Evaluator(defs).eval(*e.args[1], {});
    if (!is_integer(k) || k < 0 || k > 64)
      return std::nullopt;
    auto a = polynomial(*e.args[0], defs, depth + 1);
    if (!a)
      return std::nullopt;
    std::vector<Rational> acc{1};
    for (long t = 0; t < k.get_num().get_si(); ++t)
      acc = poly_mul(acc, *a);
    return acc;
  }
  case Op::Call: {
    auto it = defs.find(e.name);
    if (it == defs.end())
      return std::nullopt;
    return polynomial(*substitute(it->second, "n", e.args[0]), defs, depth + 1);
  }
  default:
    return std::nullopt;
  }
}

inline Growth of_polynomial(const std::vector<Rational> &c) {
  if (c.empty())
    return Growth::zero();
  return Growth::term(c.back(), static_cast<long>(c.size() - 1));
}

// c^(e(n)) for constant c > 0 and polynomial exponent of degree <= 2
inline Growth exponential(const Rational &c, const std::vector<Rational> &e) {
  if (c <= 0)
    return Growth::unknown();
  if (e.size() > 3)
    return Growth::unknown();
  Rational e0 = e.size() > 0 ? e[0] : Rational(0);
  Rational e1 = e.size() > 1 ? e[1] : Rational(0);
  Rational e2 = e.size() > 2 ? e[2] : Rational(0);
  if (c == 1)
    return Growth::term(1, 0);
  if (auto m = log2_exact(c)) {
    Rational mm(*m);
    auto b = exp2_rational(mm * e1);
    auto k = exp2_rational(mm * e0);
    if (!b || !k)
      return Growth::unknown();
    return Growth::term(*k, 0, *b, mm * e2);
  }
  if (e2 != 0 || !is_integer(e1) || !is_integer(e0) || !e1.get_num().fits_slong_p() || !e0.get_num().fits_slong_p())
    return Growth::unknown();
  return Growth::term(nikodym::pow(c, e0.get_num().get_si()), 0, nikodym::pow(c, e1.get_num().get_si()), 0);
}

// sum_{lower <= j < n} body(j) given the class of body(n)
inline Growth prefix_sum(const Growth &g) {
  if (!g.is_term())
    return Growth::unknown();
  if (g.s > 0) {
    // dominated by the last term body(n-1)
    if (!is_integer(g.s))
      return Growth::unknown();
    auto shift = exp2_rational(g.s);     // 2^(s(n-1)^2) = 2^(s n^2) 2^(-2sn) 2^s
    auto slope = exp2_rational(-2 * g.s);
    if (!shift || !slope)
      return Growth::unknown();
    return Growth::term(g.coeff * *shift / g.b, g.p, g.b * *slope, g.s);
  }
  if (g.s < 0)
    return Growth::unknown(); // convergent: limit is some constant
  if (g.b > 1)
    return Growth::term(g.coeff / (g.b - 1), g.p, g.b, 0);
  if (g.b < 1)
    return Growth::unknown();
  if (g.p > -1)
    return Growth::term(g.coeff / (g.p + 1), g.p + 1, 1, 0);
  return Growth::unknown(); // logarithmic or convergent
}

inline Growth analyze(const Expr &e, const Definitions &defs, int depth = 0);

inline Growth analyze_minmax(const Expr &e, const Definitions &defs, int depth) {
  Growth best = analyze(*e.args[0], defs, depth + 1);
  for (size_t k = 1; k < e.args.size(); ++k) {
    Growth g = analyze(*e.args[k], defs, depth + 1);
    if (!best.known() || !g.known())
      return Growth::unknown();
    bool want_max = e.op == Op::Max;
    // order on eventual values: compare x - y
    Growth diff = add(best, neg(g));
    Limit l = limit(diff);
    int sign;
    if (diff.is_term())
      sign = diff.coeff > 0 ? 1 : -1;
    else if (diff.is_zero())
      sign = 0;
    else
      return Growth::unknown();
    (void)l;
    if ((want_max && sign < 0) || (!want_max && sign > 0))
      best = g;
  }
  return best;
}

inline Growth analyze(const Expr &e, const Definitions &defs, int depth) {
  if (depth > 128)
    return Growth::unknown();
  auto sub = [&](size_t k) { return analyze(*e.args[k], defs, depth + 1); };
  switch (e.op) {
  case Op::Const:
    return Growth::term(e.value, 0);
  case Op::Var:
    return e.name == "n" ? Growth::term(1, 1) : Growth::unknown();
  case Op::Add: {
    Growth acc = Growth::zero();
    for (size_t k = 0; k < e.args.size(); ++k)
      acc = add(acc, sub(k));
    if (!acc.known())
      if (auto p = polynomial(e, defs))
        return of_polynomial(*p);
    return acc;
  }
  case Op::Sub: {
    Growth d = add(sub(0), neg(sub(1)));
    if (!d.known())
      if (auto p = polynomial(e, defs))
        return of_polynomial(*p);
    if (d.is_term() && d.coeff < 0)
      return Growth::zero();
    return d;
  }
  case Op::Neg:
    return neg(sub(0));
  case Op::Mul: {
    Growth acc = Growth::term(1, 0);
    for (size_t k = 0; k < e.args.size(); ++k)
      acc = mul(acc, sub(k));
    return acc;
  }
  case Op::Div: {
    Growth den = sub(1);
    if (den.is_zero())
      return Growth::unknown();
    Growth num = sub(0);
    if (num.is_zero())
      return Growth::zero();
    return mul(num, reciprocal(den));
  }
  case Op::FloorDiv:
  case Op::Floor:
  case Op::Ceil: {
    Growth q = e.op == Op::FloorDiv ? mul(sub(0), reciprocal(sub(1))) : sub(0);
    if (e.op == Op::FloorDiv && sub(0).is_zero())
      return Growth::zero();
    if (q.is_zero())
      return Growth::zero();
    Limit l = limit(q);
    if (l == Limit::PlusInfinity)
      return q;
    if (l == Limit::Zero && q.coeff > 0)
      return e.op == Op::Ceil ? Growth::term(1, 0) : Growth::zero();
    if (l == Limit::Finite && is_integer(q.coeff) && !has_variables(e))
      return q;
    return Growth::unknown();
  }
  case Op::Pow: {
    const Expr &ex = *e.args[1];
    if (!has_variables(ex)) {
      Rational k = Evaluator(defs).eval(ex, {});
      if (!is_integer(k) || !k.get_num().fits_slong_p())
        return Growth::unknown();
      return power(sub(0), k.get_num().get_si());
    }
    if (has_variables(*e.args[0]))
      return Growth::unknown();
    Rational c = Evaluator(defs).eval(*e.args[0], {});
    auto p = polynomial(ex, defs);
    if (!p)
      return Growth::unknown();
    return exponential(c, *p);
  }
  case Op::Exp2: {
    auto p = polynomial(*e.args[0], defs);
    if (!p)
      return Growth::unknown();
    return exponential(2, *p);
  }
  case Op::Min:
  case Op::Max:
    return analyze_minmax(e, defs, depth);
  case Op::Call: {
    auto it = defs.find(e.name);
    if (it == defs.end())
      return Growth::unknown();
    return analyze(*substitute(it->second, "n", e.args[0]), defs, depth + 1);
  }
  case Op::PrefixSum: {
    const Expr &upper = *e.args[1];
    if (upper.op != Op::Var || upper.name != "n")
      return Growth::unknown();
    return prefix_sum(sub(0));
  }
  }
  return Growth::unknown();
}

/// Convergence of sum_n g(n) for eventually non-negative terms.
inline Series series(const Growth &g) {
  if (g.is_zero())
    return Series::Converges;
  if (!g.is_term() || g.coeff < 0)
    return Series::Unknown;
  if (g.s != 0)
    return g.s > 0 ? Series::Diverges : Series::Converges;
  if (g.b != 1)
    return g.b > 1 ? Series::Diverges : Series::Converges;
  return g.p >= -1 ? Series::Diverges : Series::Converges;
}

} // namespace growth

inline Growth analyze_growth(const ExprPtr &e, const Definitions &defs = {}) {
  return growth::analyze(*e, defs);
}

inline Growth analyze_growth(const Function &f) { return growth::analyze(*f.expr, f.defs()); }

inline Limit limit_of(const Function &f) { return growth::limit(analyze_growth(f)); }

/// Monotonicity of an expression in n, valid for every n >= n_min.
enum class Mono { Constant, NonDecreasing, NonIncreasing, Unknown };

struct Shape {
  Mono mono = Mono::Unknown;
  bool nonneg = false;
  bool positive = false;
};

namespace mono {

inline Mono flip(Mono m) {
  if (m == Mono::NonDecreasing)
    return Mono::NonIncreasing;
  if (m == Mono::NonIncreasing)
    return Mono::NonDecreasing;
  return m;
}

inline Mono join(Mono a, Mono b) {
  if (a == Mono::Constant)
    return b;
  if (b == Mono::Constant)
    return a;
  return a == b ? a : Mono::Unknown;
}

inline Shape analyze(const Expr &e, const Definitions &defs, long n_min, int depth = 0);

inline Shape constant_shape(const Rational &v) { return {Mono::Constant, v >= 0, v > 0}; }

inline Shape analyze(const Expr &e, const Definitions &defs, long n_min, int depth) {
  if (depth > 128)
    return {};
  if (!has_variables(e)) {
    try {
      return constant_shape(Evaluator(defs).eval(e, {}));
    } catch (const Error &) {
      return {};
    }
  }
  auto sub = [&](size_t k) { return analyze(*e.args[k], defs, n_min, depth + 1); };
  switch (e.op) {
  case Op::Var:
    if (e.name != "n")
      return {};
    return {Mono::NonDecreasing, n_min >= 0, n_min >= 1};
  case Op::Add: {
    Shape acc{Mono::Constant, true, false};
    for (size_t k = 0; k < e.args.size(); ++k) {
      Shape s = sub(k);
      acc.mono = join(acc.mono, s.mono);
      acc.positive = (acc.positive && s.nonneg) || (acc.nonneg && s.positive);
      acc.nonneg = acc.nonneg && s.nonneg;
    }
    return acc;
  }
  case Op::Sub: {
    Shape a = sub(0), b = sub(1);
    return {join(a.mono, flip(b.mono)), true, false};
  }
  case Op::Neg:
    return {flip(sub(0).mono), false, false};
  case Op::Mul: {
    Shape acc{Mono::Constant, true, true};
    for (size_t k = 0; k < e.args.size(); ++k) {
      Shape s = sub(k);
      if (s.mono == Mono::Constant && !s.nonneg) {
        // negative constant factor flips direction; sign no longer tracked
        acc.mono = flip(acc.mono);
        if (!acc.nonneg)
          return {};
        acc.nonneg = acc.positive = false;
        acc.mono = acc.mono == Mono::Constant ? Mono::Constant : acc.mono;
        continue;
      }
      if (!s.nonneg || !acc.nonneg)
        return {};
      acc.mono = join(acc.mono, s.mono);
      acc.positive = acc.positive && s.positive;
    }
    return acc;
  }
  case Op::Div:
  case Op::FloorDiv: {
    Shape a = sub(0), b = sub(1);
    if (!a.nonneg || !b.positive)
      return {};
    Shape out{join(a.mono, flip(b.mono)), true, e.op == Op::Div && a.positive};
    return out;
  }
  case Op::Pow: {
    if (!has_variables(*e.args[1])) {
      Rational k = Evaluator(defs).eval(*e.args[1], {});
      Shape a = sub(0);
      if (!is_integer(k) || !a.nonneg)
        return {};
      if (k == 0)
        return constant_shape(1);
      if (k > 0)
        return {a.mono, true, a.positive};
      if (!a.positive)
        return {};
      return {flip(a.mono), true, true};
    }
    Shape base = sub(0), ex = sub(1);
    if (base.mono != Mono::Constant || !base.positive)
      return {};
    Rational c = Evaluator(defs).eval(*e.args[0], {});
    if (c == 1)
      return constant_shape(1);
    return {c > 1 ? ex.mono : flip(ex.mono), true, true};
  }
  case Op::Exp2:
    return {sub(0).mono, true, true};
  case Op::Min:
  case Op::Max: {
    Shape acc = sub(0);
    for (size_t k = 1; k < e.args.size(); ++k) {
      Shape s = sub(k);
      acc.mono = join(acc.mono, s.mono);
      if (e.op == Op::Min) {
        acc.nonneg = acc.nonneg && s.nonneg;
        acc.positive = acc.positive && s.positive;
      } else {
        acc.nonneg = acc.nonneg || s.nonneg;
        acc.positive = acc.positive || s.positive;
      }
    }
    return acc;
  }
  case Op::Floor:
  case Op::Ceil: {
    Shape a = sub(0);
    return {a.mono, a.nonneg, e.op == Op::Ceil && a.positive};
  }
  case Op::Call: {
    auto it = defs.find(e.name);
    if (it == defs.end())
      return {};
    return analyze(*substitute(it->second, "n", e.args[0]), defs, n_min, depth + 1);
  }
  case Op::PrefixSum: {
    const Expr &upper = *e.args[1];
    long lower_min = 0;
    if (e.args.size() > 2) {
      if (has_variables(*e.args[2]))
        return {};
      lower_min = 0;
    }
    Shape body = analyze(*e.args[0], defs, lower_min, depth + 1);
    Shape up = analyze(upper, defs, n_min, depth + 1);
    if (!body.nonneg)
      return {};
    if (up.mono == Mono::NonDecreasing || up.mono == Mono::Constant)
      return {up.mono, true, false};
    return {Mono::Unknown, true, false};
  }
  default:
    return {};
  }
}

} // namespace mono

inline Shape analyze_shape(const Function &f, long n_min = 1) {
  return mono::analyze(*f.expr, f.defs(), n_min);
}

/// Linear normal form: expression as sum of coefficient * opaque atom.
/// Detects exact cancellations such as (add n (neg n)).
inline std::map<std::string, Rational> linear_form(const Expr &e) {
  std::map<std::string, Rational> out;
  auto merge = [&out](const std::map<std::string, Rational> &part, const Rational &scale) {
    for (const auto &[k, v] : part)
      out[k] += scale * v;
  };
  switch (e.op) {
  case Op::Const:
    out["1"] = e.value;
    break;
  case Op::Add:
    for (const auto &a : e.args)
      merge(linear_form(*a), 1);
    break;
  case Op::Neg:
    merge(linear_form(*e.args[0]), -1);
    break;
  case Op::Mul: {
    Rational scale = 1;
    std::vector<const Expr *> rest;
    for (const auto &a : e.args) {
      if (!has_variables(*a) && a->op == Op::Const)
        scale *= a->value;
      else
        rest.push_back(a.get());
    }
    if (rest.empty())
      out["1"] = scale;
    else if (rest.size() == 1)
      merge(linear_form(*rest[0]), scale);
    else
      out[to_string(e)] = 1;
    break;
  }
  default:
    out[to_string(e)] = 1;
  }
  for (auto it = out.begin(); it != out.end();)
    it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

inline bool identically_zero(const Expr &e) { return linear_form(e).empty(); }

} // namespace nikodym
