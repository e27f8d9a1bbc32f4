#pragma once

// Evaluation of non-negative integer expressions whose values are far too
// large to hold exactly (f(f(n)) for f = 2^(n^2)). A value is either exact or
// known only through binary-logarithm bounds 2^lo <= v < 2^hi.

#include "nikodym/expr.hpp"

#include <optional>

namespace nikodym {

struct Magnitude {
  bool exact = true;
  BigInt value;  // when exact
  BigInt lo, hi; // when not exact: 2^lo <= v < 2^hi

  static Magnitude of(const BigInt &v) { return {true, v, 0, 0}; }
  static Magnitude bounds(BigInt lo, BigInt hi) { return {false, 0, std::move(lo), std::move(hi)}; }

  bool is_zero() const { return exact && value == 0; }

  // log2 bounds of a positive value
  BigInt log_lo() const { return exact ? BigInt(static_cast<unsigned long>(bit_length(value) - 1)) : lo; }
  BigInt log_hi() const { return exact ? BigInt(static_cast<unsigned long>(bit_length(value))) : hi; }
};

inline std::string to_string(const Magnitude &m) {
  if (m.exact)
    return m.value.get_str();
  return "[2^" + m.lo.get_str() + ", 2^" + m.hi.get_str() + ")";
}

/// -1, 0, 1 when the order is certain; nullopt when the bounds overlap.
inline std::optional<int> compare(const Magnitude &a, const Magnitude &b) {
  if (a.exact && b.exact)
    return a.value < b.value ? -1 : (a.value > b.value ? 1 : 0);
  if (a.is_zero())
    return -1;
  if (b.is_zero())
    return 1;
  if (a.log_hi() <= b.log_lo())
    return -1;
  if (b.log_hi() <= a.log_lo())
    return 1;
  return std::nullopt;
}

class MagnitudeEvaluator {
public:
  static constexpr unsigned long kExactBits = 1ul << 20;

  explicit MagnitudeEvaluator(Definitions defs = {}) : defs_(std::move(defs)) {}

  Magnitude eval(const Expr &e, const Magnitude &n, int depth = 0) const {
    if (depth > 256)
      throw Error("EvalError", "expression nests too deeply");
    auto arg = [&](size_t k) { return eval(*e.args[k], n, depth + 1); };
    switch (e.op) {
    case Op::Const:
      if (!is_integer(e.value) || e.value < 0)
        throw Error("EvalError", "magnitude evaluation needs non-negative integers");
      return Magnitude::of(e.value.get_num());
    case Op::Var:
      if (e.name != "n")
        throw Error("EvalError", "unbound variable '" + e.name + "'");
      return n;
    case Op::Add: {
      Magnitude acc = Magnitude::of(0);
      for (size_t k = 0; k < e.args.size(); ++k)
        acc = add(acc, arg(k));
      return acc;
    }
    case Op::Mul: {
      Magnitude acc = Magnitude::of(1);
      for (size_t k = 0; k < e.args.size(); ++k)
        acc = mul(acc, arg(k));
      return acc;
    }
    case Op::Sub: {
      Magnitude a = arg(0), b = arg(1);
      if (a.exact && b.exact)
        return Magnitude::of(a.value > b.value ? BigInt(a.value - b.value) : BigInt(0));
      if (b.is_zero())
        return a;
      if (a.log_lo() >= b.log_hi() + 1)
        return normalize(Magnitude::bounds(a.log_lo() - 1, a.log_hi()));
      throw Error("Undecidable", "cannot bound difference " + to_string(e));
    }
    case Op::FloorDiv: {
      Magnitude a = arg(0), b = arg(1);
      if (b.is_zero())
        throw Error("DivisionByZero", to_string(e));
      if (a.exact && b.exact) {
        BigInt q;
        mpz_fdiv_q(q.get_mpz_t(), a.value.get_mpz_t(), b.value.get_mpz_t());
        return Magnitude::of(q);
      }
      if (a.is_zero())
        return a;
      BigInt lo = a.log_lo() - b.log_hi();
      if (lo < 0)
        throw Error("Undecidable", "quotient may vanish in " + to_string(e));
      return normalize(Magnitude::bounds(lo, a.log_hi() - b.log_lo() + 1));
    }
    case Op::Div: {
      Magnitude a = arg(0), b = arg(1);
      if (a.exact && b.exact && b.value != 0 && mpz_divisible_p(a.value.get_mpz_t(), b.value.get_mpz_t()))
        return Magnitude::of(a.value / b.value);
      throw Error("Undecidable", "inexact division in magnitude evaluation: " + to_string(e));
    }
    case Op::Pow: {
      Magnitude base = arg(0), ex = arg(1);
      if (!ex.exact)
        throw Error("ValueTooLarge", "exponent too large in " + to_string(e));
      return power(base, ex.value);
    }
    case Op::Exp2: {
      Magnitude ex = arg(0);
      return exp2(ex);
    }
    case Op::Min:
    case Op::Max: {
      Magnitude best = arg(0);
      for (size_t k = 1; k < e.args.size(); ++k) {
        Magnitude v = arg(k);
        auto c = compare(v, best);
        if (!c)
          throw Error("Undecidable", "cannot order operands of " + to_string(e));
        if ((e.op == Op::Min && *c < 0) || (e.op == Op::Max && *c > 0))
          best = v;
      }
      return best;
    }
    case Op::Floor:
    case Op::Ceil:
      return arg(0);
    case Op::Call: {
      auto it = defs_.find(e.name);
      if (it == defs_.end())
        throw Error("UnknownFunction", "no definition for '" + e.name + "'");
      return eval(*it->second, arg(0), depth + 1);
    }
    case Op::PrefixSum: {
      Magnitude upper = arg(1);
      Magnitude lower = e.args.size() > 2 ? arg(2) : Magnitude::of(0);
      if (!upper.exact || !lower.exact || upper.value - lower.value > 100000)
        throw Error("ValueTooLarge", "prefix_sum range too large for magnitude evaluation");
      Magnitude acc = Magnitude::of(0);
      for (BigInt j = lower.value; j < upper.value; ++j)
        acc = add(acc, eval(*e.args[0], Magnitude::of(j), depth + 1));
      return acc;
    }
    case Op::Neg:
      break;
    }
    throw Error("EvalError", "operator not supported in magnitude evaluation: " + to_string(e));
  }

  Magnitude eval(const ExprPtr &e, long n) const { return eval(*e, Magnitude::of(BigInt(n))); }

  static Magnitude add(const Magnitude &a, const Magnitude &b) {
    if (a.exact && b.exact)
      return normalize(Magnitude::of(a.value + b.value));
    if (a.is_zero())
      return b;
    if (b.is_zero())
      return a;
    BigInt lo = a.log_lo() > b.log_lo() ? a.log_lo() : b.log_lo();
    BigInt hi = (a.log_hi() > b.log_hi() ? a.log_hi() : b.log_hi()) + 1;
    return Magnitude::bounds(lo, hi);
  }

  static Magnitude mul(const Magnitude &a, const Magnitude &b) {
    if (a.is_zero() || b.is_zero())
      return Magnitude::of(0);
    if (a.exact && b.exact)
      return normalize(Magnitude::of(a.value * b.value));
    return Magnitude::bounds(a.log_lo() + b.log_lo(), a.log_hi() + b.log_hi());
  }

  static Magnitude power(const Magnitude &base, const BigInt &k) {
    if (k < 0)
      throw Error("EvalError", "negative exponent in magnitude evaluation");
    if (k == 0)
      return Magnitude::of(1);
    if (base.is_zero())
      return base;
    if (base.exact && base.value == 1)
      return base;
    if (base.exact && BigInt(static_cast<unsigned long>(bit_length(base.value))) * k <= BigInt(kExactBits))
      return Magnitude::of(nikodym::pow(base.value, k.get_ui()));
    if (base.exact && mpz_popcount(base.value.get_mpz_t()) == 1)
      return exp2(Magnitude::of(BigInt(static_cast<unsigned long>(bit_length(base.value) - 1)) * k));
    return Magnitude::bounds(base.log_lo() * k, base.log_hi() * k);
  }

  static Magnitude exp2(const Magnitude &ex) {
    if (!ex.exact)
      throw Error("ValueTooLarge", "exponent known only by bounds");
    if (ex.value < 0)
      throw Error("EvalError", "negative exponent in magnitude evaluation");
    if (ex.value <= BigInt(kExactBits))
      return Magnitude::of(pow2(ex.value.get_ui()));
    return Magnitude::bounds(ex.value, ex.value + 1);
  }

private:
  Definitions defs_;

  static Magnitude normalize(Magnitude m) {
    if (m.exact && bit_length(m.value) > kExactBits)
      return Magnitude::bounds(m.log_lo(), m.log_hi());
    return m;
  }
};

} // namespace nikodym
