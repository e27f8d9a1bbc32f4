#pragma once

// Integer/rational expression language used for weights, block lengths,
// growth functions and reduction rules. Expressions are written as
// s-expressions, e.g. "(mul 2 (pow n 2))" or "(mul n (f (f n)))".

#include "nikodym/rational.hpp"

#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nikodym {

enum class Op {
  Const,
  Var,
  Add,
  Sub, // truncated at 0
  Neg,
  Mul,
  Div, // exact rational division
  FloorDiv,
  Pow,
  Exp2,
  Min,
  Max,
  Ceil,
  Floor,
  Call,      // named single-argument function
  PrefixSum, // (prefix_sum BODY UPPER [LOWER]) = sum_{LOWER <= j < UPPER} BODY[n := j]
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  Op op;
  Rational value;             // Const
  std::string name;           // Var, Call
  std::vector<ExprPtr> args;
};

/// Named single-variable functions, each an expression in `n`.
using Definitions = std::map<std::string, ExprPtr>;

namespace detail {

struct OpName {
  const char *name;
  Op op;
  int min_args;
  int max_args; // -1 = variadic
};

inline const std::vector<OpName> &op_table() {
  static const std::vector<OpName> table = {
      {"add", Op::Add, 1, -1},       {"sub", Op::Sub, 2, 2},
      {"neg", Op::Neg, 1, 1},        {"mul", Op::Mul, 1, -1},
      {"div", Op::Div, 2, 2},        {"floordiv", Op::FloorDiv, 2, 2},
      {"pow", Op::Pow, 2, 2},        {"exp2", Op::Exp2, 1, 1},
      {"min", Op::Min, 1, -1},       {"max", Op::Max, 1, -1},
      {"ceil", Op::Ceil, 1, 1},      {"floor", Op::Floor, 1, 1},
      {"prefix_sum", Op::PrefixSum, 2, 3},
  };
  return table;
}

inline const OpName *find_op(const std::string &name) {
  for (const auto &entry : op_table())
    if (name == entry.name)
      return &entry;
  return nullptr;
}

inline const char *op_name(Op op) {
  for (const auto &entry : op_table())
    if (entry.op == op)
      return entry.name;
  return "?";
}

inline bool is_variable_name(const std::string &s) { return s == "n" || s == "i"; }

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr parse_all() {
    ExprPtr e = parse();
    skip_ws();
    if (pos_ != text_.size())
      fail("trailing input");
    return e;
  }

private:
  std::string_view text_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string &msg) const {
    throw Error("ParseError", msg + " at offset " + std::to_string(pos_) + " in '" +
                                  std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  std::string atom() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (start == pos_)
      fail("expected atom");
    return std::string(text_.substr(start, pos_ - start));
  }

  ExprPtr parse() {
    skip_ws();
    if (pos_ >= text_.size())
      fail("unexpected end of expression");
    if (text_[pos_] == ')')
      fail("unexpected ')'");
    if (text_[pos_] != '(')
      return parse_atom(atom());
    ++pos_;
    std::string head = atom();
    std::vector<ExprPtr> args;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size())
        fail("missing ')'");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      args.push_back(parse());
    }
    auto e = std::make_shared<Expr>();
    e->args = std::move(args);
    if (const OpName *op = find_op(head)) {
      int count = static_cast<int>(e->args.size());
      if (count < op->min_args || (op->max_args >= 0 && count > op->max_args))
        fail("wrong arity for '" + head + "'");
      e->op = op->op;
      return e;
    }
    if (is_variable_name(head) || std::isdigit(static_cast<unsigned char>(head[0])) || head[0] == '-')
      fail("'" + head + "' is not callable");
    if (e->args.size() != 1)
      fail("function '" + head + "' takes exactly one argument");
    e->op = Op::Call;
    e->name = head;
    return e;
  }

  ExprPtr parse_atom(const std::string &tok) {
    auto e = std::make_shared<Expr>();
    unsigned char c0 = static_cast<unsigned char>(tok[0]);
    if (std::isdigit(c0) || ((tok[0] == '-' || tok[0] == '+') && tok.size() > 1)) {
      e->op = Op::Const;
      e->value = parse_rational(tok);
      return e;
    }
    if (is_variable_name(tok)) {
      e->op = Op::Var;
      e->name = tok;
      return e;
    }
    fail("unknown symbol '" + tok + "'");
  }
};

} // namespace detail

inline ExprPtr parse_expr(std::string_view text) { return detail::Parser(text).parse_all(); }

inline ExprPtr constant(const Rational &q) {
  auto e = std::make_shared<Expr>();
  e->op = Op::Const;
  e->value = q;
  return e;
}

inline ExprPtr variable(const std::string &name = "n") {
  auto e = std::make_shared<Expr>();
  e->op = Op::Var;
  e->name = name;
  return e;
}

inline ExprPtr make_op(Op op, std::vector<ExprPtr> args, std::string name = {}) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->args = std::move(args);
  e->name = std::move(name);
  return e;
}

inline std::string to_string(const Expr &e) {
  switch (e.op) {
  case Op::Const:
    return is_integer(e.value) ? e.value.get_num().get_str() : to_string(e.value);
  case Op::Var:
    return e.name;
  default:
    break;
  }
  std::string out = "(";
  out += e.op == Op::Call ? e.name : detail::op_name(e.op);
  for (const auto &a : e.args) {
    out += ' ';
    out += to_string(*a);
  }
  out += ')';
  return out;
}

inline std::string to_string(const ExprPtr &e) { return to_string(*e); }

inline bool mentions_variable(const Expr &e, const std::string &var) {
  if (e.op == Op::Var)
    return e.name == var;
  for (size_t k = 0; k < e.args.size(); ++k) {
    // prefix_sum binds n inside its body
    if (e.op == Op::PrefixSum && k == 0 && var == "n")
      continue;
    if (mentions_variable(*e.args[k], var))
      return true;
  }
  return false;
}

inline bool has_variables(const Expr &e) {
  return mentions_variable(e, "n") || mentions_variable(e, "i");
}

/// Replaces free occurrences of `var` by `replacement`.
inline ExprPtr substitute(const ExprPtr &e, const std::string &var, const ExprPtr &replacement) {
  if (e->op == Op::Var)
    return e->name == var ? replacement : e;
  if (e->args.empty())
    return e;
  auto copy = std::make_shared<Expr>(*e);
  for (size_t k = 0; k < copy->args.size(); ++k) {
    if (e->op == Op::PrefixSum && k == 0 && var == "n")
      continue;
    copy->args[k] = substitute(e->args[k], var, replacement);
  }
  return copy;
}

/// Expands every named call using `defs`; unknown names are left in place.
inline ExprPtr inline_calls(const ExprPtr &e, const Definitions &defs, int depth = 0) {
  if (depth > 64)
    throw Error("EvalError", "function definitions nest too deeply (recursive definition?)");
  if (e->args.empty())
    return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto &a : copy->args)
    a = inline_calls(a, defs, depth);
  if (e->op == Op::Call) {
    auto it = defs.find(e->name);
    if (it == defs.end())
      return copy;
    return inline_calls(substitute(it->second, "n", copy->args[0]), defs, depth + 1);
  }
  return copy;
}

/// Variable bindings for evaluation.
struct Bindings {
  std::optional<Rational> n;
  std::optional<Rational> i;
};

/// Exact evaluator. Prefix sums and named-function calls are memoized; the
/// caches are guarded so one evaluator may be shared between threads.
class Evaluator {
public:
  /// Results whose bit length exceeds this bound raise ValueTooLarge.
  static constexpr size_t kMaxBits = size_t(1) << 22;

  explicit Evaluator(Definitions defs = {}) : defs_(std::move(defs)) {}

  const Definitions &definitions() const { return defs_; }

  Rational eval(const Expr &e, const Bindings &b) const;
  Rational eval(const ExprPtr &e, const Rational &n) const {
    Bindings b;
    b.n = n;
    return eval(*e, b);
  }

  BigInt eval_int(const ExprPtr &e, const Rational &n) const {
    Rational q = eval(e, n);
    if (!is_integer(q))
      throw Error("EvalError", to_string(e) + " is not an integer at n = " + to_string(n));
    return q.get_num();
  }

  Rational call(const std::string &name, const Rational &arg) const;

private:
  Definitions defs_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Rational> call_cache_;
  // key: body|lower -> partial sums s[k] = sum_{lower <= j < lower + k} body(j)
  mutable std::unordered_map<std::string, std::vector<Rational>> prefix_cache_;

  Rational prefix_sum(const Expr &body, const BigInt &lower, const BigInt &upper) const;
  static void check_size(const Rational &q) {
    if (bit_length(q.get_num()) > kMaxBits || bit_length(q.get_den()) > kMaxBits)
      throw Error("ValueTooLarge", "intermediate value exceeds " + std::to_string(kMaxBits) + " bits");
  }
};

inline Rational Evaluator::call(const std::string &name, const Rational &arg) const {
  auto it = defs_.find(name);
  if (it == defs_.end())
    throw Error("UnknownFunction", "no definition for '" + name + "'");
  std::string key = name + "|" + to_string(arg);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto hit = call_cache_.find(key);
    if (hit != call_cache_.end())
      return hit->second;
  }
  Bindings b;
  b.n = arg;
  Rational v = eval(*it->second, b);
  std::lock_guard<std::mutex> lock(mutex_);
  call_cache_.emplace(key, v);
  return v;
}

inline Rational Evaluator::prefix_sum(const Expr &body, const BigInt &lower, const BigInt &upper) const {
  if (upper <= lower)
    return Rational(0);
  std::string key = to_string(body) + "|" + lower.get_str();
  BigInt count_big = upper - lower;
  if (!count_big.fits_ulong_p() || count_big > 50'000'000)
    throw Error("ValueTooLarge", "prefix_sum over " + count_big.get_str() + " terms");
  size_t count = count_big.get_ui();
  std::vector<Rational> known;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = prefix_cache_.find(key);
    if (it != prefix_cache_.end()) {
      if (it->second.size() > count)
        return it->second[count];
      known = it->second;
    }
  }
  if (known.empty())
    known.push_back(Rational(0));
  Bindings b;
  for (size_t k = known.size() - 1; k < count; ++k) {
    b.n = Rational(lower + BigInt(static_cast<unsigned long>(k)));
    Rational v = known.back() + eval(body, b);
    check_size(v);
    known.push_back(v);
  }
  Rational result = known[count];
  std::lock_guard<std::mutex> lock(mutex_);
  auto &slot = prefix_cache_[key];
  if (slot.size() < known.size())
    slot = std::move(known);
  return result;
}

inline Rational Evaluator::eval(const Expr &e, const Bindings &b) const {
  auto arg = [&](size_t k) { return eval(*e.args[k], b); };
  switch (e.op) {
  case Op::Const:
    return e.value;
  case Op::Var: {
    const auto &slot = e.name == "n" ? b.n : b.i;
    if (!slot)
      throw Error("EvalError", "unbound variable '" + e.name + "'");
    return *slot;
  }
  case Op::Add: {
    Rational s = 0;
    for (size_t k = 0; k < e.args.size(); ++k)
      s += arg(k);
    check_size(s);
    return s;
  }
  case Op::Sub: {
    Rational d = arg(0) - arg(1);
    return d < 0 ? Rational(0) : d;
  }
  case Op::Neg:
    return -arg(0);
  case Op::Mul: {
    Rational p = 1;
    for (size_t k = 0; k < e.args.size(); ++k) {
      p *= arg(k);
      check_size(p);
    }
    return p;
  }
  case Op::Div: {
    Rational d = arg(1);
    if (d == 0)
      throw Error("DivisionByZero", to_string(e));
    return arg(0) / d;
  }
  case Op::FloorDiv: {
    Rational d = arg(1);
    if (d == 0)
      throw Error("DivisionByZero", to_string(e));
    return Rational(floor(arg(0) / d));
  }
  case Op::Pow: {
    Rational base = arg(0);
    Rational ex = arg(1);
    if (!is_integer(ex))
      throw Error("EvalError", "non-integer exponent in " + to_string(e));
    if (base == 0 || base == 1 || base == -1) {
      if (ex == 0)
        return Rational(1);
      if (base == 0)
        return ex > 0 ? Rational(0) : throw Error("DivisionByZero", to_string(e));
      if (base == 1)
        return Rational(1);
      return ex.get_num().get_ui() % 2 == 0 ? Rational(1) : Rational(-1);
    }
    BigInt mag = ex.get_num() < 0 ? BigInt(-ex.get_num()) : ex.get_num();
    size_t bits = std::max(bit_length(base.get_num()), bit_length(base.get_den()));
    if (!mag.fits_slong_p() || BigInt(mag) * BigInt(static_cast<unsigned long>(bits)) > BigInt(static_cast<unsigned long>(kMaxBits)))
      throw Error("ValueTooLarge", to_string(e) + " at exponent " + ex.get_num().get_str());
    return pow(base, ex.get_num().get_si());
  }
  case Op::Exp2: {
    Rational ex = arg(0);
    if (!is_integer(ex))
      throw Error("EvalError", "non-integer exponent in " + to_string(e));
    BigInt z = ex.get_num();
    BigInt mag = z < 0 ? BigInt(-z) : z;
    if (mag > BigInt(static_cast<unsigned long>(kMaxBits)))
      throw Error("ValueTooLarge", "2^" + z.get_str());
    Rational r(pow2(mag.get_ui()));
    return z < 0 ? Rational(1 / r) : r;
  }
  case Op::Min:
  case Op::Max: {
    Rational best = arg(0);
    for (size_t k = 1; k < e.args.size(); ++k) {
      Rational v = arg(k);
      if (e.op == Op::Min ? v < best : v > best)
        best = v;
    }
    return best;
  }
  case Op::Ceil:
    return Rational(ceil(arg(0)));
  case Op::Floor:
    return Rational(floor(arg(0)));
  case Op::Call:
    return call(e.name, arg(0));
  case Op::PrefixSum: {
    Rational upper = arg(1);
    Rational lower = e.args.size() > 2 ? arg(2) : Rational(0);
    if (!is_integer(upper) || !is_integer(lower))
      throw Error("EvalError", "prefix_sum bounds must be integers in " + to_string(e));
    return prefix_sum(*e.args[0], lower.get_num(), upper.get_num());
  }
  }
  throw Error("EvalError", "unhandled operator");
}

/// An expression bundled with the definitions it may call.
struct Function {
  ExprPtr expr;
  std::shared_ptr<const Evaluator> evaluator;

  Function() = default;
  Function(ExprPtr e, Definitions defs = {})
      : expr(std::move(e)), evaluator(std::make_shared<Evaluator>(std::move(defs))) {}

  static Function parse(std::string_view text, Definitions defs = {}) {
    return Function(parse_expr(text), std::move(defs));
  }

  explicit operator bool() const { return static_cast<bool>(expr); }
  Rational operator()(const Rational &n) const { return evaluator->eval(expr, n); }
  Rational operator()(long n) const { return (*this)(Rational(n)); }
  Rational operator()(const BigInt &n) const { return (*this)(Rational(n)); }
  BigInt at_int(const Rational &n) const { return evaluator->eval_int(expr, n); }
  BigInt at_int(long n) const { return at_int(Rational(n)); }
  Rational eval(const Rational &n, const Rational &i) const {
    Bindings b;
    b.n = n;
    b.i = i;
    return evaluator->eval(*expr, b);
  }
  const Definitions &defs() const { return evaluator->definitions(); }
  /// The expression with every named call expanded.
  ExprPtr expanded() const { return inline_calls(expr, defs()); }
  std::string str() const { return to_string(expr); }
};

inline Definitions parse_definitions(const std::map<std::string, std::string> &texts) {
  Definitions defs;
  for (const auto &[name, text] : texts) {
    if (detail::find_op(name) || detail::is_variable_name(name))
      throw Error("ParseError", "reserved function name '" + name + "'");
    defs[name] = parse_expr(text);
  }
  return defs;
}

} // namespace nikodym
