#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace nikodym {

using BigInt = mpz_class;
using Rational = mpq_class;

/// Base class of every error raised by the library. `code` is a stable
/// machine-readable identifier (e.g. "MassMismatch"), `what()` carries detail.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string &detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)), detail_(detail) {}
  const std::string &code() const noexcept { return code_; }
  const std::string &detail() const noexcept { return detail_; }

private:
  std::string code_, detail_;
};

inline Rational make_rational(const BigInt &num, const BigInt &den) {
  if (den == 0)
    throw Error("ParseError", "zero denominator");
  Rational q(num, den);
  q.canonicalize();
  return q;
}

inline Rational make_rational(long num, long den = 1) {
  return make_rational(BigInt(num), BigInt(den));
}

/// Canonical "p/q" form with q > 0; integers keep the "/1" suffix.
inline std::string to_string(const Rational &q) {
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

inline std::string to_string(const BigInt &z) { return z.get_str(); }

inline BigInt parse_bigint(std::string_view text) {
  std::string s(text);
  if (s.empty())
    throw Error("ParseError", "empty integer literal");
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size())
    throw Error("ParseError", "bad integer literal '" + s + "'");
  for (size_t k = i; k < s.size(); ++k)
    if (s[k] < '0' || s[k] > '9')
      throw Error("ParseError", "bad integer literal '" + s + "'");
  BigInt z;
  z.set_str(s[0] == '+' ? s.substr(1) : s, 10);
  return z;
}

/// Accepts "p/q" or "p"; the result is canonicalized.
inline Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos)
    return Rational(parse_bigint(text));
  BigInt den = parse_bigint(text.substr(slash + 1));
  if (den == 0)
    throw Error("ParseError", "zero denominator in '" + std::string(text) + "'");
  return make_rational(parse_bigint(text.substr(0, slash)), den);
}

inline Rational abs(const Rational &q) { return q < 0 ? Rational(-q) : q; }

inline BigInt floor(const Rational &q) {
  BigInt r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline BigInt ceil(const Rational &q) {
  BigInt r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline bool is_integer(const Rational &q) { return q.get_den() == 1; }

inline BigInt pow(const BigInt &base, unsigned long exp) {
  BigInt r;
  mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), exp);
  return r;
}

inline Rational pow(const Rational &base, long exp) {
  if (exp == 0)
    return Rational(1);
  if (base == 0 && exp < 0)
    throw Error("DivisionByZero", "0 raised to a negative power");
  unsigned long e = exp < 0 ? static_cast<unsigned long>(-exp) : static_cast<unsigned long>(exp);
  Rational r = make_rational(pow(base.get_num(), e), pow(base.get_den(), e));
  if (exp < 0)
    r = 1 / r;
  return r;
}

inline BigInt pow2(unsigned long exp) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, exp);
  return r;
}

/// Bit length of |z| (0 for z = 0).
inline size_t bit_length(const BigInt &z) {
  return z == 0 ? 0 : mpz_sizeinbase(z.get_mpz_t(), 2);
}

/// Converts to unsigned long, failing with `code` if it does not fit.
inline unsigned long to_ulong(const BigInt &z, const char *code = "ValueTooLarge") {
  if (z < 0 || !z.fits_ulong_p())
    throw Error(code, "integer " + z.get_str() + " out of machine range");
  return z.get_ui();
}

/// Exact test of q >= sqrt(r) for q, r >= 0.
inline bool at_least_sqrt(const Rational &q, const Rational &r) {
  return q >= 0 && q * q >= r;
}

} // namespace nikodym
