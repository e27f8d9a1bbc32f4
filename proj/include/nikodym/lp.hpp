#pragma once

// Exact dictionary simplex for  max c.x  s.t.  A x <= b, x >= 0  with b >= 0.
// Bland's rule guarantees termination; all arithmetic is rational.

#include "nikodym/rational.hpp"

#include <vector>

namespace nikodym::lp {

struct Result {
  enum class Status { Optimal, Unbounded } status = Status::Optimal;
  Rational value;
  std::vector<Rational> x;
  long pivots = 0;
};

inline Result maximize(const std::vector<Rational> &c, const std::vector<std::vector<Rational>> &A,
                       const std::vector<Rational> &b) {
  const size_t n = c.size(), m = b.size();
  for (const auto &bi : b)
    if (bi < 0)
      throw Error("InternalError", "simplex needs b >= 0 (origin feasible)");
  // dictionary: x_basic[r] = rhs[r] - sum_j coef[r][j] * x_nonbasic[j]
  //             z        = value   + sum_j obj[j]     * x_nonbasic[j]
  std::vector<std::vector<Rational>> coef = A;
  std::vector<Rational> rhs = b, obj = c;
  Rational value = 0;
  std::vector<size_t> nonbasic(n), basic(m); // variable ids: 0..n-1 originals, n.. slacks
  for (size_t j = 0; j < n; ++j)
    nonbasic[j] = j;
  for (size_t r = 0; r < m; ++r)
    basic[r] = n + r;

  Result res;
  for (;;) {
    // entering: smallest variable id with positive reduced cost
    size_t enter = n;
    for (size_t j = 0; j < n; ++j)
      if (obj[j] > 0 && (enter == n || nonbasic[j] < nonbasic[enter]))
        enter = j;
    if (enter == n)
      break;
    size_t leave = m;
    Rational best;
    for (size_t r = 0; r < m; ++r) {
      if (coef[r][enter] <= 0)
        continue;
      Rational ratio = rhs[r] / coef[r][enter];
      if (leave == m || ratio < best || (ratio == best && basic[r] < basic[leave])) {
        leave = r;
        best = ratio;
      }
    }
    if (leave == m) {
      res.status = Result::Status::Unbounded;
      return res;
    }
    // pivot: x_enter = rhs/a - sum_{j != enter} (coef/a) x_j - (1/a) x_leave
    Rational a = coef[leave][enter];
    std::vector<Rational> &row = coef[leave];
    rhs[leave] /= a;
    for (size_t j = 0; j < n; ++j)
      row[j] = j == enter ? Rational(1) / a : row[j] / a;
    for (size_t r = 0; r < m; ++r) {
      if (r == leave || coef[r][enter] == 0)
        continue;
      Rational k = coef[r][enter];
      rhs[r] -= k * rhs[leave];
      for (size_t j = 0; j < n; ++j)
        coef[r][j] = j == enter ? Rational(-k * row[j]) : Rational(coef[r][j] - k * row[j]);
    }
    Rational k = obj[enter];
    value += k * rhs[leave];
    for (size_t j = 0; j < n; ++j)
      obj[j] = j == enter ? Rational(-k * row[j]) : Rational(obj[j] - k * row[j]);
    std::swap(basic[leave], nonbasic[enter]);
    ++res.pivots;
  }
  res.value = value;
  res.x.assign(n, 0);
  for (size_t r = 0; r < m; ++r)
    if (basic[r] < n)
      res.x[basic[r]] = rhs[r];
  return res;
}

} // namespace nikodym::lp
