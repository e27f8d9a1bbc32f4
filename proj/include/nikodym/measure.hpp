#pragma once

// Finitely supported signed measures on omega + {PF}.

#include "nikodym/rational.hpp"

#include <concepts>
#include <map>
#include <optional>
#include <vector>

namespace nikodym {

/// A natural index or the distinguished point PF. PF sorts after every index.
struct Point {
  bool pf = false;
  BigInt index;

  Point() = default;
  Point(long i) : index(i) {}
  Point(const BigInt &i) : index(i) {}
  static Point PF() {
    Point p;
    p.pf = true;
    return p;
  }

  bool is_pf() const { return pf; }

  friend bool operator<(const Point &a, const Point &b) {
    if (a.pf != b.pf)
      return b.pf;
    return !a.pf && a.index < b.index;
  }
  friend bool operator==(const Point &a, const Point &b) {
    return a.pf == b.pf && (a.pf || a.index == b.index);
  }
  friend bool operator!=(const Point &a, const Point &b) { return !(a == b); }
};

inline std::string to_string(const Point &p) { return p.pf ? "PF" : p.index.get_str(); }

class FinMeasure {
public:
  using Atoms = std::map<Point, Rational>;

  FinMeasure() = default;

  /// Zero weights are dropped; repeated points are summed.
  static FinMeasure from_pairs(const std::vector<std::pair<Point, Rational>> &pairs) {
    FinMeasure m;
    for (const auto &[p, w] : pairs)
      m.add(p, w);
    return m;
  }

  static FinMeasure dirac(const Point &p, const Rational &w = 1) {
    FinMeasure m;
    m.add(p, w);
    return m;
  }

  /// Uniform weight w on [start, start + count).
  static FinMeasure uniform(const BigInt &start, unsigned long count, const Rational &w) {
    FinMeasure m;
    for (unsigned long k = 0; k < count; ++k)
      m.add(Point(start + BigInt(k)), w);
    return m;
  }

  void add(const Point &p, const Rational &w) {
    if (w == 0)
      return;
    auto [it, inserted] = atoms_.emplace(p, w);
    if (!inserted) {
      it->second += w;
      if (it->second == 0)
        atoms_.erase(it);
    }
  }

  const Atoms &atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  size_t size() const { return atoms_.size(); }

  Rational weight(const Point &p) const {
    auto it = atoms_.find(p);
    return it == atoms_.end() ? Rational(0) : it->second;
  }

  std::vector<Point> support() const {
    std::vector<Point> out;
    out.reserve(atoms_.size());
    for (const auto &[p, w] : atoms_)
      out.push_back(p);
    return out;
  }

  bool charges_pf() const { return !atoms_.empty() && atoms_.rbegin()->first.pf; }

  bool nonnegative() const {
    for (const auto &[p, w] : atoms_)
      if (w < 0)
        return false;
    return true;
  }

  /// Total signed mass of the whole space.
  Rational total() const {
    Rational s = 0;
    for (const auto &[p, w] : atoms_)
      s += w;
    return s;
  }

  /// Smallest and largest natural index in the support.
  std::optional<BigInt> min_index() const {
    for (const auto &[p, w] : atoms_)
      if (!p.pf)
        return p.index;
    return std::nullopt;
  }
  std::optional<BigInt> max_index() const {
    for (auto it = atoms_.rbegin(); it != atoms_.rend(); ++it)
      if (!it->first.pf)
        return it->first.index;
    return std::nullopt;
  }

  friend bool operator==(const FinMeasure &a, const FinMeasure &b) { return a.atoms_ == b.atoms_; }
  friend bool operator!=(const FinMeasure &a, const FinMeasure &b) { return !(a == b); }

private:
  Atoms atoms_;
};

inline std::string to_string(const FinMeasure &m) {
  if (m.empty())
    return "0";
  std::string out;
  for (const auto &[p, w] : m.atoms()) {
    if (!out.empty())
      out += " + ";
    out += to_string(w) + "*d" + to_string(p);
  }
  return out;
}

inline Rational norm(const FinMeasure &m) {
  Rational s = 0;
  for (const auto &[p, w] : m.atoms())
    s += abs(w);
  return s;
}

/// |m|(S) for a point predicate.
template <class Pred>
  requires std::predicate<Pred, const Point &>
Rational variation(const FinMeasure &m, Pred &&in) {
  Rational s = 0;
  for (const auto &[p, w] : m.atoms())
    if (in(p))
      s += abs(w);
  return s;
}

/// Signed value m(S).
template <class Pred>
  requires std::predicate<Pred, const Point &>
Rational value(const FinMeasure &m, Pred &&in) {
  Rational s = 0;
  for (const auto &[p, w] : m.atoms())
    if (in(p))
      s += w;
  return s;
}

template <class Pred>
  requires std::predicate<Pred, const Point &>
FinMeasure restrict(const FinMeasure &m, Pred &&in) {
  FinMeasure out;
  for (const auto &[p, w] : m.atoms())
    if (in(p))
      out.add(p, w);
  return out;
}

/// Restriction to omega (drops the PF atom).
inline FinMeasure restrict_omega(const FinMeasure &m) {
  return restrict(m, [](const Point &p) { return !p.pf; });
}

struct AtomBounds {
  Rational at_plus, at_minus;
};

inline AtomBounds atom_bounds(const FinMeasure &m) {
  if (m.empty())
    throw Error("EmptyMeasure", "at+/at- of the empty measure");
  if (!m.nonnegative())
    throw Error("NegativeMeasure", "at+/at- of a signed measure");
  AtomBounds b{m.atoms().begin()->second, m.atoms().begin()->second};
  for (const auto &[p, w] : m.atoms()) {
    if (w > b.at_plus)
      b.at_plus = w;
    if (w < b.at_minus)
      b.at_minus = w;
  }
  return b;
}

inline FinMeasure combine(const Rational &ca, const FinMeasure &a, const Rational &cb, const FinMeasure &b) {
  FinMeasure out;
  if (ca != 0)
    for (const auto &[p, w] : a.atoms())
      out.add(p, ca * w);
  if (cb != 0)
    for (const auto &[p, w] : b.atoms())
      out.add(p, cb * w);
  return out;
}

inline FinMeasure scale(const FinMeasure &m, const Rational &c) { return combine(c, m, 0, FinMeasure()); }

/// Variation measure |m|.
inline FinMeasure absolute(const FinMeasure &m) {
  FinMeasure out;
  for (const auto &[p, w] : m.atoms())
    out.add(p, abs(w));
  return out;
}

/// Image measure under a map on naturals; `map` returns nullopt where undefined.
template <class Map>
  requires std::invocable<Map, const BigInt &>
FinMeasure pushforward(const FinMeasure &m, Map &&map) {
  FinMeasure out;
  for (const auto &[p, w] : m.atoms()) {
    if (p.pf)
      throw Error("HasPFAtom", "pushforward of a measure charging PF");
    std::optional<BigInt> image = map(p.index);
    if (!image)
      throw Error("UndefinedAt", "map undefined at " + p.index.get_str());
    out.add(Point(*image), w);
  }
  return out;
}

inline bool disjoint_supports(const FinMeasure &a, const FinMeasure &b) {
  auto x = a.atoms().begin(), y = b.atoms().begin();
  while (x != a.atoms().end() && y != b.atoms().end()) {
    if (x->first == y->first)
      return false;
    if (x->first < y->first)
      ++x;
    else
      ++y;
  }
  return true;
}

} // namespace nikodym
