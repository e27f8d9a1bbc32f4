#pragma once

// Greedy transport of a non-negative measure mu on B onto lambda on A with
// |lambda(C) - mu(f^-1[C])| <= eps for every C subset of A.

#include "nikodym/measure.hpp"

#include <random>

namespace nikodym {

struct TransportPart {
  BigInt target;
  std::vector<BigInt> atoms; // X_a, ascending
  Rational mass;
  bool exhausted = false; // ran out of atoms before reaching lambda({a})
};

struct TransportResult {
  std::map<BigInt, BigInt> map; // B -> A
  std::vector<TransportPart> parts;
  std::vector<BigInt> leftover; // Y, sent to the least point of A
  Rational leftover_mass;
  BigInt sink;
  Rational eps;
};

/// Subset check of a transport given per-target masses: lam[k] = lambda({a_k}),
/// pushed[k] = mu(f^-1{a_k}).
struct TransportCheck {
  std::string mode;        // exhaustive | sampled | closed_form
  unsigned long subsets = 0;
  Rational worst_checked;  // max error over the enumerated subsets
  Rational worst;          // max over all subsets: max(sum of positive, sum of negative differences)
  Rational eps;
  bool ok = true;
};

inline constexpr size_t kExhaustiveTargets = 12;
inline constexpr int kSampledSubsets = 256;

inline TransportCheck check_transport(const std::vector<Rational> &lam, const std::vector<Rational> &pushed,
                                      const Rational &eps, uint64_t seed = 0) {
  const size_t m = lam.size();
  std::vector<Rational> d(m);
  Rational pos = 0, neg = 0;
  for (size_t k = 0; k < m; ++k) {
    d[k] = lam[k] - pushed[k];
    (d[k] > 0 ? pos : neg) += abs(d[k]);
  }
  TransportCheck c;
  c.eps = eps;
  c.worst = pos > neg ? pos : neg;
  auto consider = [&](const Rational &err) {
    if (abs(err) > c.worst_checked)
      c.worst_checked = abs(err);
    ++c.subsets;
  };
  if (m <= kExhaustiveTargets) {
    c.mode = "exhaustive";
    // gray-code walk: one element changes per step
    Rational sum = 0;
    consider(sum);
    std::vector<bool> in(m, false);
    for (size_t step = 1; step < (size_t(1) << m); ++step) {
      size_t bit = static_cast<size_t>(__builtin_ctzll(step));
      in[bit] = !in[bit];
      sum += in[bit] ? d[bit] : Rational(-d[bit]);
      consider(sum);
    }
  } else {
    c.mode = "sampled";
    Rational total = 0;
    for (size_t k = 0; k < m; ++k) {
      consider(d[k]);
      total += d[k];
    }
    consider(total);
    std::mt19937_64 rng(seed);
    for (int s = 0; s < kSampledSubsets; ++s) {
      Rational sum = 0;
      for (size_t k = 0; k < m; ++k)
        if (rng() & 1)
          sum += d[k];
      consider(sum);
    }
  }
  c.ok = c.worst_checked <= eps && c.worst <= eps;
  return c;
}

inline TransportResult transport(const FinMeasure &lam, const FinMeasure &mu, const Rational &eps) {
  if (eps <= 0)
    throw Error("ValidationError", "eps must be positive");
  if (lam.empty() || mu.empty())
    throw Error("EmptyMeasure", "transport needs non-empty measures");
  if (lam.charges_pf() || mu.charges_pf())
    throw Error("HasPFAtom", "transport works on omega only");
  if (!lam.nonnegative() || !mu.nonnegative())
    throw Error("ValidationError", "transport needs non-negative measures");
  if (lam.total() != mu.total())
    throw Error("MassMismatch", "lambda(A) = " + to_string(lam.total()) + " but mu(B) = " + to_string(mu.total()));
  Rational cap = eps / Rational(2 * static_cast<long>(lam.size()));
  Rational top = atom_bounds(mu).at_plus;
  if (top > cap)
    throw Error("AtomTooLarge", "at+(mu) = " + to_string(top) + " > eps/(2|A|) = " + to_string(cap));

  TransportResult r;
  r.eps = eps;
  r.sink = lam.atoms().begin()->first.index;
  auto it = mu.atoms().begin();
  for (const auto &[a, target] : lam.atoms()) {
    TransportPart part{a.index, {}, 0, false};
    while (it != mu.atoms().end() && part.mass + it->second <= target) {
      part.atoms.push_back(it->first.index);
      part.mass += it->second;
      r.map[it->first.index] = a.index;
      ++it;
    }
    part.exhausted = it == mu.atoms().end() && part.mass < target;
    r.parts.push_back(std::move(part));
  }
  for (; it != mu.atoms().end(); ++it) {
    r.leftover.push_back(it->first.index);
    r.leftover_mass += it->second;
    r.map[it->first.index] = r.sink;
  }
  return r;
}

/// Per-target masses mu(f^-1{a}) in ascending order of A.
inline std::vector<Rational> pushed_masses(const TransportResult &r) {
  std::vector<Rational> out;
  for (const auto &p : r.parts)
    out.push_back(p.mass);
  if (!out.empty())
    out.front() += r.leftover_mass;
  return out;
}

/// Part bounds lambda({a}) - eps/(2|A|) < mu(X_a) <= lambda({a}) and mu(Y) < eps/2.
inline bool part_bounds_hold(const FinMeasure &lam, const TransportResult &r) {
  Rational slack = r.eps / Rational(2 * static_cast<long>(lam.size()));
  for (const auto &p : r.parts) {
    Rational target = lam.weight(Point(p.target));
    if (p.mass > target)
      return false;
    if (!p.exhausted && !(target - slack < p.mass))
      return false;
  }
  return r.leftover_mass < r.eps / 2;
}

/// Brute force over all subsets of A by explicit preimages, independent of pushed_masses.
inline Rational brute_force_worst(const FinMeasure &lam, const FinMeasure &mu, const TransportResult &r) {
  std::vector<BigInt> targets;
  for (const auto &[a, w] : lam.atoms())
    targets.push_back(a.index);
  if (targets.size() > 20)
    throw Error("ValueTooLarge", "brute force over 2^" + std::to_string(targets.size()) + " subsets");
  Rational worst = 0;
  for (size_t mask = 0; mask < (size_t(1) << targets.size()); ++mask) {
    std::vector<BigInt> chosen;
    for (size_t k = 0; k < targets.size(); ++k)
      if (mask >> k & 1)
        chosen.push_back(targets[k]);
    auto in_c = [&](const BigInt &x) { return std::binary_search(chosen.begin(), chosen.end(), x); };
    Rational lc = 0, mc = 0;
    for (const auto &[a, w] : lam.atoms())
      if (in_c(a.index))
        lc += w;
    for (const auto &[b, w] : mu.atoms())
      if (in_c(r.map.at(b.index)))
        mc += w;
    if (abs(lc - mc) > worst)
      worst = abs(lc - mc);
  }
  return worst;
}

} // namespace nikodym
