#pragma once

// Functions omega -> omega: an explicit table on [0, N) plus an optional
// closed form. The blockwise closed form is the greedy transport between two
// uniform block generators, evaluated arithmetically so that huge blocks are
// never materialized.

#include "nikodym/generator.hpp"

namespace nikodym {

/// Greedy transport from the blocks of `domain` (mu_n) onto the blocks of
/// `target` (lambda_n), both uniform, for n >= threshold; earlier points map to 0.
/// Inside block n every target point takes q(n) = floor(w_lambda / w_mu)
/// consecutive source points and the leftover goes to the first target point.
struct BlockTransportRule {
  std::shared_ptr<const BlockGenerator> domain, target;
  long threshold = 1;

  BigInt quota(long n) const { return floor(target->uniform_weight(n) / domain->uniform_weight(n)); }
  BigInt leftover(long n) const { return domain->length(n) - target->length(n) * quota(n); }

  std::optional<BigInt> at(const BigInt &x) const {
    auto n = domain->index_of(x);
    if (!n) {
      // gap before the first block
      if (x >= 0 && x < domain->start(domain->first_index()))
        return BigInt(0);
      return std::nullopt;
    }
    if (*n < threshold)
      return BigInt(0);
    BigInt q = quota(*n);
    if (q < 1)
      return std::nullopt;
    BigInt j = x - domain->start(*n);
    BigInt sa = target->start(*n);
    if (j < target->length(*n) * q)
      return BigInt(sa + j / q);
    return sa;
  }

  std::string describe() const {
    return "(block_transport " + domain->label() + " -> " + target->label() + " from " + std::to_string(threshold) + ")";
  }
};

struct ReductionTable {
  std::vector<BigInt> table; // f(0), ..., f(N-1)
  std::optional<Function> rule;
  std::shared_ptr<const BlockTransportRule> blocks;
  std::optional<bool> finite_to_one;
  std::optional<BigInt> fiber_bound; // max fiber size on the recorded domain
  std::string fiber_evidence;
  std::string provenance;

  static ReductionTable identity(long size = 0) {
    ReductionTable r;
    for (long k = 0; k < size; ++k)
      r.table.emplace_back(k);
    r.rule = Function::parse("n");
    r.finite_to_one = true;
    r.fiber_bound = 1;
    r.fiber_evidence = "injective";
    r.provenance = "identity";
    return r;
  }

  static ReductionTable from_values(std::vector<BigInt> values, std::optional<bool> finite_to_one = {}) {
    ReductionTable r;
    r.table = std::move(values);
    r.finite_to_one = finite_to_one;
    r.provenance = "explicit table";
    return r;
  }

  bool is_identity() const { return rule && rule->str() == "n" && !blocks; }

  std::optional<BigInt> at(const BigInt &x) const {
    if (x < 0)
      return std::nullopt;
    if (x < BigInt(static_cast<unsigned long>(table.size())))
      return table[x.get_ui()];
    if (rule) {
      Rational v = (*rule)(x);
      if (!is_integer(v) || v < 0)
        throw Error("ValidationError", "rule value " + to_string(v) + " at " + x.get_str() + " is not a natural");
      return v.get_num();
    }
    if (blocks)
      return blocks->at(x);
    return std::nullopt;
  }

  BigInt operator()(const BigInt &x) const {
    auto v = at(x);
    if (!v)
      throw Error("UndefinedAt", "reduction undefined at " + x.get_str());
    return *v;
  }

  /// Table and closed form must agree on the table's domain.
  void validate() const {
    for (size_t k = 0; k < table.size(); ++k) {
      if (table[k] < 0)
        throw Error("ValidationError", "table value at " + std::to_string(k) + " is negative");
      std::optional<BigInt> closed;
      if (rule)
        closed = (*rule)(Rational(static_cast<long>(k))).get_num();
      else if (blocks)
        closed = blocks->at(BigInt(static_cast<unsigned long>(k)));
      if ((rule || blocks) && closed != table[k])
        throw Error("ValidationError", "table and rule disagree at " + std::to_string(k));
    }
  }

  std::string rule_text() const {
    if (rule)
      return rule->str();
    if (blocks)
      return blocks->describe();
    return "";
  }

  /// Fiber sizes of the table (value -> count).
  std::map<BigInt, unsigned long> fibers() const {
    std::map<BigInt, unsigned long> out;
    for (const auto &v : table)
      ++out[v];
    return out;
  }
};

inline FinMeasure pushforward(const FinMeasure &m, const ReductionTable &f) {
  return pushforward(m, [&](const BigInt &x) { return f.at(x); });
}

} // namespace nikodym
