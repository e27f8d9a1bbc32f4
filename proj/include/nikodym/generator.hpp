#pragma once

// Block generators: a sequence of non-negative measures mu_n with pairwise
// disjoint interval supports. Blocks are addressed arithmetically so that
// astronomically long blocks never need to be materialized.

#include "nikodym/asymptotics.hpp"
#include "nikodym/intervals.hpp"
#include "nikodym/measure.hpp"

#include <memory>
#include <mutex>
#include <unordered_map>

namespace nikodym {

class BlockGenerator {
public:
  enum class Kind { Rule, Phi, AsymptoticDensity, Table };

  /// Blocks with the given length(n) and weight(n, i), n >= first. Without an
  /// explicit start the blocks are consecutive and the first one starts at 0.
  static BlockGenerator rule(long first, Function length, Function weight, std::optional<Function> start = {}) {
    BlockGenerator g(Kind::Rule, first);
    Definitions defs = length.defs();
    for (const auto &[k, v] : weight.defs())
      defs.emplace(k, v);
    if (start)
      for (const auto &[k, v] : start->defs())
        defs.emplace(k, v);
    g.length_ = Function(length.expr, defs);
    g.weight_ = Function(weight.expr, defs);
    g.consecutive_ = !start;
    g.start_ = start ? Function(start->expr, defs)
                     : Function(make_op(Op::PrefixSum, {length.expr, variable("n"), constant(first)}), defs);
    g.uniform_ = !mentions_variable(*weight.expr, "i");
    if (g.uniform_)
      g.norm_ = Function(make_op(Op::Mul, {length.expr, weight.expr}), defs);
    g.key_ = "rule(" + std::to_string(first) + "," + length.str() + "," + weight.str() + "," +
             (start ? start->str() : std::string("consecutive")) + ")";
    return g;
  }

  /// Phi(f): block n >= 1 has n*f(n) points of weight 1/f(n), consecutive from 0.
  static BlockGenerator phi(const Function &f) {
    BlockGenerator g(Kind::Phi, 1);
    const Definitions &defs = f.defs();
    ExprPtr len = make_op(Op::Mul, {variable("n"), f.expr});
    g.length_ = Function(len, defs);
    g.weight_ = Function(make_op(Op::Div, {constant(1), f.expr}), defs);
    g.start_ = Function(make_op(Op::PrefixSum, {len, variable("n"), constant(1)}), defs);
    g.norm_ = Function(variable("n"));
    g.uniform_ = true;
    g.consecutive_ = true;
    g.f_ = f;
    g.key_ = "phi(" + f.str() + ")";
    return g;
  }

  /// phi_d: blocks [2^n, 2^(n+1)) for n >= 0 with weight 2^-n; 0 lies in no block.
  static BlockGenerator asymptotic_density() {
    BlockGenerator g(Kind::AsymptoticDensity, 0);
    g.length_ = Function::parse("(exp2 n)");
    g.start_ = Function::parse("(exp2 n)");
    g.weight_ = Function::parse("(div 1 (exp2 n))");
    g.norm_ = Function::parse("1");
    g.uniform_ = true;
    g.key_ = "asymptotic_density";
    return g;
  }

  /// Explicit finite list of non-negative measures with ordered disjoint supports.
  static BlockGenerator table(std::vector<FinMeasure> blocks, long first = 0) {
    BlockGenerator g(Kind::Table, first);
    std::optional<BigInt> prev_max;
    for (size_t k = 0; k < blocks.size(); ++k) {
      const FinMeasure &m = blocks[k];
      if (m.empty())
        throw Error("ValidationError", "table block " + std::to_string(k) + " is empty");
      if (m.charges_pf())
        throw Error("HasPFAtom", "table block " + std::to_string(k) + " charges PF");
      if (!m.nonnegative())
        throw Error("ValidationError", "table block " + std::to_string(k) + " has a negative atom");
      if (prev_max && *m.min_index() <= *prev_max)
        throw Error("ValidationError", "table blocks must satisfy max(supp) < min(next supp)");
      prev_max = m.max_index();
    }
    g.table_ = std::make_shared<const std::vector<FinMeasure>>(std::move(blocks));
    std::string key = "table(" + std::to_string(first);
    for (const auto &m : *g.table_)
      key += ";" + to_string(m);
    g.key_ = key + ")";
    return g;
  }

  Kind kind() const { return kind_; }
  long first_index() const { return first_; }
  /// Last valid index for table generators.
  std::optional<long> last_index() const {
    if (!table_)
      return std::nullopt;
    return first_ + static_cast<long>(table_->size()) - 1;
  }
  bool has_block(long n) const {
    if (n < first_)
      return false;
    auto last = last_index();
    return !last || n <= *last;
  }
  bool uniform() const { return uniform_; }
  bool consecutive() const { return consecutive_; }
  const std::string &key() const { return key_; }
  /// key() for rule generators; table keys list every atom, so they are summarized.
  std::string label() const {
    if (!table_)
      return key_;
    return "table(first " + std::to_string(first_) + ", " + std::to_string(table_->size()) + " blocks)";
  }
  /// f of a Phi(f) generator.
  const Function &phi_function() const { return f_; }

  const Function &length_fn() const { return length_; }
  const Function &start_fn() const { return start_; }
  const Function &weight_fn() const { return weight_; }
  /// ||mu_n|| as an expression (absent for table generators and non-uniform rules).
  const std::optional<Function> &norm_fn() const { return norm_; }

  BigInt start(long n) const {
    check_index(n);
    if (table_)
      return *block_ref(n).min_index();
    return cached(start_cache_, n, start_);
  }

  BigInt length(long n) const {
    check_index(n);
    if (table_)
      return *block_ref(n).max_index() - *block_ref(n).min_index() + 1;
    BigInt len = cached(length_cache_, n, length_);
    if (len < 1)
      throw Error("ValidationError", "block " + std::to_string(n) + " has length " + len.get_str());
    return len;
  }

  BigInt end(long n) const { return start(n) + length(n); }

  /// Weight of the i-th point (0-based) of block n.
  Rational weight(long n, const BigInt &i) const {
    check_index(n);
    if (table_)
      return block_ref(n).weight(Point(start(n) + i));
    Rational w = uniform_ ? weight_(Rational(n)) : weight_.eval(Rational(n), Rational(i));
    if (w <= 0)
      throw Error("ValidationError", "non-positive weight in block " + std::to_string(n));
    return w;
  }

  Rational uniform_weight(long n) const {
    if (!uniform_)
      throw Error("InternalError", "generator is not uniform");
    return weight(n, 0);
  }

  Rational norm(long n) const {
    if (table_)
      return nikodym::norm(block_ref(n));
    if (uniform_)
      return uniform_weight(n) * Rational(length(n));
    return mass(n, IntervalList::single(start(n), end(n)));
  }

  AtomBounds atoms(long n) const {
    if (table_)
      return atom_bounds(block_ref(n));
    if (uniform_) {
      Rational w = uniform_weight(n);
      return {w, w};
    }
    return atom_bounds(block(n));
  }

  /// Materializes mu_n; refuses blocks longer than `limit`.
  FinMeasure block(long n, unsigned long limit = 1u << 20) const {
    if (table_)
      return block_ref(n);
    BigInt len = length(n);
    if (len > BigInt(limit))
      throw Error("ValueTooLarge", "block " + std::to_string(n) + " has " + len.get_str() + " points");
    BigInt s = start(n);
    FinMeasure m;
    unsigned long count = len.get_ui();
    if (uniform_) {
      Rational w = uniform_weight(n);
      return FinMeasure::uniform(s, count, w);
    }
    for (unsigned long k = 0; k < count; ++k)
      m.add(Point(s + BigInt(k)), weight(n, BigInt(k)));
    return m;
  }

  /// mu_n of a set given by its pieces (need not be clipped to the block).
  Rational mass(long n, const IntervalList &set) const {
    BigInt s = start(n), e = end(n);
    IntervalList inside = set.clip(s, e);
    if (table_) {
      Rational total = 0;
      for (const auto &[p, w] : block_ref(n).atoms())
        if (inside.contains(p.index))
          total += w;
      return total;
    }
    if (uniform_)
      return uniform_weight(n) * Rational(inside.count());
    Rational total = 0;
    for (const auto &x : inside.points())
      total += weight(n, x - s);
    return total;
  }

  /// Index of the block containing x, if any.
  std::optional<long> index_of(const BigInt &x) const {
    if (x < 0)
      return std::nullopt;
    if (kind_ == Kind::AsymptoticDensity) {
      if (x == 0)
        return std::nullopt;
      return static_cast<long>(bit_length(x) - 1);
    }
    if (table_) {
      const auto &blocks = *table_;
      size_t lo = 0, hi = blocks.size();
      while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (*blocks[mid].max_index() < x)
          lo = mid + 1;
        else
          hi = mid;
      }
      if (lo == blocks.size() || *blocks[lo].min_index() > x)
        return std::nullopt;
      return first_ + static_cast<long>(lo);
    }
    // starts are increasing: gallop, then bisect for the last start <= x
    if (start(first_) > x)
      return std::nullopt;
    // a start too large to evaluate exceeds any x we can hold
    auto beyond = [&](long probe) {
      try {
        return start(probe) > x;
      } catch (const Error &e) {
        if (e.code() == "ValueTooLarge" && bit_length(x) < Evaluator::kMaxBits / 2)
          return true;
        throw;
      }
    };
    long step = 1, lo = first_, hi;
    for (;;) {
      long probe = first_ + step;
      if (beyond(probe)) {
        hi = probe;
        break;
      }
      lo = probe;
      if (step > (1L << 40))
        throw Error("ValueTooLarge", "block search past 2^40 blocks");
      step *= 2;
    }
    while (hi - lo > 1) {
      long mid = lo + (hi - lo) / 2;
      if (!beyond(mid))
        lo = mid;
      else
        hi = mid;
    }
    if (x < end(lo))
      return lo;
    return std::nullopt;
  }

  /// Indices of blocks meeting [lo, hi).
  std::vector<long> blocks_meeting(const BigInt &lo, const BigInt &hi, size_t limit = 1u << 16) const {
    std::vector<long> out;
    if (hi <= lo)
      return out;
    long n;
    if (auto k = index_of(lo)) {
      n = *k;
    } else {
      // first block starting after lo
      n = first_;
      while (has_block(n) && start(n) < lo) {
        ++n;
        if (n - first_ > static_cast<long>(limit) * 64)
          return out;
      }
    }
    while (has_block(n) && start(n) < hi) {
      if (end(n) > lo)
        out.push_back(n);
      ++n;
      if (out.size() > limit)
        throw Error("ValueTooLarge", "range meets too many blocks");
    }
    return out;
  }

  friend bool operator==(const BlockGenerator &a, const BlockGenerator &b) { return a.key_ == b.key_; }

private:
  BlockGenerator(Kind k, long first) : kind_(k), first_(first), cache_mutex_(std::make_shared<std::mutex>()) {}

  Kind kind_;
  long first_;
  Function length_, start_, weight_;
  std::optional<Function> norm_;
  Function f_;
  bool uniform_ = false;
  bool consecutive_ = false;
  std::string key_;
  std::shared_ptr<const std::vector<FinMeasure>> table_;
  std::shared_ptr<std::mutex> cache_mutex_;
  mutable std::shared_ptr<std::unordered_map<long, BigInt>> start_cache_ = std::make_shared<std::unordered_map<long, BigInt>>();
  mutable std::shared_ptr<std::unordered_map<long, BigInt>> length_cache_ = std::make_shared<std::unordered_map<long, BigInt>>();

  void check_index(long n) const {
    if (!has_block(n))
      throw Error("IndexOutOfRange", "no block with index " + std::to_string(n));
  }

  const FinMeasure &block_ref(long n) const {
    check_index(n);
    return (*table_)[static_cast<size_t>(n - first_)];
  }

  BigInt cached(const std::shared_ptr<std::unordered_map<long, BigInt>> &cache, long n, const Function &fn) const {
    {
      std::lock_guard<std::mutex> lock(*cache_mutex_);
      auto it = cache->find(n);
      if (it != cache->end())
        return it->second;
    }
    BigInt v = fn.at_int(Rational(n));
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    cache->emplace(n, v);
    return v;
  }
};

} // namespace nikodym
