#pragma once

// Sorted disjoint half-open intervals [lo, hi) of naturals with big endpoints.

#include "nikodym/rational.hpp"

#include <algorithm>
#include <vector>

namespace nikodym {

struct Interval {
  BigInt lo, hi; // [lo, hi), lo < hi

  BigInt size() const { return hi - lo; }
  bool contains(const BigInt &x) const { return lo <= x && x < hi; }
  friend bool operator==(const Interval &a, const Interval &b) { return a.lo == b.lo && a.hi == b.hi; }
};

class IntervalList {
public:
  /// Piece counts past this raise TooManyPieces.
  static constexpr size_t kMaxPieces = 1u << 20;

  IntervalList() = default;

  /// Appends [lo, hi); pieces must arrive in ascending order (merges touching pieces).
  void push(const BigInt &lo, const BigInt &hi) {
    if (hi <= lo)
      return;
    if (!pieces_.empty()) {
      if (lo < pieces_.back().hi)
        throw Error("InternalError", "interval pieces out of order");
      if (lo == pieces_.back().hi) {
        pieces_.back().hi = hi;
        return;
      }
    }
    if (pieces_.size() >= kMaxPieces)
      throw Error("TooManyPieces", "interval list exceeds " + std::to_string(kMaxPieces) + " pieces");
    pieces_.push_back({lo, hi});
  }

  static IntervalList single(const BigInt &lo, const BigInt &hi) {
    IntervalList out;
    out.push(lo, hi);
    return out;
  }

  /// From unsorted points.
  static IntervalList from_points(std::vector<BigInt> points) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    IntervalList out;
    for (const auto &p : points)
      out.push(p, p + 1);
    return out;
  }

  const std::vector<Interval> &pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

  BigInt count() const {
    BigInt c = 0;
    for (const auto &p : pieces_)
      c += p.size();
    return c;
  }

  bool contains(const BigInt &x) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](const BigInt &v, const Interval &iv) { return v < iv.lo; });
    if (it == pieces_.begin())
      return false;
    return std::prev(it)->contains(x);
  }

  IntervalList clip(const BigInt &lo, const BigInt &hi) const {
    IntervalList out;
    for (const auto &p : pieces_) {
      if (p.hi <= lo)
        continue;
      if (p.lo >= hi)
        break;
      out.push(p.lo < lo ? lo : p.lo, p.hi > hi ? hi : p.hi);
    }
    return out;
  }

  /// Complement inside [lo, hi).
  IntervalList complement(const BigInt &lo, const BigInt &hi) const {
    IntervalList out;
    BigInt cur = lo;
    for (const auto &p : clip(lo, hi).pieces_) {
      out.push(cur, p.lo);
      cur = p.hi;
    }
    out.push(cur, hi);
    return out;
  }

  static IntervalList unite(const IntervalList &a, const IntervalList &b) {
    std::vector<Interval> all;
    all.reserve(a.pieces_.size() + b.pieces_.size());
    std::merge(a.pieces_.begin(), a.pieces_.end(), b.pieces_.begin(), b.pieces_.end(), std::back_inserter(all),
               [](const Interval &x, const Interval &y) { return x.lo < y.lo; });
    IntervalList out;
    for (const auto &p : all) {
      if (!out.pieces_.empty() && p.lo <= out.pieces_.back().hi) {
        if (p.hi > out.pieces_.back().hi)
          out.pieces_.back().hi = p.hi;
        continue;
      }
      out.push(p.lo, p.hi);
    }
    return out;
  }

  static IntervalList intersect(const IntervalList &a, const IntervalList &b) {
    IntervalList out;
    size_t i = 0, j = 0;
    while (i < a.pieces_.size() && j < b.pieces_.size()) {
      const auto &x = a.pieces_[i];
      const auto &y = b.pieces_[j];
      BigInt lo = x.lo > y.lo ? x.lo : y.lo;
      BigInt hi = x.hi < y.hi ? x.hi : y.hi;
      if (lo < hi)
        out.push(lo, hi);
      if (x.hi < y.hi)
        ++i;
      else
        ++j;
    }
    return out;
  }

  /// Every member, smallest first; refuses beyond `limit` points.
  std::vector<BigInt> points(unsigned long limit = 1u << 20) const {
    if (count() > BigInt(limit))
      throw Error("ValueTooLarge", "refusing to enumerate " + count().get_str() + " points");
    std::vector<BigInt> out;
    for (const auto &p : pieces_)
      for (BigInt x = p.lo; x < p.hi; ++x)
        out.push_back(x);
    return out;
  }

  friend bool operator==(const IntervalList &a, const IntervalList &b) { return a.pieces_ == b.pieces_; }

private:
  std::vector<Interval> pieces_;
};

} // namespace nikodym
