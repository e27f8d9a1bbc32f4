#pragma once

// Nikodym classification: for density ideals the dual filter fails the
// Nikodym property iff the generating norms are unbounded or the atoms do not
// vanish; summable ideals always fail it.

#include "nikodym/an_sequences.hpp"

namespace nikodym {

struct ClassificationVerdict {
  enum class Kind { InAN, NotInAN, Undetermined };
  Kind kind = Kind::Undetermined;
  /// Stable reason codes: UnboundedNorms, AtomsDoNotVanish, BothConditionsHold,
  /// SummableAlwaysAN, UnboundedSubmeasure; empty when undetermined.
  std::string reason;
  std::vector<std::pair<long, Rational>> norms, at_plus;
  std::string norms_certificate, atoms_certificate;
  std::optional<UnboundednessResult> evidence;
  std::vector<std::string> implied;

  std::string text() const {
    switch (kind) {
    case Kind::InAN: return "InAN(" + reason + ")";
    case Kind::NotInAN: return "NotInAN(" + reason + ")";
    case Kind::Undetermined: return "Undetermined";
    }
    return "?";
  }
};

inline const char *to_string(ClassificationVerdict::Kind k) {
  switch (k) {
  case ClassificationVerdict::Kind::InAN: return "InAN";
  case ClassificationVerdict::Kind::NotInAN: return "NotInAN";
  case ClassificationVerdict::Kind::Undetermined: return "Undetermined";
  }
  return "?";
}

namespace detail {

inline std::vector<std::string> consequences(bool in_an) {
  if (in_an)
    return {"the dual filter fails the Nikodym property",
            "the ideal is not totally bounded",
            "the ideal is not Katetov equivalent to Z"};
  return {"the dual filter has the Nikodym property",
          "the ideal is totally bounded",
          "the ideal is Katetov equivalent to Z",
          "the ideal has a countable splitting family",
          "the quotient is Erdos-Ulam isomorphic to the one of Z"};
}

} // namespace detail

inline ClassificationVerdict classify_density(const BlockGenerator &gen, long horizon) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  using K = ClassificationVerdict::Kind;
  ClassificationVerdict v;
  for (long n = first_reported_block(gen); n <= horizon && gen.has_block(n); ++n) {
    v.norms.emplace_back(n, gen.norm(n));
    v.at_plus.emplace_back(n, gen.atoms(n).at_plus);
  }

  Limit norm_limit = Limit::Unknown, atom_limit = Limit::Unknown;
  if (gen.last_index()) {
    v.norms_certificate = "finitely many blocks: no limit to certify";
    v.atoms_certificate = v.norms_certificate;
  } else {
    if (gen.norm_fn()) {
      Growth g = analyze_growth(*gen.norm_fn());
      norm_limit = growth::limit(g);
      v.norms_certificate = "||mu_n|| = " + gen.norm_fn()->str() + " ~ " + to_string(g) + " -> " +
                            to_string(norm_limit);
    } else {
      v.norms_certificate = "no closed form for ||mu_n||";
    }
    if (gen.uniform()) {
      Growth g = analyze_growth(gen.weight_fn());
      atom_limit = growth::limit(g);
      v.atoms_certificate = "at+(mu_n) = " + gen.weight_fn().str() + " ~ " + to_string(g) + " -> " +
                            to_string(atom_limit);
    } else {
      v.atoms_certificate = "weights depend on the position: no closed form for at+(mu_n)";
    }
  }

  const bool bounded = norm_limit == Limit::Finite || norm_limit == Limit::Zero;
  if (norm_limit == Limit::PlusInfinity) {
    v.kind = K::InAN;
    v.reason = "UnboundedNorms";
  } else if (atom_limit == Limit::Finite || atom_limit == Limit::PlusInfinity) {
    v.kind = K::InAN;
    v.reason = "AtomsDoNotVanish";
  } else if (bounded && atom_limit == Limit::Zero) {
    v.kind = K::NotInAN;
    v.reason = "BothConditionsHold";
  }
  if (v.kind != K::Undetermined)
    v.implied = detail::consequences(v.kind == K::InAN);
  return v;
}

/// Summable ideals: only divergence of the series needs a certificate.
inline ClassificationVerdict classify_summable(const Function &f, long horizon) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  for (long n = 0; n <= horizon; ++n)
    if (f(n) < 0)
      throw Error("ValidationError", "f(" + std::to_string(n) + ") = " + to_string(f(n)) + " is negative");
  Growth g = analyze_growth(f);
  Series s = growth::series(g);
  if (s == Series::Converges)
    throw Error("NotAnIdeal", "sum of f converges (f ~ " + to_string(g) + ")");
  if (s != Series::Diverges)
    throw Error("NotAnIdeal", "divergence of the sum of " + f.str() + " is not certified");
  ClassificationVerdict v;
  v.kind = ClassificationVerdict::Kind::InAN;
  v.reason = "SummableAlwaysAN";
  v.norms_certificate = "sum of f diverges (f ~ " + to_string(g) + ")";
  v.evidence = unboundedness_check(*submeasures::summable(f), 2, horizon);
  v.implied = detail::consequences(true);
  return v;
}

/// Any ideal with a recognised shape: density generators, summable weights, Fin
/// (the density ideal of mu_n = delta_n), or Exh of an unbounded submeasure.
inline ClassificationVerdict classify_ideal(const IdealSpec &ideal, long horizon) {
  if (const BlockGenerator *g = ideal.generator())
    return classify_density(*g, horizon);
  if (auto f = ideal.summable_weight())
    return classify_summable(*f, horizon);
  if (ideal.kind == IdealSpec::Kind::Fin)
    return classify_density(BlockGenerator::rule(0, Function::parse("1"), Function::parse("1")), horizon);
  ClassificationVerdict v;
  SubmeasurePtr phi = ideal.submeasure();
  if (phi) {
    try {
      SubmeasureAN an = submeasure_to_AN(*phi, std::min(horizon, 4L));
      v.kind = ClassificationVerdict::Kind::InAN;
      v.reason = "UnboundedSubmeasure";
      v.norms_certificate = an.log;
      v.implied = detail::consequences(true);
    } catch (const Error &) {
      v.norms_certificate = "no AN-sequence extracted from " + phi->describe();
    }
  }
  return v;
}

// ---------------------------------------------------------------- simple density

struct SimpleDensityReport {
  bool passes = false;
  bool certified = false; // false: checked to the horizon only
  std::optional<long> violation;
  std::string reason;
  std::vector<std::pair<long, Rational>> ratios; // f(n) / sum_{i<n} f(i); absent where the sum is 0
  std::string g_description;
  std::vector<std::tuple<long, BigInt, BigInt, BigInt>> g_blocks; // n, start, end, f(n)
};

inline SimpleDensityReport simple_density_check(const Function &f, long horizon) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  SimpleDensityReport r;
  auto prev_expr = substitute(f.expr, "n", make_op(Op::Add, {variable("n"), constant(-1)}));
  Shape shape = analyze_shape(f, 0);
  Limit lower = growth::limit(analyze_growth(
      make_op(Op::Div, {f.expr, make_op(Op::Mul, {variable("n"), prev_expr})}), f.defs()));
  Limit upper = growth::limit(analyze_growth(make_op(Op::Div, {f.expr, prev_expr}), f.defs()));
  const bool monotone = shape.mono == Mono::NonDecreasing || shape.mono == Mono::Constant;

  // local scan: f must not decrease and the ratio must keep increasing
  Rational sum = 0, prev_f = 0;
  std::optional<Rational> prev_ratio; // nullopt = +inf
  bool have_prev = false;
  bool scanned_all = true;
  for (long n = 0; n <= horizon; ++n) {
    Rational fn;
    try {
      fn = f(n);
    } catch (const Error &e) {
      if (e.code() == "ValueTooLarge") {
        scanned_all = false;
        break;
      }
      throw;
    }
    if (!is_integer(fn) || fn < 0)
      throw Error("ValidationError", "f(" + std::to_string(n) + ") = " + to_string(fn) + " is not a natural");
    if (n >= 1) {
      std::optional<Rational> ratio;
      if (sum != 0) {
        ratio = fn / sum;
        r.ratios.emplace_back(n, *ratio);
      }
      bool decreasing = fn < prev_f;
      bool ratio_drop = have_prev && ratio && (!prev_ratio || *ratio <= *prev_ratio);
      if ((decreasing || ratio_drop) && !r.violation) {
        r.violation = n;
        r.reason = decreasing ? "f(" + std::to_string(n) + ") < f(" + std::to_string(n - 1) + ")"
                              : "ratio at " + std::to_string(n) + " does not increase";
      }
      prev_ratio = ratio;
      have_prev = true;
    }
    sum += fn;
    prev_f = fn;
  }

  if (monotone && lower == Limit::PlusInfinity) {
    r.passes = true;
    r.certified = true;
    r.violation.reset();
    r.reason = "f non-decreasing and ratio >= f(n)/(n f(n-1)) -> inf";
  } else if (upper == Limit::Finite || upper == Limit::Zero) {
    r.certified = true;
    if (!r.violation) {
      r.violation = horizon;
      r.reason = "ratio bounded by f(n)/f(n-1)";
    }
    r.reason += "; ratio <= f(n)/f(n-1) -> " + std::string(to_string(upper));
  } else if (!r.violation) {
    r.passes = true;
    r.reason = scanned_all ? "checked to the horizon only" : "checked until values grew too large";
  }
  if (!r.passes)
    throw Error("ConditionFails", "violating index " + std::to_string(*r.violation) + ": " + r.reason);

  BlockGenerator gen = BlockGenerator::phi(f);
  for (long n = 1; n <= horizon; ++n) {
    try {
      r.g_blocks.emplace_back(n, gen.start(n), gen.end(n), f.at_int(n));
    } catch (const Error &) {
      break;
    }
  }
  r.g_description = "g(k) = " + f.str() + " for k in [start(n), start(n) + n*f(n)), start(n) = sum_{1<=i<n} i*f(i)";
  return r;
}

} // namespace nikodym
