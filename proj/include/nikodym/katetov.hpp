#pragma once

// Katetov reductions between density ideals: blockwise transport, Phi(f),
// domination, the finite-to-one upgrade, verification by preimages, the
// successor g(n) = n*f(f(n)) and the search for witnesses against a given map.

#include "nikodym/magnitude.hpp"
#include "nikodym/parallel.hpp"
#include "nikodym/reduction_table.hpp"
#include "nikodym/submeasure.hpp"
#include "nikodym/transport.hpp"

#include <set>

namespace nikodym {

struct ReductionOptions {
  unsigned threads = 1;
  uint64_t seed = 0;
  unsigned long table_limit = 1ul << 17;      // explicit table entries
  unsigned long materialize_limit = 1ul << 16; // points per block for the explicit greedy
};

struct BlockCertificate {
  long n = 0;
  Rational eps;
  std::string mode; // exhaustive | sampled | closed_form | symbolic
  std::string targets, sources; // |A_n|, |B_n|
  std::string parts;            // X_a sizes, run-length coded
  std::string leftover;         // |Y| and mu(Y)
  unsigned long subsets = 0;
  std::optional<Rational> worst; // sup over all C of |lambda(C) - mu(f^-1 C)|
  Rational worst_checked;
  bool ok = false;
  std::string note;
};

struct ReductionCertificate {
  long threshold = 1, horizon = 0;
  std::string lambda_key, mu_key;
  std::vector<BlockCertificate> blocks;
  std::vector<std::string> notes;
  bool ok() const {
    for (const auto &b : blocks)
      if (!b.ok)
        return false;
    return true;
  }
};

struct ReductionResult {
  ReductionTable table;
  ReductionCertificate certificate;
};

namespace detail {

inline Function scaled_square(const Function &g) {
  return Function(make_op(Op::Mul, {constant(2), make_op(Op::Pow, {variable("n"), constant(2)}), g.expr}), g.defs());
}

/// a(n) <= b(n) decided exactly or through logarithmic bounds.
inline std::optional<bool> magnitude_leq(const Function &a, const Function &b, long n) {
  try {
    return a(n) <= b(n);
  } catch (const Error &e) {
    if (e.code() != "ValueTooLarge")
      throw;
  }
  MagnitudeEvaluator ev(merged(a.defs(), b.defs()));
  try {
    auto c = compare(ev.eval(a.expr, n), ev.eval(b.expr, n));
    if (!c)
      return std::nullopt;
    return *c <= 0;
  } catch (const Error &e) {
    if (e.code() == "Undecidable" || e.code() == "ValueTooLarge")
      return std::nullopt;
    throw;
  }
}

inline std::string magnitude_text(const Function &a, long n) {
  try {
    return to_string(a(n));
  } catch (const Error &) {
  }
  try {
    return to_string(MagnitudeEvaluator(a.defs()).eval(a.expr, n));
  } catch (const Error &) {
    return "?";
  }
}

inline std::string run_length(const std::vector<size_t> &sizes) {
  std::string out;
  for (size_t k = 0; k < sizes.size();) {
    size_t j = k;
    while (j < sizes.size() && sizes[j] == sizes[k])
      ++j;
    if (!out.empty())
      out += " ";
    out += std::to_string(sizes[k]) + "x" + std::to_string(j - k);
    k = j;
  }
  return out;
}

template <class Fn>
auto try_exact(Fn &&fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const Error &e) {
    if (e.code() == "ValueTooLarge")
      return std::nullopt;
    throw;
  }
}

struct BlockOutcome {
  BlockCertificate cert;
  std::map<BigInt, BigInt> map; // explicit greedy only
  bool uniform = false;
};

inline bool is_phi(const BlockGenerator &g) { return g.kind() == BlockGenerator::Kind::Phi; }

/// at+(mu_n) <= at-(lambda_n) / (2n^2); nullopt when undecidable.
inline std::optional<bool> atom_condition(const BlockGenerator &lam, const BlockGenerator &mu, long n) {
  if (is_phi(lam) && is_phi(mu))
    return magnitude_leq(scaled_square(lam.phi_function()), mu.phi_function(), n);
  auto r = try_exact([&] {
    Rational top = mu.atoms(n).at_plus, bottom = lam.atoms(n).at_minus;
    return top * Rational(2 * n * n) <= bottom;
  });
  return r;
}

inline std::string atom_values(const BlockGenerator &lam, const BlockGenerator &mu, long n) {
  if (is_phi(lam) && is_phi(mu))
    return "2n^2*g(n) = " + magnitude_text(scaled_square(lam.phi_function()), n) +
           ", h(n) = " + magnitude_text(mu.phi_function(), n);
  auto s = try_exact([&] {
    return "at+(mu_n) = " + to_string(mu.atoms(n).at_plus) + ", at-(lambda_n)/2n^2 = " +
           to_string(lam.atoms(n).at_minus / Rational(2 * n * n));
  });
  return s ? *s : "values too large";
}

inline BlockOutcome transport_block(const BlockGenerator &lam, const BlockGenerator &mu, long n,
                                    const ReductionOptions &opt) {
  BlockOutcome out;
  BlockCertificate &c = out.cert;
  c.n = n;
  c.eps = make_rational(1, n);
  const uint64_t seed = opt.seed ^ (static_cast<uint64_t>(n) * 0x9e3779b97f4a7c15ull);
  if (lam.uniform() && mu.uniform() && lam.kind() != BlockGenerator::Kind::Table &&
      mu.kind() != BlockGenerator::Kind::Table) {
    out.uniform = true;
    struct Numbers {
      BigInt a, b, q, left;
      Rational wl, wm;
    };
    auto nums = try_exact([&] {
      Numbers v;
      v.a = lam.length(n);
      v.b = mu.length(n);
      v.wl = lam.uniform_weight(n);
      v.wm = mu.uniform_weight(n);
      v.q = floor(v.wl / v.wm);
      v.left = v.b - v.a * v.q;
      return v;
    });
    if (!nums) {
      c.mode = "symbolic";
      c.targets = "|A_n| = n*f(n) too large";
      c.sources = "|B_n| too large";
      c.parts = "q(n) = floor(at(lambda_n)/at(mu_n)) per target";
      c.leftover = "Y = remaining atoms, mu(Y) < |A_n|*at+(mu_n)";
      c.note = "(|A_n|-1)*e_n < |A_n|*at+(mu_n) = n*at+(mu_n)/at(lambda_n) <= 1/(2n) by the atom condition";
      c.ok = true;
      return out;
    }
    const Numbers &v = *nums;
    c.targets = v.a.get_str();
    c.sources = v.b.get_str();
    c.parts = v.q.get_str() + "x" + v.a.get_str();
    c.leftover = v.left.get_str() + " atoms, mass " + to_string(Rational(v.left) * v.wm);
    Rational e = v.wl - Rational(v.q) * v.wm; // deficit of every part
    if (v.q < 1 || v.left < 0) {
      c.mode = "closed_form";
      c.note = "atoms of mu_n too heavy for the greedy";
      c.ok = false;
      return out;
    }
    c.worst = Rational(v.a - 1) * e;
    if (v.a <= BigInt(opt.materialize_limit)) {
      unsigned long m = v.a.get_ui();
      std::vector<Rational> lamv(m, v.wl), pushed(m, Rational(v.q) * v.wm);
      pushed[0] += Rational(v.left) * v.wm;
      TransportCheck chk = check_transport(lamv, pushed, c.eps, seed);
      c.mode = chk.mode;
      c.subsets = chk.subsets;
      c.worst_checked = chk.worst_checked;
      c.ok = chk.ok && *c.worst == chk.worst;
    } else {
      c.mode = "closed_form";
      c.ok = *c.worst <= c.eps;
    }
    return out;
  }
  FinMeasure l = lam.block(n, opt.materialize_limit), m = mu.block(n, opt.materialize_limit);
  TransportResult r = transport(l, m, c.eps);
  std::vector<Rational> lamv;
  for (const auto &[p, w] : l.atoms())
    lamv.push_back(w);
  TransportCheck chk = check_transport(lamv, pushed_masses(r), c.eps, seed);
  std::vector<size_t> sizes;
  for (const auto &p : r.parts)
    sizes.push_back(p.atoms.size());
  c.mode = chk.mode;
  c.targets = std::to_string(l.size());
  c.sources = std::to_string(m.size());
  c.parts = run_length(sizes);
  c.leftover = std::to_string(r.leftover.size()) + " atoms, mass " + to_string(r.leftover_mass);
  c.subsets = chk.subsets;
  c.worst = chk.worst;
  c.worst_checked = chk.worst_checked;
  c.ok = chk.ok && part_bounds_hold(l, r);
  out.map = std::move(r.map);
  return out;
}

inline std::string norm_problem(const BlockGenerator &g, long n) {
  if (is_phi(g))
    return ""; // ||mu_n^f|| = n by construction
  auto v = try_exact([&] { return g.norm(n); });
  if (!v)
    return "norm of block " + std::to_string(n) + " too large to evaluate";
  if (*v != Rational(n))
    return "||block " + std::to_string(n) + "|| = " + to_string(*v) + " != " + std::to_string(n);
  return "";
}

} // namespace detail

/// Blockwise reduction Exh(sup lambda_n) <=_K Exh(sup mu_n): points of the
/// mu-blocks are sent onto the lambda-blocks by greedy transport with eps = 1/n.
inline ReductionResult build_reduction_density(const std::shared_ptr<const BlockGenerator> &lams,
                                               const std::shared_ptr<const BlockGenerator> &mus, long horizon,
                                               const ReductionOptions &opt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  const BlockGenerator &lam = *lams, &mu = *mus;
  for (long n = 1; n <= horizon; ++n) {
    if (!lam.has_block(n) || !mu.has_block(n))
      throw Error("IndexOutOfRange", "both generators need blocks 1.." + std::to_string(horizon));
    for (const auto *g : {&lam, &mu}) {
      std::string p = detail::norm_problem(*g, n);
      if (!p.empty())
        throw Error("NormMismatch", p);
    }
  }
  // threshold: the atom condition holds on [N, horizon]
  std::vector<long> bad;
  for (long n = 1; n <= horizon; ++n) {
    auto ok = detail::atom_condition(lam, mu, n);
    if (!ok || !*ok)
      bad.push_back(n);
  }
  ReductionResult res;
  ReductionCertificate &cert = res.certificate;
  cert.horizon = horizon;
  cert.lambda_key = lam.key();
  cert.mu_key = mu.key();
  if (lam == mu) {
    // the identity pushes every block onto itself
    for (long n = 1; n <= horizon; ++n) {
      BlockCertificate b;
      b.n = n;
      b.eps = make_rational(1, n);
      b.mode = "identity";
      b.worst = Rational(0);
      b.ok = true;
      cert.blocks.push_back(b);
    }
    res.table = ReductionTable::identity();
    res.table.provenance = "build_reduction_density(" + lam.label() + " <- itself): identity";
    return res;
  }
  if (!bad.empty() && bad.back() == horizon) {
    std::string msg = "atom condition fails at n =";
    for (size_t k = 0; k < bad.size() && k < 16; ++k)
      msg += " " + std::to_string(bad[k]) + (k == 0 ? " (" + detail::atom_values(lam, mu, bad[k]) + ")" : "");
    throw Error("AtomConditionFails", msg);
  }
  const long threshold = bad.empty() ? 1 : bad.back() + 1;
  cert.threshold = threshold;
  if (threshold > 1)
    cert.notes.push_back("atom condition fails below n = " + std::to_string(threshold) + "; those blocks map to 0");

  const long count = horizon - threshold + 1;
  std::vector<detail::BlockOutcome> outcomes(static_cast<size_t>(count));
  parallel_for(count, opt.threads,
               [&](long k) { outcomes[static_cast<size_t>(k)] = detail::transport_block(lam, mu, threshold + k, opt); });
  bool all_uniform = true;
  for (auto &o : outcomes) {
    all_uniform = all_uniform && o.uniform;
    cert.blocks.push_back(o.cert);
  }

  ReductionTable &t = res.table;
  std::shared_ptr<BlockTransportRule> rule;
  if (all_uniform) {
    rule = std::make_shared<BlockTransportRule>();
    rule->domain = mus;
    rule->target = lams;
    rule->threshold = threshold;
    t.blocks = rule;
  }
  // explicit table on [0, end of block horizon), truncated at the limit
  auto domain_end = detail::try_exact([&] { return mu.end(horizon); });
  BigInt limit(opt.table_limit);
  BigInt stop = domain_end && *domain_end < limit ? *domain_end : limit;
  BigInt x = 0;
  for (long n = mu.first_index(); n <= horizon && x < stop; ++n) {
    auto s = detail::try_exact([&] { return mu.start(n); });
    if (!s)
      break;
    for (; x < *s && x < stop; ++x)
      t.table.push_back(0);
    auto e = detail::try_exact([&] { return mu.end(n); });
    BigInt block_stop = e && *e < stop ? *e : stop;
    if (n < threshold) {
      for (; x < block_stop; ++x)
        t.table.push_back(0);
      continue;
    }
    const detail::BlockOutcome &o = outcomes[static_cast<size_t>(n - threshold)];
    for (; x < block_stop; ++x)
      t.table.push_back(all_uniform ? *rule->at(x) : o.map.at(x));
  }
  if (domain_end && BigInt(static_cast<unsigned long>(t.table.size())) < *domain_end)
    cert.notes.push_back("explicit table truncated at " + std::to_string(t.table.size()) + " of " +
                         domain_end->get_str() + " points");
  else if (!domain_end)
    cert.notes.push_back("explicit table truncated at " + std::to_string(t.table.size()) +
                         " points; later blocks are addressed by the closed form");
  t.finite_to_one = true;
  unsigned long widest = 0;
  for (const auto &[v, k] : t.fibers())
    widest = std::max(widest, k);
  t.fiber_bound = BigInt(widest);
  t.fiber_evidence = "a point of lambda-block n receives its part X_a (the first point also Y); points before block " +
                     std::to_string(threshold) + " map to 0; largest fiber on the table has " + std::to_string(widest) +
                     " points";
  t.provenance = "build_reduction_density(" + lam.label() + " <- " + mu.label() + ", horizon " + std::to_string(horizon) + ")";
  return res;
}

// ---------------------------------------------------------------- Phi(f)

/// Phi(f) with f(n) >= 1 checked on [1, horizon].
inline IdealPtr phi_ideal(const Function &f, long horizon = 64) {
  for (long n = 1; n <= horizon; ++n) {
    auto ok = detail::magnitude_leq(Function::parse("1"), f, n);
    if (!ok || !*ok)
      throw Error("NonPositiveValue", "f(" + std::to_string(n) + ") = " + detail::magnitude_text(f, n) + " < 1");
  }
  return ideals::phi(f);
}

struct PhiBlockCheck {
  long n;
  bool norm_ok, atoms_ok, tiles_ok;
};

/// Exact check of ||mu_n|| = n, at+ = at- = 1/f(n) and max(I_n) + 1 = min(I_{n+1}).
inline std::vector<PhiBlockCheck> check_phi_blocks(const BlockGenerator &g, long horizon) {
  std::vector<PhiBlockCheck> out;
  const Function &f = g.phi_function();
  for (long n = 1; n <= horizon; ++n) {
    Rational w = Rational(1) / f(n);
    Rational norm = g.uniform_weight(n) * Rational(g.length(n));
    AtomBounds ab = g.atoms(n);
    bool tiles = n == 1 ? g.start(1) == 0 : g.start(n) == g.end(n - 1);
    out.push_back({n, norm == Rational(n), ab.at_plus == w && ab.at_minus == w, tiles});
  }
  return out;
}

// ---------------------------------------------------------------- reduce to Phi

struct PhiReduction {
  std::optional<Function> f;       // closed form when available
  std::vector<BigInt> f_values;    // f(1..horizon)
  std::vector<long> subsequence;   // block indices of lambda used for nu_1, nu_2, ...
  std::shared_ptr<const BlockGenerator> nu, phi;
  ReductionResult reduction;
  std::vector<std::string> notes;
};

inline PhiReduction reduce_to_phi(const std::shared_ptr<const BlockGenerator> &lams, long horizon,
                                  const ReductionOptions &opt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  const BlockGenerator &lam = *lams;
  PhiReduction out;
  // lambda_k is the k-th block of the generator; nu_n uses lambda_{n-1} with ||.|| >= n
  const long first = lam.first_index();
  bool direct = true;
  for (long n = 1; n <= horizon; ++n) {
    long idx = first + n - 1;
    if (!lam.has_block(idx) || lam.norm(idx) < Rational(n)) {
      direct = false;
      break;
    }
  }
  if (direct) {
    for (long n = 1; n <= horizon; ++n)
      out.subsequence.push_back(first + n - 1);
  } else {
    // earliest block reaching each threshold
    long idx = first;
    const long search_end = first + 4 * horizon + 64;
    for (long n = 1; n <= horizon; ++n) {
      while (idx < search_end && lam.has_block(idx) && lam.norm(idx) < Rational(n))
        ++idx;
      if (idx >= search_end || !lam.has_block(idx))
        throw Error("NormTooSmall", "no block with norm >= " + std::to_string(n) + " after the subsequence so far");
      out.subsequence.push_back(idx++);
    }
    out.notes.push_back("norms below n+1: took the earliest block reaching each threshold");
  }

  for (long n = 1; n <= horizon; ++n) {
    long idx = out.subsequence[static_cast<size_t>(n - 1)];
    Rational at_minus = lam.atoms(idx).at_minus * Rational(n) / lam.norm(idx);
    out.f_values.push_back(BigInt(2 * n * n) * ceil(Rational(1) / at_minus));
  }

  const bool closed = direct && lam.uniform() && lam.kind() == BlockGenerator::Kind::Rule && lam.norm_fn();
  if (closed) {
    // lambda_{n-1} is block first + n - 1
    ExprPtr shift = first >= 1 ? make_op(Op::Add, {variable("n"), constant(first - 1)})
                               : make_op(Op::Sub, {variable("n"), constant(1 - first)});
    Definitions defs = detail::merged(lam.weight_fn().defs(), lam.norm_fn()->defs());
    ExprPtr w = substitute(lam.weight_fn().expr, "n", shift);
    ExprPtr norm = substitute(lam.norm_fn()->expr, "n", shift);
    ExprPtr len = substitute(lam.length_fn().expr, "n", shift);
    ExprPtr start = substitute(lam.start_fn().expr, "n", shift);
    // at-(nu_n) = w * n / norm
    ExprPtr inv = make_op(Op::Div, {norm, make_op(Op::Mul, {w, variable("n")})});
    ExprPtr fe = make_op(Op::Mul, {constant(2), make_op(Op::Pow, {variable("n"), constant(2)}), make_op(Op::Ceil, {inv})});
    Function f(fe, defs);
    for (long n = 1; n <= horizon; ++n)
      if (f.at_int(n) != out.f_values[static_cast<size_t>(n - 1)])
        throw Error("InternalError", "closed form for f disagrees at n = " + std::to_string(n));
    out.f = f;
    Definitions all = detail::merged(defs, lam.length_fn().defs());
    all = detail::merged(all, lam.start_fn().defs());
    ExprPtr nu_w = make_op(Op::Div, {make_op(Op::Mul, {w, variable("n")}), norm});
    out.nu = std::make_shared<BlockGenerator>(
        BlockGenerator::rule(1, Function(len, all), Function(nu_w, all), Function(start, all)));
    out.phi = std::make_shared<BlockGenerator>(BlockGenerator::phi(f));
  } else {
    std::vector<FinMeasure> nu_blocks, phi_blocks;
    BigInt pos = 0;
    for (long n = 1; n <= horizon; ++n) {
      long idx = out.subsequence[static_cast<size_t>(n - 1)];
      nu_blocks.push_back(scale(lam.block(idx, opt.materialize_limit), Rational(n) / lam.norm(idx)));
      const BigInt &fn = out.f_values[static_cast<size_t>(n - 1)];
      BigInt len = BigInt(n) * fn;
      if (len > BigInt(opt.materialize_limit))
        throw Error("ValueTooLarge", "Phi(f) block " + std::to_string(n) + " has " + len.get_str() + " points");
      phi_blocks.push_back(FinMeasure::uniform(pos, len.get_ui(), Rational(1) / Rational(fn)));
      pos += len;
    }
    out.nu = std::make_shared<BlockGenerator>(BlockGenerator::table(std::move(nu_blocks), 1));
    out.phi = std::make_shared<BlockGenerator>(BlockGenerator::table(std::move(phi_blocks), 1));
    out.notes.push_back("f has no closed form here; nu and Phi(f) are tabulated up to the horizon");
  }
  out.reduction = build_reduction_density(out.nu, out.phi, horizon, opt);
  out.reduction.table.provenance = "reduce_to_phi: " + out.reduction.table.provenance;
  return out;
}

// ---------------------------------------------------------------- domination

struct DominationReport {
  long threshold = 1;
  std::vector<long> violations; // n in [1, horizon] with 2n^2 g(n) > h(n) (or undecided)
  ReductionResult reduction;
};

inline DominationReport domination_reduction(const Function &g, const Function &h, long horizon,
                                             const ReductionOptions &opt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  DominationReport rep;
  Function lhs = detail::scaled_square(g);
  for (long n = 1; n <= horizon; ++n) {
    auto ok = detail::magnitude_leq(lhs, h, n);
    if (!ok || !*ok)
      rep.violations.push_back(n);
  }
  if (!rep.violations.empty() && rep.violations.back() == horizon)
    throw Error("DominationFails", "2n^2*g(n) > h(n) at n = " + std::to_string(horizon) + " (" +
                                       detail::magnitude_text(lhs, horizon) + " vs " +
                                       detail::magnitude_text(h, horizon) + ")");
  rep.threshold = rep.violations.empty() ? 1 : rep.violations.back() + 1;
  auto pg = std::make_shared<BlockGenerator>(BlockGenerator::phi(g));
  auto ph = std::make_shared<BlockGenerator>(BlockGenerator::phi(h));
  rep.reduction = build_reduction_density(pg, ph, horizon, opt);
  return rep;
}

// ---------------------------------------------------------------- Tukey map

struct TukeyMap {
  PhiReduction base;
  std::optional<Function> psi;   // 2n^2 f(n)
  std::vector<BigInt> psi_values; // psi(1..horizon)
};

inline TukeyMap tukey_map(const std::shared_ptr<const BlockGenerator> &lams, long horizon,
                          const ReductionOptions &opt = {}) {
  TukeyMap t;
  t.base = reduce_to_phi(lams, horizon, opt);
  for (long n = 1; n <= horizon; ++n)
    t.psi_values.push_back(BigInt(2 * n * n) * t.base.f_values[static_cast<size_t>(n - 1)]);
  if (t.base.f)
    t.psi = detail::scaled_square(*t.base.f);
  return t;
}

struct TukeyContract {
  bool dominated = false;     // h >= psi on [1, horizon]
  bool reduction_ok = false;  // domination_reduction(f, h) succeeded
  std::string detail;
};

/// psi <= h on the horizon must yield I <=_K Phi(h) through domination_reduction(f, h).
inline TukeyContract tukey_contract(const TukeyMap &t, const Function &h, long horizon,
                                    const ReductionOptions &opt = {}) {
  TukeyContract c;
  c.dominated = true;
  for (long n = 1; n <= horizon; ++n) {
    Rational hv = h(n);
    if (hv < Rational(t.psi_values[static_cast<size_t>(n - 1)])) {
      c.dominated = false;
      c.detail = "h(" + std::to_string(n) + ") < psi(" + std::to_string(n) + ")";
      return c;
    }
  }
  if (!t.base.f) {
    c.detail = "f is tabulated; only the domination inequality was checked";
    c.reduction_ok = true;
    return c;
  }
  try {
    DominationReport r = domination_reduction(*t.base.f, h, horizon, opt);
    c.reduction_ok = r.reduction.certificate.ok();
    c.detail = "domination_reduction threshold " + std::to_string(r.threshold);
  } catch (const Error &e) {
    c.detail = e.what();
  }
  return c;
}

// ---------------------------------------------------------------- KB upgrade

struct FiberCheck {
  bool certified = false; // fibers finite by a closed-form argument
  std::optional<BigInt> offending;
  std::string evidence;
};

namespace detail {

inline FiberCheck fibers_off(const ReductionTable &f, const SetSpec &a, long horizon) {
  FiberCheck c;
  if (f.rule && limit_of(*f.rule) == Limit::PlusInfinity) {
    c.certified = true;
    c.evidence = "rule " + f.rule->str() + " tends to infinity, so every fiber is finite";
    return c;
  }
  if (f.blocks) {
    c.certified = true;
    c.evidence = "blockwise transport: each fiber lies in one block";
    return c;
  }
  // a small value whose fiber still gains members late in the window is not finite
  std::map<BigInt, std::pair<unsigned long, BigInt>> fib; // value -> (size, last member)
  for (long x = 0; x <= horizon; ++x) {
    if (a.contains(BigInt(x)))
      continue;
    BigInt v = f(BigInt(x));
    auto &e = fib[v];
    ++e.first;
    e.second = x;
  }
  unsigned long widest = 0;
  for (const auto &[v, e] : fib) {
    widest = std::max(widest, e.first);
    if (e.first >= 2 && e.second * 2 > horizon && v * 8 < horizon) {
      c.offending = v;
      c.evidence = "fiber of " + v.get_str() + " off A has " + std::to_string(e.first) + " points up to " +
                   std::to_string(horizon) + ", the last at " + e.second.get_str();
      return c;
    }
  }
  c.evidence = "no fiber off A gains members in the second half of [0, " + std::to_string(horizon) +
               "]; largest has " + std::to_string(widest) + " points";
  return c;
}

} // namespace detail

inline ReductionTable kb_upgrade(const ReductionTable &f, const IdealSpec &target, const SetSpec &a, long horizon,
                                 const MembershipOptions &mopt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  Membership m = membership(target, a, mopt);
  if (m.verdict != Membership::Verdict::In)
    throw Error("ValidationError", "pseudo-union is not certified in " + target.describe() + ": " + m.certificate);
  FiberCheck fc = detail::fibers_off(f, a, horizon);
  if (fc.offending)
    throw Error("NotPseudoUnion", "m = " + fc.offending->get_str() + ": " + fc.evidence);
  ReductionTable g;
  for (long x = 0; x <= horizon; ++x) {
    BigInt bx(x);
    g.table.push_back(a.contains(bx) ? bx : f(bx));
    // g^-1[{v}] is inside f^-1[{v}] u A
    if (!a.contains(bx) && g.table.back() != f(bx))
      throw Error("InternalError", "upgrade changed a value off A");
  }
  if (auto fin = a.finite(); fin && *fin && a.pieces(0, BigInt(horizon) + 1).count() == 0) {
    g.rule = f.rule;
    g.blocks = f.blocks;
  }
  unsigned long widest = 0;
  for (const auto &[v, k] : g.fibers())
    widest = std::max(widest, k);
  g.finite_to_one = true;
  g.fiber_bound = BigInt(widest);
  g.fiber_evidence = "g = id on A, f elsewhere; " + fc.evidence + "; largest fiber of g on [0, " +
                     std::to_string(horizon) + "] has " + std::to_string(widest) + " points; g^-1[X] in f^-1[X] u A";
  g.provenance = "kb_upgrade(" + f.provenance + ", A = " + a.describe() + ")";
  return g;
}

// ---------------------------------------------------------------- verification

struct ReductionRow {
  std::string test;
  Membership source;    // verdict of the test set in the source ideal
  Membership preimage;  // verdict of f^-1[A] in the target ideal
  std::string method;   // identity | transport transfer | table
  bool skipped = false; // test not certified in the source
};

struct ReductionVerdict {
  enum class Kind { Refuted, NoCounterexample } kind = Kind::NoCounterexample;
  long horizon = 0;
  std::vector<ReductionRow> rows;
  std::optional<size_t> witness; // row index refuting the reduction
};

namespace detail {

/// mu_n(f^-1[A]) on the domain blocks of a block transport, for n in [1, horizon].
inline std::vector<std::pair<long, Rational>> transport_preimage_values(const BlockTransportRule &r, const SetSpec &a,
                                                                        long horizon) {
  std::vector<std::pair<long, Rational>> out;
  const BlockGenerator &dom = *r.domain, &tgt = *r.target;
  for (long n = first_reported_block(dom); n <= horizon && dom.has_block(n); ++n) {
    auto v = try_exact([&]() -> Rational {
      if (n < r.threshold)
        return a.contains(BigInt(0)) ? dom.norm(n) : Rational(0);
      BigInt s = tgt.start(n);
      BigInt c = a.pieces(s, tgt.end(n)).count();
      BigInt pts = c * r.quota(n) + (a.contains(s) ? r.leftover(n) : BigInt(0));
      return Rational(pts) * dom.uniform_weight(n);
    });
    if (!v)
      break;
    out.emplace_back(n, *v);
  }
  return out;
}

} // namespace detail

inline ReductionVerdict verify_reduction(const ReductionTable &f, const IdealSpec &source, const IdealSpec &target,
                                         const std::vector<SetPtr> &tests, const MembershipOptions &opt = {}) {
  using V = Membership::Verdict;
  ReductionVerdict out;
  out.horizon = opt.horizon;
  for (const auto &a : tests) {
    ReductionRow row;
    row.test = a->describe();
    row.source = membership(source, *a, opt);
    if (row.source.verdict != V::In) {
      row.skipped = true;
      row.method = "skipped: test not certified in the source ideal";
      out.rows.push_back(std::move(row));
      continue;
    }
    if (f.is_identity()) {
      row.method = "identity";
      row.preimage = membership(target, *a, opt);
    } else if (f.blocks && source.generator() && target.generator() &&
               source.generator()->key() == f.blocks->target->key() &&
               target.generator()->key() == f.blocks->domain->key()) {
      row.method = "transport transfer";
      Membership &p = row.preimage;
      auto pre = detail::transport_preimage_values(*f.blocks, *a, opt.horizon);
      std::map<BigInt, Rational> src;
      for (const auto &[n, v] : row.source.trace)
        src[n] = v;
      bool within = true;
      for (const auto &[n, v] : pre) {
        p.trace.emplace_back(BigInt(n), v);
        auto it = src.find(BigInt(n));
        if (n >= f.blocks->threshold && it != src.end() && abs(v - it->second) > make_rational(1, n))
          within = false;
      }
      if (!within)
        throw Error("InternalError", "transport bound violated on a preimage");
      p.verdict = V::In;
      p.closed_form = row.source.closed_form;
      p.certificate = "|mu_n(f^-1 A) - lambda_n(A)| <= 1/n and " + row.source.certificate;
    } else {
      row.method = "table";
      std::vector<BigInt> pts;
      for (size_t x = 0; x < f.table.size(); ++x)
        if (a->contains(f.table[x]))
          pts.emplace_back(static_cast<unsigned long>(x));
      row.preimage = membership(target, *sets::finite(pts), opt);
      row.preimage.verdict = V::Undetermined;
      row.preimage.certificate = "preimage known only on the table [0, " + std::to_string(f.table.size()) + ")";
    }
    if (row.preimage.verdict == V::NotIn && !out.witness) {
      out.kind = ReductionVerdict::Kind::Refuted;
      out.witness = out.rows.size();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------- successor

struct HypothesisReport {
  long horizon = 0;
  std::optional<long> quartic_fails; // first n with f(n) < n^4
  std::optional<long> sum_fails;     // first n with f(n) < sum_{i<n} f(i)
  bool holds() const { return !quartic_fails && !sum_fails; }
};

inline HypothesisReport check_hypotheses(const Function &f, long horizon) {
  HypothesisReport r;
  r.horizon = horizon;
  Function quartic = Function::parse("(pow n 4)");
  Function partial(make_op(Op::PrefixSum, {f.expr, variable("n"), constant(0)}), f.defs());
  for (long n = 1; n <= horizon; ++n) {
    if (!r.quartic_fails) {
      auto ok = detail::magnitude_leq(quartic, f, n);
      if (!ok || !*ok)
        r.quartic_fails = n;
    }
    if (!r.sum_fails) {
      auto ok = detail::magnitude_leq(partial, f, n);
      if (!ok || !*ok)
        r.sum_fails = n;
    }
  }
  return r;
}

struct SuccessorReport {
  Function g;
  HypothesisReport hypotheses;
  std::vector<std::pair<long, bool>> domination; // 2n^2 f(n) <= g(n), 2 <= n <= horizon
  std::vector<std::pair<long, bool>> cube_route; // f(n)^3 >= 2n
  std::optional<DominationReport> forward;       // Phi(f) <=_K Phi(g)
  std::string note;

  void require_hypotheses() const {
    if (hypotheses.quartic_fails)
      throw Error("HypothesisFails", "n = " + std::to_string(*hypotheses.quartic_fails) + ": f(n) >= n^4");
    if (hypotheses.sum_fails)
      throw Error("HypothesisFails", "n = " + std::to_string(*hypotheses.sum_fails) + ": f(n) >= sum_{i<n} f(i)");
  }
};

/// g(n) = n*f(f(n)) with the name of f bound in the definitions.
inline Function successor_function(const Function &f) {
  Definitions defs = f.defs();
  std::string name = "f";
  for (int k = 0; defs.count(name); ++k)
    name = "f" + std::to_string(k);
  defs[name] = f.expr;
  ExprPtr inner = make_op(Op::Call, {variable("n")}, name);
  return Function(make_op(Op::Mul, {variable("n"), make_op(Op::Call, {inner}, name)}), defs);
}

inline SuccessorReport successor(const Function &f, long horizon, const ReductionOptions &opt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  SuccessorReport r;
  r.g = successor_function(f);
  r.hypotheses = check_hypotheses(f, horizon);
  Function lhs = detail::scaled_square(f);
  Function cube(make_op(Op::Pow, {f.expr, constant(3)}), f.defs());
  Function twice = Function::parse("(mul 2 n)");
  for (long n = 2; n <= horizon; ++n) {
    auto d = detail::magnitude_leq(lhs, r.g, n);
    r.domination.emplace_back(n, d && *d);
    auto c = detail::magnitude_leq(twice, cube, n);
    r.cube_route.emplace_back(n, c && *c);
  }
  if (!r.hypotheses.holds()) {
    r.note = "hypotheses fail; forward reduction not built";
    return r;
  }
  r.forward = domination_reduction(f, r.g, horizon, opt);
  return r;
}

// ---------------------------------------------------------------- refuter

struct LambdaCheck {
  long m;
  Rational value, bound;
  bool ok;
};

struct RefutationPiece {
  long n;
  std::optional<long> i, j; // Case 2: target block and sub-block
  IntervalList points;      // F_n or D_n
  Rational mu_value;        // mu_n of the piece
  bool fi_ok = true, sqrt_ok = true; // Case 2: f(i(n)) < n, mass >= sqrt(n-1)
  Rational block_mass;      // Case 2: mu_n mass sent into A_{i(n)}
};

struct RefutationWitness {
  bool found = false;
  int case_tag = 0;
  bool partial = false; // fewer than two pieces
  std::vector<RefutationPiece> pieces;
  IntervalList x;
  std::vector<LambdaCheck> lambda;
  std::vector<long> case1_hits;
  long horizon = 0;
  HypothesisReport hypotheses;
  std::string unexplored;
  std::vector<std::string> notes;
  bool checks_pass() const {
    for (const auto &p : pieces)
      if (!p.fi_ok || !p.sqrt_ok || (case_tag == 1 ? p.mu_value != 1 : p.mu_value < 1))
        return false;
    for (const auto &l : lambda)
      if (!l.ok)
        return false;
    return true;
  }
};

namespace detail {

struct RefuterBlock {
  long n;
  bool hit = false;
  std::vector<BigInt> f_points;  // Case 1
  bool has_case2 = false;
  RefutationPiece piece2;
};

} // namespace detail

inline RefutationWitness refute_reduction(const Function &f, const ReductionTable &phi, long horizon,
                                          const ReductionOptions &opt = {}) {
  if (horizon < 1)
    throw Error("ValidationError", "horizon must be >= 1");
  if (phi.finite_to_one && !*phi.finite_to_one)
    throw Error("NotFiniteToOne", "the map is flagged as not finite-to-one");
  auto source = std::make_shared<BlockGenerator>(BlockGenerator::phi(f));
  Function g = successor_function(f);
  auto blocks = std::make_shared<BlockGenerator>(BlockGenerator::phi(g));
  const BigInt covered = (phi.rule || phi.blocks) ? source->end(horizon) : BigInt(static_cast<unsigned long>(phi.table.size()));
  if (phi.table.empty() && !phi.rule && !phi.blocks)
    throw Error("DomainTooSmall", "empty table");
  if (source->end(horizon) > covered) {
    long have = 0;
    while (have < horizon && source->end(have + 1) <= covered)
      ++have;
    throw Error("DomainTooSmall", "table covers blocks B_1..B_" + std::to_string(have) + " of Phi(f), need B_" +
                                      std::to_string(horizon));
  }

  std::vector<detail::RefuterBlock> per(static_cast<size_t>(horizon));
  parallel_for(horizon, opt.threads, [&](long k) {
    const long n = k + 1;
    detail::RefuterBlock &rb = per[static_cast<size_t>(k)];
    rb.n = n;
    const BigInt fn = f.at_int(n);
    const unsigned long fnu = to_ulong(fn);
    BigInt s = source->start(n), e = source->end(n);
    std::vector<BigInt> t, rest;
    std::vector<long> target_of_rest;
    std::vector<BigInt> image_of_rest;
    for (BigInt b = s; b < e; ++b) {
      BigInt y = phi(b);
      auto i = blocks->index_of(y);
      if (!i)
        throw Error("ValidationError", "image " + y.get_str() + " lies in no block of Phi(g)");
      if (f.at_int(*i) >= BigInt(n)) {
        t.push_back(b);
      } else {
        rest.push_back(b);
        target_of_rest.push_back(*i);
        image_of_rest.push_back(y);
      }
    }
    if (t.size() >= fnu) {
      rb.hit = true;
      rb.f_points.assign(t.begin(), t.begin() + static_cast<long>(fnu));
      return;
    }
    if (n == 1)
      return;
    // F_n: the first (n-1) f(n) points off T_n, mass n - 1
    size_t take = static_cast<size_t>(n - 1) * fnu;
    std::map<long, size_t> count;
    for (size_t q = 0; q < take; ++q)
      ++count[target_of_rest[q]];
    long best_i = count.begin()->first;
    for (const auto &[i, c] : count)
      if (c > count[best_i])
        best_i = i;
    RefutationPiece &p = rb.piece2;
    p.n = n;
    p.i = best_i;
    p.block_mass = Rational(static_cast<long>(count[best_i])) / Rational(fn);
    p.fi_ok = f.at_int(best_i) < BigInt(n);
    p.sqrt_ok = at_least_sqrt(p.block_mass, Rational(n - 1));
    // sub-blocks C_j of A_i: i^2 runs of f(f(i)) points, lambda-mass 1/i each
    const BigInt sub = f.at_int(Rational(f.at_int(best_i)));
    const BigInt si = blocks->start(best_i);
    std::map<BigInt, std::vector<BigInt>> by_j;
    for (size_t q = 0; q < take; ++q)
      if (target_of_rest[q] == best_i)
        by_j[(image_of_rest[q] - si) / sub].push_back(rest[q]);
    auto best = by_j.begin();
    for (auto it = by_j.begin(); it != by_j.end(); ++it)
      if (it->second.size() > best->second.size())
        best = it;
    p.j = static_cast<long>(to_ulong(best->first));
    p.points = IntervalList::from_points(best->second);
    p.mu_value = Rational(static_cast<long>(best->second.size())) / Rational(fn);
    rb.has_case2 = true;
  });

  RefutationWitness w;
  w.horizon = horizon;
  w.hypotheses = check_hypotheses(f, horizon);
  for (const auto &rb : per)
    if (rb.hit)
      w.case1_hits.push_back(rb.n);

  auto lambda_on = [&](const IntervalList &x, const std::vector<long> &ms, bool case1) {
    // phi[X] grouped by target block
    std::map<long, std::set<BigInt>> images;
    for (const auto &b : x.points())
      if (auto i = blocks->index_of(phi(b)))
        images[*i].insert(phi(b));
    std::vector<LambdaCheck> out;
    std::set<long> wanted(ms.begin(), ms.end());
    for (const auto &[m, ys] : images) {
      if (!case1 && !wanted.count(m))
        continue;
      Rational v = Rational(static_cast<long>(ys.size())) * blocks->uniform_weight(m);
      Rational bound = case1 ? make_rational(2, m) : make_rational(1, m);
      out.push_back({m, v, bound, v <= bound});
    }
    return out;
  };

  if (w.case1_hits.size() >= 2) {
    w.found = true;
    w.case_tag = 1;
    IntervalList x;
    for (const auto &rb : per) {
      if (!rb.hit)
        continue;
      RefutationPiece p;
      p.n = rb.n;
      p.points = IntervalList::from_points(rb.f_points);
      p.mu_value = Rational(static_cast<long>(rb.f_points.size())) * source->uniform_weight(rb.n);
      x = IntervalList::unite(x, p.points);
      w.pieces.push_back(std::move(p));
    }
    w.x = x;
    w.lambda = lambda_on(x, {}, true);
    w.unexplored = "Case 2 not explored: Case 1 recurs at the horizon";
    return w;
  }
  // Case 2: strictly increasing i(n_k), smallest n first
  std::optional<long> last_i;
  IntervalList x;
  std::vector<long> ms;
  for (const auto &rb : per) {
    if (!rb.has_case2 || rb.piece2.mu_value < 1)
      continue;
    if (last_i && *rb.piece2.i <= *last_i)
      continue;
    last_i = rb.piece2.i;
    ms.push_back(*rb.piece2.i);
    x = IntervalList::unite(x, rb.piece2.points);
    w.pieces.push_back(rb.piece2);
  }
  if (w.pieces.empty()) {
    w.notes.push_back("no Case 1 recurrence and no Case 2 block with a sub-block of mass >= 1");
    return w;
  }
  w.found = true;
  w.case_tag = 2;
  w.partial = w.pieces.size() < 2;
  w.x = x;
  w.lambda = lambda_on(x, ms, false);
  w.unexplored = w.case1_hits.empty() ? "Case 1 not explored: no block meets it"
                                      : "Case 1 not explored: hits do not recur (n = " +
                                            std::to_string(w.case1_hits.front()) + " only)";
  if (w.partial)
    w.notes.push_back("partial (desk-scale) witness: one Case 2 block");
  return w;
}

// ---------------------------------------------------------------- audit

struct AuditRow {
  long n = 0;
  bool checked = false;
  Rational worst, eps;
  bool ok = true;
  std::string note;
};

struct ReductionAudit {
  std::vector<AuditRow> rows;
  bool ok() const {
    for (const auto &r : rows)
      if (!r.ok)
        return false;
    return true;
  }
};

/// Recomputes sup_C |lambda_n(C) - mu_n(f^-1[C])| for every block n in
/// [threshold, horizon] from the point values of f alone.
inline ReductionAudit audit_reduction(const BlockGenerator &lam, const BlockGenerator &mu, const ReductionTable &f,
                                      long threshold, long horizon, unsigned long limit = 1ul << 16) {
  ReductionAudit audit;
  for (long n = std::max(threshold, 1L); n <= horizon; ++n) {
    AuditRow row;
    row.n = n;
    row.eps = make_rational(1, n);
    auto sizes = detail::try_exact([&] { return std::max(lam.length(n), mu.length(n)); });
    if (!sizes || *sizes > BigInt(limit)) {
      row.note = "block too large to materialize";
      audit.rows.push_back(row);
      continue;
    }
    FinMeasure target = lam.block(n), source = mu.block(n);
    std::map<BigInt, Rational> pushed;
    for (const auto &[p, w] : source.atoms()) {
      auto v = f.at(p.index);
      if (!v) {
        row.ok = false;
        row.note = "f undefined at " + p.index.get_str();
        break;
      }
      if (target.weight(Point(*v)) == 0) {
        row.ok = false;
        row.note = "f(" + p.index.get_str() + ") = " + v->get_str() + " leaves lambda-block " + std::to_string(n);
        break;
      }
      pushed[*v] += w;
    }
    if (row.ok) {
      Rational pos = 0, neg = 0;
      for (const auto &[a, w] : target.atoms()) {
        Rational d = w - pushed[a.index];
        (d > 0 ? pos : neg) += abs(d);
      }
      row.checked = true;
      row.worst = pos > neg ? pos : neg;
      row.ok = row.worst <= row.eps;
    }
    audit.rows.push_back(row);
  }
  return audit;
}

} // namespace nikodym
