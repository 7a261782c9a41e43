#pragma once

// Generating functions as finite products of blocks 1 - (z / (R e^{i theta}))^k,
// their log-domain evaluation, and the coefficient route: expansion,
// deflation by a root, root swaps and norms sum |c_d|^2 m_d.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "fockrb/csv.hpp"
#include "fockrb/kernels.hpp"
#include "fockrb/moments.hpp"
#include "fockrb/numeric.hpp"
#include "fockrb/weightlab.hpp"

namespace fockrb {

enum class GenKind { t2_product, t3_product, l2_block };

inline const char* gen_kind_name(GenKind k) {
  switch (k) {
    case GenKind::t2_product: return "t2-product";
    case GenKind::t3_product: return "t3-product";
    case GenKind::l2_block: return "l2-block";
  }
  return "?";
}

/// 1 - (z / (R e^{i theta}))^k. Simple roots have k = 1.
struct Factor {
  double logR;
  int k;
  double theta = 0.0;
};

struct RootHit : Error {
  std::size_t factor;
  RootHit(const std::string& w, std::size_t f) : Error(w), factor(f) {}
};

struct GenFun {
  GenKind kind;
  std::vector<Factor> factors;
  /// Log of the first omitted factor's size |z/R_{N+1}|^{N+1} at the largest
  /// intended evaluation radius; -inf when the product is finite by definition.
  double tail_log_bound = -std::numeric_limits<double>::infinity();

  std::size_t depth() const { return factors.size(); }
  int degree() const {
    int d = 0;
    for (const auto& f : factors) d += f.k;
    return d;
  }
  void validate() const {
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (factors[i].k < 1) throw PreconditionError("GenFun: block multiplicity must be >= 1");
      if (i && !(factors[i].logR > factors[i - 1].logR))
        throw PreconditionError("GenFun: factor radii must increase strictly");
      if (kind == GenKind::t3_product && factors[i].k != static_cast<int>(i) + 1)
        throw PreconditionError("GenFun: block n of a t3 product must have multiplicity n");
    }
  }
};

/// prod_{n=0}^{N} (1 - z / e^{y_n}), roots on the positive axis.
inline GenFun t2_product(const std::vector<double>& y) {
  GenFun g{GenKind::t2_product, {}};
  for (double v : y) g.factors.push_back({v, 1, 0.0});
  g.validate();
  return g;
}

/// prod_{n=1}^{N} (1 - (z/R_n)^n).
inline GenFun t3_product(const LacunarySequence& R, int N) {
  if (N < 1 || static_cast<std::size_t>(N) > R.logR.size())
    throw PreconditionError("t3_product: depth outside the supplied sequence");
  GenFun g{GenKind::t3_product, {}};
  for (int n = 1; n <= N; ++n) g.factors.push_back({R.logR[n - 1], n, 0.0});
  g.validate();
  return g;
}

/// Smallest depth whose first omitted block is <= e^{-30} at |z| = e^{logr_max}.
/// Knots beyond the supplied ones continue by squaring.
inline GenFun t3_product_for(const LacunarySequence& R, double logr_max) {
  std::vector<double> L = R.logR;
  for (std::size_t N = 1;; ++N) {
    while (L.size() < N + 1) L.push_back(2.0 * L.back());
    double next = double(N + 1) * (logr_max - L[N]);
    if (next <= -30.0) {
      LacunarySequence ext;
      ext.logR = L;
      auto g = t3_product(ext, static_cast<int>(N));
      g.tail_log_bound = next;
      return g;
    }
    if (N > 64) throw Error("t3_product_for: no admissible depth");
  }
}

/// prod_j (1 - (z/R_j)^{k_j}).
inline GenFun l2_block(const std::vector<double>& logR, const std::vector<int>& k) {
  if (logR.size() != k.size()) throw PreconditionError("l2_block: radii and multiplicities differ in length");
  GenFun g{GenKind::l2_block, {}};
  for (std::size_t j = 0; j < k.size(); ++j) g.factors.push_back({logR[j], k[j], 0.0});
  g.validate();
  return g;
}

namespace detail {

// log(1 - e^{L}) for complex L, with the far-factor fast paths.
inline std::complex<double> log_one_minus_exp(std::complex<double> L) {
  const double a = L.real(), b = L.imag();
  if (a <= -30.0) return -std::exp(L);
  if (a >= 30.0) return L + std::complex<double>(0.0, kPi) - std::exp(-L);
  // 1 - e^{a+ib} = -(expm1(a) cos b - 2 sin^2(b/2)) - i e^a sin b.
  double sh = std::sin(0.5 * b);
  double re = -(std::expm1(a) * std::cos(b) - 2.0 * sh * sh);
  double im = -std::exp(a) * std::sin(b);
  return std::log(std::complex<double>(re, im));
}

inline std::complex<double> factor_log_arg(const Factor& f, const Point& z) {
  return std::complex<double>(f.k * (z.logr - f.logR), f.k * (z.theta - f.theta));
}

}  // namespace detail

/// log E(z) over all factors except `skip`.
inline LogComplex log_eval(const GenFun& g, const Point& z, long skip = -1) {
  if (std::isinf(z.logr) && z.logr < 0) return LogComplex::one();
  double lm = 0.0, ph = 0.0;
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    if (static_cast<long>(i) == skip) continue;
    const auto& f = g.factors[i];
    auto L = detail::factor_log_arg(f, z);
    auto v = detail::log_one_minus_exp(L);
    // Near a root |1 - e^L| ~ |L mod 2 pi i|.
    if (!(v.real() > std::log(1e-12 * f.k)) && std::fabs(L.real()) < 30.0) {
      double dth = std::remainder(L.imag(), kTwoPi);
      if (std::hypot(L.real(), dth) < 1e-12 * f.k)
        throw RootHit("log_eval: z is a root of factor " + std::to_string(i) +
                          " (logR=" + std::to_string(f.logR) + ", k=" + std::to_string(f.k) + ")",
                      i);
    }
    lm += v.real();
    ph += v.imag();
  }
  return LogComplex::polar_log(lm, wrap_phase(ph));
}

inline LogComplex log_eval(const GenFun& g, std::complex<double> z) {
  return log_eval(g, Point::from_complex(z));
}

/// Piecewise-linear envelope v(t) = sum_{R_s <= t} k_s (log t - log R_s).
inline double envelope_v(const GenFun& g, double logt) {
  double v = 0.0;
  for (const auto& f : g.factors)
    if (logt >= f.logR) v += f.k * (logt - f.logR);
  return v;
}

/// Index of the factor vanishing at `root`; throws if none does.
inline std::size_t owning_factor(const GenFun& g, const Point& root) {
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    const auto& f = g.factors[i];
    if (std::fabs(root.logr - f.logR) > 1e-12 * std::max(1.0, std::fabs(f.logR))) continue;
    double dth = std::remainder(f.k * (root.theta - f.theta), kTwoPi);
    if (std::fabs(dth) <= 1e-9 * f.k) return i;
  }
  throw PreconditionError("derivative_at_root: point is not a root of the product");
}

/// E'(omega) = (-k / omega) * prod_{other factors} at omega, for a root
/// omega of the block 1 - (z/rho)^k.
inline LogComplex derivative_at_root(const GenFun& g, const Point& root) {
  std::size_t i = owning_factor(g, root);
  const auto& f = g.factors[i];
  LogComplex own = LogComplex::polar_log(std::log(double(f.k)) - root.logr, kPi - root.theta);
  return own * log_eval(g, root, static_cast<long>(i));
}

/// Roots of factor i: R e^{i(theta + 2 pi j / k)}, j = 0..k-1.
inline std::vector<Point> factor_roots(const GenFun& g, std::size_t i) {
  const auto& f = g.factors.at(i);
  std::vector<Point> out;
  for (int j = 0; j < f.k; ++j) out.push_back({f.logR, wrap_phase(f.theta + kTwoPi * j / f.k)});
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient route
// ---------------------------------------------------------------------------

struct PolyCoeffs {
  std::vector<LogComplex> c;       // c_0..c_D
  std::vector<bool> cancelled;     // more than 6 digits lost forming c_d
  std::vector<std::string> provenance;

  int degree() const { return static_cast<int>(c.size()) - 1; }
  std::size_t cancelled_count() const {
    return static_cast<std::size_t>(std::count(cancelled.begin(), cancelled.end(), true));
  }
  static PolyCoeffs constant(LogComplex v) { return {{v}, {false}, {}}; }
  void trim() {
    while (c.size() > 1 && c.back().is_zero()) {
      c.pop_back();
      cancelled.pop_back();
    }
  }
};

namespace detail {

constexpr double kCancelDigits = 1e-6;

// Sum with a cancellation flag: the result lost more than 6 digits relative
// to its largest term.
inline LogComplex flagged_sum(const std::vector<LogComplex>& terms, bool* flag) {
  SumReport rep;
  auto s = log_sum_complex(terms, &rep);
  if (flag) {
    auto live = std::count_if(terms.begin(), terms.end(), [](const LogComplex& t) { return !t.is_zero(); });
    *flag = live > 1 && (s.is_zero() || s.logmag < rep.max_logmag + std::log(kCancelDigits));
  }
  return s;
}

}  // namespace detail

/// Product of two coefficient vectors.
inline PolyCoeffs multiply(const PolyCoeffs& a, const PolyCoeffs& b) {
  const std::size_t D = a.c.size() + b.c.size() - 1;
  PolyCoeffs out;
  out.c.resize(D);
  out.cancelled.assign(D, false);
  std::vector<LogComplex> terms;
  for (std::size_t d = 0; d < D; ++d) {
    terms.clear();
    std::size_t lo = d >= b.c.size() ? d - b.c.size() + 1 : 0;
    for (std::size_t i = lo; i <= std::min(d, a.c.size() - 1); ++i) {
      if (a.c[i].is_zero() || b.c[d - i].is_zero()) continue;
      terms.push_back(a.c[i] * b.c[d - i]);
    }
    bool flag = false;
    out.c[d] = detail::flagged_sum(terms, &flag);
    out.cancelled[d] = flag || (d < a.cancelled.size() && a.cancelled[d]);
  }
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  return out;
}

/// Coefficients of z - lambda.
inline PolyCoeffs linear_factor(const Point& lambda) {
  PolyCoeffs p;
  p.c = {-LogComplex::polar_log(lambda.logr, lambda.theta), LogComplex::one()};
  if (std::isinf(lambda.logr)) p.c[0] = LogComplex::zero_value();
  p.cancelled = {false, false};
  return p;
}

/// Coefficients of the block 1 - (z / (R e^{i theta}))^k.
inline PolyCoeffs block_coeffs(const Factor& f) {
  PolyCoeffs p;
  p.c.assign(static_cast<std::size_t>(f.k) + 1, LogComplex::zero_value());
  p.cancelled.assign(p.c.size(), false);
  p.c[0] = LogComplex::one();
  p.c[f.k] = -LogComplex::polar_log(-f.k * f.logR, -f.k * f.theta);
  return p;
}

/// Expands prod of the factors (optionally skipping one) block by block.
/// Each block only touches exponents d and d + k, so the update
/// c'_d = c_d - rho^{-k} c_{d-k} is a two-term signed log sum.
inline PolyCoeffs expand_coeffs(const GenFun& g, long skip = -1) {
  PolyCoeffs p = PolyCoeffs::constant(LogComplex::one());
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    if (static_cast<long>(i) == skip) continue;
    const auto& f = g.factors[i];
    LogComplex coef = -LogComplex::polar_log(-f.k * f.logR, -f.k * f.theta);
    const std::size_t k = static_cast<std::size_t>(f.k);
    PolyCoeffs q;
    q.c.assign(p.c.size() + k, LogComplex::zero_value());
    q.cancelled.assign(q.c.size(), false);
    for (std::size_t d = 0; d < q.c.size(); ++d) {
      std::vector<LogComplex> t;
      if (d < p.c.size() && !p.c[d].is_zero()) t.push_back(p.c[d]);
      if (d >= k && !p.c[d - k].is_zero()) t.push_back(coef * p.c[d - k]);
      bool flag = false;
      q.c[d] = detail::flagged_sum(t, &flag);
      q.cancelled[d] = flag || (d < p.c.size() && p.cancelled[d]) ||
                       (d >= k && p.cancelled[d - k]);
    }
    p = std::move(q);
  }
  p.provenance.push_back(std::string("expand ") + gen_kind_name(g.kind) + " depth " +
                         std::to_string(g.depth()) + (skip >= 0 ? " skip " + std::to_string(skip) : ""));
  return p;
}

/// sum_d c_d z^d in the log domain; dominant terms set the scale, so huge
/// |z| needs no special handling.
inline LogComplex poly_eval(const PolyCoeffs& p, const Point& z) {
  if (std::isinf(z.logr) && z.logr < 0) return p.c.empty() ? LogComplex::zero_value() : p.c[0];
  std::vector<LogComplex> terms;
  terms.reserve(p.c.size());
  for (std::size_t d = 0; d < p.c.size(); ++d)
    if (!p.c[d].is_zero())
      terms.push_back(p.c[d] * LogComplex::polar_log(double(d) * z.logr, double(d) * z.theta));
  return log_sum_complex(terms);
}

struct DeflateResult {
  PolyCoeffs quotient;
  LogComplex remainder;     // p(lambda)
  double residual_ratio;    // |p(lambda)| / max_d |c_d lambda^d|
};

/// Synthetic division by (z - lambda). Coefficients above the dominant
/// index m = argmax |c_d lambda^d| come from the forward recursion and those
/// below from the backward one, so neither recursion runs through the
/// region where it amplifies error.
inline DeflateResult deflate(const PolyCoeffs& p, const Point& lambda, double check = 1e-6) {
  const int D = p.degree();
  if (D < 1) throw PreconditionError("deflate: polynomial of degree 0");
  if (std::isinf(lambda.logr)) {
    if (!p.c[0].is_zero() && p.c[0].logmag > -700)
      throw PreconditionError("deflate: 0 is not a root (|p(0)| = e^" + std::to_string(p.c[0].logmag) + ")");
    PolyCoeffs q;
    q.c.assign(p.c.begin() + 1, p.c.end());
    q.cancelled.assign(p.cancelled.begin() + 1, p.cancelled.end());
    q.provenance = p.provenance;
    q.provenance.push_back("deflate 0");
    return {q, LogComplex::zero_value(), 0.0};
  }
  const LogComplex lam = LogComplex::polar_log(lambda.logr, lambda.theta);
  double scale = -std::numeric_limits<double>::infinity();
  int m = 0;
  for (int d = 0; d <= D; ++d) {
    if (p.c[d].is_zero()) continue;
    double s = p.c[d].logmag + d * lambda.logr;
    if (s > scale) {
      scale = s;
      m = d;
    }
  }
  LogComplex rem = poly_eval(p, lambda);
  double ratio = rem.is_zero() ? 0.0 : std::exp(rem.logmag - scale);
  if (ratio > check)
    throw PreconditionError("deflate: root check failed, |p(lambda)| / scale = " + std::to_string(ratio));

  // p = (z - lambda) q: c_d = q_{d-1} - lambda q_d.
  std::vector<LogComplex> fwd(D), bwd(D);
  std::vector<bool> ff(D, false), fb(D, false);
  fwd[D - 1] = p.c[D];
  for (int j = D - 1; j >= 1; --j) {  // q_{j-1} = c_j + lambda q_j
    bool fl = false;
    fwd[j - 1] = detail::flagged_sum({p.c[j], lam * fwd[j]}, &fl);
    ff[j - 1] = fl || p.cancelled[j];
  }
  bwd[0] = -(p.c[0] / lam);
  if (p.c[0].is_zero()) bwd[0] = LogComplex::zero_value();
  for (int j = 1; j < D; ++j) {  // q_j = (q_{j-1} - c_j) / lambda
    bool fl = false;
    bwd[j] = detail::flagged_sum({bwd[j - 1], -p.c[j]}, &fl) / lam;
    fb[j] = fl || p.cancelled[j];
  }
  PolyCoeffs q;
  q.c.resize(D);
  q.cancelled.resize(D);
  for (int j = 0; j < D; ++j) {
    bool use_fwd = j >= m;
    q.c[j] = use_fwd ? fwd[j] : bwd[j];
    q.cancelled[j] = use_fwd ? ff[j] : fb[j];
  }
  q.provenance = p.provenance;
  q.provenance.push_back("deflate logr=" + csv::format_double(lambda.logr) +
                         " theta=" + csv::format_double(lambda.theta));
  return {q, rem, ratio};
}

/// Coefficients of E(z)/(z - omega) for a root omega of block i, using
/// (1 - (z/rho)^k)/(z - omega) = -rho^{-k} sum_{s<k} omega^s z^{k-1-s}.
inline PolyCoeffs deflated_coeffs(const GenFun& g, const Point& root) {
  std::size_t i = owning_factor(g, root);
  const auto& f = g.factors[i];
  PolyCoeffs quot;
  quot.c.assign(static_cast<std::size_t>(f.k), LogComplex::zero_value());
  quot.cancelled.assign(quot.c.size(), false);
  for (int s = 0; s < f.k; ++s)
    quot.c[f.k - 1 - s] = -LogComplex::polar_log(-f.k * f.logR + s * root.logr,
                                                 -f.k * f.theta + s * root.theta);
  auto out = multiply(expand_coeffs(g, static_cast<long>(i)), quot);
  out.provenance.push_back("structured deflation at factor " + std::to_string(i));
  return out;
}

struct SwapReport {
  PolyCoeffs result;
  double max_real_axis_deviation = 0.0;  // max | log|q(x)| - log|p(x)| | over the samples
  std::vector<double> sample_x;
};

/// Deflates each out-root and multiplies in the matching in-root. When each
/// in-root is the conjugate of its out-root, |q(x)| = |p(x)| on the real
/// axis; this is checked at 20 real sample points to 1e-6.
inline SwapReport swap_roots(const PolyCoeffs& p, const std::vector<Point>& out_roots,
                             const std::vector<Point>& in_roots) {
  if (out_roots.size() != in_roots.size())
    throw PreconditionError("swap_roots: out/in root lists differ in length");
  SwapReport rep;
  rep.result = p;
  if (out_roots.empty()) return rep;
  bool conjugate = true;
  for (std::size_t i = 0; i < out_roots.size(); ++i) {
    rep.result = deflate(rep.result, out_roots[i]).quotient;
    rep.result = multiply(rep.result, linear_factor(in_roots[i]));
    conjugate = conjugate && std::fabs(out_roots[i].logr - in_roots[i].logr) <= 1e-12 &&
                std::fabs(std::remainder(out_roots[i].theta + in_roots[i].theta, kTwoPi)) <= 1e-12;
  }
  rep.result.provenance.push_back("swap " + std::to_string(out_roots.size()) + " roots");
  if (!conjugate) return rep;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : out_roots) {
    lo = std::min(lo, r.logr);
    hi = std::max(hi, r.logr);
  }
  lo -= 1.0;
  hi += 1.0;
  for (int i = 0; i < 10; ++i) {
    // Slightly irrational offsets keep the samples off the roots.
    double lr = lo + (hi - lo) * (i + 0.3183) / 10.0;
    for (double th : {0.0, kPi}) {
      Point x{lr, th};
      double a = poly_eval(p, x).logmag, b = poly_eval(rep.result, x).logmag;
      rep.sample_x.push_back(th == 0.0 ? std::exp(lr) : -std::exp(lr));
      rep.max_real_axis_deviation = std::max(rep.max_real_axis_deviation, std::fabs(a - b));
    }
  }
  if (rep.max_real_axis_deviation > 1e-6)
    throw Error("swap_roots: real-axis modulus changed by " +
                std::to_string(rep.max_real_axis_deviation) + " (log scale)");
  return rep;
}

/// ||sum c_d z^d||^2 = sum |c_d|^2 m_d.
inline LogReal coeff_norm2(const PolyCoeffs& p, const MomentTable& tab) {
  if (static_cast<std::size_t>(p.degree()) >= tab.size())
    throw PreconditionError("coeff_norm2: table (N=" + std::to_string(tab.max_degree()) +
                            ") shorter than degree " + std::to_string(p.degree()));
  std::vector<LogReal> t;
  for (std::size_t d = 0; d < p.c.size(); ++d)
    if (!p.c[d].is_zero()) t.push_back(LogReal::from_log(2 * p.c[d].logmag + tab.log_m(d)));
  return log_sum(t);
}

/// <p, q> = sum c_d conj(e_d) m_d.
inline LogComplex coeff_inner(const PolyCoeffs& p, const PolyCoeffs& q, const MomentTable& tab) {
  std::size_t D = std::min(p.c.size(), q.c.size());
  if (D > tab.size()) throw PreconditionError("coeff_inner: table shorter than degree");
  std::vector<LogComplex> t;
  for (std::size_t d = 0; d < D; ++d)
    if (!p.c[d].is_zero() && !q.c[d].is_zero())
      t.push_back(p.c[d] * q.c[d].conj() * LogComplex::polar_log(tab.log_m(d), 0.0));
  return log_sum_complex(t);
}

/// CSV: degree, logmag, phase, cancellation-flag.
inline void write_coeffs_csv(std::ostream& os, const PolyCoeffs& p) {
  csv::Writer w(os);
  w.row({"degree", "logmag", "phase", "cancellation"});
  for (std::size_t d = 0; d < p.c.size(); ++d) {
    const auto& c = p.c[d];
    w.row({std::to_string(d), csv::format_double(c.is_zero() ? -std::numeric_limits<double>::infinity() : c.logmag),
           csv::format_double(c.is_zero() ? 0.0 : c.phase), p.cancelled[d] ? "1" : "0"});
  }
}

/// sup |log|P(z)| - v(|z|)| over a polar grid on [logr_lo, logr_hi], skipping
/// points closer than excl(r) to a zero of P.
inline double envelope_deviation(const GenFun& g, double logr_lo, double logr_hi, int n_r,
                                 int n_theta, const std::function<double(double)>& excl) {
  double sup = 0.0;
  for (int i = 0; i < n_r; ++i) {
    double lr = logr_lo + (logr_hi - logr_lo) * (i + 0.5) / n_r;
    double r = std::exp(lr);
    for (int j = 0; j < n_theta; ++j) {
      double th = -kPi + kTwoPi * (j + 0.5) / n_theta;
      std::complex<double> z = std::polar(r, th);
      bool near = false;
      for (std::size_t f = 0; f < g.factors.size() && !near; ++f) {
        if (std::fabs(lr - g.factors[f].logR) > 1.0) continue;
        for (const auto& root : factor_roots(g, f))
          if (std::abs(z - root.z()) < excl(r)) {
            near = true;
            break;
          }
      }
      if (near) continue;
      sup = std::max(sup, std::fabs(log_eval(g, Point{lr, th}).logmag - envelope_v(g, lr)));
    }
  }
  return sup;
}

}  // namespace fockrb
