#pragma once

// Monomial norms m_n = ||z^n||^2 = 2 pi int e^{(2n+2)t - psi(t)} dt, the
// Laplace points psi'(y_n) = 2n + 2, and the two-sided Laplace estimate.

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fockrb/csv.hpp"
#include "fockrb/numeric.hpp"
#include "fockrb/weightlab.hpp"

namespace fockrb {

struct MomentTable {
  std::vector<LogReal> logm;  // log m_n, n = 0..N
  std::vector<double> y;      // Laplace points (empty for theorem3 weights)
  std::vector<double> alpha;  // psi''(y_n)
  std::vector<double> rel_error;
  std::string weight_label;
  std::optional<Weight> weight;  // absent after CSV import

  std::size_t size() const { return logm.size(); }
  int max_degree() const { return static_cast<int>(logm.size()) - 1; }
  double log_m(std::size_t n) const { return logm.at(n).logmag; }
};

/// Thrown when psi' stays below 2N+2 on the search horizon.
struct LaplaceError : Error {
  int max_reachable;
  LaplaceError(const std::string& w, int n) : Error(w), max_reachable(n) {}
};

/// y_0..y_N with psi'(y_n) = 2n + 2, solved by bisection. Indices whose
/// target slope is already exceeded at the left end of the horizon are
/// placed one unit below their successor.
inline std::vector<double> laplace_points(const Weight& w, int N, double left = -50.0,
                                          double right = 1e6) {
  if (w.family() == Family::theorem3)
    throw FamilyMismatch("laplace_points: psi' of theorem3 weights is piecewise constant");
  std::vector<double> y(static_cast<std::size_t>(N) + 1, std::nan(""));
  std::vector<bool> deferred(y.size(), false);
  for (int n = 0; n <= N; ++n) {
    const double target = 2.0 * n + 2.0;
    if (w.dpsi(left) > target) {
      deferred[n] = true;
      continue;
    }
    double lo = left, hi = std::max(left, 0.0) + 1.0;
    while (w.dpsi(hi) < target) {
      lo = hi;
      hi = left + 2.0 * (hi - left);
      if (hi > right)
        throw LaplaceError("laplace_points: psi' stays below " + std::to_string(target) +
                               " on the horizon (max reachable n = " + std::to_string(n - 1) + ")",
                           n - 1);
    }
    for (int it = 0; it < 300; ++it) {
      double mid = 0.5 * (lo + hi);
      double d = w.dpsi(mid);
      if (std::fabs(d - target) <= 1e-12 * target) {
        lo = hi = mid;
        break;
      }
      (d < target ? lo : hi) = mid;
      if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(mid))) break;
    }
    double yn = 0.5 * (lo + hi);
    if (std::fabs(w.dpsi(yn) - target) > 1e-10 * target)
      throw Error("laplace_points: psi' is not continuous near t=" + std::to_string(yn));
    y[n] = yn;
  }
  for (int n = N; n >= 0; --n) {
    if (!deferred[n]) continue;
    if (n == N) throw LaplaceError("laplace_points: no index reachable", -1);
    y[n] = y[n + 1] - 1.0;
  }
  return y;
}

namespace detail {

// log of int_a^b e^{(c - slope) t + (slope a0 - psi_a0)} dt for one linear piece.
inline double log_piece_integral(double c, const LinearPiece& p, double a, double b) {
  const double k = c - p.slope;
  auto expo = [&](double t) {
    return p.slope == 0.0 ? c * t - p.psi_a : c * t - (p.psi_a + p.slope * (t - p.a));
  };
  if (std::isinf(a)) {
    // Only the constant extension reaches -infinity; it has slope 0 and c > 0.
    if (!(k > 0)) throw PreconditionError("non-integrable left tail");
    return c * b - p.psi_a - std::log(k);
  }
  if (std::isinf(b)) {
    if (!(k < 0)) throw PreconditionError("non-integrable right tail");
    return expo(a) - std::log(-k);
  }
  const double w = b - a;
  if (w <= 0) return -std::numeric_limits<double>::infinity();
  if (k == 0.0) return expo(a) + std::log(w);
  if (k > 0) return expo(b) + std::log(-std::expm1(-k * w)) - std::log(k);
  return expo(a) + std::log(-std::expm1(k * w)) - std::log(-k);
}

}  // namespace detail

/// log of int_lo^hi e^{c t - psi(t)} dt. Exact piece-by-piece for theorem3
/// weights; adaptive quadrature otherwise (infinite ends are truncated where
/// the integrand falls e^{-40} below its peak).
inline QuadratureResult log_moment_integral(const Weight& w, double c, double lo, double hi,
                                            double rel_tol = 1e-11, double peak_guess = 0.0,
                                            double scale = 1.0) {
  if (w.family() == Family::theorem3) {
    const auto& k = w.knots();
    std::vector<LogReal> parts;
    double best = -std::numeric_limits<double>::infinity();
    bool closed = !std::isinf(hi) && hi <= k.back();
    for (const auto& p : w.linear_pieces(k.back())) {
      double a = std::max(lo, p.a), b = std::min(hi, p.b);
      if (!(b > a)) continue;
      double v = detail::log_piece_integral(c, p, a, b);
      parts.push_back(LogReal::from_log(v));
      best = std::max(best, v);
      // Slopes of all later pieces exceed that of a piece ending at a knot,
      // so once such a piece decays the remainder is below e^{-60} of the total.
      bool ends_at_knot = std::binary_search(k.begin(), k.end(), p.b);
      if (ends_at_knot && p.slope > c && c * b - w.psi(b) < best - 60.0) {
        closed = true;
        break;
      }
    }
    if (!closed) throw PreconditionError("non-integrable right tail");
    return {log_sum(parts), 0.0, 0};
  }
  double a = lo, b = hi;
  if (std::isinf(lo) || std::isinf(hi)) {
    auto logf = [&](double t) { return c * t - w.psi(t); };
    auto [wl, wr] = tail_window(logf, peak_guess, scale);
    if (std::isinf(lo)) a = wl;
    if (std::isinf(hi)) b = wr;
    if (!std::isinf(lo)) a = lo;
    if (!std::isinf(hi)) b = hi;
    if (b <= a) return {};
  }
  QuadratureSpec spec{rel_tol, 4000, a, b};
  double mag = 0.0;
  for (double t : {a, 0.5 * (a + b), b, peak_guess})
    mag = std::max(mag, std::fabs(c * t) + std::fabs(w.psi(t)));
  spec.noise_floor = 32.0 * std::numeric_limits<double>::epsilon() * mag;
  return integrate_log([&](double t) { return LogReal::from_log(c * t - w.psi(t)); }, spec);
}

/// Builds log m_n for n = 0..N.
inline MomentTable build_table(const Weight& w, int N, double rel_tol = 1e-12,
                               unsigned threads = 1) {
  MomentTable tab;
  tab.weight_label = w.label();
  tab.weight = w;
  const std::size_t count = static_cast<std::size_t>(N) + 1;
  tab.logm.resize(count);
  tab.rel_error.assign(count, 0.0);
  const double log2pi = std::log(kTwoPi);
  const double inf = std::numeric_limits<double>::infinity();

  if (w.family() == Family::theorem3) {
    for (std::size_t n = 0; n < count; ++n) {
      auto r = log_moment_integral(w, 2.0 * double(n) + 2.0, -inf, inf);
      tab.logm[n] = LogReal::from_log(log2pi + r.value.logmag);
    }
    return tab;
  }

  tab.y = laplace_points(w, N);
  tab.alpha.resize(count);
  for (std::size_t n = 0; n < count; ++n) tab.alpha[n] = w.d2psi(tab.y[n]);
  parallel_for(count, threads, [&](std::size_t n) {
    const double c = 2.0 * double(n) + 2.0;
    double scale = tab.alpha[n] > 0 ? 1.0 / std::sqrt(tab.alpha[n]) : 1.0;
    auto r = log_moment_integral(w, c, -inf, inf, rel_tol, tab.y[n], scale);
    tab.logm[n] = LogReal::from_log(log2pi + r.value.logmag);
    tab.rel_error[n] = r.rel_error;
  });
  return tab;
}

struct LaplaceCheckReport {
  std::vector<double> ratio;  // r_n, n = 0..N
  int n_lo = 0, n_hi = 0;
  double spread = 0.0;        // max r / min r over [n_lo, n_hi]
  double oscillation = 0.0;   // (max - min) / mean over the top quartile of [n_lo, n_hi]
  bool pass = false;
};

/// r_n = m_n / [e^{(2n+2) y_n - psi(y_n)} psi''(y_n)^{-1/2}]. Defaults to
/// n in [N/2, N].
inline LaplaceCheckReport laplace_check(const MomentTable& tab, int n_lo = -1, int n_hi = -1) {
  if (!tab.weight || tab.y.empty())
    throw PreconditionError("laplace_check: table carries no weight / Laplace points");
  const Weight& w = *tab.weight;
  const int N = tab.max_degree();
  if (n_hi < 0) n_hi = N;
  if (n_lo < 0) n_lo = N / 2;
  if (n_lo >= n_hi || n_hi > N) throw PreconditionError("laplace_check: bad index range");
  double lo = std::max(tab.y[n_lo], 1e-3), hi = tab.y[n_hi];
  auto reg = classify(w, lo, hi, 200);
  if (reg.regime != Regime::t2_like)
    throw PreconditionError(std::string("laplace_check: weight is ") + regime_name(reg.regime) +
                            ", the estimate needs the T2 regime");
  LaplaceCheckReport rep;
  rep.n_lo = n_lo;
  rep.n_hi = n_hi;
  rep.ratio.resize(tab.size());
  for (std::size_t n = 0; n < tab.size(); ++n) {
    double yn = tab.y[n];
    double lr = tab.log_m(n) - ((2.0 * double(n) + 2.0) * yn - w.psi(yn)) +
                0.5 * std::log(tab.alpha[n]);
    rep.ratio[n] = std::exp(lr);
  }
  auto first = rep.ratio.begin() + n_lo, last = rep.ratio.begin() + n_hi + 1;
  auto [mn, mx] = std::minmax_element(first, last);
  rep.spread = *mx / *mn;
  int q = n_hi - (n_hi - n_lo) / 4;
  auto [qmn, qmx] = std::minmax_element(rep.ratio.begin() + q, last);
  double mean = 0.0;
  for (auto it = rep.ratio.begin() + q; it != last; ++it) mean += *it;
  mean /= double(last - (rep.ratio.begin() + q));
  rep.oscillation = (*qmx - *qmn) / mean;
  rep.pass = rep.spread <= 20.0 && rep.oscillation <= 0.10;
  return rep;
}

/// Samples (g(t) - g(0)) / (alpha_n t^2) with g(t) = psi(y_n + t) - (y_n + t) psi'(y_n)
/// on 0 < |t| <= C alpha_n^{-1/2}, C alpha_n^{-2/3} or both, depending on the caller.
struct GrowthSample {
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = -std::numeric_limits<double>::infinity();
};

inline GrowthSample quadratic_growth(const Weight& w, double yn, double reach, int samples = 64) {
  const double a = w.d2psi(yn), s = w.dpsi(yn);
  auto g = [&](double t) { return w.psi(yn + t) - (yn + t) * s; };
  const double g0 = g(0.0);
  GrowthSample out;
  for (int i = 1; i <= samples; ++i) {
    double t = reach * i / samples;
    for (double tt : {t, -t}) {
      double r = (g(tt) - g0) / (a * tt * tt);
      out.min_ratio = std::min(out.min_ratio, r);
      out.max_ratio = std::max(out.max_ratio, r);
    }
  }
  return out;
}

// CSV: n, logm, y_n, alpha_n

inline void write_moments_csv(std::ostream& os, const MomentTable& tab) {
  csv::Writer w(os);
  w.row({"n", "logm", "y_n", "alpha_n"});
  for (std::size_t n = 0; n < tab.size(); ++n) {
    double y = n < tab.y.size() ? tab.y[n] : std::nan("");
    double a = n < tab.alpha.size() ? tab.alpha[n] : std::nan("");
    w.row({std::to_string(n), csv::format_double(tab.log_m(n)), csv::format_double(y),
           csv::format_double(a)});
  }
}

inline MomentTable read_moments_csv(std::istream& is) {
  auto rows = csv::read_all(is);
  csv::expect_header(rows, {"n", "logm", "y_n", "alpha_n"});
  MomentTable tab;
  tab.weight_label = "csv";
  bool have_y = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 4 || std::stoul(r[0]) != i - 1) throw Error("moments csv: bad row " + std::to_string(i));
    tab.logm.push_back(LogReal::from_log(csv::parse_double(r[1])));
    double y = csv::parse_double(r[2]), a = csv::parse_double(r[3]);
    if (std::isnan(y)) have_y = false;
    tab.y.push_back(y);
    tab.alpha.push_back(a);
  }
  if (!have_y) {
    tab.y.clear();
    tab.alpha.clear();
  }
  tab.rel_error.assign(tab.logm.size(), 0.0);
  return tab;
}

}  // namespace fockrb
