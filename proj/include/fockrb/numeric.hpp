#pragma once

// Extended-range scalars, compensated log-domain summation, adaptive
// quadrature in the log-radius coordinate, and the sup-norm convex fit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace fockrb {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation does not hold for the given input.
struct PreconditionError : Error {
  using Error::Error;
};

/// An operation was asked to run on a weight family it is not defined for.
struct FamilyMismatch : Error {
  using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double phi) {
  double r = std::remainder(phi, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

// ---------------------------------------------------------------------------
// LogReal
// ---------------------------------------------------------------------------

/// Signed real stored as sign and natural log of the magnitude.
/// sign == 0 is exact zero; logmag is then ignored.
struct LogReal {
  int sign = 0;
  double logmag = 0.0;

  static LogReal zero() { return {}; }
  static LogReal one() { return {1, 0.0}; }
  static LogReal from_log(double logmag, int sign = 1) {
    if (sign == 0 || logmag == -std::numeric_limits<double>::infinity()) return {};
    return {sign > 0 ? 1 : -1, logmag};
  }
  static LogReal from(double x) {
    if (x == 0.0) return {};
    return {x > 0 ? 1 : -1, std::log(std::fabs(x))};
  }

  bool is_zero() const { return sign == 0; }
  double value() const { return sign == 0 ? 0.0 : sign * std::exp(logmag); }
  /// log|x|, -inf for zero.
  double log_abs() const {
    return sign == 0 ? -std::numeric_limits<double>::infinity() : logmag;
  }

  LogReal operator-() const { return {-sign, logmag}; }
  friend LogReal operator*(LogReal a, LogReal b) {
    if (a.sign == 0 || b.sign == 0) return {};
    return {a.sign * b.sign, a.logmag + b.logmag};
  }
  friend LogReal operator/(LogReal a, LogReal b) {
    if (b.sign == 0) throw Error("LogReal division by zero");
    if (a.sign == 0) return {};
    return {a.sign * b.sign, a.logmag - b.logmag};
  }
  LogReal pow(double p) const {
    if (sign == 0) return {};
    if (sign < 0) throw Error("LogReal::pow of negative value");
    return {1, p * logmag};
  }
};

// ---------------------------------------------------------------------------
// LogComplex
// ---------------------------------------------------------------------------

/// Complex number as (log modulus, phase) with a tagged zero.
struct LogComplex {
  double logmag = 0.0;
  double phase = 0.0;
  bool zero = true;

  static LogComplex zero_value() { return {}; }
  static LogComplex one() { return {0.0, 0.0, false}; }
  static LogComplex polar_log(double logmag, double phase) {
    if (logmag == -std::numeric_limits<double>::infinity()) return {};
    return {logmag, wrap_phase(phase), false};
  }
  static LogComplex from(std::complex<double> z) {
    if (z == 0.0) return {};
    return {std::log(std::abs(z)), wrap_phase(std::arg(z)), false};
  }
  static LogComplex from(LogReal x) {
    if (x.is_zero()) return {};
    return {x.logmag, x.sign > 0 ? 0.0 : kPi, false};
  }

  bool is_zero() const { return zero; }
  double log_abs() const {
    return zero ? -std::numeric_limits<double>::infinity() : logmag;
  }
  std::complex<double> value() const {
    if (zero) return {0.0, 0.0};
    return std::polar(std::exp(logmag), phase);
  }
  /// value * e^{-ref}: keeps magnitudes order one when ref ~ logmag.
  std::complex<double> scaled(double ref) const {
    if (zero) return {0.0, 0.0};
    return std::polar(std::exp(logmag - ref), phase);
  }
  LogComplex conj() const {
    if (zero) return {};
    return {logmag, wrap_phase(-phase), false};
  }
  LogComplex operator-() const {
    if (zero) return {};
    return {logmag, wrap_phase(phase + kPi), false};
  }
  friend LogComplex operator*(LogComplex a, LogComplex b) {
    if (a.zero || b.zero) return {};
    return {a.logmag + b.logmag, wrap_phase(a.phase + b.phase), false};
  }
  friend LogComplex operator/(LogComplex a, LogComplex b) {
    if (b.zero) throw Error("LogComplex division by zero");
    if (a.zero) return {};
    return {a.logmag - b.logmag, wrap_phase(a.phase - b.phase), false};
  }
  LogComplex pow(int k) const {
    if (zero) return k == 0 ? one() : LogComplex{};
    return {k * logmag, wrap_phase(k * phase), false};
  }
};

// ---------------------------------------------------------------------------
// Summation
// ---------------------------------------------------------------------------

/// Side channel for summation accuracy.
struct SumReport {
  bool cancellation = false;   // residual fell below kCancelThreshold of the max term
  double max_logmag = -std::numeric_limits<double>::infinity();
  double residual_ratio = 0.0; // |sum| / max term
};

inline constexpr double kCancelThreshold = 1e-12;

namespace detail {

// Neumaier compensated accumulator.
struct Compensated {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  double result() const { return sum + c; }
};

}  // namespace detail

/// Log of the exact sum of signed terms. Terms are scaled by the largest
/// magnitude and accumulated with compensation; a residual below 1e-12 of
/// the largest term is reported as exact zero with the cancellation flag set.
inline LogReal log_sum(std::span<const LogReal> terms, SumReport* report = nullptr) {
  SumReport rep;
  for (const auto& t : terms)
    if (!t.is_zero()) rep.max_logmag = std::max(rep.max_logmag, t.logmag);
  if (rep.max_logmag == -std::numeric_limits<double>::infinity()) {
    if (report) *report = rep;
    return LogReal::zero();
  }
  detail::Compensated acc;
  for (const auto& t : terms)
    if (!t.is_zero()) acc.add(t.sign * std::exp(t.logmag - rep.max_logmag));
  double s = acc.result();
  rep.residual_ratio = std::fabs(s);
  LogReal out;
  if (std::fabs(s) < kCancelThreshold) {
    rep.cancellation = true;
    out = LogReal::zero();
  } else {
    out = LogReal{s > 0 ? 1 : -1, rep.max_logmag + std::log(std::fabs(s))};
  }
  if (report) *report = rep;
  return out;
}

inline LogReal log_sum(std::initializer_list<LogReal> terms, SumReport* report = nullptr) {
  return log_sum(std::span<const LogReal>(terms.begin(), terms.size()), report);
}

/// Complex analogue of log_sum; the residual is resolved to modulus and
/// phase in (-pi, pi].
inline LogComplex log_sum_complex(std::span<const LogComplex> terms,
                                  SumReport* report = nullptr) {
  SumReport rep;
  for (const auto& t : terms)
    if (!t.is_zero()) rep.max_logmag = std::max(rep.max_logmag, t.logmag);
  if (rep.max_logmag == -std::numeric_limits<double>::infinity()) {
    if (report) *report = rep;
    return LogComplex::zero_value();
  }
  detail::Compensated re, im;
  for (const auto& t : terms) {
    if (t.is_zero()) continue;
    double m = std::exp(t.logmag - rep.max_logmag);
    re.add(m * std::cos(t.phase));
    im.add(m * std::sin(t.phase));
  }
  std::complex<double> s(re.result(), im.result());
  rep.residual_ratio = std::abs(s);
  LogComplex out;
  if (std::abs(s) < kCancelThreshold) {
    rep.cancellation = true;
  } else {
    out = LogComplex::polar_log(rep.max_logmag + std::log(std::abs(s)), std::arg(s));
  }
  if (report) *report = rep;
  return out;
}

inline LogComplex log_sum_complex(std::initializer_list<LogComplex> terms,
                                  SumReport* report = nullptr) {
  return log_sum_complex(std::span<const LogComplex>(terms.begin(), terms.size()), report);
}

/// Numerically stable log(e^a + e^b).
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Adaptive quadrature request over a window [lo, hi] of t = log r.
struct QuadratureSpec {
  double rel_tol = 1e-11;
  int max_subdivisions = 4000;
  double lo = 0.0;
  double hi = 1.0;
  /// Relative rounding noise of the integrand itself. When log f(t) is a
  /// difference of large terms its evaluation carries ~eps * |terms| relative
  /// error, and no subdivision can beat that; the stopping rule uses
  /// max(rel_tol, noise_floor).
  double noise_floor = 0.0;
};

struct QuadratureResult {
  LogReal value;
  double rel_error = 0.0;  // estimated |error| / |value|
  int subdivisions = 0;
};

/// Thrown when the subdivision budget runs out. Carries the best estimate.
struct QuadratureError : Error {
  QuadratureResult best;
  QuadratureError(const std::string& what, QuadratureResult b) : Error(what), best(b) {}
};

namespace detail {

// Gauss-Kronrod 7-15 nodes on [-1, 1].
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329,
                                   0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926,
                                   0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013,
                                   0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245,
                                   0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970,
                                   0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518,
                                   0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550,
                                   0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649,
                                   0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082,
                                  0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975,
                                  0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

struct Rescale {
  double ref;
};

template <class F>
Panel gk15(F& f, double a, double b, double ref) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  auto val = [&](double t) {
    LogReal v = f(t);
    if (v.is_zero()) return 0.0;
    if (v.logmag - ref > 600.0) throw Rescale{v.logmag};
    return v.sign * std::exp(v.logmag - ref);
  };
  double fc = val(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    double x = h * kXgk[j];
    double f1 = val(c - x), f2 = val(c + x);
    rk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
  }
  return {a, b, rk * h, std::fabs((rk - rg) * h)};
}

}  // namespace detail

/// Integrates e^{f(t)} (f returns a LogReal, so signed integrands are
/// allowed) over spec.[lo, hi] by adaptive Gauss-Kronrod bisection. Values
/// are handled relative to the largest sampled magnitude, so results far
/// outside double range are fine.
template <class F>
QuadratureResult integrate_log(F&& f, const QuadratureSpec& spec) {
  if (!(spec.rel_tol > 0.0 && spec.rel_tol < 1.0))
    throw PreconditionError("integrate_log: tolerance must lie in (0, 1)");
  if (!(std::isfinite(spec.lo) && std::isfinite(spec.hi)) || spec.hi < spec.lo)
    throw PreconditionError("integrate_log: window must be finite and ordered");
  if (spec.hi == spec.lo) return {};

  double ref = -std::numeric_limits<double>::infinity();
  constexpr int kProbe = 257;
  for (int i = 0; i < kProbe; ++i) {
    double t = spec.lo + (spec.hi - spec.lo) * i / (kProbe - 1);
    LogReal v = f(t);
    if (!v.is_zero()) ref = std::max(ref, v.logmag);
  }
  if (ref == -std::numeric_limits<double>::infinity()) ref = 0.0;

  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      std::priority_queue<detail::Panel> heap;
      auto first = detail::gk15(f, spec.lo, spec.hi, ref);
      heap.push(first);
      double total = first.value, err = first.error;
      int splits = 0;
      const double target = std::max(spec.rel_tol, spec.noise_floor);
      while (err > target * std::fabs(total) && err > 0.0) {
        if (splits >= spec.max_subdivisions) {
          QuadratureResult best{LogReal::from(total), err / std::fabs(total), splits};
          best.value.logmag += ref;
          throw QuadratureError("integrate_log: subdivision budget exhausted", best);
        }
        auto p = heap.top();
        heap.pop();
        double m = 0.5 * (p.a + p.b);
        auto l = detail::gk15(f, p.a, m, ref);
        auto r = detail::gk15(f, m, p.b, ref);
        total += l.value + r.value - p.value;
        err += l.error + r.error - p.error;
        heap.push(l);
        heap.push(r);
        ++splits;
      }
      // Recompute from panels to shed accumulated update error.
      detail::Compensated acc, eacc;
      while (!heap.empty()) {
        acc.add(heap.top().value);
        eacc.add(heap.top().error);
        heap.pop();
      }
      total = acc.result();
      err = eacc.result();
      QuadratureResult out;
      out.value = LogReal::from(total);
      if (!out.value.is_zero()) out.value.logmag += ref;
      out.rel_error = total != 0.0 ? err / std::fabs(total) : 0.0;
      out.subdivisions = splits;
      return out;
    } catch (const detail::Rescale& r) {
      ref = r.ref;
    }
  }
  throw Error("integrate_log: integrand magnitude could not be stabilised");
}

/// Window [lo, hi] around a peak guess where log f drops by `drop` below
/// the peak on both sides. Throws naming the side when the tail does not
/// fall off inside `horizon`.
template <class F>
std::pair<double, double> tail_window(F&& logf, double guess, double scale, double drop = 40.0,
                                      double horizon = 1e5) {
  scale = std::max(scale, 1e-6);
  // Hill-climb to the peak.
  double t = guess, v = logf(t), step = scale;
  for (int it = 0; it < 400 && step > 1e-9 * std::max(1.0, std::fabs(t)); ++it) {
    if (std::fabs(t - guess) > horizon)
      throw PreconditionError(std::string("non-integrable ") + (t > guess ? "right" : "left") +
                              " tail");
    double vl = logf(t - step), vr = logf(t + step);
    if (vr > v && vr >= vl) {
      t += step; v = vr; step *= 2.0;
    } else if (vl > v) {
      t -= step; v = vl; step *= 2.0;
    } else {
      step *= 0.5;
    }
  }
  const double peak = v;
  auto walk = [&](double dir, const char* side) {
    double s = scale;
    while (true) {
      double nx = t + dir * s;
      if (std::fabs(nx - t) > horizon)
        throw PreconditionError(std::string("non-integrable ") + side + " tail");
      if (logf(nx) < peak - drop) return nx;
      s *= 1.5;
    }
  };
  return {walk(-1.0, "left"), walk(1.0, "right")};
}

// ---------------------------------------------------------------------------
// Convex sup-norm fit
// ---------------------------------------------------------------------------

/// min over convex v of max_n |x_n - v_n|.
///
/// The optimum equals half of max_n (x_n - c_n), where c is the greatest
/// convex minorant of x: any feasible (v, d) gives x_j - d <= v_j <= chord
/// of v <= chord of x + d, and v = c + d* attains the bound. The minorant
/// is the lower convex hull, so the LP is solved exactly in O(n).
inline double convex_fit_defect(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) return 0.0;
  std::vector<std::size_t> hull;
  hull.reserve(n);
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    // (a - o) x (b - o) in the (index, value) plane.
    double ax = double(a) - double(o), ay = x[a] - x[o];
    double bx = double(b) - double(o), by = x[b] - x[o];
    return ax * by - ay * bx;
  };
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= 0.0)
      hull.pop_back();
    hull.push_back(i);
  }
  double gap = 0.0;
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    std::size_t a = hull[h], b = hull[h + 1];
    for (std::size_t j = a + 1; j < b; ++j) {
      double c = x[a] + (x[b] - x[a]) * double(j - a) / double(b - a);
      gap = std::max(gap, x[j] - c);
    }
  }
  return 0.5 * gap;
}

inline double convex_fit_defect(const std::vector<double>& x) {
  return convex_fit_defect(std::span<const double>(x));
}

// ---------------------------------------------------------------------------
// Deterministic parallel loop
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
/// block partition; results must be written to per-index slots.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fockrb
