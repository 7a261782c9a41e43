#pragma once

// Radial weights h(r) = psi(log r), the weight families used by the
// studies, regime classification, the flat-point search, the lacunary
// piecewise-linear weight and the companion majorant ell.

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fockrb/numeric.hpp"

namespace fockrb {

enum class Family { power_exponent, log_power, theorem3, custom };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::power_exponent: return "power";
    case Family::log_power: return "log-power";
    case Family::theorem3: return "theorem3";
    case Family::custom: return "custom";
  }
  return "?";
}

/// Increasing log-radii log R_1 < log R_2 < ... with log R_1 >= log 2 and
/// log R_{n+1} >= 2 log R_n.
struct LacunarySequence {
  enum class Origin { user, auto_phi };
  std::vector<double> logR;
  Origin origin = Origin::user;
  /// For auto_phi sequences: psi(log R_n) / phi(log R_n) at each knot.
  std::vector<double> certificate;

  static LacunarySequence from_radii(const std::vector<double>& R) {
    LacunarySequence s;
    for (double r : R) s.logR.push_back(std::log(r));
    return s;
  }
  /// R_1 = 2, R_{n+1} = R_n^2.
  static LacunarySequence squaring(int depth) {
    LacunarySequence s;
    double l = std::log(2.0);
    for (int i = 0; i < depth; ++i, l *= 2.0) s.logR.push_back(l);
    return s;
  }

  /// Throws PreconditionError naming the first index violating the lacunary condition.
  void validate() const {
    if (logR.empty()) throw PreconditionError("lacunary sequence is empty");
    const double slack = 1e-12;
    if (logR[0] < std::log(2.0) * (1 - slack))
      throw PreconditionError("lacunary sequence: R_1 < 2");
    for (std::size_t i = 1; i < logR.size(); ++i)
      if (logR[i] < 2.0 * logR[i - 1] * (1 - slack))
        throw PreconditionError("lacunary sequence: R_" + std::to_string(i + 1) +
                                " < R_" + std::to_string(i) + "^2");
  }
};

/// Linear piece of a piecewise-linear psi: psi(t) = psi_a + slope (t - a) on [a, b].
struct LinearPiece {
  double a, b, psi_a, slope;
};

class Weight {
 public:
  using Fn = std::function<double(double)>;

  /// h(r) = r^beta, psi(t) = e^{beta t}.
  static Weight power_exponent(double beta) {
    if (!(beta > 0)) throw PreconditionError("power exponent must be positive");
    Weight w(Family::power_exponent, "power(beta=" + num(beta) + ")", beta);
    w.impl_->psi = [beta](double t) { return std::exp(beta * t); };
    w.impl_->d1 = [beta](double t) { return beta * std::exp(beta * t); };
    w.impl_->d2 = [beta](double t) { return beta * beta * std::exp(beta * t); };
    w.impl_->d3 = [beta](double t) { return beta * beta * beta * std::exp(beta * t); };
    return w;
  }

  /// psi(t) = max(t, 0)^alpha, i.e. h(r) = (log+ r)^alpha.
  static Weight log_power(double alpha) {
    if (!(alpha > 1)) throw PreconditionError("log-power exponent must exceed 1");
    Weight w(Family::log_power, "log-power(alpha=" + num(alpha) + ")", alpha);
    w.impl_->psi = [alpha](double t) { return t > 0 ? std::pow(t, alpha) : 0.0; };
    w.impl_->d1 = [alpha](double t) { return t > 0 ? alpha * std::pow(t, alpha - 1) : 0.0; };
    w.impl_->d2 = [alpha](double t) {
      return t > 0 ? alpha * (alpha - 1) * std::pow(t, alpha - 2) : 0.0;
    };
    w.impl_->d3 = [alpha](double t) {
      return t > 0 ? alpha * (alpha - 1) * (alpha - 2) * std::pow(t, alpha - 3) : 0.0;
    };
    return w;
  }

  /// Arbitrary psi. Missing derivatives fall back to central differences
  /// with step max(1e-6, 1e-4 tau(t)).
  static Weight custom(std::string label, Fn psi, Fn d1 = {}, Fn d2 = {}, Fn d3 = {}) {
    Weight w(Family::custom, std::move(label), 0.0);
    w.impl_->psi = std::move(psi);
    w.impl_->d1 = std::move(d1);
    w.impl_->d2 = std::move(d2);
    w.impl_->d3 = std::move(d3);
    return w;
  }

  /// psi(t) = t^2 on the whole line (log_power(2) clamps t < 0 to zero).
  static Weight square() {
    return custom(
        "t^2", [](double t) { return t * t; }, [](double t) { return 2 * t; }, [](double) { return 2.0; },
        [](double) { return 0.0; });
  }

  /// The lacunary weight
  ///   psi(t) = t + 2 sum_{s<=n} s (t - log R_s) + n min(t - log R_n, log R_{n+1} - t)
  /// on [log R_n, log R_{n+1}]. Knots past the supplied ones continue by
  /// squaring; below log R_1, psi is held at psi(log R_1) = log R_1.
  static Weight theorem3(const LacunarySequence& R) {
    R.validate();
    Weight w(Family::theorem3, "theorem3(depth=" + std::to_string(R.logR.size()) + ")", 0.0);
    auto& k = w.impl_->knots;
    k = R.logR;
    while (k.back() < 1e6) k.push_back(2.0 * k.back());
    w.impl_->depth = static_cast<int>(R.logR.size());
    auto& pre = w.impl_->prefix;  // pre[n] = sum_{s<=n} s L_s, pre[0] = 0
    pre.assign(k.size() + 1, 0.0);
    for (std::size_t s = 1; s <= k.size(); ++s) pre[s] = pre[s - 1] + double(s) * k[s - 1];
    return w;
  }

  Weight shifted(double c) const {
    Weight w = *this;
    w.impl_ = std::make_shared<Impl>(*impl_);
    w.impl_->offset += c;
    w.impl_->label += "+" + num(c);
    return w;
  }

  Family family() const { return impl_->family; }
  const std::string& label() const { return impl_->label; }
  double parameter() const { return impl_->param; }
  double offset() const { return impl_->offset; }
  /// Knots log R_n of a theorem3 weight, including the squaring extension.
  const std::vector<double>& knots() const { return impl_->knots; }
  int declared_depth() const { return impl_->depth; }

  double psi(double t) const {
    if (impl_->family == Family::theorem3) return t3_psi(t) + impl_->offset;
    return impl_->psi(t) + impl_->offset;
  }
  double h(double r) const { return psi(std::log(r)); }

  double dpsi(double t) const {
    if (impl_->family == Family::theorem3) return t3_slope(t);
    if (impl_->d1) return impl_->d1(t);
    double s = step(t);
    return (impl_->psi(t + s) - impl_->psi(t - s)) / (2 * s);
  }
  double d2psi(double t) const {
    if (impl_->family == Family::theorem3) return 0.0;
    if (impl_->d2) return impl_->d2(t);
    double s = step(t);
    if (impl_->d1) return (impl_->d1(t + s) - impl_->d1(t - s)) / (2 * s);
    return (impl_->psi(t + s) - 2 * impl_->psi(t) + impl_->psi(t - s)) / (s * s);
  }
  double d3psi(double t) const {
    if (impl_->family == Family::theorem3) return 0.0;
    if (impl_->d3) return impl_->d3(t);
    double s = step(t);
    if (impl_->d2) return (impl_->d2(t + s) - impl_->d2(t - s)) / (2 * s);
    return (d2psi(t + s) - d2psi(t - s)) / (2 * s);
  }

  /// tau(t) = psi''(t)^{-1/2}.
  double tau(double t) const {
    require_smooth("tau");
    double d2 = d2psi(t);
    if (!(d2 > 0)) throw PreconditionError("tau: psi'' is not positive at t=" + num(t));
    return 1.0 / std::sqrt(d2);
  }
  /// rho(r) = (Laplacian h)^{-1/2} = r tau(log r).
  double rho(double r) const { return r * tau(std::log(r)); }

  /// Exact linear pieces of a theorem3 psi covering (-inf, t_hi]; the first
  /// piece is the constant extension starting at -infinity.
  std::vector<LinearPiece> linear_pieces(double t_hi) const {
    if (impl_->family != Family::theorem3)
      throw FamilyMismatch("linear_pieces: only theorem3 weights are piecewise linear");
    const auto& k = impl_->knots;
    std::vector<LinearPiece> out;
    out.push_back({-std::numeric_limits<double>::infinity(), k[0], psi(k[0]), 0.0});
    for (std::size_t n = 1; n < k.size(); ++n) {
      double a = k[n - 1], b = k[n], m = 0.5 * (a + b);
      out.push_back({a, m, psi(a), t3_slope(a)});
      out.push_back({m, b, psi(m), t3_slope(m)});
      if (b > t_hi) break;
    }
    return out;
  }

 private:
  struct Impl {
    Family family;
    std::string label;
    double param = 0.0;
    double offset = 0.0;
    Fn psi, d1, d2, d3;
    std::vector<double> knots;
    std::vector<double> prefix;
    int depth = 0;
  };
  std::shared_ptr<Impl> impl_;

  Weight(Family f, std::string label, double param) : impl_(std::make_shared<Impl>()) {
    impl_->family = f;
    impl_->label = std::move(label);
    impl_->param = param;
  }

  static std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
  }

  void require_smooth(const char* what) const {
    if (impl_->family == Family::theorem3)
      throw FamilyMismatch(std::string(what) +
                           ": theorem3 weights have psi'' = 0 a.e.; metric diagnostics are "
                           "undefined for this family");
  }

  double step(double t) const {
    // Preliminary curvature estimate to set the metric-scaled step.
    const double h0 = 1e-3;
    double d2 = (impl_->psi(t + h0) - 2 * impl_->psi(t) + impl_->psi(t - h0)) / (h0 * h0);
    double tau = d2 > 0 ? 1.0 / std::sqrt(d2) : 1.0;
    return std::max(1e-6, 1e-4 * tau);
  }

  // Segment index n (1-based) with L_n <= t < L_{n+1}; 0 below L_1.
  std::size_t t3_segment(double t) const {
    const auto& k = impl_->knots;
    auto it = std::upper_bound(k.begin(), k.end(), t);
    return static_cast<std::size_t>(it - k.begin());
  }

  double t3_psi(double t) const {
    const auto& k = impl_->knots;
    std::size_t n = t3_segment(t);
    if (n == 0) return k[0];
    if (n >= k.size()) throw Error("theorem3 psi: t beyond knot extension");
    double nn = double(n);
    double sum = nn * (nn + 1) / 2.0 * t - impl_->prefix[n];  // sum_{s<=n} s (t - L_s)
    return t + 2.0 * sum + nn * std::min(t - k[n - 1], k[n] - t);
  }

  double t3_slope(double t) const {
    const auto& k = impl_->knots;
    std::size_t n = t3_segment(t);
    if (n == 0) return 0.0;
    double nn = double(n);
    double base = 1.0 + nn * (nn + 1);
    return t < 0.5 * (k[n - 1] + k[n]) ? base + nn : base - nn;
  }
};

/// Alias matching the operation name used by the studies.
inline Weight theorem3_weight(const LacunarySequence& R) { return Weight::theorem3(R); }

// ---------------------------------------------------------------------------
// Regime classification
// ---------------------------------------------------------------------------

enum class Regime { t1_like, t2_like, neither };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::t1_like: return "T1-like";
    case Regime::t2_like: return "T2-like";
    case Regime::neither: return "neither";
  }
  return "?";
}

struct RegimeReport {
  Regime regime = Regime::neither;
  bool d2_positive = true;
  bool d2_nondecreasing = true;
  bool d2_nonincreasing = true;
  double d2_growth = 1.0;  // psi''(hi) / psi''(lo)
  double dpsi_lo = 0.0, dpsi_hi = 0.0;
  double sup_d3_ratio = 0.0;  // sup |psi'''| / psi''^{5/3}
  double sup_d3_at = 0.0;
  // Witnessing samples: first violation of positivity / monotonicity, NaN if none.
  double nonpositive_at = std::nan("");
  double decrease_at = std::nan("");
  double increase_at = std::nan("");
};

inline RegimeReport classify(const Weight& w, double lo, double hi, int samples = 400) {
  if (samples < 10 || !(hi > lo)) throw PreconditionError("classify: window too small");
  RegimeReport rep;
  const double rel = 1e-9;
  double prev = 0.0;
  for (int i = 0; i < samples; ++i) {
    double t = lo + (hi - lo) * i / (samples - 1);
    double d2 = w.d2psi(t);
    if (!(d2 > 0)) {
      if (rep.d2_positive) rep.nonpositive_at = t;
      rep.d2_positive = false;
    } else {
      double r = std::fabs(w.d3psi(t)) / std::pow(d2, 5.0 / 3.0);
      if (r > rep.sup_d3_ratio) {
        rep.sup_d3_ratio = r;
        rep.sup_d3_at = t;
      }
    }
    if (i > 0) {
      double tol = rel * std::max(std::fabs(prev), std::fabs(d2));
      if (d2 < prev - tol && rep.d2_nondecreasing) {
        rep.d2_nondecreasing = false;
        rep.decrease_at = t;
      }
      if (d2 > prev + tol && rep.d2_nonincreasing) {
        rep.d2_nonincreasing = false;
        rep.increase_at = t;
      }
    }
    prev = d2;
  }
  double d2lo = w.d2psi(lo), d2hi = w.d2psi(hi);
  rep.d2_growth = d2lo > 0 ? d2hi / d2lo : std::numeric_limits<double>::infinity();
  rep.dpsi_lo = w.dpsi(lo);
  rep.dpsi_hi = w.dpsi(hi);
  // Empirical psi' -> infinity: the slope gains at least max(1, 10%) across the window.
  bool slope_grows = rep.dpsi_hi > 0 &&
                     rep.dpsi_hi >= rep.dpsi_lo + std::max(1.0, 0.1 * std::fabs(rep.dpsi_lo));
  if (rep.d2_positive && rep.d2_nondecreasing && rep.d2_growth >= 2.0 && slope_grows)
    rep.regime = Regime::t1_like;
  else if (rep.d2_positive && rep.d2_nonincreasing && slope_grows &&
           std::isfinite(rep.sup_d3_ratio))
    rep.regime = Regime::t2_like;
  return rep;
}

// ---------------------------------------------------------------------------
// Flat point
// ---------------------------------------------------------------------------

struct FlatPoint {
  double y = 0.0;
  double tau = 0.0;
  double max_deviation = 0.0;  // sup |psi''(x)/psi''(y) - 1| on |x - y| <= A tau(y)
  int steps = 0;
};

namespace detail {

inline double flat_deviation(const Weight& w, double y, double A, double tau, int per_tau) {
  const double d2y = w.d2psi(y);
  const double half = A * tau;
  const int n = std::max(2, static_cast<int>(std::ceil(2 * half / (tau / per_tau))));
  double dev = 0.0;
  for (int i = 0; i <= n; ++i) {
    double x = y - half + 2 * half * i / n;
    double d2 = w.d2psi(x);
    if (!(d2 > 0))
      throw PreconditionError("find_flat_point: psi'' is not positive at t=" + std::to_string(x));
    dev = std::max(dev, std::fabs(d2 / d2y - 1.0));
  }
  return dev;
}

}  // namespace detail

/// Smallest y >= y0 on the tau(y)/4 search grid with
/// |psi''(x)/psi''(y) - 1| <= 1/A for |x - y| <= A tau(y); the window is
/// sampled at tau(y)/16.
inline FlatPoint find_flat_point(const Weight& w, double A, double y0, double horizon = 50.0) {
  if (!(A > 0)) throw PreconditionError("find_flat_point: A must be positive");
  double y = y0;
  int steps = 0;
  while (y <= y0 + horizon) {
    double d2 = w.d2psi(y);
    if (!(d2 > 0))
      throw PreconditionError("find_flat_point: psi'' is not positive at t=" + std::to_string(y));
    double tau = 1.0 / std::sqrt(d2);
    double dev = detail::flat_deviation(w, y, A, tau, 16);
    if (dev <= 1.0 / A) return {y, tau, dev, steps};
    y += tau / 4.0;
    ++steps;
  }
  throw Error("find_flat_point: no flat point within horizon");
}

// ---------------------------------------------------------------------------
// Greedy lacunary sequence for a convex majorant phi
// ---------------------------------------------------------------------------

/// log R_1 = log 2; then log R_{n+1} is the smallest x >= 2 log R_n with
/// psi(x) <= phi(x)/n, where psi is the lacunary weight built from the
/// knots so far. The certificate records psi/phi at each knot.
inline LacunarySequence choose_R_for_phi(const std::function<double(double)>& phi, int depth,
                                         double horizon = 1e7) {
  if (depth < 1) throw PreconditionError("choose_R_for_phi: depth must be >= 1");
  // x = o(phi(x)): phi(x)/x must keep growing over the probe points.
  double r1 = phi(10.0) / 10.0, r2 = phi(100.0) / 100.0, r3 = phi(1000.0) / 1000.0;
  if (!(r2 > r1 * (1 + 1e-9) && r3 > r2 * (1 + 1e-9) && r3 >= 1.5 * r1))
    throw PreconditionError("choose_R_for_phi: phi does not dominate x (need x = o(phi(x)))");
  for (double x : {1.0, 10.0, 100.0}) {
    double d = phi(x + 1) - 2 * phi(x) + phi(x - 1);
    if (d < -1e-9 * std::fabs(phi(x))) throw PreconditionError("choose_R_for_phi: phi not convex");
  }

  LacunarySequence seq;
  seq.origin = LacunarySequence::Origin::auto_phi;
  seq.logR.push_back(std::log(2.0));
  auto psi_at_knot = [&](double x) {
    double s = x;
    for (std::size_t i = 0; i < seq.logR.size(); ++i) s += 2.0 * double(i + 1) * (x - seq.logR[i]);
    return s;
  };
  seq.certificate.push_back(seq.logR[0] / phi(seq.logR[0]));
  for (int n = 1; n < depth; ++n) {
    auto f = [&](double x) { return psi_at_knot(x) - phi(x) / n; };
    double lo = 2.0 * seq.logR.back();
    double x = lo;
    if (f(lo) > 0) {
      double step = std::max(1.0, lo);
      double hi = lo + step;
      while (f(hi) > 0) {
        lo = hi;
        step *= 2;
        hi = lo + step;
        if (hi > horizon) throw Error("choose_R_for_phi: phi grows too slowly within horizon");
      }
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? lo : hi) = mid;
      }
      x = hi;
    }
    seq.logR.push_back(x);
    seq.certificate.push_back(psi_at_knot(x) / phi(x));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Companion majorant ell
// ---------------------------------------------------------------------------

/// Continuous piecewise-linear ell with ell' = 2n + 2 on (y_n, y_{n+1}),
/// anchored at ell(y_0) = psi(y_0). Constant below y_0; slope 2K + 2 past
/// the last knot y_K.
struct CompanionEll {
  std::vector<double> y;
  std::vector<double> value;  // ell(y_n)
  // Sandwich diagnostics over [y_0, y_K].
  double sup_ell_minus_psi = 0.0;          // sup (ell - psi)
  double inf_ell_plus_2t_minus_psi = 0.0;  // inf (ell + 2t - psi)

  double operator()(double t) const {
    if (t <= y.front()) return value.front();
    auto it = std::upper_bound(y.begin(), y.end(), t);
    std::size_t n = static_cast<std::size_t>(it - y.begin()) - 1;  // y_n <= t
    return value[n] + (2.0 * double(n) + 2.0) * (t - y[n]);
  }
  double slope(double t) const {
    if (t < y.front()) return 0.0;
    auto it = std::upper_bound(y.begin(), y.end(), t);
    std::size_t n = static_cast<std::size_t>(it - y.begin()) - 1;
    return 2.0 * double(n) + 2.0;
  }
};

inline CompanionEll companion_ell(const Weight& w, const std::vector<double>& Y, int grid = 2000) {
  if (Y.size() < 2) throw PreconditionError("companion_ell: need at least two knots");
  for (std::size_t i = 1; i < Y.size(); ++i)
    if (!(Y[i] > Y[i - 1])) throw PreconditionError("companion_ell: knots must increase strictly");
  CompanionEll ell;
  ell.y = Y;
  ell.value.resize(Y.size());
  ell.value[0] = w.psi(Y[0]);
  for (std::size_t n = 0; n + 1 < Y.size(); ++n)
    ell.value[n + 1] = ell.value[n] + (2.0 * double(n) + 2.0) * (Y[n + 1] - Y[n]);
  double sup = -std::numeric_limits<double>::infinity();
  double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    double t = Y.front() + (Y.back() - Y.front()) * i / grid;
    double l = ell(t), p = w.psi(t);
    sup = std::max(sup, l - p);
    inf = std::min(inf, l + 2 * t - p);
  }
  ell.sup_ell_minus_psi = sup;
  ell.inf_ell_plus_2t_minus_psi = inf;
  return ell;
}

}  // namespace fockrb
