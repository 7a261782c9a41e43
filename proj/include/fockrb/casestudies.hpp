#pragma once

// Theorem-level numerical studies. Every asymptotic bound is checked
// without constants: the code records the empirical constant and judges
// boundedness or trend over a scanned range.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fockrb/genfun.hpp"
#include "fockrb/kernels.hpp"
#include "fockrb/moments.hpp"
#include "fockrb/numeric.hpp"
#include "fockrb/rieszlab.hpp"
#include "fockrb/weightlab.hpp"

namespace fockrb {

// ---------------------------------------------------------------------------
// Obstruction functional for T1 weights
// ---------------------------------------------------------------------------

struct ObstructionReport {
  std::complex<double> center;
  double rho = 1.0;
  int N = 0;
  double inf_value = std::numeric_limits<double>::infinity();
  std::complex<double> argmin;
  std::size_t grid_points = 0;
  std::size_t inner_points = 0;  // lambda with |lambda - center| < N rho
  double comparison = 0.0;       // integral over rho < |zeta - center| < N rho at argmin
};

/// Integral of dm(zeta) / |z - zeta|^2 over rho < |zeta - c| < N rho, with
/// a = |z - c|. Infinite when z lies in the closed annulus.
inline double annulus_hilbert_integral(double a, double rho, int N) {
  double lo = rho * rho, hi = double(N) * N * rho * rho, a2 = a * a;
  if (a2 >= lo && a2 <= hi) return std::numeric_limits<double>::infinity();
  return kPi * std::fabs(std::log((hi - a2) / (lo - a2)));
}

/// rho^2 sum_{|lambda - center| < N rho} 1/|z - lambda|^2 at one point z.
inline double obstruction_at(const PointSet& ps, std::complex<double> center, int N, double rho,
                             std::complex<double> z) {
  if (!(rho > 0) || N < 1) throw PreconditionError("obstruction_at: degenerate annulus");
  double s = 0.0;
  for (const auto& p : ps.points()) {
    auto l = p.z();
    if (std::abs(l - center) < N * rho * (1 - 1e-12)) s += 1.0 / std::norm(z - l);
  }
  return rho * rho * s;
}

/// inf over the grid z = center + (rho/8)(i + i j) with |z - center| < (N+1) rho
/// of rho^2 sum_{|lambda - center| < N rho} 1/|z - lambda|^2. Grid points on
/// a lambda give +inf and never win.
inline ObstructionReport obstruction_functional(const PointSet& ps, std::complex<double> center,
                                                int N, double rho, unsigned threads = 1) {
  if (!(rho > 0) || N < 1) throw PreconditionError("obstruction_functional: degenerate annulus");
  ObstructionReport rep;
  rep.center = center;
  rep.rho = rho;
  rep.N = N;
  // Points are stored in polar form; the relative slack keeps lattice points
  // that sit exactly on |lambda - center| = N rho outside after round-off.
  std::vector<std::complex<double>> inner;
  for (const auto& p : ps.points()) {
    auto z = p.z();
    if (std::abs(z - center) < N * rho * (1 - 1e-12)) inner.push_back(z);
  }
  rep.inner_points = inner.size();
  const double step = rho / 8;
  const int K = 8 * (N + 1);
  const double lim = (N + 1) * rho;
  std::vector<double> row_min(2 * K + 1, std::numeric_limits<double>::infinity());
  std::vector<std::complex<double>> row_arg(2 * K + 1);
  std::vector<std::size_t> row_count(2 * K + 1, 0);
  parallel_for(static_cast<std::size_t>(2 * K + 1), threads, [&](std::size_t r) {
    const int j = static_cast<int>(r) - K;
    for (int i = -K; i <= K; ++i) {
      std::complex<double> off(i * step, j * step);
      if (std::abs(off) >= lim) continue;
      ++row_count[r];
      const auto z = center + off;
      double s = 0.0;
      bool hit = false;
      for (const auto& l : inner) {
        double d2 = std::norm(z - l);
        if (d2 <= 1e-24 * rho * rho) {
          hit = true;
          break;
        }
        s += 1.0 / d2;
      }
      if (hit) continue;
      s *= rho * rho;
      if (s < row_min[r]) row_min[r] = s, row_arg[r] = z;
    }
  });
  for (std::size_t r = 0; r < row_min.size(); ++r) {
    rep.grid_points += row_count[r];
    if (row_min[r] < rep.inf_value) rep.inf_value = row_min[r], rep.argmin = row_arg[r];
  }
  if (std::isfinite(rep.inf_value))
    rep.comparison = annulus_hilbert_integral(std::abs(rep.argmin - center), rho, N);
  return rep;
}

/// Square lattice center + rho (m + i k) covering |z - center| <= radius.
inline PointSet square_lattice(std::complex<double> center, double rho, double radius) {
  PointSet ps;
  ps.label = "square lattice";
  const int K = static_cast<int>(std::ceil(radius / rho));
  for (int k = -K; k <= K; ++k)
    for (int m = -K; m <= K; ++m) {
      std::complex<double> off(m * rho, k * rho);
      if (std::abs(off) <= radius) ps.add(center + off);
    }
  return ps;
}

struct LogFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

/// Least squares y = intercept + slope * x.
inline LogFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("linear_fit: need >= 2 pairs");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

struct ObstructionScan {
  std::vector<ObstructionReport> rows;
  LogFit fit;  // inf against log N
  bool pass = false;
};

/// Runs the functional over nested widths and fits inf = a + c log N.
/// Passes when c > min_slope and R^2 >= 0.9.
inline ObstructionScan obstruction_scan(const PointSet& ps, std::complex<double> center, double rho,
                                        const std::vector<int>& widths, double min_slope = 0.3,
                                        unsigned threads = 1) {
  ObstructionScan scan;
  std::vector<double> x, y;
  for (int N : widths) {
    scan.rows.push_back(obstruction_functional(ps, center, N, rho, threads));
    x.push_back(std::log(double(N)));
    y.push_back(scan.rows.back().inf_value);
  }
  scan.fit = linear_fit(x, y);
  scan.pass = scan.fit.slope > min_slope && scan.fit.r2 >= 0.9;
  return scan;
}

// ---------------------------------------------------------------------------
// Polynomial Q = e^a z^k P on a flat annulus (T1 weights)
// ---------------------------------------------------------------------------

struct QConstruction {
  double y = 0.0, R = 0.0, rho = 0.0, tau = 0.0, A = 0.0;
  double a = 0.0;  // log of the constant
  int k = 0;       // order of the zero at the origin
  GenFun P;        // blocks 1 - (z/R_j)^{k_j}
  double max_knot_residual = 0.0;  // max |a + k u_j + v(u_j) - psi(u_j)|
  double B = 0.0;                  // smallest B with 1/B <= k_j tau, spacing/rho <= B

  // Sampled bounds, each as the log of the smallest M that works.
  double log_M_ratio = 0.0;    // |log|Q| + log rho - h - log dist(z, Z(Q))| on Omega_{R,A}
  double log_M_growth = 0.0;   // log|Q| - h, sup over sampled z in the plane
  double log_M_gap = 0.0;      // log(rho / min zero gap)
  double log_M_cover = 0.0;    // log(second-nearest zero distance / rho), sup on Omega_{R,A}
  double min_gap_over_rho = 0.0;
  bool zeros_in_2A = true;     // all nonzero zeros inside Omega_{R,2A}
  std::size_t samples = 0;

  double M() const {
    return std::exp(std::max({log_M_ratio, log_M_growth, log_M_gap, log_M_cover}));
  }
  LogComplex log_Q(const Point& z) const {
    auto p = log_eval(P, z);
    return LogComplex::polar_log(a + k * z.logr + p.logmag, k * z.theta + p.phase);
  }
};

namespace detail {

// Sorted distances from z to the nearest few zeros of P (the origin excluded).
inline std::vector<double> nearest_zero_distances(const GenFun& P, std::complex<double> z,
                                                  std::size_t keep = 2) {
  std::vector<double> d;
  const double th = std::arg(z);
  for (const auto& f : P.factors) {
    const double R = std::exp(f.logR), step = kTwoPi / f.k;
    const long m = static_cast<long>(std::floor((th - f.theta) / step));
    std::vector<long> idx;
    for (long o = -1; o <= 2; ++o) idx.push_back(((m + o) % f.k + f.k) % f.k);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (long i : idx) d.push_back(std::abs(z - std::polar(R, f.theta + double(i) * step)));
  }
  std::sort(d.begin(), d.end());
  if (d.size() > keep) d.resize(keep);
  return d;
}

}  // namespace detail

/// Picks R = e^y at a flat point of psi'' (find_flat_point with this A),
/// places zero circles R_j = R + j rho(R) for |j| <= 2A, and chooses integer
/// slopes so that a + k t + v(e^t) interpolates psi at the knots. The four
/// bounds are then sampled on Omega_{R,A} (and beyond for the growth bound),
/// with n_r radii and n_theta angles per radius. Half of the angles sit in a
/// sector spanning a few zero spacings, the other half are drawn from `seed`.
inline QConstruction build_Q(const Weight& w, double A, double y0 = 0.0, int n_r = 33,
                             int n_theta = 64, unsigned seed = 1) {
  if (!(A >= 1)) throw PreconditionError("build_Q: A must be >= 1");
  auto reg = classify(w, y0, y0 + 10.0, 200);
  if (reg.regime != Regime::t1_like)
    throw FamilyMismatch(std::string("build_Q: needs a T1 weight, got ") + regime_name(reg.regime));
  auto fp = find_flat_point(w, A, y0);
  QConstruction q;
  q.A = A;
  q.y = fp.y;
  q.tau = fp.tau;
  q.R = std::exp(fp.y);
  q.rho = q.R * q.tau;

  const int J = static_cast<int>(std::floor(2 * A));
  std::vector<double> u;
  for (int j = -J; j <= J; ++j) {
    double r = q.R + j * q.rho;
    if (!(r > 0)) throw PreconditionError("build_Q: annulus reaches the origin");
    u.push_back(std::log(r));
  }
  // K[j] is the slope on [u_j, u_{j+1}], K[-1] the slope left of u_0.
  std::vector<long> K(u.size() + 1);
  K[0] = std::lround(w.dpsi(u.front()));
  for (std::size_t j = 0; j + 1 < u.size(); ++j)
    K[j + 1] = std::lround((w.psi(u[j + 1]) - w.psi(u[j])) / (u[j + 1] - u[j]));
  K.back() = std::lround(w.dpsi(u.back()));
  q.k = static_cast<int>(K[0]);
  std::vector<double> logR;
  std::vector<int> kj;
  for (std::size_t j = 0; j < u.size(); ++j) {
    long inc = K[j + 1] - K[j];
    if (inc < 1)
      throw Error("build_Q: slope increment at knot " + std::to_string(j) +
                  " is not positive; psi'' is too small for integer blocks here");
    logR.push_back(u[j]);
    kj.push_back(static_cast<int>(inc));
  }
  q.P = l2_block(logR, kj);

  auto L = [&](double t) {
    double v = q.k * t;
    for (std::size_t j = 0; j < u.size(); ++j)
      if (t > u[j]) v += kj[j] * (t - u[j]);
    return v;
  };
  double mean = 0.0;
  for (double t : u) mean += w.psi(t) - L(t);
  q.a = mean / double(u.size());
  for (double t : u) q.max_knot_residual = std::max(q.max_knot_residual, std::fabs(q.a + L(t) - w.psi(t)));

  q.B = 1.0;
  for (int k : kj) q.B = std::max({q.B, k * q.tau, 1.0 / (k * q.tau)});

  // Zero gaps: within each circle and against the neighbouring circle.
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < kj.size(); ++j) {
    const double Rj = std::exp(logR[j]);
    gap = std::min(gap, 2 * Rj * std::sin(kPi / kj[j]));
    if (std::fabs(Rj - q.R) > 2 * A * q.rho * (1 + 1e-12)) q.zeros_in_2A = false;
    if (j + 1 < kj.size())
      for (int m = 0; m < kj[j]; ++m) {
        auto z = std::polar(Rj, kTwoPi * m / kj[j]);
        GenFun next{GenKind::l2_block, {q.P.factors[j + 1]}};
        gap = std::min(gap, detail::nearest_zero_distances(next, z, 1).front());
      }
  }
  q.min_gap_over_rho = gap / q.rho;
  q.log_M_gap = std::log(q.rho / gap);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  const double sector = 4 * kTwoPi / *std::min_element(kj.begin(), kj.end());
  std::vector<double> thetas;
  for (int i = 0; i < n_theta / 2; ++i) thetas.push_back(sector * (i + 0.5) / (n_theta / 2));
  while (static_cast<int>(thetas.size()) < n_theta) thetas.push_back(uni(rng));

  double ratio_lo = std::numeric_limits<double>::infinity(), ratio_hi = -ratio_lo;
  double cover = 0.0, growth = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_r; ++i) {
    const double r = q.R - A * q.rho + 2 * A * q.rho * i / (n_r - 1);
    for (double th : thetas) {
      const auto z = std::polar(r, th);
      auto d = detail::nearest_zero_distances(q.P, z, 2);
      if (d.front() <= 1e-9 * q.rho) continue;
      const Point zp{std::log(r), th};
      const double lq = q.log_Q(zp).logmag, h = w.psi(zp.logr);
      const double lr = lq + std::log(q.rho) - h - std::log(d.front());
      ratio_lo = std::min(ratio_lo, lr);
      ratio_hi = std::max(ratio_hi, lr);
      cover = std::max(cover, d.back() / q.rho);
      growth = std::max(growth, lq - h);
      ++q.samples;
    }
  }
  q.log_M_ratio = std::max(ratio_hi, -ratio_lo);
  q.log_M_cover = std::log(cover);
  // Growth bound away from the annulus: log-radii from y - 6 to y + 1.
  for (int i = 0; i <= 200; ++i) {
    const double t = q.y - 6.0 + 7.0 * i / 200;
    for (double th : thetas) {
      const Point zp{t, th};
      auto d = detail::nearest_zero_distances(q.P, zp.z(), 1);
      if (d.front() <= 1e-9 * q.rho) continue;
      growth = std::max(growth, q.log_Q(zp).logmag - w.psi(t));
    }
  }
  q.log_M_growth = std::max(0.0, growth);
  return q;
}

// ---------------------------------------------------------------------------
// T2 estimate chain
// ---------------------------------------------------------------------------

struct T2ChainRow {
  int n = 0;
  double y = 0.0;
  double log_v = 0.0;
  double b = 0.0, c = 0.0, d = 0.0, e = 0.0;  // ratio against the right-hand side
  double et1 = 0.0, et2 = 0.0, et3 = 0.0;     // products that must stay bounded
  double es2 = 0.0;                           // |E'(lambda_n)|^2 e^{2 y_n - ell(y_n)}
};

struct T2ChainReport {
  double delta = 0.1;
  int N = 0;
  int knots = 0;  // Laplace points used for ell and for E
  double log_a = 0.0;  // log of int_0^inf e^{ell - psi}
  std::vector<T2ChainRow> rows;
  double et1_max = 0.0, et2_max = 0.0, et3_max = 0.0;
  double de_max = 0.0;          // max of the (d), (e) ratios over n >= 5
  double es2_spread = 0.0;
  double E_vs_ell_lo = 0.0, E_vs_ell_hi = 0.0;  // range of log|E(e^t)|^2 - ell(t)
  bool pass = false;
};

namespace detail {

// int_lo^hi e^{f(t)} split at the ell knots inside the window.
template <class F>
LogReal integrate_between_knots(F&& f, const std::vector<double>& knots, double lo, double hi) {
  if (!(hi > lo)) return LogReal::zero();
  std::vector<double> cuts{lo};
  for (double k : knots)
    if (k > lo && k < hi) cuts.push_back(k);
  cuts.push_back(hi);
  std::vector<LogReal> parts;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    QuadratureSpec spec;
    spec.rel_tol = 1e-9;
    spec.lo = cuts[i];
    spec.hi = cuts[i + 1];
    spec.max_subdivisions = 2000;
    parts.push_back(integrate_log([&](double t) { return LogReal::from_log(f(t)); }, spec).value);
  }
  return log_sum(parts);
}

}  // namespace detail

/// Estimate chain for a T2 weight along its Laplace points, with
/// ell the companion majorant and E = prod (1 - z/e^{y_n}). Integrals are
/// one-dimensional in t = log|z| (the angular factor is dropped). ell and E
/// use 2N + 20 Laplace points so tails past y_N are represented.
inline T2ChainReport verify_t2_chain(const Weight& w, int N, double delta = 0.1,
                                     unsigned threads = 1) {
  if (N < 6) throw PreconditionError("verify_t2_chain: need N >= 6");
  if (!(delta > 0 && delta < 0.5)) throw PreconditionError("verify_t2_chain: delta must lie in (0, 1/2)");
  T2ChainReport rep;
  rep.delta = delta;
  rep.N = N;
  const int K = 2 * N + 20;
  rep.knots = K;
  auto y = laplace_points(w, K);
  auto reg = classify(w, std::max(y.front(), 1e-3), y[static_cast<std::size_t>(N)], 200);
  if (reg.regime != Regime::t2_like)
    throw FamilyMismatch(std::string("verify_t2_chain: weight is ") + regime_name(reg.regime));
  auto ell = companion_ell(w, y);
  auto g = t2_product(y);

  auto log_v = [&](std::size_t s) { return w.psi(y[s]) - ell(y[s]) + 0.5 * std::log(w.d2psi(y[s])); };
  auto f_a = [&](double t) { return ell(t) - w.psi(t); };
  auto f_c = [&](double t) { return ell(t) - w.psi(t) + 2 * t; };
  // Right end of the e^{ell - psi} tail.
  double top = y.back(), peak = -std::numeric_limits<double>::infinity();
  for (double t : y) peak = std::max(peak, f_a(t));
  for (double step = 1.0 / std::sqrt(w.d2psi(y.back())); f_a(top) > peak - 50.0; step *= 1.5) {
    top += step;
    if (top > y.back() + 1e6) throw Error("verify_t2_chain: non-integrable right tail");
  }
  rep.log_a = detail::integrate_between_knots(f_a, y, 0.0, std::max(top, y.back())).logmag;

  std::vector<double> lv(y.size());
  for (std::size_t s = 0; s < y.size(); ++s) lv[s] = log_v(s);
  auto partial_lo = [&](int n) {  // log sum_{s<=n} v_s
    std::vector<LogReal> t;
    for (int s = 0; s <= n; ++s) t.push_back(LogReal::from_log(lv[s]));
    return log_sum(t).logmag;
  };
  auto partial_hi = [&](int n) {  // log sum_{s>=n} v_s e^{-2 y_s}
    std::vector<LogReal> t;
    for (std::size_t s = static_cast<std::size_t>(n); s < y.size(); ++s)
      t.push_back(LogReal::from_log(lv[s] - 2 * y[s]));
    return log_sum(t).logmag;
  };

  rep.rows.resize(static_cast<std::size_t>(N) + 1);
  parallel_for(static_cast<std::size_t>(N) + 1, threads, [&](std::size_t i) {
    const int n = static_cast<int>(i);
    T2ChainRow& r = rep.rows[i];
    r.n = n;
    r.y = y[i];
    r.log_v = lv[i];
    const double yn = y[i], yn1 = y[i + 1];
    const double Ib = detail::integrate_between_knots(f_a, y, yn - delta, top).logmag;
    const double Ic = detail::integrate_between_knots(f_c, y, 0.0, yn - delta).logmag;
    r.b = std::exp(Ib + lv[i]);
    r.c = std::exp(Ic + lv[i] - 2 * yn);
    r.d = std::exp(partial_lo(n) - lv[i]);
    r.e = std::exp(partial_hi(n) - (lv[i] - 2 * yn));
    auto f1 = [&](double t) { return ell(t) - w.psi(t) + 2 * (t - yn) - 2 * std::max(0.0, t - yn); };
    r.et1 = std::exp(detail::integrate_between_knots(f1, y, yn - delta, yn1 - delta).logmag + lv[i]);
    r.et2 = std::exp(partial_lo(n) + detail::integrate_between_knots(f_a, y, yn1 - delta, top).logmag);
    r.et3 = std::exp(partial_hi(n + 1) + detail::integrate_between_knots(f_c, y, 0.0, yn1 - delta).logmag);
    auto dE = derivative_at_root(g, Point{yn, 0.0});
    r.es2 = std::exp(2 * dE.logmag + 2 * yn - ell(yn));
  });

  double es_lo = std::numeric_limits<double>::infinity(), es_hi = 0.0;
  for (const auto& r : rep.rows) {
    rep.et1_max = std::max(rep.et1_max, r.et1);
    rep.et2_max = std::max(rep.et2_max, r.et2);
    rep.et3_max = std::max(rep.et3_max, r.et3);
    if (r.n >= 5) rep.de_max = std::max({rep.de_max, r.d, r.e});
    es_lo = std::min(es_lo, r.es2);
    es_hi = std::max(es_hi, r.es2);
  }
  rep.es2_spread = es_hi / es_lo;

  // |E(e^t)|^2 against e^{ell(t)} on a grid kept delta away from the zeros.
  rep.E_vs_ell_lo = std::numeric_limits<double>::infinity();
  rep.E_vs_ell_hi = -rep.E_vs_ell_lo;
  for (int i = 0; i <= 40 * N; ++i) {
    double t = y.front() - 1.0 + (y[static_cast<std::size_t>(N)] - y.front() + 1.0) * i / (40.0 * N);
    bool near = false;
    for (double yy : y) near = near || std::fabs(t - yy) < delta;
    if (near) continue;
    double diff = 2 * log_eval(g, Point{t, 0.0}).logmag - ell(t);
    rep.E_vs_ell_lo = std::min(rep.E_vs_ell_lo, diff);
    rep.E_vs_ell_hi = std::max(rep.E_vs_ell_hi, diff);
  }
  rep.pass = rep.de_max <= 4.0 && rep.es2_spread <= 50.0 && std::isfinite(rep.log_a);
  return rep;
}

struct T2ChainStability {
  T2ChainReport base, doubled;
  double et1_change = 0.0, et2_change = 0.0, et3_change = 0.0;  // |max(2N)/max(N) - 1|
  bool pass = false;
};

/// Recorded et1..et3 constants at N and 2N; stable when each moves by <= tol.
inline T2ChainStability t2_chain_stability(const Weight& w, int N, double tol = 0.2, double delta = 0.1,
                                           unsigned threads = 1) {
  T2ChainStability s;
  s.base = verify_t2_chain(w, N, delta, threads);
  s.doubled = verify_t2_chain(w, 2 * N, delta, threads);
  s.et1_change = std::fabs(s.doubled.et1_max / s.base.et1_max - 1);
  s.et2_change = std::fabs(s.doubled.et2_max / s.base.et2_max - 1);
  s.et3_change = std::fabs(s.doubled.et3_max / s.base.et3_max - 1);
  s.pass = s.base.pass && s.doubled.pass && s.et1_change <= tol && s.et2_change <= tol &&
           s.et3_change <= tol;
  return s;
}

// ---------------------------------------------------------------------------
// Finite sections of the kernel Gram on the Laplace points
// ---------------------------------------------------------------------------

namespace detail {

/// Moment table long enough for kernel series up to |z| = e^{logr_max}.
inline MomentTable table_for_radius(const Weight& w, double logr_max, int N0 = 32) {
  int N = N0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto tab = build_table(w, N);
    try {
      kernel_norm2(tab, logr_max);
      return tab;
    } catch (const TableTooShort& e) {
      N = std::max(e.required_N, 2 * N);
    }
  }
  throw Error("table_for_radius: moment table would exceed practical length");
}

}  // namespace detail

struct SectionStudy {
  std::vector<double> logr;  // log lambda_n
  RieszReport nested;
  double plateau_ratio = 0.0;  // cond(last) / cond(first)
  bool pass = false;
};

/// Normalized-kernel Gram on lambda_n = e^{y_n}, n < max(sizes), reported on
/// the nested leading sections. Plateau when the last two condition numbers
/// differ by <= tol relative.
inline SectionStudy t2_sections(const Weight& w, const std::vector<std::size_t>& sizes, double tol = 0.25,
                                unsigned threads = 1) {
  if (sizes.size() < 2) throw PreconditionError("t2_sections: need >= 2 section sizes");
  const std::size_t n = sizes.back();
  auto y = laplace_points(w, static_cast<int>(n) - 1);
  SectionStudy st;
  PointSet ps;
  ps.label = "Laplace points";
  for (double t : y) ps.add(Point{t, 0.0});
  st.logr = y;
  auto tab = detail::table_for_radius(w, y.back());
  st.nested = nested_sections(assemble_kernel_gram(tab, ps, threads), sizes);
  const auto& c = st.nested.section_condition;
  st.plateau_ratio = c.back() / c[c.size() - 2];
  st.pass = std::fabs(st.plateau_ratio - 1) <= tol && st.nested.interlacing_ok;
  return st;
}

// ---------------------------------------------------------------------------
// Failure of the de Branges property for theorem3 products
// ---------------------------------------------------------------------------

struct DeBrangesRow {
  int n = 0;
  double log_norm_E = 0.0;  // log ||E_{R_n}||^2
  double log_norm_f = 0.0;  // log ||f_n||^2
  double Q = 0.0;
  double real_axis_deviation = 0.0;
  double identity_at_1_3 = 0.0;  // | log|f_n(1.3)| - log|E_{R_n}(1.3)| |
};

struct DeBrangesReport {
  std::vector<DeBrangesRow> rows;
  bool increasing = false;
};

/// f_n = E_{R_n} with the roots R_n e^{2 pi i s/n}, 1 <= s < n/2, moved to
/// their conjugates; Q_n = ||f_n||^2 / ||E_{R_n}||^2.
inline DeBrangesReport debranges_ratio(const GenFun& g, const MomentTable& tab, int n_lo, int n_hi) {
  if (g.kind != GenKind::t3_product) throw PreconditionError("debranges_ratio: needs a t3 product");
  if (n_lo < 3 || n_hi < n_lo || n_hi > static_cast<int>(g.depth()))
    throw PreconditionError("debranges_ratio: need 3 <= n_lo <= n_hi <= depth");
  DeBrangesReport rep;
  for (int n = n_lo; n <= n_hi; ++n) {
    const auto& f = g.factors[static_cast<std::size_t>(n - 1)];
    auto E = deflated_coeffs(g, Point{f.logR, f.theta});
    std::vector<Point> out, in;
    for (int s = 1; 2 * s < n; ++s) {
      out.push_back({f.logR, wrap_phase(f.theta + kTwoPi * s / n)});
      in.push_back({f.logR, wrap_phase(f.theta - kTwoPi * s / n)});
    }
    auto sw = swap_roots(E, out, in);
    DeBrangesRow r;
    r.n = n;
    r.log_norm_E = coeff_norm2(E, tab).logmag;
    r.log_norm_f = coeff_norm2(sw.result, tab).logmag;
    r.Q = std::exp(r.log_norm_f - r.log_norm_E);
    r.real_axis_deviation = sw.max_real_axis_deviation;
    const Point x{std::log(1.3), 0.0};
    r.identity_at_1_3 = std::fabs(poly_eval(sw.result, x).logmag - poly_eval(E, x).logmag);
    rep.rows.push_back(r);
  }
  rep.increasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    rep.increasing = rep.increasing && rep.rows[i].Q > rep.rows[i - 1].Q;
  return rep;
}

// ---------------------------------------------------------------------------
// Atomic moment sequences and the convexity screen
// ---------------------------------------------------------------------------

struct CounterexampleMoments {
  std::vector<int> t;
  std::vector<double> s;
  std::vector<double> p;           // p_n = log sum_k e^{(n - t_k) s_k}, n = 0..n_max
  std::vector<double> prediction;  // max_k (n - t_k) s_k
  double max_deviation = 0.0;
};

inline CounterexampleMoments build_counterexample_moments(const std::vector<int>& t,
                                                          const std::vector<double>& s, int n_max) {
  if (t.empty() || t.size() != s.size())
    throw PreconditionError("build_counterexample_moments: t and s must be nonempty and equal length");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(s[k] > 0)) throw PreconditionError("build_counterexample_moments: s_" + std::to_string(k + 1) + " must be positive");
    if (k == 0) continue;
    if (!(t[k] > t[k - 1] + 1))
      throw PreconditionError("build_counterexample_moments: t_" + std::to_string(k + 1) +
                              " must exceed t_" + std::to_string(k) + " + 1");
    if (!(s[k] > 2.0 * t[k] * s[k - 1]))
      throw PreconditionError("build_counterexample_moments: s_" + std::to_string(k + 1) +
                              " must exceed 2 t_" + std::to_string(k + 1) + " s_" + std::to_string(k));
  }
  if (n_max < 0) throw PreconditionError("build_counterexample_moments: n_max must be >= 0");
  CounterexampleMoments cm{t, s, {}, {}, 0.0};
  for (int n = 0; n <= n_max; ++n) {
    std::vector<LogReal> terms;
    double pred = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t.size(); ++k) {
      double e = (n - t[k]) * s[k];
      terms.push_back(LogReal::from_log(e));
      pred = std::max(pred, e);
    }
    cm.p.push_back(log_sum(terms).logmag);
    cm.prediction.push_back(pred);
    cm.max_deviation = std::max(cm.max_deviation, cm.p.back() - pred);
  }
  return cm;
}

enum class ScreenVerdict { monotone_compatible, incompatible, inconclusive };

inline const char* screen_verdict_name(ScreenVerdict v) {
  switch (v) {
    case ScreenVerdict::monotone_compatible: return "monotone-compatible";
    case ScreenVerdict::incompatible: return "incompatible";
    case ScreenVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConvexityScreen {
  std::vector<int> windows;
  std::vector<double> defect;
  double growth = 0.0;  // defect(last) / defect(first)
  ScreenVerdict verdict = ScreenVerdict::inconclusive;
};

/// Convexity defect of x_n = log n + seq[n] over [1, N] for each window N.
/// seq is indexed from n = 0. Plateau: the last three defects agree within
/// 10%. Growth: last / first >= 1.5.
inline ConvexityScreen convexity_screen(const std::vector<double>& seq, const std::vector<int>& windows) {
  if (seq.size() < 10) throw PreconditionError("convexity_screen: need at least 10 terms");
  if (windows.empty()) throw PreconditionError("convexity_screen: no windows");
  ConvexityScreen sc;
  sc.windows = windows;
  for (int N : windows) {
    if (N < 3 || static_cast<std::size_t>(N) >= seq.size())
      throw PreconditionError("convexity_screen: window " + std::to_string(N) + " outside the sequence");
    std::vector<double> x;
    for (int n = 1; n <= N; ++n) x.push_back(std::log(double(n)) + seq[static_cast<std::size_t>(n)]);
    sc.defect.push_back(convex_fit_defect(x));
  }
  const double first = sc.defect.front(), last = sc.defect.back();
  auto close = [](double a, double b) { return std::fabs(a - b) <= 0.1 * std::max(std::fabs(a), std::fabs(b)) + 1e-12; };
  bool plateau = sc.defect.size() >= 3;
  for (std::size_t i = sc.defect.size() >= 3 ? sc.defect.size() - 3 : 0; i + 1 < sc.defect.size(); ++i)
    plateau = plateau && close(sc.defect[i], sc.defect[i + 1]) && close(sc.defect[i], last);
  sc.growth = first > 0 ? last / first : (last > 0 ? std::numeric_limits<double>::infinity() : 1.0);
  if (sc.growth >= 1.5)
    sc.verdict = ScreenVerdict::incompatible;
  else if (plateau)
    sc.verdict = ScreenVerdict::monotone_compatible;
  return sc;
}

}  // namespace fockrb
