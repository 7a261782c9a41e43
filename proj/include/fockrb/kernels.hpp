#pragma once

// Reproducing kernels of radial spaces through the moment table:
//   ||k_lambda||^2 = sum_n |lambda|^{2n} / m_n,
// node sets with separation / covering predicates, and the norm
// diagnostics comparing ||k|| with its predicted size in each regime.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fockrb/csv.hpp"
#include "fockrb/moments.hpp"
#include "fockrb/numeric.hpp"
#include "fockrb/weightlab.hpp"

namespace fockrb {

struct Point {
  double logr;   // -inf for the origin
  double theta;  // in (-pi, pi]

  std::complex<double> z() const {
    if (std::isinf(logr) && logr < 0) return {0.0, 0.0};
    return std::polar(std::exp(logr), theta);
  }
  static Point from_complex(std::complex<double> z) {
    if (z == 0.0) return {-std::numeric_limits<double>::infinity(), 0.0};
    return {std::log(std::abs(z)), wrap_phase(std::arg(z))};
  }
};

struct Annulus {
  double R;
  double A;
};

class PointSet {
 public:
  std::string label;
  std::optional<Annulus> annulus;

  PointSet() = default;
  explicit PointSet(std::string l) : label(std::move(l)) {}

  /// Adds a point; rejects duplicates at 1e-12 resolution in (logr, theta).
  void add(Point p) {
    p.theta = wrap_phase(p.theta);
    for (const auto& q : pts_)
      if (same(p, q))
        throw PreconditionError("PointSet: duplicate point (logr=" + std::to_string(p.logr) +
                                ", theta=" + std::to_string(p.theta) + ")");
    pts_.push_back(p);
  }
  void add(std::complex<double> z) { add(Point::from_complex(z)); }

  const std::vector<Point>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }
  const Point& operator[](std::size_t i) const { return pts_[i]; }

  /// Same points in a different order (used for permutation checks).
  PointSet permuted(const std::vector<std::size_t>& order) const {
    PointSet out(label);
    out.annulus = annulus;
    for (auto i : order) out.pts_.push_back(pts_.at(i));
    return out;
  }

 private:
  std::vector<Point> pts_;

  static bool same(const Point& a, const Point& b) {
    bool ra = std::isinf(a.logr), rb = std::isinf(b.logr);
    if (ra || rb) return ra && rb;
    double dth = std::fabs(std::remainder(a.theta - b.theta, kTwoPi));
    return std::fabs(a.logr - b.logr) <= 1e-12 && dth <= 1e-12;
  }
};

inline void write_points_csv(std::ostream& os, const PointSet& ps) {
  csv::Writer w(os);
  w.row({"logr", "theta"});
  for (const auto& p : ps.points()) w.row({csv::format_double(p.logr), csv::format_double(p.theta)});
}

inline PointSet read_points_csv(std::istream& is, std::string label = "csv") {
  auto rows = csv::read_all(is);
  csv::expect_header(rows, {"logr", "theta"});
  PointSet ps(std::move(label));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw Error("points csv: bad row " + std::to_string(i));
    ps.add(Point{csv::parse_double(rows[i][0]), csv::parse_double(rows[i][1])});
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Kernel norms
// ---------------------------------------------------------------------------

struct KernelStats {
  LogReal lognorm2;          // log ||k_lambda||^2
  int D = 0;                 // highest index summed
  int peak = 0;              // index of the largest term
  double trunc_bound = 0.0;  // bound on the dropped tail, relative to the sum
};

/// Thrown when the table ends before the series has decayed.
struct TableTooShort : Error {
  int required_N;
  TableTooShort(const std::string& w, int n) : Error(w), required_N(n) {}
};

namespace detail {

constexpr int kDecayRun = 10;
const double kLogDecay = std::log(1e-12);

// Index range [0, D] covering the series sum_n e^{a n - log m_n}.
// The terms are log-concave in n (log m_n is convex), so once ten
// consecutive terms sit below 1e-12 of the peak every later term is smaller
// still and the remaining tail is dominated by a geometric series.
inline KernelStats series_extent(const MomentTable& tab, double a) {
  const int N = tab.max_degree();
  KernelStats st;
  if (std::isinf(a) && a < 0) {
    st.lognorm2 = LogReal::from_log(-tab.log_m(0));
    return st;
  }
  auto term = [&](int n) { return a * n - tab.log_m(static_cast<std::size_t>(n)); };
  double best = term(0);
  int run = 0;
  for (int n = 1; n <= N; ++n) {
    double t = term(n);
    if (t > best) {
      best = t;
      st.peak = n;
      run = 0;
    } else if (t < best + kLogDecay) {
      if (++run == kDecayRun) {
        st.D = n;
        double q = t - term(n - 1);  // log of the last ratio, < 0
        double log_tail = t + q - std::log(-std::expm1(q));
        st.trunc_bound = std::exp(log_tail - best);
        return st;
      }
    } else {
      run = 0;
    }
  }
  // Estimate how far the table must extend from a quadratic model of the
  // log-terms at the end: slope q, curvature -c. The curvature flattens as n
  // grows, so the model step is padded by half.
  int est = 2 * std::max(N, 2);
  if (N >= 2) {
    double q = term(N) - term(N - 1);
    double c = -(q - (term(N - 1) - term(N - 2)));
    double need = std::max(0.0, -kLogDecay - (best - term(N)));
    if (c > 0) {
      double k = (q + std::sqrt(q * q + 2 * c * need)) / c;
      est = N + static_cast<int>(std::ceil(1.5 * k)) + kDecayRun;
    }
  }
  throw TableTooShort("kernel series: moment table (N=" + std::to_string(N) +
                          ") ends before the terms decay; need N >= " + std::to_string(est),
                      est);
}

}  // namespace detail

/// ||k_lambda||^2 for |lambda| = e^{logr}.
inline KernelStats kernel_norm2(const MomentTable& tab, double logr) {
  auto st = detail::series_extent(tab, 2.0 * logr);
  if (std::isinf(logr)) return st;
  std::vector<LogReal> terms(static_cast<std::size_t>(st.D) + 1);
  for (int n = 0; n <= st.D; ++n)
    terms[n] = LogReal::from_log(2.0 * logr * n - tab.log_m(static_cast<std::size_t>(n)));
  st.lognorm2 = log_sum(terms);
  return st;
}

namespace detail {

inline bool point_less(const Point& a, const Point& b) {
  return a.logr < b.logr || (a.logr == b.logr && a.theta < b.theta);
}

// <k_q, k_p> / (||k_p|| ||k_q||) = sum_n (conj(lambda_p) lambda_q)^n / m_n, normalized.
inline std::complex<double> gram_entry_ordered(const MomentTable& tab, const Point& p,
                                               const Point& q, const KernelStats& sp,
                                               const KernelStats& sq) {
  const int D = std::max(sp.D, sq.D);
  const double norm = 0.5 * (sp.lognorm2.logmag + sq.lognorm2.logmag);
  const bool origin = std::isinf(p.logr) || std::isinf(q.logr);
  std::vector<LogComplex> terms;
  terms.reserve(static_cast<std::size_t>(D) + 1);
  const double sl = p.logr + q.logr, dth = q.theta - p.theta;
  for (int n = 0; n <= (origin ? 0 : D); ++n) {
    double lm = (n == 0 ? 0.0 : sl * n) - tab.log_m(static_cast<std::size_t>(n));
    terms.push_back(LogComplex::polar_log(lm - norm, dth * n));
  }
  return log_sum_complex(terms).value();
}

}  // namespace detail

/// Normalized kernel inner product using precomputed norms. Exactly
/// Hermitian: the sum is always evaluated for the ordered pair.
inline std::complex<double> normalized_gram_entry(const MomentTable& tab, const Point& p,
                                                  const Point& q, const KernelStats& sp,
                                                  const KernelStats& sq) {
  if (detail::point_less(q, p)) return std::conj(detail::gram_entry_ordered(tab, q, p, sq, sp));
  return detail::gram_entry_ordered(tab, p, q, sp, sq);
}

inline std::complex<double> normalized_gram_entry(const MomentTable& tab, const Point& p,
                                                  const Point& q) {
  return normalized_gram_entry(tab, p, q, kernel_norm2(tab, p.logr), kernel_norm2(tab, q.logr));
}

// ---------------------------------------------------------------------------
// Separation and density on an annulus
// ---------------------------------------------------------------------------

struct SeparationReport {
  double beta_sep = std::numeric_limits<double>::infinity();
  double beta_den = 0.0;
  // Witnesses: the closest pair (indices into the point set) and the grid
  // point farthest from the set.
  long sep_i = -1, sep_j = -1;
  std::complex<double> cover_witness{};
  double covering_radius = std::numeric_limits<double>::infinity();
  std::size_t inner_count = 0;  // points in the A/4 annulus
};

namespace detail {

// Uniform bucket grid for nearest-neighbour queries.
class BucketGrid {
 public:
  BucketGrid(const std::vector<std::complex<double>>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cells_[key(ix(pts[i].real()), ix(pts[i].imag()))].push_back(i);
      max_abs_ = std::max(max_abs_, std::abs(pts[i]));
    }
  }

  /// Nearest point to z, skipping index `skip`; returns (index, distance).
  std::pair<long, double> nearest(std::complex<double> z, long skip = -1) const {
    long best = -1;
    double bd = std::numeric_limits<double>::infinity();
    const long cx = ix(z.real()), cy = ix(z.imag());
    const long max_ring = 2 + static_cast<long>((std::abs(z) + max_abs_) / cell_);
    for (long k = 0; k <= max_ring; ++k) {
      if ((2 * k + 1) * (2 * k + 1) > 4 * static_cast<long>(pts_.size()) + 16) {
        // Sparse neighbourhood: a linear scan is cheaper than more rings.
        for (std::size_t i = 0; i < pts_.size(); ++i) {
          if (static_cast<long>(i) == skip) continue;
          double d = std::abs(pts_[i] - z);
          if (d < bd) {
            bd = d;
            best = static_cast<long>(i);
          }
        }
        break;
      }
      for (long dx = -k; dx <= k; ++dx)
        for (long dy = -k; dy <= k; ++dy) {
          if (std::max(std::labs(dx), std::labs(dy)) != k) continue;
          auto it = cells_.find(key(cx + dx, cy + dy));
          if (it == cells_.end()) continue;
          for (auto i : it->second) {
            if (static_cast<long>(i) == skip) continue;
            double d = std::abs(pts_[i] - z);
            if (d < bd) {
              bd = d;
              best = static_cast<long>(i);
            }
          }
        }
      // Anything in ring k+1 is at least k cells away.
      if (best >= 0 && bd <= double(k) * cell_) break;
    }
    return {best, bd};
  }

 private:
  const std::vector<std::complex<double>>& pts_;
  double cell_;
  double max_abs_ = 0.0;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;

  long ix(double x) const { return static_cast<long>(std::floor(x / cell_)); }
  static std::int64_t key(long x, long y) {
    return (static_cast<std::int64_t>(x) << 32) ^ (static_cast<std::int64_t>(y) & 0xffffffff);
  }
};

}  // namespace detail

/// beta_sep = min distance from a point of the A/4 annulus to the rest of
/// the set, over rho; beta_den = rho / covering radius of the A annulus,
/// the covering radius being measured on a square grid of step rho/8.
/// The annulus Omega_{R,A} is | |z| - R | <= A rho.
inline SeparationReport separation_density(const PointSet& ps, double rho, Annulus ann) {
  if (!(rho > 0) || !(ann.R > 0) || !(ann.A > 0))
    throw PreconditionError("separation_density: degenerate annulus");
  SeparationReport rep;
  std::vector<std::complex<double>> z;
  z.reserve(ps.size());
  for (const auto& p : ps.points()) z.push_back(p.z());
  if (z.empty()) return rep;
  detail::BucketGrid grid(z, rho);

  const double inner = ann.A / 4 * rho;
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (std::fabs(std::abs(z[i]) - ann.R) > inner) continue;
    ++rep.inner_count;
    auto [j, d] = grid.nearest(z[i], static_cast<long>(i));
    if (j >= 0 && d < dmin) {
      dmin = d;
      rep.sep_i = static_cast<long>(i);
      rep.sep_j = j;
    }
  }
  rep.beta_sep = dmin / rho;

  const double outer = ann.R + ann.A * rho;
  const double lo_r = std::max(0.0, ann.R - ann.A * rho);
  const double step = rho / 8.0;
  const long n = static_cast<long>(std::ceil(outer / step));
  double cover = 0.0;
  bool any = false;
  for (long a = -n; a <= n; ++a) {
    double x = a * step;
    if (std::fabs(x) > outer) continue;
    // Restrict the column to the annulus band.
    double ymax = std::sqrt(std::max(0.0, outer * outer - x * x));
    long bmax = static_cast<long>(std::floor(ymax / step));
    for (long b = -bmax; b <= bmax; ++b) {
      double y = b * step;
      double r = std::hypot(x, y);
      if (r < lo_r || r > outer) continue;
      any = true;
      auto [j, d] = grid.nearest({x, y});
      (void)j;
      if (d > cover) {
        cover = d;
        rep.cover_witness = {x, y};
      }
    }
  }
  if (!any) return rep;
  rep.covering_radius = cover;
  rep.beta_den = cover > 0 ? rho / cover : std::numeric_limits<double>::infinity();
  return rep;
}

// ---------------------------------------------------------------------------
// Norm diagnostics
// ---------------------------------------------------------------------------

enum class NormMode { l5, l2q, exy };

inline const char* norm_mode_name(NormMode m) {
  switch (m) {
    case NormMode::l5: return "l5";
    case NormMode::l2q: return "l2q";
    case NormMode::exy: return "exy";
  }
  return "?";
}

struct NormDiagnostics {
  NormMode mode;
  std::vector<double> at;     // sample coordinate (logr, or the index n)
  std::vector<double> logr;   // radius used
  std::vector<double> ratio;  // ||k|| / predicted
  double spread = 0.0;        // max / min
  double trend = 0.0;         // last / first
  double threshold = 50.0;
  bool pass = false;
};

/// Ratios of ||k_lambda|| to its predicted size:
///   l5:  ||k_z|| e^{-h(z)/2} rho(|z|), samples are log-radii (T1 weights);
///   l2q: ||k|| at lambda_n = e^{y_n} against e^{(psi(y_n) - 2 y_n)/2} psi''(y_n)^{1/4},
///        samples are Laplace indices n (T2 weights);
///   exy: ||k|| at |lambda| = R_n against n e^{h(R_n)/2} / R_n, samples are
///        circle indices n >= 1 (theorem3 weights).
inline NormDiagnostics kernel_norm_diagnostics(const MomentTable& tab, const Weight& w,
                                               NormMode mode, const std::vector<double>& samples,
                                               double threshold = 50.0) {
  if (samples.size() < 2) throw PreconditionError("kernel_norm_diagnostics: need >= 2 samples");
  NormDiagnostics rep;
  rep.mode = mode;
  rep.threshold = threshold;
  auto refuse = [&](const std::string& why) {
    throw PreconditionError(std::string("kernel_norm_diagnostics(") + norm_mode_name(mode) +
                            "): " + why);
  };
  if (mode == NormMode::exy) {
    if (w.family() != Family::theorem3) refuse("needs a theorem3 weight");
  } else {
    if (w.family() == Family::theorem3) refuse("theorem3 weights carry no curvature");
    double lo, hi;
    if (mode == NormMode::l5) {
      auto [a, b] = std::minmax_element(samples.begin(), samples.end());
      lo = *a;
      hi = std::max(*b, *a + 1.0);
    } else {
      if (tab.y.empty()) refuse("table has no Laplace points");
      auto [a, b] = std::minmax_element(samples.begin(), samples.end());
      lo = std::max(tab.y.at(static_cast<std::size_t>(*a)), 1e-3);
      hi = tab.y.at(static_cast<std::size_t>(*b));
    }
    auto reg = classify(w, lo, hi, 200);
    Regime want = mode == NormMode::l5 ? Regime::t1_like : Regime::t2_like;
    if (reg.regime != want)
      refuse(std::string("weight is ") + regime_name(reg.regime) + ", mode needs " +
             regime_name(want));
  }

  for (double s : samples) {
    double lr = 0.0, log_pred = 0.0;
    switch (mode) {
      case NormMode::l5:
        lr = s;
        log_pred = 0.5 * w.psi(lr) - std::log(w.rho(std::exp(lr)));
        break;
      case NormMode::l2q: {
        auto n = static_cast<std::size_t>(s);
        double y = tab.y.at(n);
        lr = y;
        log_pred = 0.5 * (w.psi(y) - 2 * y) + 0.25 * std::log(w.d2psi(y));
        break;
      }
      case NormMode::exy: {
        auto n = static_cast<std::size_t>(s);
        if (n < 1 || n > w.knots().size()) refuse("circle index out of range");
        lr = w.knots()[n - 1];
        log_pred = std::log(double(n)) + 0.5 * w.psi(lr) - lr;
        break;
      }
    }
    auto st = kernel_norm2(tab, lr);
    rep.at.push_back(s);
    rep.logr.push_back(lr);
    rep.ratio.push_back(std::exp(0.5 * st.lognorm2.logmag - log_pred));
  }
  auto [mn, mx] = std::minmax_element(rep.ratio.begin(), rep.ratio.end());
  rep.spread = *mx / *mn;
  rep.trend = rep.ratio.back() / rep.ratio.front();
  rep.pass = rep.spread <= threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Hardy convexity of the circular L^2 means
// ---------------------------------------------------------------------------

struct LogMeanReport {
  std::vector<double> s;
  std::vector<double> omega;  // log of (1/2pi) int |f(e^{s+i theta})|^2 d theta
  double min_second_diff = 0.0;
  double scale = 0.0;
  bool convex = true;
};

/// omega(s) = log sum_d |c_d|^2 e^{2 d s} sampled on [s_lo, s_hi]; convexity
/// holds when every second difference is >= -1e-8 * scale.
inline LogMeanReport radial_log_means(std::span<const LogComplex> coeffs, double s_lo = -5.0,
                                      double s_hi = 5.0, int samples = 401) {
  bool nonzero = std::any_of(coeffs.begin(), coeffs.end(), [](const LogComplex& c) { return !c.is_zero(); });
  if (!nonzero) throw PreconditionError("radial_log_means: zero polynomial");
  if (samples < 3 || !(s_hi > s_lo)) throw PreconditionError("radial_log_means: bad grid");
  LogMeanReport rep;
  std::vector<LogReal> terms;
  for (int i = 0; i < samples; ++i) {
    double s = s_lo + (s_hi - s_lo) * i / (samples - 1);
    terms.clear();
    for (std::size_t d = 0; d < coeffs.size(); ++d)
      if (!coeffs[d].is_zero()) terms.push_back(LogReal::from_log(2 * coeffs[d].logmag + 2.0 * double(d) * s));
    rep.s.push_back(s);
    rep.omega.push_back(log_sum(terms).logmag);
    rep.scale = std::max(rep.scale, std::fabs(rep.omega.back()));
  }
  rep.scale = std::max(rep.scale, 1.0);
  rep.min_second_diff = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < samples; ++i) {
    double d2 = rep.omega[i + 1] - 2 * rep.omega[i] + rep.omega[i - 1];
    rep.min_second_diff = std::min(rep.min_second_diff, d2);
  }
  rep.convex = rep.min_second_diff >= -1e-8 * rep.scale;
  return rep;
}

}  // namespace fockrb
