#pragma once

// Gram matrices of normalized kernels and of the dual system
// ||k_lambda|| E_lambda / E'(lambda), their extreme eigenvalues, the
// circulant model on one circle and the block-norm scan ||B_n|| R_n.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fockrb/csv.hpp"
#include "fockrb/genfun.hpp"
#include "fockrb/kernels.hpp"
#include "fockrb/moments.hpp"
#include "fockrb/numeric.hpp"

namespace fockrb {

// ---------------------------------------------------------------------------
// Dense Hermitian eigenvalues
// ---------------------------------------------------------------------------

/// Eigenvalues (ascending) of a Hermitian matrix stored row-major, by cyclic
/// complex Jacobi rotations in fixed (p, q) order. Each rotation first turns
/// a_pq real with a phase on column q, then applies the real symmetric
/// rotation.
inline std::vector<double> hermitian_eigenvalues(std::vector<std::complex<double>> a, std::size_t n,
                                                 int max_sweeps = 100) {
  if (a.size() != n * n) throw PreconditionError("hermitian_eigenvalues: size mismatch");
  auto at = [&](std::size_t i, std::size_t j) -> std::complex<double>& { return a[i * n + j]; };
  double fro = 0.0;
  for (const auto& v : a) fro += std::norm(v);
  fro = std::sqrt(fro);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      if (std::abs(at(i, j) - std::conj(at(j, i))) > 1e-12 * std::max(1.0, fro))
        throw PreconditionError("hermitian_eigenvalues: matrix is not Hermitian");
  for (std::size_t i = 0; i < n; ++i) at(i, i) = at(i, i).real();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += std::norm(at(i, j));
    if (std::sqrt(2 * off) <= 1e-15 * fro || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double mag = std::abs(at(p, q));
        if (mag == 0.0) continue;
        const double phi = std::arg(at(p, q));
        const double app = at(p, p).real(), aqq = at(q, q).real();
        const double zeta = (aqq - app) / (2 * mag);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1 + zeta * zeta));
        const double c = 1 / std::sqrt(1 + t * t), s = t * c;
        const std::complex<double> em = std::polar(1.0, -phi), ep = std::polar(1.0, phi);
        for (std::size_t k = 0; k < n; ++k) {  // columns
          auto kp = at(k, p), kq = at(k, q);
          at(k, p) = c * kp - s * em * kq;
          at(k, q) = s * kp + c * em * kq;
        }
        for (std::size_t k = 0; k < n; ++k) {  // rows
          auto pk = at(p, k), qk = at(q, k);
          at(p, k) = c * pk - s * ep * qk;
          at(q, k) = s * pk + c * ep * qk;
        }
        at(p, q) = at(q, p) = 0.0;
        at(p, p) = app - t * mag;
        at(q, q) = aqq + t * mag;
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i).real();
  std::sort(ev.begin(), ev.end());
  return ev;
}

// ---------------------------------------------------------------------------
// Gram matrices
// ---------------------------------------------------------------------------

/// True entries are e^{s_i} a_ij e^{s_j}; the stored a_ij are order one.
struct GramMatrix {
  std::size_t n = 0;
  std::vector<std::complex<double>> a;
  std::vector<double> log_scale;
  std::vector<std::string> labels;
  int max_truncation = 0;
  std::size_t cancelled = 0;

  std::complex<double>& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  const std::complex<double>& operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline GramMatrix assemble_kernel_gram(const MomentTable& tab, const PointSet& ps, unsigned threads = 1) {
  GramMatrix G;
  G.n = ps.size();
  G.a.assign(G.n * G.n, 0.0);
  G.log_scale.assign(G.n, 0.0);
  std::vector<KernelStats> st(G.n);
  parallel_for(G.n, threads, [&](std::size_t i) { st[i] = kernel_norm2(tab, ps[i].logr); });
  for (std::size_t i = 0; i < G.n; ++i) {
    G.max_truncation = std::max(G.max_truncation, st[i].D);
    G.labels.push_back("(" + csv::format_double(ps[i].logr) + "," + csv::format_double(ps[i].theta) + ")");
  }
  // Upper triangle in parallel over rows; the lower one is its conjugate.
  parallel_for(G.n, threads, [&](std::size_t i) {
    G(i, i) = 1.0;
    for (std::size_t j = i + 1; j < G.n; ++j) G(i, j) = normalized_gram_entry(tab, ps[i], ps[j], st[i], st[j]);
  });
  for (std::size_t i = 0; i < G.n; ++i)
    for (std::size_t j = i + 1; j < G.n; ++j) G(j, i) = std::conj(G(i, j));
  return G;
}

/// Gram of ||k_lambda|| E_lambda / E'(lambda) over the given roots of g.
/// Row scales are half the log of the diagonal, so the stored diagonal is 1.
inline GramMatrix assemble_dual_gram(const GenFun& g, const MomentTable& tab, const PointSet& ps,
                                     unsigned threads = 1) {
  GramMatrix G;
  G.n = ps.size();
  G.a.assign(G.n * G.n, 0.0);
  G.log_scale.assign(G.n, 0.0);
  std::vector<PolyCoeffs> El(G.n);
  std::vector<LogComplex> factor(G.n);  // ||k_lambda|| / E'(lambda)
  std::vector<double> norm(G.n);        // log ||E_lambda||
  parallel_for(G.n, threads, [&](std::size_t i) {
    El[i] = deflated_coeffs(g, ps[i]);
    auto kn = kernel_norm2(tab, ps[i].logr);
    factor[i] = LogComplex::polar_log(0.5 * kn.lognorm2.logmag, 0.0) / derivative_at_root(g, ps[i]);
    norm[i] = 0.5 * coeff_norm2(El[i], tab).logmag;
  });
  for (std::size_t i = 0; i < G.n; ++i) {
    G.log_scale[i] = norm[i] + factor[i].logmag;
    G.cancelled += El[i].cancelled_count();
    G.labels.push_back("(" + csv::format_double(ps[i].logr) + "," + csv::format_double(ps[i].theta) + ")");
  }
  parallel_for(G.n, threads, [&](std::size_t i) {
    for (std::size_t j = i; j < G.n; ++j) {
      auto ip = coeff_inner(El[i], El[j], tab) * factor[i] * factor[j].conj();
      G(i, j) = LogComplex::polar_log(ip.logmag - G.log_scale[i] - G.log_scale[j], ip.phase).value();
      if (ip.is_zero()) G(i, j) = 0.0;
    }
    G(i, i) = G(i, i).real();
  });
  for (std::size_t i = 0; i < G.n; ++i)
    for (std::size_t j = i + 1; j < G.n; ++j) G(j, i) = std::conj(G(i, j));
  return G;
}

struct RieszReport {
  double lambda_min = 0.0, lambda_max = 0.0;
  double condition = 0.0;
  double log_scale = 0.0;  // eigenvalues are lambda * e^{log_scale}
  std::vector<double> eigenvalues;
  // Nested sections N_1 < N_2 < ...
  std::vector<std::size_t> section_sizes;
  std::vector<double> section_min, section_max, section_condition;
  bool interlacing_ok = true;
};

/// Spectrum of the true matrix e^{s_i} a_ij e^{s_j}, with the largest scale
/// factored out and recorded in log_scale.
inline RieszReport riesz_bounds(const GramMatrix& G) {
  RieszReport rep;
  if (G.n == 0) throw PreconditionError("riesz_bounds: empty matrix");
  double smax = *std::max_element(G.log_scale.begin(), G.log_scale.end());
  std::vector<std::complex<double>> m(G.a.size());
  for (std::size_t i = 0; i < G.n; ++i)
    for (std::size_t j = 0; j < G.n; ++j)
      m[i * G.n + j] = G(i, j) * std::exp(G.log_scale[i] + G.log_scale[j] - 2 * smax);
  rep.eigenvalues = hermitian_eigenvalues(std::move(m), G.n);
  rep.log_scale = 2 * smax;
  rep.lambda_min = rep.eigenvalues.front();
  rep.lambda_max = rep.eigenvalues.back();
  rep.condition = rep.lambda_min > 0 ? rep.lambda_max / rep.lambda_min : std::numeric_limits<double>::infinity();
  return rep;
}

/// Leading principal sections of sizes `sizes` (ascending). Cauchy
/// interlacing makes lambda_min non-increasing and lambda_max
/// non-decreasing; violations beyond 1e-10 clear interlacing_ok.
inline RieszReport nested_sections(const GramMatrix& G, const std::vector<std::size_t>& sizes) {
  RieszReport rep;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::size_t m = sizes[k];
    if (m == 0 || m > G.n || (k && m <= sizes[k - 1]))
      throw PreconditionError("nested_sections: sizes must increase within the matrix");
    GramMatrix S;
    S.n = m;
    S.a.resize(m * m);
    S.log_scale.assign(G.log_scale.begin(), G.log_scale.begin() + static_cast<long>(m));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) S(i, j) = G(i, j);
    auto r = riesz_bounds(S);
    double f = std::exp(r.log_scale);
    rep.section_sizes.push_back(m);
    rep.section_min.push_back(r.lambda_min * f);
    rep.section_max.push_back(r.lambda_max * f);
    rep.section_condition.push_back(r.condition);
    if (k) {
      double tol = 1e-10 * std::max(1.0, rep.section_max.back());
      if (rep.section_min[k] > rep.section_min[k - 1] + tol ||
          rep.section_max[k] < rep.section_max[k - 1] - tol)
        rep.interlacing_ok = false;
    }
    if (k + 1 == sizes.size()) {
      rep.eigenvalues = r.eigenvalues;
      rep.lambda_min = r.lambda_min;
      rep.lambda_max = r.lambda_max;
      rep.condition = r.condition;
      rep.log_scale = r.log_scale;
    }
  }
  return rep;
}

inline nlohmann::json to_json(const RieszReport& r) {
  nlohmann::json j;
  j["lambda_min"] = r.lambda_min;
  j["lambda_max"] = r.lambda_max;
  j["condition"] = std::isfinite(r.condition) ? nlohmann::json(r.condition) : nlohmann::json("inf");
  j["log_scale"] = r.log_scale;
  j["eigenvalues"] = r.eigenvalues;
  if (!r.section_sizes.empty()) {
    j["sections"] = {{"size", r.section_sizes},
                     {"lambda_min", r.section_min},
                     {"lambda_max", r.section_max},
                     {"condition", r.section_condition}};
    j["interlacing_ok"] = r.interlacing_ok;
  }
  return j;
}

/// Gram CSV: i, j, re, im (stored order-one entries); sidecar: i, log_scale, label.
inline void write_gram_csv(std::ostream& entries, std::ostream& scales, const GramMatrix& G) {
  csv::Writer w(entries);
  w.row({"i", "j", "re", "im"});
  for (std::size_t i = 0; i < G.n; ++i)
    for (std::size_t j = 0; j < G.n; ++j)
      w.row({std::to_string(i), std::to_string(j), csv::format_double(G(i, j).real()),
             csv::format_double(G(i, j).imag())});
  csv::Writer s(scales);
  s.row({"i", "log_scale", "label"});
  for (std::size_t i = 0; i < G.n; ++i)
    s.row({std::to_string(i), csv::format_double(G.log_scale[i]), i < G.labels.size() ? G.labels[i] : ""});
}

// ---------------------------------------------------------------------------
// Circulant model on one circle
// ---------------------------------------------------------------------------

struct Rational {
  std::int64_t num = 0, den = 1;

  static Rational make(std::int64_t n, std::int64_t d) {
    if (d < 0) n = -n, d = -d;
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    return {n / g, d / g};
  }
  Rational operator+(const Rational& o) const { return make(num * o.den + o.num * den, den * o.den); }
  Rational operator*(std::int64_t k) const { return make(num * k, den); }
  bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
  bool operator==(const Rational& o) const = default;
  double value() const { return double(num) / double(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

struct CirculantReport {
  int n = 0;
  std::vector<Rational> a_exact;
  std::vector<double> a;
  Rational opnorm_exact;
  double opnorm = 0.0;
  std::vector<double> eigs_formula;  // n a_q, ascending
  std::vector<double> eigs_dense;    // eigenvalues of (b_jk), ascending
  double max_eig_error = 0.0;
};

/// a_s = 1/(2s+n+1) + 1/(3n-2s-2), b_jk = sum_s e^{2 pi i (j-k) s/n} a_s.
/// The dense eigensolve of (b_jk) runs only for n <= dense_limit.
inline CirculantReport circulant_analysis(int n, int dense_limit = 64) {
  if (n < 1) throw PreconditionError("circulant_analysis: n must be >= 1");
  CirculantReport rep;
  rep.n = n;
  for (int s = 0; s < n; ++s) {
    Rational v = Rational::make(1, 2 * s + n + 1) + Rational::make(1, 3 * n - 2 * s - 2);
    rep.a_exact.push_back(v);
    rep.a.push_back(v.value());
  }
  Rational mx = *std::max_element(rep.a_exact.begin(), rep.a_exact.end());
  rep.opnorm_exact = mx * n;
  rep.opnorm = rep.opnorm_exact.value();
  for (double v : rep.a) rep.eigs_formula.push_back(n * v);
  std::sort(rep.eigs_formula.begin(), rep.eigs_formula.end());
  if (n > dense_limit) return rep;

  const std::size_t N = static_cast<std::size_t>(n);
  std::vector<std::complex<double>> b(N * N);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t k = 0; k < N; ++k) {
      std::complex<double> acc = 0.0;
      long d = static_cast<long>(j) - static_cast<long>(k);
      for (int s = 0; s < n; ++s) {
        long e = ((d * s) % n + n) % n;  // reduce the angle before scaling
        acc += std::polar(rep.a[s], kTwoPi * double(e) / n);
      }
      b[j * N + k] = acc;
    }
  // Symmetrize rounding noise so the Hermitian check is exact.
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t k = j + 1; k < N; ++k) b[k * N + j] = std::conj(b[j * N + k]);
  rep.eigs_dense = hermitian_eigenvalues(std::move(b), N);
  for (std::size_t i = 0; i < N; ++i)
    rep.max_eig_error = std::max(rep.max_eig_error, std::fabs(rep.eigs_dense[i] - rep.eigs_formula[i]));
  return rep;
}

/// (2 pi / R) sum_s (alpha conj beta)^s a_s: the one-circle model of
/// <E_lambda, E_mu> for lambda = alpha R, mu = beta R on circle n.
inline std::complex<double> circulant_model_entry(int n, double R, double theta_l, double theta_m) {
  auto rep_a = [&](int s) { return 1.0 / (2.0 * s + n + 1) + 1.0 / (3.0 * n - 2.0 * s - 2); };
  std::complex<double> acc = 0.0;
  for (int s = 0; s < n; ++s) acc += std::polar(rep_a(s), s * (theta_l - theta_m));
  return kTwoPi / R * acc;
}

// ---------------------------------------------------------------------------
// Block norms on the circles of a lacunary product
// ---------------------------------------------------------------------------

struct BlockNormScan {
  std::vector<int> n;
  std::vector<double> log_norm;  // log ||B_n||
  std::vector<double> norm_times_R;
  double spread = 0.0;
  bool hermitian = true;
  bool pass = false;
};

/// ||B_n|| R_n with B_n = (<E_lambda, E_mu>) over the n roots on circle R_n.
/// E is the product g (its full depth); the norm is the largest |eigenvalue|.
inline BlockNormScan block_norm_scan(const GenFun& g, const MomentTable& tab, int n_lo, int n_hi,
                                     double threshold = 100.0) {
  if (g.kind != GenKind::t3_product) throw PreconditionError("block_norm_scan: needs a t3 product");
  if (g.degree() > 1000) throw PreconditionError("block_norm_scan: product degree exceeds 1000");
  if (n_lo < 1 || n_hi > static_cast<int>(g.depth()) || n_lo > n_hi)
    throw PreconditionError("block_norm_scan: circle range outside the product");
  BlockNormScan rep;
  for (int n = n_lo; n <= n_hi; ++n) {
    auto roots = factor_roots(g, static_cast<std::size_t>(n - 1));
    std::vector<PolyCoeffs> El;
    for (const auto& r : roots) El.push_back(deflated_coeffs(g, r));
    const std::size_t m = roots.size();
    std::vector<LogComplex> e(m * m);
    double scale = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        e[i * m + j] = coeff_inner(El[i], El[j], tab);
        if (!e[i * m + j].is_zero()) scale = std::max(scale, e[i * m + j].logmag);
      }
    std::vector<std::complex<double>> B(m * m);
    for (std::size_t k = 0; k < m * m; ++k)
      B[k] = e[k].is_zero() ? 0.0 : LogComplex::polar_log(e[k].logmag - scale, e[k].phase).value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        if (std::abs(B[i * m + j] - std::conj(B[j * m + i])) > 1e-12) rep.hermitian = false;
    auto ev = hermitian_eigenvalues(std::move(B), m);
    double top = std::max(std::fabs(ev.front()), std::fabs(ev.back()));
    double ln = std::log(top) + scale;
    rep.n.push_back(n);
    rep.log_norm.push_back(ln);
    rep.norm_times_R.push_back(std::exp(ln + g.factors[n - 1].logR));
  }
  auto [mn, mx] = std::minmax_element(rep.norm_times_R.begin(), rep.norm_times_R.end());
  rep.spread = *mx / *mn;
  rep.pass = rep.hermitian && rep.spread <= threshold;
  return rep;
}

}  // namespace fockrb
