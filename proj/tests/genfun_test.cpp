#include "fockrb/genfun.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fockrb;

namespace {

LacunarySequence radii(std::vector<double> R) { return LacunarySequence::from_radii(R); }

Point pt(std::complex<double> z) { return Point::from_complex(z); }

std::complex<double> val(const LogComplex& v) { return v.value(); }

PolyCoeffs from_complex(const std::vector<std::complex<double>>& c) {
  PolyCoeffs p;
  for (auto v : c) p.c.push_back(LogComplex::from(v));
  p.cancelled.assign(c.size(), false);
  return p;
}

// 2-D polar quadrature of int |p|^2 e^{-h}: trapezoid in theta (exact for
// the trigonometric polynomial |p|^2 with enough nodes), adaptive in t = log r.
double log_polar_norm2(const PolyCoeffs& p, const Weight& w, double t_lo, double t_hi) {
  const int M = 4 * (p.degree() + 1);
  auto f = [&](double t) {
    std::vector<LogReal> ring;
    for (int j = 0; j < M; ++j) {
      auto v = poly_eval(p, Point{t, -kPi + kTwoPi * j / M});
      if (!v.is_zero()) ring.push_back(LogReal::from_log(2 * v.logmag));
    }
    double mean = log_sum(ring).logmag + std::log(kTwoPi / M);
    return LogReal::from_log(mean + 2 * t - w.psi(t));
  };
  QuadratureSpec spec{1e-9, 20000, t_lo, t_hi};
  return integrate_log(f, spec).value.logmag;
}

}  // namespace

TEST(LogEval, LacunaryProductAtOne) {
  auto g = t3_product(radii({2, 4}), 2);
  EXPECT_NEAR(std::abs(val(log_eval(g, 1.0)) - 15.0 / 32.0), 0.0, 1e-15);
  EXPECT_NEAR(val(log_eval(g, 1.0)).imag(), 0.0, 1e-15);
}

TEST(LogEval, OriginIsOne) {
  for (auto g : {t3_product(radii({2, 4, 16}), 3), t2_product({0.5, 1.0, 2.0})})
    EXPECT_EQ(log_eval(g, Point{-std::numeric_limits<double>::infinity(), 0.0}).logmag, 0.0);
}

TEST(LogEval, RootHitNamesFactor) {
  auto g = t3_product(radii({2, 4, 16}), 3);
  try {
    log_eval(g, Point{std::log(16.0), kTwoPi / 3});
    FAIL() << "expected RootHit";
  } catch (const RootHit& e) {
    EXPECT_EQ(e.factor, 2u);
  }
}

TEST(LogEval, MatchesDirectProductAcrossScales) {
  auto g = t3_product(radii({2, 4, 16, 256}), 4);
  for (std::complex<double> z : {std::complex<double>(0.3, 0.2), {3.0, -1.0}, {-20.0, 7.0}, {1e3, 1e3}}) {
    std::complex<double> direct = 1.0;
    for (int n = 1; n <= 4; ++n) direct *= 1.0 - std::pow(z / std::exp(g.factors[n - 1].logR), n);
    auto v = log_eval(g, z);
    EXPECT_NEAR(v.logmag, std::log(std::abs(direct)), 1e-12);
    EXPECT_NEAR(std::remainder(v.phase - std::arg(direct), kTwoPi), 0.0, 1e-12);
  }
}

TEST(LogEval, FarFactorsUseAsymptoticForms) {
  // Block (1 - (z/R)^k) with |z/R|^k = e^{-40} and e^{+40}.
  auto g = l2_block({10.0}, {4});
  auto small = log_eval(g, Point{0.0, 0.3});
  EXPECT_NEAR(small.logmag, 0.0, 1e-17);
  auto big = log_eval(g, Point{20.0, 0.3});
  EXPECT_NEAR(big.logmag, 40.0, 1e-15);
}

TEST(LogEval, SingleBlockRotationInvariant) {
  auto g = l2_block({std::log(5.0)}, {7});
  for (double th : {0.1, 1.0, 2.5}) {
    double a = log_eval(g, Point{1.2, th}).logmag;
    double b = log_eval(g, Point{1.2, th + kTwoPi / 7}).logmag;
    EXPECT_NEAR(a, b, 1e-13);
  }
}

TEST(Envelope, PiecewiseLinear) {
  auto g = l2_block({std::log(2.0), std::log(4.0)}, {1, 2});
  EXPECT_EQ(envelope_v(g, std::log(1.5)), 0.0);
  EXPECT_NEAR(envelope_v(g, std::log(3.0)), std::log(1.5), 1e-15);
  const double L = std::log(4.0);
  EXPECT_NEAR(envelope_v(g, L - 1e-12), envelope_v(g, L + 1e-12), 1e-11);
  EXPECT_NEAR(envelope_v(g, std::log(8.0)), std::log(4.0) + 2 * std::log(2.0), 1e-14);
}

TEST(Envelope, LogModulusTracksEnvelopeAwayFromZeros) {
  auto g = l2_block({2.0, 5.0, 11.0}, {3, 8, 20});
  auto excl = [](double r) { return 0.05 * r / 20.0; };
  double coarse = envelope_deviation(g, 0.0, 14.0, 60, 90, excl);
  double fine = envelope_deviation(g, 0.0, 14.0, 120, 180, excl);
  EXPECT_TRUE(std::isfinite(coarse));
  EXPECT_LT(fine, 2.0 * coarse + 1.0);
}

TEST(Derivative, LacunaryRootByHand) {
  auto g = t3_product(radii({2, 4}), 2);
  auto d = val(derivative_at_root(g, pt(2.0)));
  EXPECT_NEAR(d.real(), -3.0 / 8.0, 1e-15);
  EXPECT_NEAR(d.imag(), 0.0, 1e-15);
}

TEST(Derivative, SimpleRoot) {
  auto g = t2_product({std::log(3.0)});
  auto d = val(derivative_at_root(g, pt(3.0)));
  EXPECT_NEAR(d.real(), -1.0 / 3.0, 1e-15);
}

TEST(Derivative, ConjugateRootsShareModulusAndMatchDifference) {
  auto g = t3_product(radii({2, 4, 16, 256}), 4);
  const int n = 3;
  auto roots = factor_roots(g, n - 1);
  for (const auto& root : roots) {
    auto d = derivative_at_root(g, root);
    auto dc = derivative_at_root(g, Point{root.logr, -root.theta});
    EXPECT_NEAR(d.logmag, dc.logmag, 1e-12);
    EXPECT_NEAR(std::remainder(d.phase + dc.phase, kTwoPi), 0.0, 1e-12);
    // Central difference of E along the ray.
    std::complex<double> z = root.z(), h = 1e-5 * z;
    auto Ep = val(log_eval(g, z + h)), Em = val(log_eval(g, z - h));
    auto fd = (Ep - Em) / (2.0 * h);
    EXPECT_NEAR(std::abs(fd) / std::exp(d.logmag), 1.0, 1e-8);
  }
  // Around the circle the lower blocks break the symmetry: at R_3 = 16 the
  // cofactor moduli are |1 - 8||1 - 16| = 105 and |1 - 8w||1 - 16w^2| = sqrt(73 * 273).
  auto g3 = t3_product(radii({2, 4, 16}), 3);
  double a = derivative_at_root(g3, roots[0]).logmag;
  double b = derivative_at_root(g3, roots[1]).logmag;
  EXPECT_NEAR(b - a, 0.5 * std::log(73.0 * 273.0) - std::log(105.0), 1e-12);
  EXPECT_THROW(derivative_at_root(g, pt(5.0)), PreconditionError);
}

TEST(Deflate, DifferenceOfSquares) {
  auto p = from_complex({1.0, 0.0, -1.0});
  auto r = deflate(p, pt(1.0));
  ASSERT_EQ(r.quotient.degree(), 1);
  EXPECT_NEAR(val(r.quotient.c[0]).real(), -1.0, 1e-15);
  EXPECT_NEAR(val(r.quotient.c[1]).real(), -1.0, 1e-15);
  EXPECT_THROW(deflate(p, pt(2.0)), PreconditionError);
}

TEST(Deflate, MultiplyThenDeflateIsIdentity) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> lr(-3.0, 8.0), ph(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::complex<double>> c(2 + trial % 20);
    for (auto& v : c) v = {g(rng), g(rng)};
    auto p = from_complex(c);
    Point lam{lr(rng), ph(rng)};
    auto back = deflate(multiply(p, linear_factor(lam)), lam).quotient;
    ASSERT_EQ(back.degree(), p.degree());
    for (std::size_t d = 0; d < c.size(); ++d) {
      if (back.cancelled[d]) continue;
      EXPECT_NEAR(std::abs(val(back.c[d]) - c[d]) / std::abs(c[d]), 0.0, 1e-9);
    }
  }
}

TEST(Deflate, GenericAndStructuredRoutesAgree) {
  auto g = t3_product(radii({2, 4, 16}), 3);
  const Point root = pt(2.0);
  auto generic = deflate(expand_coeffs(g), root).quotient;
  auto structured = deflated_coeffs(g, root);
  ASSERT_EQ(generic.degree(), structured.degree());
  for (int d = 0; d <= generic.degree(); ++d)
    EXPECT_NEAR(std::abs(val(generic.c[d]) - val(structured.c[d])), 0.0,
                1e-12 * std::max(1.0, std::abs(val(structured.c[d]))));
  // E(0) / (0 - 2) = -1/2.
  EXPECT_NEAR(val(structured.c[0]).real(), -0.5, 1e-15);
  // Value at a generic point equals E(z)/(z - 2).
  std::complex<double> z(1.3, 0.7);
  auto lhs = val(poly_eval(structured, pt(z)));
  auto rhs = val(log_eval(g, z)) / (z - 2.0);
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-13);
}

TEST(SwapRoots, ConjugatePairKeepsRealModulus) {
  // (z - i)(z + 1)
  auto p = multiply(linear_factor(pt({0.0, 1.0})), linear_factor(pt(-1.0)));
  auto rep = swap_roots(p, {pt({0.0, 1.0})}, {pt({0.0, -1.0})});
  EXPECT_LE(rep.max_real_axis_deviation, 1e-12);
  EXPECT_EQ(rep.sample_x.size(), 20u);
  auto v = val(poly_eval(rep.result, pt({0.0, -1.0})));
  EXPECT_LT(std::abs(v), 1e-14);
}

TEST(SwapRoots, EmptySwapIsIdentity) {
  auto p = from_complex({1.0, 2.0, 3.0});
  auto rep = swap_roots(p, {}, {});
  for (int d = 0; d <= 2; ++d) EXPECT_EQ(rep.result.c[d].logmag, p.c[d].logmag);
}

TEST(SwapRoots, LacunaryRealAxisIdentity) {
  auto g = t3_product(radii({2, 4, 16}), 3);
  const double R3 = 16.0;
  auto E3 = deflated_coeffs(g, pt(R3));
  Point out{std::log(R3), kTwoPi / 3}, in{std::log(R3), -kTwoPi / 3};
  auto f3 = swap_roots(E3, {out}, {in}).result;
  const double x = 1.5;
  double lhs = poly_eval(f3, pt(x)).logmag;
  double rhs = log_eval(g, x).logmag - std::log(std::fabs(x - R3));
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(CoeffNorm, ConstantAndGaussianLinear) {
  auto tab = build_table(Weight::power_exponent(2.0), 10);
  EXPECT_NEAR(coeff_norm2(from_complex({1.0}), tab).logmag, tab.log_m(0), 1e-15);
  EXPECT_NEAR(std::exp(coeff_norm2(from_complex({1.0, 1.0}), tab).logmag), 2 * kPi, 1e-10);
  EXPECT_THROW(coeff_norm2(from_complex(std::vector<std::complex<double>>(12, 1.0)), tab),
               PreconditionError);
}

TEST(CoeffNorm, MatchesPolarQuadrature) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (const auto& w : {Weight::power_exponent(1.0), Weight::power_exponent(2.0), Weight::log_power(2.0)}) {
    auto tab = build_table(w, 12);
    for (int D : {0, 3, 10}) {
      std::vector<std::complex<double>> c(D + 1);
      for (auto& v : c) v = {g(rng), g(rng)};
      auto p = from_complex(c);
      double series = coeff_norm2(p, tab).logmag;
      double quad = log_polar_norm2(p, w, -40.0, w.family() == Family::log_power ? 25.0 : 6.0);
      EXPECT_NEAR(std::exp(series - quad), 1.0, 0.01) << w.label() << " D=" << D;
    }
  }
}

TEST(CoeffNorm, DeflatedLacunaryMatchesQuadrature) {
  auto R = radii({2, 4, 16});
  auto w = theorem3_weight(R);
  auto tab = build_table(w, 10);
  auto g = t3_product(R, 3);
  auto El = deflated_coeffs(g, pt(-4.0));
  double series = coeff_norm2(El, tab).logmag;
  double quad = log_polar_norm2(El, w, -40.0, 12.0);
  EXPECT_NEAR(std::exp(series - quad), 1.0, 0.05);
}

TEST(CoeffInner, NormIsSelfInner) {
  auto tab = build_table(Weight::power_exponent(1.0), 10);
  auto p = from_complex({{1.0, 2.0}, {-0.5, 0.3}, {0.0, 1.0}});
  auto ip = coeff_inner(p, p, tab);
  EXPECT_NEAR(ip.logmag, coeff_norm2(p, tab).logmag, 1e-14);
  EXPECT_NEAR(ip.phase, 0.0, 1e-14);
}

TEST(CoeffCsv, HeaderAndRows) {
  auto p = expand_coeffs(t3_product(radii({2, 4}), 2));
  std::stringstream ss;
  write_coeffs_csv(ss, p);
  auto rows = csv::read_all(ss);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"degree", "logmag", "phase", "cancellation"}));
  // (1 - z/2)(1 - z^2/16) = 1 - z/2 - z^2/16 + z^3/32.
  EXPECT_NEAR(csv::parse_double(rows[2][1]), std::log(0.5), 1e-15);
  EXPECT_NEAR(std::fabs(csv::parse_double(rows[2][2])), kPi, 1e-15);
  EXPECT_NEAR(csv::parse_double(rows[4][1]), -std::log(32.0), 1e-14);
  EXPECT_EQ(rows[4][3], "0");
}
