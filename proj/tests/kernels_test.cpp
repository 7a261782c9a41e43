#include "fockrb/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fockrb;

namespace {

const MomentTable& gaussian_table() {
  static const MomentTable tab = build_table(Weight::power_exponent(2.0), 200);
  return tab;
}

Point at(double r, double theta) { return Point{std::log(r), theta}; }

}  // namespace

TEST(PointSet, RejectsDuplicatesAndWrapsAngles) {
  PointSet ps("t");
  ps.add(Point{0.0, kPi});
  EXPECT_THROW(ps.add(Point{0.0, -kPi}), PreconditionError);
  ps.add(Point{0.0, 3 * kPi / 2});
  EXPECT_NEAR(ps[1].theta, -kPi / 2, 1e-15);
  ps.add(std::complex<double>(0.0, 0.0));
  EXPECT_THROW(ps.add(std::complex<double>(0.0, 0.0)), PreconditionError);
}

TEST(PointSet, CsvRoundTrip) {
  PointSet ps("t");
  ps.add(Point{0.25, 1.0});
  ps.add(Point{-std::numeric_limits<double>::infinity(), 0.0});
  ps.add(Point{3.5, -2.0});
  std::stringstream ss;
  write_points_csv(ss, ps);
  auto back = read_points_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].logr, ps[i].logr);
    EXPECT_EQ(back[i].theta, ps[i].theta);
  }
}

TEST(KernelNorm, OriginIsReciprocalOfFirstMoment) {
  const auto& tab = gaussian_table();
  auto st = kernel_norm2(tab, -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(st.lognorm2.logmag, -tab.log_m(0));
}

TEST(KernelNorm, GaussianClosedForm) {
  const auto& tab = gaussian_table();
  for (double r : {0.01, 0.5, 1.0, 2.5, 4.0, 6.0}) {
    auto st = kernel_norm2(tab, std::log(r));
    EXPECT_NEAR(st.lognorm2.logmag, r * r - std::log(kPi), 1e-9) << "r=" << r;
    EXPECT_LE(st.trunc_bound, 1e-9);
  }
}

TEST(KernelNorm, TooShortTableNamesRequiredLength) {
  MomentTable tab;
  for (int n = 0; n < 3; ++n) tab.logm.push_back(LogReal::from_log(-double(n)));
  try {
    kernel_norm2(tab, 1.0);
    FAIL() << "expected TableTooShort";
  } catch (const TableTooShort& e) {
    EXPECT_GT(e.required_N, 2);
  }
}

TEST(KernelNorm, EstimatedLengthSuffices) {
  auto w = Weight::power_exponent(2.0);
  auto small = build_table(w, 20);
  int need = 0;
  try {
    kernel_norm2(small, std::log(5.0));
  } catch (const TableTooShort& e) {
    need = e.required_N;
  }
  ASSERT_GT(need, 20);
  EXPECT_NO_THROW(kernel_norm2(build_table(w, need), std::log(5.0)));
}

TEST(KernelNorm, DoublingTruncationChangesLittle) {
  const auto& tab = gaussian_table();
  for (double r : {0.7, 3.0, 5.5}) {
    auto st = kernel_norm2(tab, std::log(r));
    std::vector<LogReal> all;
    for (int n = 0; n <= std::min(2 * st.D, tab.max_degree()); ++n)
      all.push_back(LogReal::from_log(2 * std::log(r) * n - tab.log_m(n)));
    EXPECT_LT(std::fabs(log_sum(all).logmag - st.lognorm2.logmag), 1e-9);
  }
}

TEST(KernelNorm, NonDecreasingInRadius) {
  for (const auto& tab : {build_table(Weight::log_power(1.5), 150), build_table(Weight::power_exponent(1.0), 150),
                          build_table(theorem3_weight(LacunarySequence::squaring(5)), 150)}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double lr = -3.0; lr <= 4.0; lr += 0.25) {
      double v = kernel_norm2(tab, lr).lognorm2.logmag;
      EXPECT_GE(v, prev) << tab.weight_label << " logr=" << lr;
      prev = v;
    }
  }
}

TEST(GramEntry, DiagonalIsOne) {
  const auto& tab = gaussian_table();
  auto g = normalized_gram_entry(tab, at(2.0, 0.3), at(2.0, 0.3));
  EXPECT_NEAR(g.real(), 1.0, 1e-12);
  EXPECT_NEAR(g.imag(), 0.0, 1e-12);
}

TEST(GramEntry, GaussianModulusClosedForm) {
  const auto& tab = gaussian_table();
  // |lambda - mu| = sqrt(2 ln 2) gives modulus 1/2.
  const double d = std::sqrt(2 * std::log(2.0));
  auto g = normalized_gram_entry(tab, at(3.0, 0.0), at(3.0 + d, 0.0));
  EXPECT_NEAR(std::abs(g), 0.5, 1e-10);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 6.0), ph(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    auto p = at(u(rng), ph(rng)), q = at(u(rng), ph(rng));
    double dist = std::abs(p.z() - q.z());
    EXPECT_NEAR(std::abs(normalized_gram_entry(tab, p, q)), std::exp(-dist * dist / 2), 1e-9);
  }
}

TEST(GramEntry, HermitianAndRotationInvariant) {
  const auto& tab = gaussian_table();
  auto p = at(1.5, 0.4), q = at(2.2, -1.1);
  auto pq = normalized_gram_entry(tab, p, q), qp = normalized_gram_entry(tab, q, p);
  EXPECT_EQ(pq, std::conj(qp));
  auto pr = Point{p.logr, p.theta + 0.9}, qr = Point{q.logr, q.theta + 0.9};
  EXPECT_NEAR(std::abs(normalized_gram_entry(tab, pr, qr)), std::abs(pq), 1e-10);
  EXPECT_LE(std::abs(pq), 1.0 + 1e-9);
}

TEST(GramEntry, Theorem3MatchesDirectCoefficientSum) {
  auto w = theorem3_weight(LacunarySequence::from_radii({2, 4, 16, 256}));
  auto tab = build_table(w, 80);
  const double R = 4.0;
  const int n = 2;
  auto p = at(R, 0.0), q = at(R, kTwoPi / n);
  auto g = normalized_gram_entry(tab, p, q);
  // Direct sum in extended precision; |lambda| = 4 keeps the terms in range.
  std::complex<long double> s = 0;
  long double np = 0, nq = 0;
  for (int d = 0; d <= 80; ++d) {
    long double md = std::exp(static_cast<long double>(tab.log_m(d)));
    long double r2d = std::pow(static_cast<long double>(R), 2 * d);
    s += std::polar(r2d / md, static_cast<long double>(d * kTwoPi / n));
    np += r2d / md;
  }
  nq = np;
  std::complex<long double> expect = s / std::sqrt(np * nq);
  EXPECT_NEAR(g.real(), double(expect.real()), 1e-12);
  EXPECT_NEAR(g.imag(), double(expect.imag()), 1e-12);
}

TEST(SeparationDensity, SquareLattice) {
  const double rho = 1.0, R = 20.0, A = 4.0;
  PointSet ps("lattice");
  for (int i = -30; i <= 30; ++i)
    for (int j = -30; j <= 30; ++j) {
      double r = std::hypot(i, j);
      if (std::fabs(r - R) <= A * rho + 3) ps.add(std::complex<double>(i, j));
    }
  auto rep = separation_density(ps, rho, {R, A});
  EXPECT_NEAR(rep.beta_sep, 1.0, 1e-12);
  // Covering radius of the unit square lattice is 1/sqrt 2.
  EXPECT_NEAR(rep.beta_den, std::sqrt(2.0), 0.1 * std::sqrt(2.0));
  EXPECT_GT(rep.inner_count, 0u);
}

TEST(SeparationDensity, SinglePoint) {
  PointSet ps;
  ps.add(std::complex<double>(10.0, 0.0));
  auto rep = separation_density(ps, 1.0, {10.0, 2.0});
  EXPECT_TRUE(std::isinf(rep.beta_sep));
  EXPECT_GT(rep.beta_den, 0.0);
}

TEST(SeparationDensity, AntipodalChord) {
  const double R = 7.0, rho = 0.5;
  PointSet ps;
  ps.add(Point{std::log(R), 0.0});
  ps.add(Point{std::log(R), kPi});
  auto rep = separation_density(ps, rho, {R, 1.0});
  EXPECT_NEAR(rep.beta_sep, 2 * R / rho, 1e-12);
}

TEST(SeparationDensity, EmptyIntersection) {
  PointSet ps;
  ps.add(std::complex<double>(100.0, 0.0));
  auto rep = separation_density(ps, 1.0, {5.0, 1.0});
  EXPECT_TRUE(std::isinf(rep.beta_sep));
  EXPECT_EQ(rep.inner_count, 0u);
  EXPECT_THROW(separation_density(ps, 0.0, {5.0, 1.0}), PreconditionError);
}

TEST(NormDiagnostics, LaplaceRegimeSquare) {
  auto w = Weight::log_power(2.0);
  auto tab = build_table(w, 120);
  std::vector<double> ns;
  for (int n = 5; n <= 30; ++n) ns.push_back(n);
  auto rep = kernel_norm_diagnostics(tab, w, NormMode::l2q, ns);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.spread, 50.0);
  EXPECT_NEAR(rep.trend, 1.0, 0.2);
}

TEST(NormDiagnostics, LacunaryCircles) {
  auto w = theorem3_weight(LacunarySequence::from_radii({2, 4, 16, 256}));
  auto tab = build_table(w, 120);
  auto rep = kernel_norm_diagnostics(tab, w, NormMode::exy, {2, 3, 4});
  EXPECT_TRUE(rep.pass);
}

TEST(NormDiagnostics, GaussianAnnulus) {
  auto w = Weight::power_exponent(2.0);
  std::vector<double> lr;
  for (double r = 1.0; r <= 6.0; r += 0.5) lr.push_back(std::log(r));
  auto rep = kernel_norm_diagnostics(gaussian_table(), w, NormMode::l5, lr);
  // ||k_z||^2 = e^{|z|^2}/pi and rho = 1/2: the ratio is the constant 1/(2 sqrt pi).
  EXPECT_NEAR(rep.spread, 1.0, 1e-8);
  EXPECT_NEAR(rep.ratio[0], 0.5 / std::sqrt(kPi), 1e-8);
}

TEST(NormDiagnostics, RegimeMismatchRefused) {
  auto w = Weight::log_power(2.0);
  auto tab = build_table(w, 60);
  EXPECT_THROW(kernel_norm_diagnostics(tab, w, NormMode::l5, {1.0, 2.0, 3.0}), PreconditionError);
  EXPECT_THROW(kernel_norm_diagnostics(tab, w, NormMode::exy, {1, 2}), PreconditionError);
  EXPECT_THROW(kernel_norm_diagnostics(gaussian_table(), Weight::power_exponent(2.0), NormMode::l2q, {5, 10}),
               PreconditionError);
}

TEST(RadialLogMeans, Monomial) {
  std::vector<LogComplex> c(4, LogComplex::zero_value());
  c[3] = LogComplex::one();
  auto rep = radial_log_means(c);
  EXPECT_TRUE(rep.convex);
  EXPECT_NEAR(rep.min_second_diff, 0.0, 1e-12);
  EXPECT_NEAR(rep.omega.back() - rep.omega.front(), 6.0 * 10.0, 1e-10);
}

TEST(RadialLogMeans, OnePlusZ) {
  std::vector<LogComplex> c = {LogComplex::one(), LogComplex::one()};
  auto rep = radial_log_means(c);
  EXPECT_TRUE(rep.convex);
  for (std::size_t i = 0; i < rep.s.size(); ++i)
    EXPECT_NEAR(rep.omega[i], std::log1p(std::exp(2 * rep.s[i])), 1e-12);
}

TEST(RadialLogMeans, RandomQuintics) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LogComplex> c;
    for (int d = 0; d <= 5; ++d) c.push_back(LogComplex::from(std::complex<double>(g(rng), g(rng))));
    EXPECT_TRUE(radial_log_means(c).convex);
  }
}

TEST(RadialLogMeans, ZeroPolynomialRejected) {
  std::vector<LogComplex> c(3, LogComplex::zero_value());
  EXPECT_THROW(radial_log_means(c), PreconditionError);
}
