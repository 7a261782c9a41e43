#include "fockrb/casestudies.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fockrb;

namespace {

using cd = std::complex<double>;

Weight square_psi() {
  return Weight::custom(
      "t^2", [](double t) { return t * t; }, [](double t) { return 2 * t; }, [](double) { return 2.0; },
      [](double) { return 0.0; });
}

}  // namespace

TEST(Obstruction, AnnulusIntegralAtCenter) {
  for (int N : {2, 4, 32}) EXPECT_NEAR(annulus_hilbert_integral(0.0, 1.0, N), kTwoPi * std::log(N), 1e-12);
  EXPECT_TRUE(std::isinf(annulus_hilbert_integral(2.0, 1.0, 4)));
  // Outside the annulus the integral is positive and decreases with distance.
  EXPECT_GT(annulus_hilbert_integral(5.0, 1.0, 4), annulus_hilbert_integral(9.0, 1.0, 4));
  EXPECT_GT(annulus_hilbert_integral(9.0, 1.0, 4), 0.0);
}

TEST(Obstruction, SinglePointAtDistanceRho) {
  PointSet ps;
  ps.add(cd(10.0, 0.0));
  EXPECT_NEAR(obstruction_at(ps, cd(10.0, 0.0), 4, 1.0, cd(10.0, 1.0)), 1.0, 1e-15);
  EXPECT_NEAR(obstruction_at(ps, cd(10.0, 0.0), 4, 0.5, cd(10.5, 0.0)), 1.0, 1e-13);
  EXPECT_THROW(obstruction_at(ps, cd(10.0, 0.0), 0, 1.0, cd(0.0)), PreconditionError);
}

TEST(Obstruction, SquareLatticeMatchesDirectSummationAtWidthFour) {
  const cd c(1000.0, 0.0);
  auto ps = square_lattice(c, 1.0, 6.0);
  auto rep = obstruction_functional(ps, c, 4, 1.0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (int j = -40; j <= 40; ++j)
    for (int i = -40; i <= 40; ++i) {
      if (i * i + j * j >= 40 * 40) continue;
      ++count;
      if (i % 8 == 0 && j % 8 == 0 && i * i + j * j < 32 * 32) continue;  // on a lattice point
      double s = 0;
      for (int m = -3; m <= 3; ++m)
        for (int k = -3; k <= 3; ++k) {
          if (m * m + k * k >= 16) continue;
          double dx = i / 8.0 - m, dy = j / 8.0 - k;
          s += 1.0 / (dx * dx + dy * dy);
        }
      best = std::min(best, s);
    }
  EXPECT_EQ(rep.grid_points, count);
  EXPECT_NEAR(rep.inf_value, best, 1e-12 * best);
  EXPECT_EQ(rep.inner_points, 45u);
}

TEST(Obstruction, TranslationCovariant) {
  const cd c1(1000.0, 0.0), c2(-37.25, 512.5);
  auto a = obstruction_functional(square_lattice(c1, 1.0, 10.0), c1, 8, 1.0);
  auto b = obstruction_functional(square_lattice(c2, 1.0, 10.0), c2, 8, 1.0);
  EXPECT_NEAR(a.inf_value, b.inf_value, 1e-12 * a.inf_value);
}

TEST(Obstruction, GrowsLikeLogWidth) {
  const cd c(1000.0, 0.0);
  auto ps = square_lattice(c, 1.0, 34.0);
  auto scan = obstruction_scan(ps, c, 1.0, {4, 8, 16, 32}, 0.3, 4);
  EXPECT_TRUE(scan.pass);
  EXPECT_GT(scan.fit.slope, 0.3);
  EXPECT_GE(scan.fit.r2, 0.9);
  for (const auto& r : scan.rows) {
    EXPECT_GT(r.inf_value, 0.5 * std::log(r.N));
    EXPECT_LT(r.inf_value, 4.0 * std::log(r.N));
  }
}

TEST(Obstruction, DegenerateAnnulusRejected) {
  PointSet ps;
  EXPECT_THROW(obstruction_functional(ps, cd(0.0), 4, 0.0), PreconditionError);
  EXPECT_THROW(obstruction_functional(ps, cd(0.0), 0, 1.0), PreconditionError);
}

TEST(LinearFit, ExactLine) {
  auto f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-15);
  EXPECT_NEAR(f.intercept, 1.0, 1e-15);
  EXPECT_NEAR(f.r2, 1.0, 1e-15);
}

TEST(BuildQ, ExponentialWeightBounds) {
  auto q = build_Q(Weight::power_exponent(2.0), 8.0);
  EXPECT_LE(q.M(), 100.0);
  EXPECT_TRUE(q.zeros_in_2A);
  EXPECT_GT(q.samples, 1000u);
  EXPECT_NEAR(q.rho, 0.5, 1e-9);  // h = r^2 has constant rho
  EXPECT_LE(q.B, 4.0);
  EXPECT_GE(q.min_gap_over_rho, 0.5);
  EXPECT_EQ(q.P.factors.size(), 33u);
  EXPECT_LT(q.max_knot_residual, 1.0);
}

TEST(BuildQ, GapStaysBoundedAcrossA) {
  for (double A : {4.0, 6.0, 8.0}) {
    auto q = build_Q(Weight::power_exponent(2.0), A, 0.0, 17, 32);
    EXPECT_GE(q.min_gap_over_rho, 0.5) << "A=" << A;
    EXPECT_LE(q.M(), 100.0) << "A=" << A;
  }
}

TEST(BuildQ, RefusesNonT1Weight) {
  EXPECT_THROW(build_Q(Weight::log_power(2.0), 8.0, 1.0), FamilyMismatch);
  EXPECT_THROW(build_Q(Weight::power_exponent(2.0), 0.5), PreconditionError);
}

TEST(T2Chain, SquareWeightQuantities) {
  auto rep = verify_t2_chain(square_psi(), 25);
  ASSERT_EQ(rep.rows.size(), 26u);
  EXPECT_TRUE(rep.pass);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.et2, 10.0) << "n=" << r.n;
    if (r.n >= 5) {
      EXPECT_GE(r.d, 1.0);
      EXPECT_LE(r.d, 4.0);
      EXPECT_GE(r.e, 1.0);
      EXPECT_LE(r.e, 4.0);
    }
  }
  EXPECT_LE(rep.es2_spread, 50.0);
  EXPECT_TRUE(std::isfinite(rep.log_a));
  EXPECT_LT(rep.E_vs_ell_hi - rep.E_vs_ell_lo, 20.0);
}

TEST(T2Chain, ConstantsStableUnderDoubling) {
  auto s = t2_chain_stability(Weight::log_power(2.0), 20);
  EXPECT_TRUE(s.pass);
  EXPECT_LE(s.et1_change, 0.2);
  EXPECT_LE(s.et2_change, 0.2);
  EXPECT_LE(s.et3_change, 0.2);
}

TEST(T2Chain, PartialIntegralsIncrease) {
  auto rep = verify_t2_chain(Weight::log_power(1.5), 12);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    // int_0^{y_n - delta} e^{ell - psi + 2t} grows with n.
    double prev = std::log(rep.rows[i - 1].c) - rep.rows[i - 1].log_v + 2 * rep.rows[i - 1].y;
    double cur = std::log(rep.rows[i].c) - rep.rows[i].log_v + 2 * rep.rows[i].y;
    EXPECT_GT(cur, prev);
  }
}

TEST(T2Chain, RefusesOtherRegimes) {
  EXPECT_THROW(verify_t2_chain(Weight::power_exponent(1.0), 10), FamilyMismatch);
  EXPECT_THROW(verify_t2_chain(square_psi(), 3), PreconditionError);
}

TEST(T2Sections, NestedConditionNumbers) {
  auto st = t2_sections(square_psi(), {5, 10, 15, 20, 25});
  EXPECT_TRUE(st.nested.interlacing_ok);
  const auto& c = st.nested.section_condition;
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i], c[i - 1]);
  // Increments shrink: the sequence levels off.
  for (std::size_t i = 2; i < c.size(); ++i) EXPECT_LT(c[i] - c[i - 1], c[i - 1] - c[i - 2]);
  EXPECT_TRUE(st.pass);
  EXPECT_NEAR(st.logr[0], 1.0, 1e-9);
}

TEST(DeBranges, RatioGrowsAndRealAxisIdentityHolds) {
  auto R = LacunarySequence::squaring(7);
  auto g = t3_product(R, 7);
  auto tab = build_table(theorem3_weight(R), g.degree() + 2);
  auto rep = debranges_ratio(g, tab, 3, 7);
  ASSERT_EQ(rep.rows.size(), 5u);
  EXPECT_GT(rep.rows[0].Q, 1.0);
  EXPECT_TRUE(rep.increasing);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.real_axis_deviation, 1e-6) << "n=" << r.n;
    EXPECT_LE(r.identity_at_1_3, 1e-6) << "n=" << r.n;
  }
  EXPECT_THROW(debranges_ratio(g, tab, 2, 4), PreconditionError);
  EXPECT_THROW(debranges_ratio(g, tab, 3, 8), PreconditionError);
}

TEST(Counterexample, TwoKnotHandValue) {
  auto cm = build_counterexample_moments({2, 8}, {4, 65}, 20);
  EXPECT_NEAR(cm.p[5], 12.0, 1e-15);
  EXPECT_EQ(cm.prediction[5], 12.0);
  for (std::size_t n = 0; n < cm.p.size(); ++n) {
    EXPECT_GE(cm.p[n], cm.prediction[n]);
    EXPECT_LE(cm.p[n] - cm.prediction[n], std::log(2.0) + 1e-12);
  }
}

TEST(Counterexample, ConstraintViolationsNameIndex) {
  try {
    build_counterexample_moments({2, 3}, {4, 100}, 10);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("t_2"), std::string::npos);
  }
  try {
    build_counterexample_moments({2, 8, 60}, {4, 65, 7000}, 10);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("s_3"), std::string::npos);
  }
  EXPECT_THROW(build_counterexample_moments({8, 2}, {4, 65}, 10), PreconditionError);
}

TEST(ConvexityScreen, GaussianMomentsPlateau) {
  std::vector<double> lm;
  for (int n = 0; n <= 201; ++n) lm.push_back(std::log(kPi) + std::lgamma(n + 1.0));
  auto sc = convexity_screen(lm, {50, 100, 200});
  EXPECT_EQ(sc.verdict, ScreenVerdict::monotone_compatible);
}

TEST(ConvexityScreen, HandCaseAndAffineInvariance) {
  EXPECT_DOUBLE_EQ(convex_fit_defect(std::vector<double>{0.0, 1.0, 0.0}), 0.5);
  auto cm = build_counterexample_moments({2, 4}, {1, 9}, 201);
  auto a = convexity_screen(cm.p, {50, 100, 200});
  auto shifted = cm.p;
  for (std::size_t n = 0; n < shifted.size(); ++n) shifted[n] += 3.0 - 0.25 * double(n);
  auto b = convexity_screen(shifted, {50, 100, 200});
  for (std::size_t i = 0; i < a.defect.size(); ++i) EXPECT_NEAR(a.defect[i], b.defect[i], 1e-9);
  EXPECT_EQ(a.verdict, b.verdict);
}

TEST(ConvexityScreen, LinearSequenceReducesToLogN) {
  std::vector<double> lin, logn;
  for (int n = 0; n <= 60; ++n) lin.push_back(2.0 * n - 1.0);
  for (int n = 1; n <= 50; ++n) logn.push_back(std::log(double(n)));
  auto sc = convexity_screen(lin, {50});
  EXPECT_NEAR(sc.defect[0], convex_fit_defect(logn), 1e-9);
}

TEST(ConvexityScreen, AtomicSequenceWithLongLastSegmentGrows) {
  auto cm = build_counterexample_moments({2, 4}, {1, 9}, 201);
  auto sc = convexity_screen(cm.p, {50, 100, 200});
  EXPECT_EQ(sc.verdict, ScreenVerdict::incompatible);
  EXPECT_GE(sc.growth, 1.5);
}

TEST(ConvexityScreen, RejectsShortInput) {
  EXPECT_THROW(convexity_screen(std::vector<double>(5, 0.0), {3}), PreconditionError);
  EXPECT_THROW(convexity_screen(std::vector<double>(20, 0.0), {30}), PreconditionError);
}
