#include <gtest/gtest.h>

#include "ngqkd/security.hpp"
#include "oracles.hpp"

using namespace ngqkd;

namespace {

JointTable gaussian_table(double rho, const QuadratureGrid& g) {
  JointTable t{g, RealMatrix(g.size(), g.size())};
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) t.density(i, j) = oracle::bivariate_normal(g[i], g[j], 1.0, 1.0, rho);
  return t;
}

TwoModeState lossy_tmsv(double lambda, double t) {
  return loss_channel(make_tmsv(TmsvParams{lambda}, Cutoff(10)), ModeLabel::A, ChannelParams{t, 0.0});
}

}  // namespace

TEST(Security, MutualInformationOfBivariateGaussian) {
  // -1/2 log2(1 - rho^2) = 0.7370 bits at rho = 0.8
  const auto t = gaussian_table(0.8, QuadratureGrid(-8.0, 8.0, 0.05));
  EXPECT_NEAR(mutual_information(t), 0.7370, 1e-3);
  EXPECT_NEAR(mutual_information(gaussian_table(0.0, QuadratureGrid(-8.0, 8.0, 0.05))), 0.0, 1e-9);
}

TEST(Security, MutualInformationIsSymmetric) {
  const auto s = add_photons(lossy_tmsv(0.5, 0.5), ModeLabel::A, 1).state;
  auto t = joint_quadrature_distribution(s, 0.0, 0.0);
  const double i1 = mutual_information(t);
  t.density.transposeInPlace();
  EXPECT_NEAR(mutual_information(t), i1, 1e-12);
}

TEST(Security, JointTableCoverage) {
  const auto s = make_tmsv(TmsvParams{0.5}, Cutoff(10));
  EXPECT_NEAR(joint_quadrature_distribution(s, 0.0, 0.0).mass(), 1.0, 1e-6);
  try {
    joint_quadrature_distribution(s, 0.0, 0.0, QuadratureGrid(-1.0, 1.0, 0.05));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::coverage);
  }
}

TEST(Security, ProductAndPureStatesLeakNothing) {
  const Cutoff c(6);
  const auto vac = fock_product(c, 0, 0);
  EXPECT_NEAR(holevo_bound(vac, ModeLabel::A, 0.0), 0.0, 1e-9);
  EXPECT_NEAR(mutual_information(joint_quadrature_distribution(vac, 0.0, 0.0)), 0.0, 1e-9);
  EXPECT_NEAR(holevo_bound(make_tmsv(TmsvParams{0.5}, Cutoff(10)), ModeLabel::A, 0.0), 0.0, 1e-9);
}

TEST(Security, PureLossTmsvMatchesClosedForms) {
  const double lambda = 0.5;
  const double V = (1 + lambda * lambda) / (1 - lambda * lambda);
  for (double t : {1.0, 0.75, 0.5, 0.25, 0.1}) {
    const auto s = lossy_tmsv(lambda, t);
    const auto r = security_report(s, {}, 1.0, t);
    EXPECT_NEAR(r.I_AB, oracle::pure_loss_tmsv_mi(V, t), 2e-3) << t;
    EXPECT_NEAR(r.chi_E, oracle::pure_loss_tmsv_chi(V, t), 2e-3) << t;
    EXPECT_NEAR(r.gaussian_I_AB, oracle::pure_loss_tmsv_mi(V, t), 2e-3) << t;
    EXPECT_NEAR(r.gaussian_chi_E, oracle::pure_loss_tmsv_chi(V, t), 2e-3) << t;
  }
}

TEST(Security, GEntropy) {
  EXPECT_DOUBLE_EQ(g_entropy(1.0), 0.0);
  EXPECT_NEAR(g_entropy(3.0), 2.0, 1e-14);
  EXPECT_NEAR(g_entropy(5.0), oracle::g(5.0), 1e-14);
}

TEST(Security, GaussianKeyrateOfVacuumIsZero) {
  CovarianceMatrix cm;
  const auto k = gaussian_keyrate(cm);
  EXPECT_NEAR(k.I_AB, 0.0, 1e-12);
  EXPECT_NEAR(k.chi_E, 0.0, 1e-12);
  EXPECT_FALSE(k.experimental);
  EXPECT_TRUE(gaussian_keyrate(cm, ModeLabel::A, Reconciliation::forward).experimental);
  CovarianceMatrix bad;
  bad.sigma *= 0.1;
  EXPECT_THROW(gaussian_keyrate(bad), Error);
}

TEST(Security, PlobBound) {
  EXPECT_NEAR(plob_bound(0.5), 1.0, 1e-15);
  EXPECT_NEAR(plob_bound(0.01), -std::log2(0.99), 1e-15);
  EXPECT_TRUE(std::isinf(plob_bound(1.0)));
  EXPECT_THROW(plob_bound(0.0), Error);
}

TEST(Security, NonGaussianKeyrateDominatesGaussianComparator) {
  // Gaussian states extremize the Holevo term, so the covariance-matrix
  // keyrate is a lower bound whenever the comparator is applicable
  const auto src = make_tmsv(TmsvParams{0.5}, Cutoff(10));
  for (int k = 1; k <= 3; ++k)
    for (double t : {0.8, 0.3}) {
      const auto prep = prepare_state(src, k, t, Placement::after_loss);
      const auto r = security_report(prep.state, {}, 1.0, t);
      EXPECT_GE(r.keyrate, r.gaussian_keyrate - 1e-2) << k << " " << t;
    }
}

TEST(Security, GridHalvingIsStable) {
  const auto src = make_tmsv(TmsvParams{0.5}, Cutoff(10));
  const auto s = prepare_state(src, 2, 0.5, Placement::after_loss).state;
  SecurityOptions coarse;
  SecurityOptions fine;
  fine.grid = coarse.grid.refined();
  const auto a = security_report(s, coarse);
  const auto b = security_report(s, fine);
  EXPECT_LT(std::abs(a.I_AB - b.I_AB), 1e-3);
  EXPECT_LT(std::abs(a.chi_E - b.chi_E), 1e-3);
}

TEST(Security, PlacementStrings) {
  for (auto p : {Placement::after_loss, Placement::before_loss, Placement::untouched_mode})
    EXPECT_EQ(placement_from_string(to_string(p)), p);
  try {
    placement_from_string("sideways");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Security, PlacementsAgreeWithoutAddition) {
  const auto src = make_tmsv(TmsvParams{0.5}, Cutoff(10));
  const auto a = prepare_state(src, 0, 0.4, Placement::after_loss).state;
  const auto b = prepare_state(src, 0, 0.4, Placement::untouched_mode).state;
  EXPECT_LT((a.matrix() - b.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  const auto c = prepare_state(src, 1, 0.4, Placement::before_loss).state;
  EXPECT_NO_THROW(TwoModeState::validated(c.matrix(), c.cutoff()));
}

TEST(Security, IdealSuccessProbability) {
  EXPECT_DOUBLE_EQ(ideal_success_probability(4.0 / 3.0, 0, 12.0), 1.0);
  EXPECT_NEAR(ideal_success_probability(4.0 / 3.0, 1, 12.0), 1.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(ideal_success_probability(50.0, 1, 12.0), 1.0);
}

TEST(Security, RateLossSweepRecordsFailuresAndContinues) {
  RateLossOptions opt;
  opt.cutoff = Cutoff(4);
  const auto cells = rate_loss_sweep(0.1, {0, 4}, {1.0, 0.5}, opt);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_TRUE(cells[0].report.has_value());
  EXPECT_TRUE(cells[1].report.has_value());
  // four photons on a cutoff of four pushes weight out of the space
  EXPECT_FALSE(cells[2].report.has_value());
  EXPECT_FALSE(cells[2].error.empty());
}

TEST(Security, RateLossSweepMatchesPureLossOracleAtKZero) {
  const double V = 1.25 / 0.75;
  const auto cells = rate_loss_sweep(0.5, {0}, {0.5, 0.1});
  for (const auto& c : cells) {
    ASSERT_TRUE(c.report.has_value());
    const double ref = oracle::pure_loss_tmsv_mi(V, c.transmissivity) - oracle::pure_loss_tmsv_chi(V, c.transmissivity);
    EXPECT_NEAR(c.report->keyrate, ref, 3e-3);
    EXPECT_NEAR(c.report->plob_bound, -std::log2(1 - c.transmissivity), 1e-12);
  }
}
