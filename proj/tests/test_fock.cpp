#include <gtest/gtest.h>

#include "ngqkd/fock.hpp"
#include "ngqkd/quadrature.hpp"
#include "oracles.hpp"

using namespace ngqkd;

namespace {

Matrix random_density(int n, unsigned seed) {
  std::srand(seed);
  Matrix g = Matrix::Random(n, n);
  Matrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

}  // namespace

TEST(Fock, ValidatedRejectsBadMatrices) {
  const Cutoff c(2);
  Matrix m = Matrix::Identity(9, 9) / 9.0;
  EXPECT_NO_THROW(TwoModeState::validated(m, c));

  Matrix nonherm = m;
  nonherm(0, 1) = 0.1;
  EXPECT_THROW(TwoModeState::validated(nonherm, c), Error);

  Matrix badtrace = 2.0 * m;
  try {
    TwoModeState::validated(badtrace, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_state);
  }

  Matrix neg = m;
  neg(0, 0) = -0.1;
  neg(1, 1) += 0.1 + 1.0 / 9.0 - 1.0 / 9.0;
  EXPECT_THROW(TwoModeState::validated(neg, c), Error);

  try {
    TwoModeState::validated(Matrix::Identity(4, 4) / 4.0, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(Fock, FromOperatorNormalizesAndClips) {
  const Cutoff c(1);
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  m(2, 2) = -0.01;
  const auto s = TwoModeState::from_operator(m, c);
  EXPECT_TRUE(s.clipped());
  EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-14);
  EXPECT_GE(hermitian_eigenvalues(s.matrix()).minCoeff(), -1e-14);

  EXPECT_THROW(TwoModeState::from_operator(Matrix::Zero(4, 4), c), Error);
}

TEST(Fock, LadderOperatorsActOnNumberStates) {
  const Cutoff c(6);
  const Matrix a = annihilation(c);
  const Matrix ad = creation(c);
  for (int n = 1; n < c.dim(); ++n) {
    EXPECT_NEAR(std::abs(a(n - 1, n)), std::sqrt(n), 1e-14);
    EXPECT_NEAR(std::abs(ad(n, n - 1)), std::sqrt(n), 1e-14);
  }
  const Matrix num = ad * a;
  EXPECT_LT((num - number_operator(c)).cwiseAbs().maxCoeff(), 1e-13);
  const Matrix par = parity(c);
  for (int n = 0; n < c.dim(); ++n) EXPECT_EQ(par(n, n).real(), n % 2 == 0 ? 1.0 : -1.0);
}

TEST(Fock, DisplacementMatchesMatrixExponential) {
  // truncated block of the exponential taken in a much larger space
  const Cutoff c(10);
  for (const oracle::cplx beta : {oracle::cplx(0.3, -0.2), oracle::cplx(1.1, 0.7), oracle::cplx(-2.0, 0.5)}) {
    const Matrix exact = displacement(c, beta);
    const Matrix ref = oracle::displacement_big(c.dim(), beta, 90);
    EXPECT_LT((exact - ref).cwiseAbs().maxCoeff(), 1e-9) << beta;
    // first column is the coherent state
    EXPECT_LT((exact.col(0) - coherent_vector(c.dim(), beta)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Fock, PartialTraceOfProduct) {
  const Cutoff c(3);
  const Matrix ra = random_density(4, 1);
  const Matrix rb = random_density(4, 2);
  const Matrix rho = tensor(ra, rb);
  EXPECT_LT((partial_trace(rho, ModeLabel::A) - ra).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((partial_trace(rho, ModeLabel::B) - rb).cwiseAbs().maxCoeff(), 1e-13);
  // index convention m = d*r + s with r on mode A
  const auto s = TwoModeState::validated(rho, c);
  EXPECT_NEAR(std::abs(s(1, 2, 3, 0) - ra(1, 3) * rb(2, 0)), 0.0, 1e-14);
}

TEST(Fock, OnModeActsOnTheRightFactor) {
  const Cutoff c(3);
  const Matrix n = number_operator(c);
  const Matrix rho = tensor(random_density(4, 3), random_density(4, 4));
  const double na = (rho * on_mode(n, ModeLabel::A)).trace().real();
  const double nb = (rho * on_mode(n, ModeLabel::B)).trace().real();
  EXPECT_NEAR(na, (partial_trace(rho, ModeLabel::A) * n).trace().real(), 1e-12);
  EXPECT_NEAR(nb, (partial_trace(rho, ModeLabel::B) * n).trace().real(), 1e-12);
}

TEST(Fock, PartialTransposeIsAnInvolutionAndMatchesDefinition) {
  const Matrix rho = random_density(16, 5);
  const Matrix pt = partial_transpose(rho, ModeLabel::B);
  EXPECT_LT((partial_transpose(pt, ModeLabel::B) - rho).cwiseAbs().maxCoeff(), 1e-15);
  const int d = 4;
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int rp = 0; rp < d; ++rp)
        for (int sp = 0; sp < d; ++sp) EXPECT_EQ(pt(d * r + s, d * rp + sp), rho(d * r + sp, d * rp + s));
  // full transpose is the composition of both partial transposes
  const Matrix both = partial_transpose(pt, ModeLabel::A);
  EXPECT_LT((both - rho.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fock, EntropyValues) {
  EXPECT_NEAR(von_neumann_entropy(Matrix(Matrix::Identity(8, 8) / 8.0)), 3.0, 1e-12);
  Matrix pure = Matrix::Zero(3, 3);
  pure(1, 1) = 1.0;
  EXPECT_NEAR(von_neumann_entropy(pure), 0.0, 1e-12);
  RealVector ev(2);
  ev << 0.25, 0.75;
  EXPECT_NEAR(entropy_from_eigenvalues(ev), -(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75)), 1e-14);
}

TEST(Fock, FidelityOfPureStatesIsOverlapSquared) {
  const int n = 6;
  Vector a = Vector::Random(n).normalized();
  Vector b = Vector::Random(n).normalized();
  const double overlap = std::norm(a.dot(b));
  EXPECT_NEAR(fidelity(Matrix(a * a.adjoint()), Matrix(b * b.adjoint())), overlap, 1e-9);
  const Matrix r = random_density(n, 9);
  EXPECT_NEAR(fidelity(r, r), 1.0, 1e-9);
  // commuting diagonal states: (sum sqrt(p q))^2
  Matrix p = Matrix::Zero(2, 2);
  Matrix q = Matrix::Zero(2, 2);
  p(0, 0) = 0.3;
  p(1, 1) = 0.7;
  q(0, 0) = 0.6;
  q(1, 1) = 0.4;
  const double bc = std::sqrt(0.18) + std::sqrt(0.28);
  EXPECT_NEAR(fidelity(p, q), bc * bc, 1e-12);
}

TEST(Fock, TraceNormAndPurity) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 0.7;
  m(1, 1) = -0.3;
  EXPECT_NEAR(trace_norm(m), 1.0, 1e-14);
  EXPECT_NEAR(purity(Matrix(Matrix::Identity(4, 4) / 4.0)), 0.25, 1e-14);
}

TEST(Quadrature, HermiteFunctionsAreOrthonormal) {
  const QuadratureGrid g(-12.0, 12.0, 0.01);
  const int dim = 12;
  RealMatrix gram = RealMatrix::Zero(dim, dim);
  for (int i = 0; i < g.size(); ++i) {
    const RealVector psi = hermite_functions(dim, g[i]);
    gram += psi * psi.transpose() * g.step();
  }
  EXPECT_LT((gram - RealMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Quadrature, CoherentMarginalIsShiftedVacuum) {
  // |<x_theta|beta>|^2 is Gaussian with mean sqrt(2) Re(beta e^{-i theta}) and variance 1/2
  const int dim = 30;
  const oracle::cplx beta(0.8, -0.6);
  const Vector coh = coherent_vector(dim, beta);
  for (double theta : {0.0, oracle::pi / 2, 0.9}) {
    const double mean = std::sqrt(2.0) * (beta * std::polar(1.0, -theta)).real();
    for (double x : {-1.0, 0.0, 0.4, 1.7}) {
      const double p = std::norm(homodyne_vector(dim, x, theta).dot(coh));
      const double ref = std::exp(-(x - mean) * (x - mean)) / std::sqrt(oracle::pi);
      EXPECT_NEAR(p, ref, 1e-10) << theta << " " << x;
    }
  }
}

TEST(Quadrature, GridValidation) {
  EXPECT_THROW(QuadratureGrid(0.0, 1.0, 0.0), Error);
  EXPECT_THROW(QuadratureGrid(1.0, 0.0, 0.1), Error);
  EXPECT_THROW(QuadratureGrid(0.0, 1.0, 0.3), Error);
  const QuadratureGrid g(-10.0, 10.0, 0.05);
  EXPECT_EQ(g.size(), 401);
  EXPECT_EQ(g.nearest(0.026), 201);
  EXPECT_EQ(g.nearest(100.0), 400);
  EXPECT_EQ(g.refined().size(), 801);
}
