#pragma once

// Truncated Fock-space linear algebra. Two-mode operators use the composite
// index m = d*r + s for the basis vector |r>_A |s>_B, d = n_max + 1.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ngqkd/types.hpp"

namespace ngqkd {

inline bool is_hermitian(const Matrix& m, double tol = kHermitianTolerance) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline RealVector hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Square root of a Hermitian PSD matrix; eigenvalues below zero are clipped.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Density matrix on the truncated two-mode Fock space. Immutable once built.
class TwoModeState {
 public:
  /// Symmetrizes, normalizes to unit trace, and clips negative eigenvalues
  /// below the PSD tolerance (setting clipped()).
  static TwoModeState from_operator(Matrix m, Cutoff cutoff) {
    check_shape(m, cutoff);
    Matrix h = 0.5 * (m + m.adjoint());
    const double tr = h.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
      throw Error(ErrorKind::zero_probability, "operator has non-positive trace; cannot normalize");
    }
    h /= tr;
    bool clipped = false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.eigenvalues().minCoeff() < kPsdTolerance) {
      RealVector ev = es.eigenvalues().cwiseMax(0.0);
      ev /= ev.sum();
      h = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
      h = 0.5 * (h + h.adjoint());
      clipped = true;
    }
    return TwoModeState(std::move(h), cutoff, clipped);
  }

  /// Rejects anything that is not already a valid density matrix.
  static TwoModeState validated(Matrix m, Cutoff cutoff) {
    check_shape(m, cutoff);
    if (!is_hermitian(m)) throw Error(ErrorKind::invalid_state, "density matrix is not Hermitian");
    const double tr = m.trace().real();
    if (std::abs(tr - 1.0) > kTraceTolerance) {
      throw Error(ErrorKind::invalid_state, "density matrix trace " + std::to_string(tr) + " != 1");
    }
    Matrix h = 0.5 * (m + m.adjoint());
    if (hermitian_eigenvalues(h).minCoeff() < kPsdTolerance) {
      throw Error(ErrorKind::invalid_state, "density matrix is not positive semidefinite");
    }
    return TwoModeState(std::move(h), cutoff, false);
  }

  const Matrix& matrix() const { return rho_; }
  Cutoff cutoff() const { return cutoff_; }
  int dim() const { return cutoff_.dim(); }
  bool clipped() const { return clipped_; }

  /// Element <r,s| rho |rp,sp>.
  cplx operator()(int r, int s, int rp, int sp) const {
    const int d = dim();
    return rho_(d * r + s, d * rp + sp);
  }

 private:
  TwoModeState(Matrix rho, Cutoff cutoff, bool clipped)
      : rho_(std::move(rho)), cutoff_(cutoff), clipped_(clipped) {}

  static void check_shape(const Matrix& m, Cutoff cutoff) {
    const int n = cutoff.two_mode_dim();
    if (m.rows() != n || m.cols() != n) {
      throw Error(ErrorKind::dimension_mismatch,
                  "two-mode matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    }
  }

  Matrix rho_;
  Cutoff cutoff_;
  bool clipped_ = false;
};

// ---------------------------------------------------------------------------
// Single-mode operators

inline Matrix identity(Cutoff c) { return Matrix::Identity(c.dim(), c.dim()); }

inline Matrix annihilation(Cutoff c) {
  const int d = c.dim();
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Matrix creation(Cutoff c) { return annihilation(c).adjoint(); }

inline Matrix number_operator(Cutoff c) {
  const int d = c.dim();
  Matrix n = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

/// Parity (-1)^n.
inline Matrix parity(Cutoff c) {
  const int d = c.dim();
  Matrix p = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return p;
}

/// Displacement operator D(beta) restricted to the retained subspace. Matrix
/// elements are the exact (untruncated) ones from associated Laguerre
/// polynomials, so no truncation error leaks in from exponentiating a.
inline Matrix displacement(Cutoff c, cplx beta) {
  const int d = c.dim();
  const double b2 = std::norm(beta);
  const double gauss = std::exp(-0.5 * b2);
  Matrix D(d, d);
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      const int lo = std::min(m, n);
      const int diff = std::abs(m - n);
      // sqrt(lo! / hi!)
      double ratio = 1.0;
      for (int k = lo + 1; k <= lo + diff; ++k) ratio /= static_cast<double>(k);
      const double lag = std::assoc_laguerre(static_cast<unsigned>(lo), static_cast<unsigned>(diff), b2);
      const cplx factor = (m >= n) ? std::pow(beta, diff) : std::pow(-std::conj(beta), diff);
      D(m, n) = std::sqrt(ratio) * factor * gauss * lag;
    }
  }
  return D;
}

// ---------------------------------------------------------------------------
// Two-mode structure

/// Kronecker product op_A (x) op_B in the composite index convention.
inline Matrix tensor(const Matrix& op_a, const Matrix& op_b) {
  if (op_a.rows() != op_b.rows() || op_a.cols() != op_b.cols() || op_a.rows() != op_a.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "tensor: operators must share one cutoff");
  }
  const Eigen::Index d = op_a.rows();
  Matrix out(d * d, d * d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index rp = 0; rp < d; ++rp) {
      out.block(r * d, rp * d, d, d) = op_a(r, rp) * op_b;
    }
  }
  return out;
}

/// Product vector a (x) b in the composite index convention.
inline Vector product_vector(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::dimension_mismatch, "product_vector: size mismatch");
  const Eigen::Index d = a.size();
  Vector out(d * d);
  for (Eigen::Index r = 0; r < d; ++r) out.segment(r * d, d) = a(r) * b;
  return out;
}

/// Lifts a single-mode operator to act on the chosen mode.
inline Matrix on_mode(const Matrix& op, ModeLabel mode) {
  const Matrix id = Matrix::Identity(op.rows(), op.cols());
  return mode == ModeLabel::A ? tensor(op, id) : tensor(id, op);
}

inline int single_mode_dim(const Matrix& two_mode) {
  const auto n = two_mode.rows();
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (static_cast<Eigen::Index>(d) * d != n || two_mode.cols() != n) {
    throw Error(ErrorKind::dimension_mismatch, "matrix is not a two-mode operator");
  }
  return d;
}

inline Matrix partial_trace(const Matrix& rho, ModeLabel keep) {
  const int d = single_mode_dim(rho);
  Matrix out = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      cplx acc = 0.0;
      for (int t = 0; t < d; ++t) {
        acc += keep == ModeLabel::A ? rho(d * i + t, d * j + t) : rho(d * t + i, d * t + j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

inline Matrix partial_trace(const TwoModeState& state, ModeLabel keep) {
  return partial_trace(state.matrix(), keep);
}

/// Transposes the indices of one mode only.
inline Matrix partial_transpose(const Matrix& rho, ModeLabel mode) {
  const int d = single_mode_dim(rho);
  Matrix out(rho.rows(), rho.cols());
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int rp = 0; rp < d; ++rp)
        for (int sp = 0; sp < d; ++sp) {
          const cplx v = rho(d * r + s, d * rp + sp);
          if (mode == ModeLabel::A) {
            out(d * rp + s, d * r + sp) = v;
          } else {
            out(d * r + sp, d * rp + s) = v;
          }
        }
  return out;
}

inline Matrix partial_transpose(const TwoModeState& state, ModeLabel mode) {
  return partial_transpose(state.matrix(), mode);
}

// ---------------------------------------------------------------------------
// Spectral functions

/// Entropy in bits: -sum lambda log2 lambda over eigenvalues above the floor.
inline double entropy_from_eigenvalues(const RealVector& ev) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double l = ev(i);
    if (l > kEigenvalueFloor) s -= l * std::log2(l);
  }
  return s;
}

inline double von_neumann_entropy(const Matrix& rho) {
  if (!is_hermitian(rho, 1e-8)) throw Error(ErrorKind::invalid_state, "entropy: matrix is not Hermitian");
  const RealVector ev = hermitian_eigenvalues(0.5 * (rho + rho.adjoint()));
  if (ev.minCoeff() < kPsdTolerance) {
    throw Error(ErrorKind::invalid_state, "entropy: matrix has eigenvalue " + std::to_string(ev.minCoeff()));
  }
  return entropy_from_eigenvalues(ev);
}

inline double von_neumann_entropy(const TwoModeState& s) { return von_neumann_entropy(s.matrix()); }

/// Sum of singular values.
inline double trace_norm(const Matrix& m) {
  if (is_hermitian(m, 1e-12)) {
    return hermitian_eigenvalues(0.5 * (m + m.adjoint())).cwiseAbs().sum();
  }
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

inline double purity(const Matrix& rho) { return (rho * rho).trace().real(); }
inline double purity(const TwoModeState& s) { return purity(s.matrix()); }

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, evaluated as the
/// squared nuclear norm of sqrt(rho) sqrt(sigma), which stays accurate for
/// nearly rank-deficient arguments.
inline double fidelity(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "fidelity: dimension mismatch");
  }
  const Matrix prod = psd_sqrt(0.5 * (rho + rho.adjoint())) * psd_sqrt(0.5 * (sigma + sigma.adjoint()));
  Eigen::BDCSVD<Matrix> svd(prod);
  const double f = svd.singularValues().sum();
  return std::clamp(f * f, 0.0, 1.0);
}

inline double fidelity(const TwoModeState& a, const TwoModeState& b) {
  return fidelity(a.matrix(), b.matrix());
}

}  // namespace ngqkd
