#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ngqkd {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Quadrature normalization shared by every module: x = (a + a^dag)/sqrt(2),
/// so the vacuum has Var(x) = 1/2.
inline constexpr double kVacuumVariance = 0.5;

/// Eigenvalues at or below this value are treated as exact zeros in entropies.
inline constexpr double kEigenvalueFloor = 1e-12;
/// Minimum eigenvalue accepted for a density matrix before clipping.
inline constexpr double kPsdTolerance = -1e-8;
inline constexpr double kHermitianTolerance = 1e-10;
inline constexpr double kTraceTolerance = 1e-10;

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  invalid_state,
  truncation,
  zero_probability,
  coverage,
  config,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class ModeLabel { A, B };

inline ModeLabel other(ModeLabel m) { return m == ModeLabel::A ? ModeLabel::B : ModeLabel::A; }

inline const char* to_string(ModeLabel m) { return m == ModeLabel::A ? "A" : "B"; }

inline ModeLabel mode_from_string(const std::string& s) {
  if (s == "A" || s == "a") return ModeLabel::A;
  if (s == "B" || s == "b") return ModeLabel::B;
  throw Error(ErrorKind::invalid_argument, "unknown mode label '" + s + "'");
}

/// Maximum retained photon number per mode. The single-mode dimension is n_max + 1.
class Cutoff {
 public:
  constexpr Cutoff() = default;
  explicit Cutoff(int n_max) : n_max_(n_max) {
    if (n_max < 1) throw Error(ErrorKind::invalid_argument, "cutoff n_max must be >= 1");
  }

  constexpr int n_max() const { return n_max_; }
  constexpr int dim() const { return n_max_ + 1; }
  constexpr int two_mode_dim() const { return dim() * dim(); }

  friend constexpr bool operator==(Cutoff, Cutoff) = default;

 private:
  int n_max_ = 10;
};

}  // namespace ngqkd
