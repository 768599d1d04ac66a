#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ngqkd/types.hpp"

namespace ngqkd {

/// Hermite-Gaussian wavefunctions psi_n(x) = <x|n>, n = 0..dim-1, for the
/// vacuum-variance-1/2 convention. Uses the stable three-term recurrence.
inline RealVector hermite_functions(int dim, double x) {
  RealVector psi(dim);
  psi(0) = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (dim > 1) psi(1) = std::sqrt(2.0) * x * psi(0);
  for (int n = 2; n < dim; ++n) {
    psi(n) = std::sqrt(2.0 / n) * x * psi(n - 1) - std::sqrt((n - 1.0) / n) * psi(n - 2);
  }
  return psi;
}

/// Components <n|x_theta> of the eigenvector of x cos(theta) + p sin(theta)
/// with eigenvalue x: e^{i n theta} psi_n(x).
inline Vector homodyne_vector(int dim, double x, double theta) {
  const RealVector psi = hermite_functions(dim, x);
  Vector v(dim);
  for (int n = 0; n < dim; ++n) v(n) = std::polar(psi(n), n * theta);
  return v;
}

/// Coherent-state components <n|alpha> = e^{-|alpha|^2/2} alpha^n / sqrt(n!).
inline Vector coherent_vector(int dim, cplx alpha) {
  Vector v(dim);
  v(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

/// Uniform 1-D grid lo, lo+step, ..., hi used for every Riemann sum.
class QuadratureGrid {
 public:
  QuadratureGrid() : QuadratureGrid(-10.0, 10.0, 0.05) {}
  QuadratureGrid(double lo, double hi, double step) : lo_(lo), hi_(hi), step_(step) {
    if (!(step > 0.0)) throw Error(ErrorKind::invalid_argument, "grid step must be positive");
    if (!(hi > lo)) throw Error(ErrorKind::invalid_argument, "grid requires hi > lo");
    const double cells = (hi - lo) / step;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, rounded)) {
      throw Error(ErrorKind::invalid_argument, "grid span must be an integer number of steps");
    }
    size_ = static_cast<int>(rounded) + 1;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double step() const { return step_; }
  int size() const { return size_; }
  double operator[](int i) const { return lo_ + step_ * i; }

  std::vector<double> points() const {
    std::vector<double> p(size_);
    for (int i = 0; i < size_; ++i) p[i] = (*this)[i];
    return p;
  }

  /// Nearest grid index, clamped to the grid.
  int nearest(double x) const {
    const long i = std::lround((x - lo_) / step_);
    return static_cast<int>(std::clamp<long>(i, 0, size_ - 1));
  }

  bool contains(double x) const { return x >= lo_ - 0.5 * step_ && x <= hi_ + 0.5 * step_; }

  /// Same span, half the step.
  QuadratureGrid refined() const { return QuadratureGrid(lo_, hi_, 0.5 * step_); }

  friend bool operator==(const QuadratureGrid& a, const QuadratureGrid& b) {
    return a.lo_ == b.lo_ && a.hi_ == b.hi_ && a.step_ == b.step_;
  }

 private:
  double lo_;
  double hi_;
  double step_;
  int size_ = 0;
};

/// Matrix with one homodyne vector per column for every grid point.
inline Matrix homodyne_table(int dim, const QuadratureGrid& grid, double theta) {
  Matrix h(dim, grid.size());
  for (int i = 0; i < grid.size(); ++i) h.col(i) = homodyne_vector(dim, grid[i], theta);
  return h;
}

}  // namespace ngqkd
