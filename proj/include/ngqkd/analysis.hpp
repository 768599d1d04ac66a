#pragma once

// State characterization: entanglement, quadrature statistics, phase-space
// and photon-number pictures, covariance matrix.

#include <cmath>
#include <vector>

#include "ngqkd/fock.hpp"
#include "ngqkd/io.hpp"
#include "ngqkd/quadrature.hpp"
#include "ngqkd/sampling.hpp"

namespace ngqkd {

/// log2 of the trace norm of the partial transpose. Not floored at zero.
inline double log_negativity(const TwoModeState& state) {
  return std::log2(trace_norm(partial_transpose(state, ModeLabel::B)));
}

/// Reduced single-mode operator embedded into `extra` additional empty levels,
/// so low-order moments of a and a^dag are exact for the truncated state.
inline Matrix embed(const Matrix& rho, int extra) {
  const Eigen::Index d = rho.rows();
  Matrix out = Matrix::Zero(d + extra, d + extra);
  out.topLeftCorner(d, d) = rho;
  return out;
}

/// Rotated quadrature x cos(theta) + p sin(theta) on a single mode of dimension dim.
inline Matrix quadrature_operator(int dim, double theta) {
  const Matrix a = annihilation(Cutoff(dim - 1));
  const cplx ph = std::polar(1.0, theta);
  return (std::conj(ph) * a + ph * a.adjoint()) / std::sqrt(2.0);
}

/// Exact mean and variance of x_theta on one mode.
inline std::pair<double, double> quadrature_mean_variance(const TwoModeState& state, ModeLabel mode, double theta) {
  const Matrix rho = embed(partial_trace(state, mode), 2);
  const Matrix x = quadrature_operator(static_cast<int>(rho.rows()), theta);
  const double m1 = (rho * x).trace().real();
  const double m2 = (rho * x * x).trace().real();
  return {m1, m2 - m1 * m1};
}

/// Homodyne marginal density of one mode at angle theta on the grid.
inline std::vector<double> quadrature_marginal(const TwoModeState& state, ModeLabel mode, double theta,
                                               const QuadratureGrid& grid) {
  const Matrix rho = partial_trace(state, mode);
  const Matrix h = homodyne_table(state.dim(), grid, theta);
  const Matrix rh = rho * h;
  std::vector<double> p(grid.size());
  for (int i = 0; i < grid.size(); ++i) p[i] = std::max(0.0, h.col(i).dot(rh.col(i)).real());
  return p;
}

/// Fourth standardized moment of the homodyne marginal by Riemann sums.
/// The grid must reach six standard deviations on both sides of the mean.
inline double kurtosis(const TwoModeState& state, ModeLabel mode, double theta, const QuadratureGrid& grid) {
  const auto [mu, var] = quadrature_mean_variance(state, mode, theta);
  const double sd = std::sqrt(std::max(var, 0.0));
  if (grid.lo() > mu - 6.0 * sd || grid.hi() < mu + 6.0 * sd) {
    throw Error(ErrorKind::coverage, "kurtosis grid does not cover 6 sigma of the marginal");
  }
  const auto p = quadrature_marginal(state, mode, theta, grid);
  double m0 = 0.0;
  double m1 = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    m0 += p[i];
    m1 += p[i] * grid[i];
  }
  m1 /= m0;
  double c2 = 0.0;
  double c4 = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double dx = grid[i] - m1;
    c2 += p[i] * dx * dx;
    c4 += p[i] * dx * dx * dx * dx;
  }
  c2 /= m0;
  c4 /= m0;
  return c4 / (c2 * c2);
}

/// Kurtosis on a grid spanning eight standard deviations around the mean.
inline double kurtosis(const TwoModeState& state, ModeLabel mode, double theta) {
  const auto [mu, var] = quadrature_mean_variance(state, mode, theta);
  const double half = std::ceil(std::abs(mu) + 8.0 * std::sqrt(std::max(var, 0.0)));
  return kurtosis(state, mode, theta, QuadratureGrid(-half, half, 0.02));
}

/// Wigner function of one mode on a square grid in (x, p) quadrature units,
/// normalized so that it integrates to one over dx dp.
struct WignerGrid {
  QuadratureGrid x_axis{-4.0, 4.0, 0.08};
  QuadratureGrid p_axis{-4.0, 4.0, 0.08};
  RealMatrix values;  // values(i, j) = W(x_i, p_j)

  double riemann_sum() const { return values.sum() * x_axis.step() * p_axis.step(); }
};

/// W(x, p) = (1/pi) Tr(rho D(2 alpha) P), alpha = (x + ip)/sqrt(2), with P the
/// parity operator. Uses exact displacement matrix elements.
inline double wigner_point(const Matrix& rho, double x, double p) {
  const int d = static_cast<int>(rho.rows());
  const cplx beta = std::sqrt(2.0) * cplx(x, p);
  const Matrix D = displacement(Cutoff(d - 1), beta);
  cplx acc = 0.0;
  for (int m = 0; m < d; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    for (int n = 0; n < d; ++n) acc += rho(m, n) * sign * D(n, m);
  }
  return acc.real() / kPi;
}

inline WignerGrid wigner(const TwoModeState& state, ModeLabel mode, WignerGrid grid = {}, unsigned workers = 1) {
  const Matrix rho = partial_trace(state, mode);
  grid.values.resize(grid.x_axis.size(), grid.p_axis.size());
  parallel_for(static_cast<std::size_t>(grid.x_axis.size()), workers, [&](std::size_t i) {
    const int ii = static_cast<int>(i);
    for (int j = 0; j < grid.p_axis.size(); ++j) grid.values(ii, j) = wigner_point(rho, grid.x_axis[ii], grid.p_axis[j]);
  });
  return grid;
}

/// P(m, n) = <m, n| rho |m, n>.
inline RealMatrix photon_number_joint(const TwoModeState& state) {
  const int d = state.dim();
  RealMatrix p(d, d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) p(m, n) = state.matrix()(d * m + n, d * m + n).real();
  return p;
}

/// Quadrature covariance over (x_A, p_A, x_B, p_B), vacuum variance 1/2.
struct CovarianceMatrix {
  Eigen::Matrix4d sigma = Eigen::Matrix4d::Identity() * kVacuumVariance;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();

  static Eigen::Matrix4d omega() {
    Eigen::Matrix4d o = Eigen::Matrix4d::Zero();
    o(0, 1) = 1.0;
    o(1, 0) = -1.0;
    o(2, 3) = 1.0;
    o(3, 2) = -1.0;
    return o;
  }

  /// Smallest eigenvalue of sigma + (i/2) Omega; physical when >= -1e-8.
  double uncertainty_margin() const {
    const Eigen::Matrix4cd m = sigma.cast<cplx>() + cplx(0.0, 0.5) * omega().cast<cplx>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  bool is_physical() const {
    return (sigma - sigma.transpose()).cwiseAbs().maxCoeff() < 1e-10 && uncertainty_margin() >= -1e-8;
  }

  /// Symplectic eigenvalues (each counted once), in vacuum-1/2 units.
  Eigen::Vector2d symplectic_eigenvalues() const {
    const Eigen::Matrix4cd m = cplx(0.0, 1.0) * (omega() * sigma).cast<cplx>();
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(m, false);
    std::vector<double> ev;
    for (int i = 0; i < 4; ++i) ev.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(ev.begin(), ev.end());
    return Eigen::Vector2d(ev[0], ev[2]);
  }
};

/// First and second moments computed algebraically on a space with two extra
/// levels per mode, so they are exact for the truncated state.
inline CovarianceMatrix covariance(const TwoModeState& state) {
  const int d = state.dim();
  const int e = d + 2;
  Matrix rho = Matrix::Zero(e * e, e * e);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int rp = 0; rp < d; ++rp)
        for (int sp = 0; sp < d; ++sp) rho(e * r + s, e * rp + sp) = state.matrix()(d * r + s, d * rp + sp);
  const Matrix x = quadrature_operator(e, 0.0);
  const Matrix p = quadrature_operator(e, kPi / 2.0);
  const Matrix id = Matrix::Identity(e, e);
  const Matrix ops[4] = {tensor(x, id), tensor(p, id), tensor(id, x), tensor(id, p)};
  CovarianceMatrix cm;
  for (int i = 0; i < 4; ++i) cm.mean(i) = (rho * ops[i]).trace().real();
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      const Matrix sym = ops[i] * ops[j] + ops[j] * ops[i];
      const double v = 0.5 * (rho * sym).trace().real() - cm.mean(i) * cm.mean(j);
      cm.sigma(i, j) = v;
      cm.sigma(j, i) = v;
    }
  return cm;
}

/// Indices of strict local maxima of a 1-D profile that exceed
/// rel_threshold times the profile maximum.
inline std::vector<int> local_maxima(const std::vector<double>& f, double rel_threshold = 1e-2) {
  std::vector<int> peaks;
  if (f.size() < 3) return peaks;
  const double top = *std::max_element(f.begin(), f.end());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    if (f[i] > f[i - 1] && f[i] >= f[i + 1] && f[i] > rel_threshold * top) peaks.push_back(static_cast<int>(i));
  }
  return peaks;
}

inline std::string wigner_csv(const WignerGrid& w) {
  return matrix_csv(w.x_axis.points(), w.p_axis.points(), w.values, "x\\p");
}

inline std::string photon_number_csv(const RealMatrix& p) {
  std::vector<double> axis(static_cast<std::size_t>(p.rows()));
  for (std::size_t i = 0; i < axis.size(); ++i) axis[i] = static_cast<double>(i);
  return matrix_csv(axis, axis, p, "nA\\nB");
}

}  // namespace ngqkd
