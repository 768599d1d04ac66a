#pragma once

// Keyrates: numerical mutual information, the non-Gaussian Holevo bound on
// Eve's information, the Gaussian comparator, and the PLOB bound.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ngqkd/analysis.hpp"
#include "ngqkd/state_factory.hpp"

namespace ngqkd {

/// Joint homodyne density P(x_A, x_B) on a square grid.
struct JointTable {
  QuadratureGrid grid;
  RealMatrix density;  // density(i, j) at x_A = grid[i], x_B = grid[j]

  double mass() const { return density.sum() * grid.step() * grid.step(); }
};

/// Conditional operator <v|_mode rho |v>_mode on the other mode.
inline Matrix condition_on(const TwoModeState& state, ModeLabel mode, const Vector& v) {
  const int d = state.dim();
  const Matrix& rho = state.matrix();
  Matrix out = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int ip = 0; ip < d; ++ip) {
      const cplx w = std::conj(v(i)) * v(ip);
      if (w == 0.0) continue;
      for (int j = 0; j < d; ++j)
        for (int jp = 0; jp < d; ++jp) {
          out(j, jp) += mode == ModeLabel::A ? w * rho(d * i + j, d * ip + jp) : w * rho(d * j + i, d * jp + ip);
        }
    }
  return out;
}

inline constexpr double kCoverageTolerance = 1e-3;

inline JointTable joint_quadrature_distribution(const TwoModeState& state, double theta_a, double theta_b,
                                                const QuadratureGrid& grid = {}) {
  const int d = state.dim();
  const Matrix ha = homodyne_table(d, grid, theta_a);
  const Matrix hb = homodyne_table(d, grid, theta_b);
  JointTable t{grid, RealMatrix(grid.size(), grid.size())};
  for (int j = 0; j < grid.size(); ++j) {
    const Matrix sigma = condition_on(state, ModeLabel::B, hb.col(j));  // operator on A
    const Matrix sh = sigma * ha;
    for (int i = 0; i < grid.size(); ++i) t.density(i, j) = std::max(0.0, ha.col(i).dot(sh.col(i)).real());
  }
  const double m = t.mass();
  if (std::abs(1.0 - m) > kCoverageTolerance) {
    throw Error(ErrorKind::coverage, "joint quadrature grid holds mass " + std::to_string(m));
  }
  return t;
}

/// Riemann-sum mutual information in bits, clamped at zero.
inline double mutual_information(const JointTable& t) {
  const double h = t.grid.step();
  const double mass = t.mass();
  const RealVector pa = t.density.rowwise().sum() * h / mass;
  const RealVector pb = t.density.colwise().sum().transpose() * h / mass;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.density.rows(); ++i)
    for (Eigen::Index j = 0; j < t.density.cols(); ++j) {
      const double p = t.density(i, j) / mass;
      if (p <= 0.0 || pa(i) <= 0.0 || pb(j) <= 0.0) continue;
      acc += p * std::log2(p / (pa(i) * pb(j)));
    }
  return std::max(0.0, acc * h * h);
}

struct HolevoDetails {
  double chi = 0.0;
  double joint_entropy = 0.0;
  double conditional_entropy = 0.0;
  /// Probability mass of Bob's grid points skipped for vanishing conditionals.
  double skipped_mass = 0.0;
  /// 1 - (Riemann mass of Bob's marginal over the grid).
  double lost_mass = 0.0;
};

/// chi_E = S(rho_AB) - sum_y dy P_B(y) S(sigma_y), where sigma_y is the
/// normalized conditional state of the non-Bob mode given Bob's homodyne
/// outcome y. Purifying Eve and swapping the trace gives S(E|y) = S(sigma_y).
inline HolevoDetails holevo_details(const TwoModeState& state, ModeLabel bob_mode, double theta_b,
                                    const QuadratureGrid& grid = {}) {
  const int d = state.dim();
  const Matrix hb = homodyne_table(d, grid, theta_b);
  HolevoDetails out;
  out.joint_entropy = von_neumann_entropy(state);
  double mass = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    Matrix sigma = condition_on(state, bob_mode, hb.col(j));
    sigma = 0.5 * (sigma + sigma.adjoint());
    const double pb = sigma.trace().real();
    mass += std::max(pb, 0.0) * grid.step();
    if (!(pb > 1e-14)) {
      out.skipped_mass += std::max(pb, 0.0) * grid.step();
      continue;
    }
    RealVector ev = hermitian_eigenvalues(sigma / pb);
    if (ev.minCoeff() < kPsdTolerance) {
      ev = ev.cwiseMax(0.0);
      ev /= ev.sum();
    }
    out.conditional_entropy += grid.step() * pb * entropy_from_eigenvalues(ev);
  }
  out.lost_mass = 1.0 - mass;
  if (std::abs(out.lost_mass) > kCoverageTolerance) {
    throw Error(ErrorKind::coverage, "Bob's grid holds marginal mass " + std::to_string(mass));
  }
  out.chi = out.joint_entropy - out.conditional_entropy;
  if (out.chi < 0.0 && out.chi > -1e-9) out.chi = 0.0;  // rounding at pure states
  return out;
}

inline double holevo_bound(const TwoModeState& state, ModeLabel bob_mode, double theta_b,
                           const QuadratureGrid& grid = {}) {
  return holevo_details(state, bob_mode, theta_b, grid).chi;
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue nu in
/// shot-noise units (vacuum nu = 1).
inline double g_entropy(double nu) {
  if (nu <= 1.0 + 1e-12) return 0.0;
  const double a = 0.5 * (nu + 1.0);
  const double b = 0.5 * (nu - 1.0);
  return a * std::log2(a) - b * std::log2(b);
}

enum class Reconciliation { reverse, forward };

struct GaussianKeyrate {
  double I_AB = 0.0;
  double chi_E = 0.0;
  double keyrate = 0.0;
  /// Forward reconciliation is exposed for comparison only.
  bool experimental = false;
};

/// Homodyne/homodyne keyrate of the Gaussian state with covariance `cov`,
/// both parties measuring x. Reverse reconciliation references Bob's outcome.
inline GaussianKeyrate gaussian_keyrate(const CovarianceMatrix& cov, ModeLabel bob_mode = ModeLabel::A,
                                        Reconciliation direction = Reconciliation::reverse) {
  if (!cov.is_physical()) throw Error(ErrorKind::invalid_state, "covariance matrix violates the uncertainty bound");
  const Eigen::Matrix4d v = cov.sigma / kVacuumVariance;  // shot-noise units
  const ModeLabel ref = direction == Reconciliation::reverse ? bob_mode : other(bob_mode);
  const int r0 = ref == ModeLabel::A ? 0 : 2;  // measured mode (reference)
  const int o0 = ref == ModeLabel::A ? 2 : 0;  // the other party
  GaussianKeyrate out;
  out.experimental = direction == Reconciliation::forward;
  const double rho = v(0, 2) / std::sqrt(v(0, 0) * v(2, 2));
  out.I_AB = -0.5 * std::log2(std::max(1e-300, 1.0 - rho * rho));
  const Eigen::Vector2d nus = CovarianceMatrix{cov.sigma, cov.mean}.symplectic_eigenvalues() / kVacuumVariance;
  const Eigen::Matrix2d vo = v.block<2, 2>(o0, o0);
  const Eigen::Vector2d c(v(o0, r0), v(o0 + 1, r0));
  const Eigen::Matrix2d cond = vo - c * c.transpose() / v(r0, r0);
  const double nu_cond = std::sqrt(std::max(cond.determinant(), 0.0));
  out.chi_E = g_entropy(nus(0)) + g_entropy(nus(1)) - g_entropy(nu_cond);
  out.keyrate = out.I_AB - out.chi_E;
  return out;
}

/// Repeaterless bound -log2(1 - T); infinite at T = 1.
inline double plob_bound(double transmissivity) {
  if (!(transmissivity > 0.0 && transmissivity <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "PLOB bound needs 0 < T <= 1");
  }
  if (transmissivity == 1.0) return std::numeric_limits<double>::infinity();
  return -std::log2(1.0 - transmissivity);
}

struct SecurityOptions {
  ModeLabel bob_mode = ModeLabel::A;
  double theta_a = 0.0;
  double theta_b = 0.0;
  QuadratureGrid grid{};
};

struct SecurityReport {
  double I_AB = 0.0;
  double chi_E = 0.0;
  double keyrate = 0.0;
  double gaussian_I_AB = 0.0;
  double gaussian_chi_E = 0.0;
  double gaussian_keyrate = 0.0;
  double success_probability = 1.0;
  double plob_bound = std::numeric_limits<double>::infinity();
};

inline SecurityReport security_report(const TwoModeState& state, const SecurityOptions& opt = {},
                                      double success_probability = 1.0, double transmissivity = 1.0) {
  SecurityReport r;
  const double theta_bob = opt.bob_mode == ModeLabel::A ? opt.theta_a : opt.theta_b;
  r.I_AB = mutual_information(joint_quadrature_distribution(state, opt.theta_a, opt.theta_b, opt.grid));
  r.chi_E = holevo_bound(state, opt.bob_mode, theta_bob, opt.grid);
  r.keyrate = r.I_AB - r.chi_E;
  const auto g = gaussian_keyrate(covariance(state), opt.bob_mode);
  r.gaussian_I_AB = g.I_AB;
  r.gaussian_chi_E = g.chi_E;
  r.gaussian_keyrate = g.keyrate;
  r.success_probability = success_probability;
  r.plob_bound = plob_bound(transmissivity);
  return r;
}

/// Where photon addition sits relative to the lossy channel on mode A.
enum class Placement {
  /// Channel on A, then addition on A (heterodyne postselection at the receiver).
  after_loss,
  /// Addition on A, then the channel on A.
  before_loss,
  /// Addition on B, channel on A.
  untouched_mode,
};

inline const char* to_string(Placement p) {
  switch (p) {
    case Placement::after_loss: return "after_loss";
    case Placement::before_loss: return "before_loss";
    case Placement::untouched_mode: return "untouched_mode";
  }
  return "?";
}

inline Placement placement_from_string(const std::string& s) {
  if (s == "after_loss") return Placement::after_loss;
  if (s == "before_loss") return Placement::before_loss;
  if (s == "untouched_mode") return Placement::untouched_mode;
  throw Error(ErrorKind::config, "unknown placement '" + s + "'");
}

struct PreparedState {
  TwoModeState state;
  /// <a^k a^dag^k> of the mode the photons were added to.
  double success_weight = 1.0;
  double truncation_loss = 0.0;
};

/// Pure TMSV (or an impure source) through the channel with k photons added.
inline PreparedState prepare_state(const TwoModeState& source, int k, double transmissivity, Placement placement) {
  const ChannelParams ch{transmissivity, 0.0};
  switch (placement) {
    case Placement::after_loss: {
      auto lad = add_photons(loss_channel(source, ModeLabel::A, ch), ModeLabel::A, k);
      return {lad.state, lad.success_weight, lad.truncation_loss};
    }
    case Placement::before_loss: {
      auto lad = add_photons(source, ModeLabel::A, k);
      return {loss_channel(lad.state, ModeLabel::A, ch), lad.success_weight, lad.truncation_loss};
    }
    case Placement::untouched_mode: {
      auto lad = add_photons(source, ModeLabel::B, k);
      return {loss_channel(lad.state, ModeLabel::A, ch), lad.success_weight, lad.truncation_loss};
    }
  }
  throw Error(ErrorKind::invalid_argument, "bad placement");
}

/// Success probability of the heterodyne filter realizing k-photon addition,
/// weight / |alpha_c|^{2k}, capped at one.
inline double ideal_success_probability(double success_weight, int k, double alpha_c_sq) {
  if (k == 0) return 1.0;
  return std::min(1.0, success_weight / std::pow(alpha_c_sq, k));
}

struct SweepCell {
  int k = 0;
  double transmissivity = 1.0;
  std::optional<SecurityReport> report;
  std::string error;
};

struct RateLossOptions {
  Cutoff cutoff{};
  Placement placement = Placement::after_loss;
  double alpha_c_sq = 12.0;
  SecurityOptions security{};
  unsigned workers = 1;
};

/// Security reports for every (k, T) pair of an ideal TMSV source. Cells that
/// fail record their error and the sweep continues.
inline std::vector<SweepCell> rate_loss_sweep(double lambda, const std::vector<int>& k_values,
                                              const std::vector<double>& t_values, const RateLossOptions& opt = {}) {
  const TwoModeState source = make_tmsv(TmsvParams{lambda}, opt.cutoff);
  std::vector<SweepCell> cells;
  for (int k : k_values)
    for (double t : t_values) cells.push_back(SweepCell{k, t, std::nullopt, ""});
  parallel_for(cells.size(), opt.workers, [&](std::size_t i) {
    SweepCell& c = cells[i];
    try {
      const auto prep = prepare_state(source, c.k, c.transmissivity, opt.placement);
      c.report = security_report(prep.state, opt.security,
                                 ideal_success_probability(prep.success_weight, c.k, opt.alpha_c_sq),
                                 c.transmissivity);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  });
  return cells;
}

}  // namespace ngqkd
