#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ngqkd/fock.hpp"

namespace ngqkd {

/// Squeezing parameter of sqrt(1-lambda^2) sum_n lambda^n |n>|n>.
struct TmsvParams {
  double lambda = 0.5;

  void validate() const {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
      throw Error(ErrorKind::invalid_argument, "TMSV lambda must lie in [0, 1)");
    }
  }

  /// Probability kept by truncating the Schmidt sum at n_max.
  double retained_probability(Cutoff c) const { return 1.0 - std::pow(lambda, 2.0 * c.dim()); }

  double mean_photons() const { return lambda * lambda / (1.0 - lambda * lambda); }
};

inline constexpr double kMinRetainedProbability = 0.999;

struct ChannelParams {
  double transmissivity = 1.0;
  double thermal_mean_photons = 0.0;

  static ChannelParams from_loss_db(double db, double thermal = 0.0) {
    return ChannelParams{std::pow(10.0, -db / 10.0), thermal};
  }
  /// Fractional power loss, e.g. 0.75 for 75 %.
  static ChannelParams from_loss_fraction(double loss, double thermal = 0.0) {
    return ChannelParams{1.0 - loss, thermal};
  }

  double loss_db() const { return -10.0 * std::log10(transmissivity); }

  void validate() const {
    if (!(transmissivity > 0.0 && transmissivity <= 1.0)) {
      throw Error(ErrorKind::invalid_argument, "transmissivity must lie in (0, 1]");
    }
    if (!(thermal_mean_photons >= 0.0)) {
      throw Error(ErrorKind::invalid_argument, "thermal mean photon number must be >= 0");
    }
  }
};

/// Surrogate for source imperfections: symmetric loss on both modes followed
/// by Gaussian phase diffusion. Defaults are calibrated against the reported
/// purity of the unconditioned source (about 0.71 at lambda = 0.6).
struct ImpurityParams {
  double transmissivity = 0.85;
  double phase_std = 0.35;  // radians

  static ImpurityParams none() { return ImpurityParams{1.0, 0.0}; }

  void validate() const {
    if (!(transmissivity > 0.0 && transmissivity <= 1.0)) {
      throw Error(ErrorKind::invalid_argument, "impurity transmissivity must lie in (0, 1]");
    }
    if (!(phase_std >= 0.0)) throw Error(ErrorKind::invalid_argument, "phase_std must be >= 0");
  }
};

struct LadderResult {
  TwoModeState state;
  /// Unnormalized trace of the conditioned operator, i.e. the relative
  /// success weight, evaluated without truncation error.
  double success_weight;
  /// Fraction of that weight pushed above n_max and discarded.
  double truncation_loss;
};

/// Default tolerance on LadderResult::truncation_loss before add_photons fails.
inline constexpr double kMaxTruncationLoss = 2e-2;

namespace detail {

/// (op on mode) * m, for a single-mode op and a two-mode m, in O(d^5).
inline Matrix apply_left(const Matrix& op, ModeLabel mode, const Matrix& m) {
  const int d = static_cast<int>(op.rows());
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (int r = 0; r < d; ++r)
      for (int s = 0; s < d; ++s) {
        cplx acc = 0.0;
        for (int u = 0; u < d; ++u) {
          const cplx w = mode == ModeLabel::A ? op(r, u) : op(s, u);
          if (w == 0.0) continue;
          acc += w * (mode == ModeLabel::A ? m(d * u + s, c) : m(d * r + u, c));
        }
        out(d * r + s, c) = acc;
      }
  }
  return out;
}

/// (op on mode) rho (op on mode)^dag for Hermitian rho.
inline Matrix sandwich(const Matrix& op, ModeLabel mode, const Matrix& rho) {
  const Matrix left = apply_left(op, mode, rho);
  return apply_left(op, mode, left.adjoint()).adjoint();
}

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

/// Expectation of a function of the photon number of one mode.
template <class F>
inline double number_expectation(const TwoModeState& state, ModeLabel mode, F&& f) {
  const Matrix reduced = partial_trace(state, mode);
  double acc = 0.0;
  for (int n = 0; n < reduced.rows(); ++n) acc += f(n) * reduced(n, n).real();
  return acc;
}

inline Matrix matrix_power(const Matrix& m, int k) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) out = out * m;
  return out;
}

}  // namespace detail

inline TwoModeState make_tmsv(const TmsvParams& params, Cutoff cutoff) {
  params.validate();
  if (params.retained_probability(cutoff) < kMinRetainedProbability) {
    throw Error(ErrorKind::truncation, "cutoff too small for TMSV lambda=" + std::to_string(params.lambda));
  }
  const int d = cutoff.dim();
  Vector psi = Vector::Zero(cutoff.two_mode_dim());
  double lp = 1.0;
  for (int n = 0; n < d; ++n) {
    psi(d * n + n) = std::sqrt(1.0 - params.lambda * params.lambda) * lp;
    lp *= params.lambda;
  }
  psi.normalize();
  return TwoModeState::from_operator(psi * psi.adjoint(), cutoff);
}

/// Pure product state |m>|n>.
inline TwoModeState fock_product(Cutoff cutoff, int m, int n) {
  const int d = cutoff.dim();
  Matrix rho = Matrix::Zero(cutoff.two_mode_dim(), cutoff.two_mode_dim());
  rho(d * m + n, d * m + n) = 1.0;
  return TwoModeState::from_operator(rho, cutoff);
}

inline TwoModeState product_state(const Matrix& rho_a, const Matrix& rho_b, Cutoff cutoff) {
  return TwoModeState::from_operator(tensor(rho_a, rho_b), cutoff);
}

/// Single-mode thermal state with the given mean photon number, truncated and
/// renormalized.
inline Matrix thermal_state(Cutoff c, double mean) {
  Matrix rho = Matrix::Zero(c.dim(), c.dim());
  const double q = mean / (mean + 1.0);
  double acc = 0.0;
  for (int n = 0; n < c.dim(); ++n) {
    rho(n, n) = std::pow(q, n) / (mean + 1.0);
    acc += rho(n, n).real();
  }
  return rho / acc;
}

/// Normalized (a^dag)^k rho a^k on the chosen mode.
inline LadderResult add_photons(const TwoModeState& state, ModeLabel mode, int k,
                                double max_truncation_loss = kMaxTruncationLoss) {
  if (k < 0) throw Error(ErrorKind::invalid_argument, "photon number k must be >= 0");
  if (k == 0) return {state, state.matrix().trace().real(), 0.0};
  const Cutoff c = state.cutoff();
  // <a^k (a^dag)^k> = <(n+1)...(n+k)>, exact for any truncated state.
  const double exact = detail::number_expectation(state, mode, [k](int n) {
    double w = 1.0;
    for (int j = 1; j <= k; ++j) w *= (n + j);
    return w;
  });
  const Matrix op = detail::matrix_power(creation(c), k);
  const Matrix out = detail::sandwich(op, mode, state.matrix());
  const double kept = out.trace().real();
  const double loss = exact > 0.0 ? std::max(0.0, 1.0 - kept / exact) : 0.0;
  if (loss > max_truncation_loss) {
    throw Error(ErrorKind::truncation, "photon addition k=" + std::to_string(k) + " loses " +
                                           std::to_string(loss) + " of its weight above n_max");
  }
  return {TwoModeState::from_operator(out, c), exact, loss};
}

/// Normalized a^k rho (a^dag)^k on the chosen mode.
inline LadderResult subtract_photons(const TwoModeState& state, ModeLabel mode, int k) {
  if (k < 0) throw Error(ErrorKind::invalid_argument, "photon number k must be >= 0");
  if (k == 0) return {state, state.matrix().trace().real(), 0.0};
  const Cutoff c = state.cutoff();
  const double exact = detail::number_expectation(state, mode, [k](int n) {
    double w = 1.0;
    for (int j = 0; j < k; ++j) w *= (n - j);
    return w;
  });
  if (exact <= 1e-14) {
    throw Error(ErrorKind::zero_probability, "photon subtraction has zero success weight");
  }
  const Matrix op = detail::matrix_power(annihilation(c), k);
  return {TwoModeState::from_operator(detail::sandwich(op, mode, state.matrix()), c), exact, 0.0};
}

/// Pure-loss Kraus operators K_l = sum_n sqrt(C(n,l) T^(n-l) (1-T)^l) |n-l><n|.
inline std::vector<Matrix> loss_kraus(Cutoff c, double transmissivity) {
  const int d = c.dim();
  std::vector<Matrix> ks;
  ks.reserve(d);
  for (int l = 0; l < d; ++l) {
    Matrix k = Matrix::Zero(d, d);
    for (int n = l; n < d; ++n) {
      k(n - l, n) = std::sqrt(detail::binomial(n, l) * std::pow(transmissivity, n - l) *
                              std::pow(1.0 - transmissivity, l));
    }
    ks.push_back(std::move(k));
  }
  return ks;
}

/// Beamsplitter amplitude <p,q| U |n,m> with U: a -> sqrt(T) a + sqrt(1-T) b.
inline double beamsplitter_amplitude(double transmissivity, int p, int q, int n, int m) {
  if (p + q != n + m) return 0.0;
  const double t = std::sqrt(transmissivity);
  const double r = std::sqrt(1.0 - transmissivity);
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const int j = q - i;
    if (j < 0 || j > m) continue;
    acc += detail::binomial(n, i) * std::pow(t, n - i) * std::pow(-r, i) * detail::binomial(m, j) *
           std::pow(r, m - j) * std::pow(t, j);
  }
  return acc * std::sqrt(detail::factorial(p) * detail::factorial(q) /
                         (detail::factorial(n) * detail::factorial(m)));
}

/// Kraus operators of a beamsplitter coupling to a thermal ancilla.
inline std::vector<Matrix> thermal_kraus(Cutoff c, double transmissivity, double mean) {
  const int d = c.dim();
  const double q = mean / (mean + 1.0);
  if (1.0 - std::pow(q, d) < kMinRetainedProbability) {
    throw Error(ErrorKind::truncation, "cutoff too small for thermal ancilla mean " + std::to_string(mean));
  }
  std::vector<double> pm(d);
  double norm = 0.0;
  for (int m = 0; m < d; ++m) norm += (pm[m] = std::pow(q, m) / (mean + 1.0));
  std::vector<Matrix> ks;
  for (int m = 0; m < d; ++m) {
    const double w = std::sqrt(pm[m] / norm);
    for (int l = 0; l <= 2 * c.n_max(); ++l) {
      Matrix k = Matrix::Zero(d, d);
      bool any = false;
      for (int n = 0; n < d; ++n) {
        const int out = n + m - l;
        if (out < 0 || out >= d) continue;
        k(out, n) = w * beamsplitter_amplitude(transmissivity, out, l, n, m);
        any = any || k(out, n) != 0.0;
      }
      if (any) ks.push_back(std::move(k));
    }
  }
  return ks;
}

inline TwoModeState apply_kraus(const TwoModeState& state, ModeLabel mode, const std::vector<Matrix>& ks) {
  Matrix out = Matrix::Zero(state.matrix().rows(), state.matrix().cols());
  for (const Matrix& k : ks) out += detail::sandwich(k, mode, state.matrix());
  return TwoModeState::from_operator(out, state.cutoff());
}

inline TwoModeState loss_channel(const TwoModeState& state, ModeLabel mode, const ChannelParams& params) {
  params.validate();
  if (params.transmissivity == 1.0 && params.thermal_mean_photons == 0.0) return state;
  if (params.thermal_mean_photons == 0.0) {
    return apply_kraus(state, mode, loss_kraus(state.cutoff(), params.transmissivity));
  }
  return apply_kraus(state, mode,
                     thermal_kraus(state.cutoff(), params.transmissivity, params.thermal_mean_photons));
}

/// Gaussian phase diffusion on one mode: rho_{rs,r's'} *= exp(-std^2 (n-n')^2 / 2),
/// the closed-form average of e^{i phi (n - n')} over phi ~ N(0, std^2).
inline TwoModeState dephase(const TwoModeState& state, ModeLabel mode, double phase_std) {
  if (phase_std == 0.0) return state;
  const int d = state.dim();
  Matrix rho = state.matrix();
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int rp = 0; rp < d; ++rp)
        for (int sp = 0; sp < d; ++sp) {
          const int dn = mode == ModeLabel::A ? r - rp : s - sp;
          rho(d * r + s, d * rp + sp) *= std::exp(-0.5 * phase_std * phase_std * dn * dn);
        }
  return TwoModeState::from_operator(rho, state.cutoff());
}

inline TwoModeState noisy_tmsv(const TmsvParams& params, const ImpurityParams& impurity, Cutoff cutoff) {
  impurity.validate();
  TwoModeState s = make_tmsv(params, cutoff);
  const ChannelParams loss{impurity.transmissivity, 0.0};
  s = loss_channel(s, ModeLabel::A, loss);
  s = loss_channel(s, ModeLabel::B, loss);
  return dephase(s, ModeLabel::A, impurity.phase_std);
}

}  // namespace ngqkd
