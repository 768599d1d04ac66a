#pragma once

// Maximum-likelihood reconstruction of a two-mode state from heterodyne (A) /
// homodyne (B) records with the R rho R fixed-point iteration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "ngqkd/io.hpp"
#include "ngqkd/measurement.hpp"

namespace ngqkd {

struct MleConfig {
  int max_iterations = 3000;
  /// Stop when 1 - F(rho_i, rho_{i+1}) falls below this.
  double tolerance = 1e-9;
  /// Initial step t in G = (1-t) I + t R/N; t = 1 is the plain iteration.
  double dilution = 1.0;
  /// Records whose model probability density falls below this are excluded.
  double probability_floor = 1e-14;
  unsigned workers = 1;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorKind::config, "tomography.max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw Error(ErrorKind::config, "tomography.tolerance must be > 0");
    if (!(dilution > 0.0 && dilution <= 1.0)) throw Error(ErrorKind::config, "tomography.dilution must be in (0,1]");
    if (!(probability_floor >= 0.0)) throw Error(ErrorKind::config, "tomography.probability_floor must be >= 0");
  }
};

struct MleDiagnostics {
  int iterations = 0;
  bool converged = false;
  /// Set if the likelihood could not be kept non-decreasing even after dilution.
  bool likelihood_decreased = false;
  std::vector<double> log_likelihood;
  std::vector<double> step_infidelity;
  std::size_t excluded_records = 0;
  std::size_t records = 0;
  std::size_t amplitude_records = 0;
  std::size_t phase_records = 0;
  double final_dilution = 1.0;
  double wall_seconds = 0.0;
};

inline json diagnostics_to_json(const MleDiagnostics& d) {
  return json{{"iterations", d.iterations},
              {"converged", d.converged},
              {"likelihood_decreased", d.likelihood_decreased},
              {"log_likelihood", d.log_likelihood},
              {"step_infidelity", d.step_infidelity},
              {"excluded_records", d.excluded_records},
              {"records", d.records},
              {"records_per_quadrature", {{"theta_0", d.amplitude_records}, {"theta_pi_2", d.phase_records}}},
              {"final_dilution", d.final_dilution},
              {"wall_seconds", d.wall_seconds}};
}

struct MleResult {
  TwoModeState state;
  MleDiagnostics diagnostics;
};

namespace detail {

/// Records sorted canonically and grouped by identical homodyne outcome, so
/// the iteration is independent of input order.
struct GroupedRecords {
  int dim = 0;
  Matrix homodyne;              // dim x G, one column per (x, theta) group
  Matrix coherent;              // dim x N, columns in canonical order
  std::vector<std::size_t> begin;  // group g spans [begin[g], begin[g+1])
};

inline GroupedRecords group_records(std::vector<MeasurementRecord> records, int dim) {
  std::sort(records.begin(), records.end(), [](const MeasurementRecord& a, const MeasurementRecord& b) {
    return std::make_tuple(a.theta, a.x, a.alpha.real(), a.alpha.imag()) <
           std::make_tuple(b.theta, b.x, b.alpha.real(), b.alpha.imag());
  });
  GroupedRecords g;
  g.dim = dim;
  g.coherent.resize(dim, static_cast<Eigen::Index>(records.size()));
  std::vector<Vector> hom;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i == 0 || r.theta != records[i - 1].theta || r.x != records[i - 1].x) {
      g.begin.push_back(i);
      hom.push_back(homodyne_vector(dim, r.x, r.theta));
    }
    g.coherent.col(static_cast<Eigen::Index>(i)) = coherent_vector(dim, r.alpha);
  }
  g.begin.push_back(records.size());
  g.homodyne.resize(dim, static_cast<Eigen::Index>(hom.size()));
  for (std::size_t k = 0; k < hom.size(); ++k) g.homodyne.col(static_cast<Eigen::Index>(k)) = hom[k];
  return g;
}

/// Mode-A operators M_g = <b_g| rho |b_g>_B for every group, stacked as
/// d x (d G) blocks.
inline Matrix conditional_blocks(const Matrix& rho, const Matrix& hom, int d) {
  const Eigen::Index G = hom.cols();
  // T[(r,s,r'), g] = sum_s' rho[r s, r' s'] b_g[s']
  Matrix rhs(d * d * d, d);
  for (int r = 0; r < d; ++r)
    for (int s = 0; s < d; ++s)
      for (int rp = 0; rp < d; ++rp)
        for (int sp = 0; sp < d; ++sp) rhs((r * d + s) * d + rp, sp) = rho(d * r + s, d * rp + sp);
  const Matrix t = rhs * hom;
  Matrix out(d, d * G);
  for (Eigen::Index g = 0; g < G; ++g)
    for (int r = 0; r < d; ++r)
      for (int rp = 0; rp < d; ++rp) {
        cplx acc = 0.0;
        for (int s = 0; s < d; ++s) acc += std::conj(hom(s, g)) * t((r * d + s) * d + rp, g);
        out(r, d * g + rp) = acc;
      }
  return out;
}

struct Evaluation {
  double log_likelihood = 0.0;
  std::size_t excluded = 0;
  Matrix r_op;
};

/// Log-likelihood of rho and the operator R = sum_j pi_j / p_j.
inline Evaluation evaluate(const Matrix& rho, const GroupedRecords& g, double floor, unsigned workers) {
  const int d = g.dim;
  const Eigen::Index G = g.homodyne.cols();
  const Matrix blocks = conditional_blocks(rho, g.homodyne, d);
  Matrix accum(d * d, G);  // column g holds A_g flattened (r, r')
  std::vector<double> ll(static_cast<std::size_t>(G), 0.0);
  std::vector<std::size_t> excl(static_cast<std::size_t>(G), 0);
  parallel_for(static_cast<std::size_t>(G), workers, [&](std::size_t gi) {
    const auto gg = static_cast<Eigen::Index>(gi);
    const auto m = blocks.middleCols(d * gg, d);
    const auto lo = static_cast<Eigen::Index>(g.begin[gi]);
    const auto cnt = static_cast<Eigen::Index>(g.begin[gi + 1] - g.begin[gi]);
    const auto c = g.coherent.middleCols(lo, cnt);
    const Matrix mc = m * c;
    Vector w(cnt);
    double l = 0.0;
    for (Eigen::Index j = 0; j < cnt; ++j) {
      const double p = c.col(j).dot(mc.col(j)).real() / kPi;
      if (!(p > floor)) {
        ++excl[gi];
        w(j) = 0.0;
        continue;
      }
      l += std::log(p);
      w(j) = 1.0 / (kPi * p);
    }
    const Matrix a = c * w.asDiagonal() * c.adjoint();
    ll[gi] = l;
    for (int r = 0; r < d; ++r)
      for (int rp = 0; rp < d; ++rp) accum(r * d + rp, gg) = a(r, rp);
  });
  // R[(r s), (r' s')] = sum_g A_g[r, r'] b_g[s] conj(b_g[s'])
  Matrix bb(G, d * d);
  for (Eigen::Index gi = 0; gi < G; ++gi)
    for (int s = 0; s < d; ++s)
      for (int sp = 0; sp < d; ++sp) bb(gi, s * d + sp) = g.homodyne(s, gi) * std::conj(g.homodyne(sp, gi));
  const Matrix prod = accum * bb;
  Evaluation ev;
  ev.r_op.resize(d * d, d * d);
  for (int r = 0; r < d; ++r)
    for (int rp = 0; rp < d; ++rp)
      for (int s = 0; s < d; ++s)
        for (int sp = 0; sp < d; ++sp) ev.r_op(d * r + s, d * rp + sp) = prod(r * d + rp, s * d + sp);
  for (std::size_t i = 0; i < ll.size(); ++i) {
    ev.log_likelihood += ll[i];
    ev.excluded += excl[i];
  }
  return ev;
}

inline Matrix dilute_step(const Matrix& rho, const Matrix& r_op, double n, double t) {
  const Eigen::Index D = rho.rows();
  const Matrix gmat = (1.0 - t) * Matrix::Identity(D, D) + (t / n) * r_op;
  Matrix next = gmat * rho * gmat.adjoint();
  next = 0.5 * (next + next.adjoint());
  return next / next.trace().real();
}

}  // namespace detail

/// The operator R(rho) = sum_j pi_j / Tr(pi_j rho), exposed for testing.
inline Matrix r_operator(const TwoModeState& rho, const std::vector<MeasurementRecord>& records) {
  const auto g = detail::group_records(records, rho.dim());
  return detail::evaluate(rho.matrix(), g, 0.0, 1).r_op;
}

/// Log-likelihood sum_j ln Tr(pi_j rho) with pi_j a probability density.
inline double log_likelihood(const TwoModeState& rho, const std::vector<MeasurementRecord>& records) {
  const auto g = detail::group_records(records, rho.dim());
  return detail::evaluate(rho.matrix(), g, 0.0, 1).log_likelihood;
}

/// Reconstructs the state from records, starting at the maximally mixed state.
/// A step that lowers the likelihood is retried with half the dilution.
inline MleResult reconstruct(const std::vector<MeasurementRecord>& records, Cutoff cutoff,
                             const MleConfig& cfg = {}) {
  cfg.validate();
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "reconstruct: no records");
  const auto t0 = std::chrono::steady_clock::now();
  const int d = cutoff.dim();
  const auto groups = detail::group_records(records, d);

  MleDiagnostics diag;
  diag.records = records.size();
  for (const auto& r : records) {
    if (!is_measured_angle(r.theta)) throw Error(ErrorKind::invalid_argument, "record theta must be 0 or pi/2");
    (r.theta == kThetaAmplitude ? diag.amplitude_records : diag.phase_records)++;
  }

  const Eigen::Index D = cutoff.two_mode_dim();
  Matrix rho = Matrix::Identity(D, D) / static_cast<double>(D);
  auto ev = detail::evaluate(rho, groups, cfg.probability_floor, cfg.workers);
  diag.log_likelihood.push_back(ev.log_likelihood);
  double t = cfg.dilution;
  constexpr double kMinDilution = 1.0 / 1024.0;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double n_used = static_cast<double>(records.size() - ev.excluded);
    Matrix next = detail::dilute_step(rho, ev.r_op, n_used, t);
    auto ev_next = detail::evaluate(next, groups, cfg.probability_floor, cfg.workers);
    const double slack = 1e-9 * std::abs(ev.log_likelihood);
    while (ev_next.log_likelihood < ev.log_likelihood - slack && t > kMinDilution) {
      t *= 0.5;
      next = detail::dilute_step(rho, ev.r_op, n_used, t);
      ev_next = detail::evaluate(next, groups, cfg.probability_floor, cfg.workers);
    }
    if (ev_next.log_likelihood < ev.log_likelihood - slack) {
      diag.likelihood_decreased = true;
      break;
    }
    const double step = 1.0 - fidelity(rho, next);
    rho = std::move(next);
    ev = std::move(ev_next);
    diag.iterations = it + 1;
    diag.log_likelihood.push_back(ev.log_likelihood);
    diag.step_infidelity.push_back(step);
    if (step < cfg.tolerance) {
      diag.converged = true;
      break;
    }
  }
  diag.excluded_records = ev.excluded;
  diag.final_dilution = t;
  diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return MleResult{TwoModeState::from_operator(rho, cutoff), std::move(diag)};
}

}  // namespace ngqkd
