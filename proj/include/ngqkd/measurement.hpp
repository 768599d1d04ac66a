#pragma once

// Heterodyne/homodyne POVMs, synthetic measurement records, and the
// heterodyne postselection filter that realizes photon addition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ngqkd/fock.hpp"
#include "ngqkd/quadrature.hpp"
#include "ngqkd/sampling.hpp"

namespace ngqkd {

inline constexpr double kThetaAmplitude = 0.0;
inline constexpr double kThetaPhase = kPi / 2.0;

/// Heterodyne outcome alpha on mode A plus homodyne outcome x at angle theta on mode B.
struct MeasurementRecord {
  cplx alpha;
  double x = 0.0;
  double theta = 0.0;

  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

inline bool is_measured_angle(double theta) {
  return std::abs(theta - kThetaAmplitude) < 1e-12 || std::abs(theta - kThetaPhase) < 1e-12;
}

struct FilterParams {
  int k = 0;
  double alpha_c_sq = 6.0;

  void validate() const {
    if (k < 0) throw Error(ErrorKind::invalid_argument, "filter k must be >= 0");
    if (!(alpha_c_sq > 0.0)) throw Error(ErrorKind::invalid_argument, "filter cutoff |alpha_c|^2 must be > 0");
  }
};

/// Grids the synthetic sampler discretizes onto. Alpha covers the square
/// [-half_width, half_width]^2 in both Re and Im.
struct SamplingGrids {
  QuadratureGrid alpha_axis{-6.0, 6.0, 0.05};
  QuadratureGrid x_axis{-8.0, 8.0, 0.01};
};

/// Outcome density Tr(pi rho) for pi = |alpha><alpha|/pi (x) |x_theta><x_theta|,
/// normalized with respect to d^2alpha dx.
inline double joint_density(const TwoModeState& state, cplx alpha, double x, double theta) {
  const int d = state.dim();
  const Vector v = product_vector(coherent_vector(d, alpha), homodyne_vector(d, x, theta));
  return std::max(0.0, (v.adjoint() * state.matrix() * v)(0, 0).real()) / kPi;
}

/// Husimi density Q(alpha) = <alpha|rho|alpha>/pi of a single-mode operator.
inline double husimi(const Matrix& rho, cplx alpha) {
  const Vector c = coherent_vector(static_cast<int>(rho.rows()), alpha);
  return std::max(0.0, (c.adjoint() * rho * c)(0, 0).real()) / kPi;
}

/// Conditional operator <alpha|_A rho |alpha>_A acting on mode B.
inline Matrix condition_on_coherent(const TwoModeState& state, const Vector& coh) {
  const int d = state.dim();
  const Matrix& rho = state.matrix();
  Matrix out = Matrix::Zero(d, d);
  for (int r = 0; r < d; ++r) {
    const cplx cr = std::conj(coh(r));
    for (int rp = 0; rp < d; ++rp) {
      const cplx w = cr * coh(rp);
      out += w * rho.block(d * r, d * rp, d, d);
    }
  }
  return out;
}

namespace detail {

/// Running Riemann sums of psi_s(x) psi_t(x) dx over the grid, s <= t, used to
/// evaluate the homodyne CDF of any single-mode operator in O(d^2).
class HomodyneCdfTable {
 public:
  HomodyneCdfTable(int dim, const QuadratureGrid& grid) : dim_(dim), grid_(grid) {
    pairs_ = dim * (dim + 1) / 2;
    table_.assign(static_cast<std::size_t>(grid.size()) * pairs_, 0.0);
    std::vector<double> acc(pairs_, 0.0);
    for (int j = 0; j < grid.size(); ++j) {
      const RealVector psi = hermite_functions(dim, grid[j]);
      int p = 0;
      for (int s = 0; s < dim; ++s)
        for (int t = s; t < dim; ++t, ++p) {
          acc[p] += psi(s) * psi(t) * grid.step();
          table_[static_cast<std::size_t>(j) * pairs_ + p] = acc[p];
        }
    }
  }

  /// Coefficients such that CDF(j) = sum_p coef[p] * table(j, p) for the
  /// operator sigma measured at angle theta.
  std::vector<double> coefficients(const Matrix& sigma, double theta) const {
    std::vector<double> coef(pairs_);
    int p = 0;
    for (int s = 0; s < dim_; ++s)
      for (int t = s; t < dim_; ++t, ++p) {
        const cplx rotated = sigma(s, t) * std::polar(1.0, (t - s) * theta);
        coef[p] = (s == t) ? rotated.real() : 2.0 * rotated.real();
      }
    return coef;
  }

  double cdf(const std::vector<double>& coef, int j) const {
    const double* row = &table_[static_cast<std::size_t>(j) * pairs_];
    double acc = 0.0;
    for (int p = 0; p < pairs_; ++p) acc += coef[p] * row[p];
    return acc;
  }

  /// Smallest grid index whose CDF reaches u * total.
  int invert(const std::vector<double>& coef, double u) const {
    const int n = grid_.size();
    const double target = u * cdf(coef, n - 1);
    int lo = 0;
    int hi = n - 1;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (cdf(coef, mid) > target) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

  const QuadratureGrid& grid() const { return grid_; }

 private:
  int dim_;
  QuadratureGrid grid_;
  int pairs_;
  std::vector<double> table_;
};

}  // namespace detail

/// Draws records from the joint heterodyne(A)/homodyne(B) distribution: alpha
/// from the mode-A Husimi function on the alpha grid, theta uniformly from
/// {0, pi/2}, then x from the conditional homodyne density of mode B.
/// Deterministic in (state, n, seed, grids); independent of `workers`.
inline std::vector<MeasurementRecord> sample_records(const TwoModeState& state, std::size_t n,
                                                     std::uint64_t seed, const SamplingGrids& grids = {},
                                                     unsigned workers = 1) {
  const int d = state.dim();
  const QuadratureGrid& ax = grids.alpha_axis;
  const int na = ax.size();

  const Matrix rho_a = partial_trace(state, ModeLabel::A);
  std::vector<double> mass(static_cast<std::size_t>(na) * na);
  parallel_for(static_cast<std::size_t>(na), workers, [&](std::size_t i) {
    for (int j = 0; j < na; ++j) {
      mass[i * na + j] = husimi(rho_a, cplx(ax[static_cast<int>(i)], ax[j])) * ax.step() * ax.step();
    }
  });
  const DiscreteSampler alpha_sampler(mass);
  if (alpha_sampler.total() < 0.999) {
    throw Error(ErrorKind::coverage, "alpha grid holds only " + std::to_string(alpha_sampler.total()) +
                                         " of the Husimi probability");
  }

  // First pass: alpha cell, angle, and the uniform for x, per record.
  struct Draw {
    std::uint32_t cell;
    bool phase;
    double ux;
  };
  std::vector<Draw> draws(n);
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  parallel_for(chunks, workers, [&](std::size_t c) {
    auto rng = make_stream(seed, Stream::sampling, c);
    const std::size_t hi = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t i = c * kChunkSize; i < hi; ++i) {
      const auto cell = static_cast<std::uint32_t>(alpha_sampler.sample(uniform01(rng)));
      const bool phase = uniform01(rng) >= 0.5;
      draws[i] = Draw{cell, phase, uniform01(rng)};
    }
  });

  // Conditional mode-B operators for every distinct alpha cell that was hit.
  std::vector<std::uint32_t> cells;
  cells.reserve(n);
  for (const Draw& dr : draws) cells.push_back(dr.cell);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  const detail::HomodyneCdfTable table(d, grids.x_axis);
  std::vector<std::vector<double>> coef0(cells.size());
  std::vector<std::vector<double>> coef1(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    const int ia = static_cast<int>(cells[i] / na);
    const int ib = static_cast<int>(cells[i] % na);
    const Matrix sigma = condition_on_coherent(state, coherent_vector(d, cplx(ax[ia], ax[ib])));
    coef0[i] = table.coefficients(sigma, kThetaAmplitude);
    coef1[i] = table.coefficients(sigma, kThetaPhase);
  });

  std::vector<MeasurementRecord> out(n);
  parallel_for(n == 0 ? 0 : chunks, workers, [&](std::size_t c) {
    const std::size_t hi = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t i = c * kChunkSize; i < hi; ++i) {
      const Draw& dr = draws[i];
      const auto pos = static_cast<std::size_t>(std::lower_bound(cells.begin(), cells.end(), dr.cell) - cells.begin());
      const auto& coef = dr.phase ? coef1[pos] : coef0[pos];
      const int xi = table.invert(coef, dr.ux);
      const int ia = static_cast<int>(dr.cell / na);
      const int ib = static_cast<int>(dr.cell % na);
      out[i] = MeasurementRecord{cplx(ax[ia], ax[ib]), grids.x_axis[xi], dr.phase ? kThetaPhase : kThetaAmplitude};
    }
  });
  return out;
}

/// Acceptance probability |alpha|^{2k}/|alpha_c|^{2k}, capped at one.
inline double acceptance_probability(cplx alpha, const FilterParams& filter) {
  if (filter.k == 0) return 1.0;
  const double r2 = std::norm(alpha);
  if (r2 > filter.alpha_c_sq) return 1.0;
  return std::pow(r2 / filter.alpha_c_sq, filter.k);
}

struct PostselectResult {
  std::vector<MeasurementRecord> kept;
  double empirical_success = 0.0;
  /// Set when no record survived; not an exception.
  bool empty = false;
};

/// Keeps each record independently with acceptance_probability. Uses its own
/// random stream, so it is reproducible independently of how records were made.
inline PostselectResult postselect(const std::vector<MeasurementRecord>& records, const FilterParams& filter,
                                   std::uint64_t seed) {
  filter.validate();
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "postselect: no input records");
  PostselectResult res;
  const std::size_t n = records.size();
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  for (std::size_t c = 0; c < chunks; ++c) {
    auto rng = make_stream(seed, Stream::postselection, c);
    const std::size_t hi = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t i = c * kChunkSize; i < hi; ++i) {
      const double u = uniform01(rng);
      if (u < acceptance_probability(records[i].alpha, filter)) res.kept.push_back(records[i]);
    }
  }
  res.empirical_success = static_cast<double>(res.kept.size()) / static_cast<double>(n);
  res.empty = res.kept.empty();
  return res;
}

struct SuccessPrediction {
  double probability = 0.0;
  /// Gaussian mass beyond the cutoff radius, exp(-|alpha_c|^2 / (2 sigma^2)).
  double tail_mass = 0.0;
  /// False when tail_mass > 1e-3 and the closed form no longer applies.
  bool assumption_holds = true;
};

/// P_k = 2^k k! sigma^{2k} / |alpha_c|^{2k} for a circular Gaussian heterodyne
/// marginal with per-axis variance sigma_sq.
inline SuccessPrediction predict_success(double sigma_sq, const FilterParams& filter) {
  filter.validate();
  if (!(sigma_sq > 0.0)) throw Error(ErrorKind::invalid_argument, "sigma^2 must be positive");
  SuccessPrediction p;
  double v = 1.0;
  for (int j = 1; j <= filter.k; ++j) v *= 2.0 * j * sigma_sq / filter.alpha_c_sq;
  p.probability = v;
  p.tail_mass = std::exp(-filter.alpha_c_sq / (2.0 * sigma_sq));
  p.assumption_holds = filter.k == 0 || p.tail_mass <= 1e-3;
  return p;
}

/// Per-axis variance of the heterodyne (Husimi) marginal of one mode:
/// (E|alpha|^2 - |E alpha|^2) / 2 with E|alpha|^2 = <n> + 1.
inline double husimi_sigma_sq(const TwoModeState& state, ModeLabel mode) {
  const Matrix rho = partial_trace(state, mode);
  const Cutoff c(static_cast<int>(rho.rows()) - 1);
  const double n = (rho * number_operator(c)).trace().real();
  const cplx mean = (rho * annihilation(c)).trace();
  return 0.5 * (n + 1.0 - std::norm(mean));
}

// ---------------------------------------------------------------------------
// CSV: alpha_re,alpha_im,x,theta at 17 significant digits.

inline void write_records_csv(std::ostream& os, const std::vector<MeasurementRecord>& records) {
  os << "alpha_re,alpha_im,x,theta\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.alpha.real(), r.alpha.imag(), r.x, r.theta);
    os << buf;
  }
}

inline std::vector<MeasurementRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("alpha_re,alpha_im,x,theta", 0) != 0) {
    throw Error(ErrorKind::io, "record CSV must start with header alpha_re,alpha_im,x,theta");
  }
  std::vector<MeasurementRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    double v[4];
    const char* p = line.c_str();
    for (int i = 0; i < 4; ++i) {
      char* end = nullptr;
      v[i] = std::strtod(p, &end);
      if (end == p) throw Error(ErrorKind::io, "bad number on record CSV line " + std::to_string(lineno));
      p = end;
      if (i < 3) {
        if (*p != ',') throw Error(ErrorKind::io, "expected ',' on record CSV line " + std::to_string(lineno));
        ++p;
      }
    }
    if (!is_measured_angle(v[3])) {
      throw Error(ErrorKind::io, "record CSV line " + std::to_string(lineno) + ": theta must be 0 or pi/2");
    }
    out.push_back(MeasurementRecord{cplx(v[0], v[1]), v[2], v[3]});
  }
  return out;
}

inline void save_records_csv(const std::string& path, const std::vector<MeasurementRecord>& records) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  write_records_csv(os, records);
}

inline std::vector<MeasurementRecord> load_records_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  return read_records_csv(is);
}

}  // namespace ngqkd
