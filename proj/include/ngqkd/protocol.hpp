#pragma once

// Sign-bit encoding with MAP decoding, and Monte Carlo bit error rates.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "ngqkd/sampling.hpp"
#include "ngqkd/security.hpp"

namespace ngqkd {

struct BerConfig {
  std::size_t n_samples = 1000000;
  std::uint64_t rng_seed = 1;
  /// Bob (the decoder) measures this mode; Alice's bit is the sign of the other.
  ModeLabel bob_mode = ModeLabel::A;
  double theta = 0.0;
  unsigned workers = 1;

  void validate() const {
    if (n_samples < 10000) throw Error(ErrorKind::config, "ber.n_samples must be >= 10000");
  }
};

struct BerResult {
  double ber = 0.0;
  double std_error = 0.0;
  std::size_t errors = 0;
  std::size_t samples = 0;
};

namespace detail {

/// Alice's bit-resolved weights for each of Bob's outcomes: (P(x>0, y), P(x<=0, y)).
struct DecisionTable {
  std::vector<double> pos;
  std::vector<double> neg;
};

inline DecisionTable decision_table(const JointTable& t, ModeLabel bob_mode) {
  const int n = t.grid.size();
  DecisionTable dt{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double p = bob_mode == ModeLabel::A ? t.density(y, x) : t.density(x, y);
      (t.grid[x] > 0.0 ? dt.pos[y] : dt.neg[y]) += p;
    }
  return dt;
}

}  // namespace detail

/// MAP estimate of Alice's sign bit from Bob's outcome y: 1 when
/// P(X > 0 | y) > P(X <= 0 | y), ties to 0. Outside the grid the nearest edge
/// column is used and a warning is printed.
class MapDecoder {
 public:
  explicit MapDecoder(const JointTable& t, ModeLabel bob_mode = ModeLabel::A)
      : grid_(t.grid), table_(detail::decision_table(t, bob_mode)) {}

  int operator()(double y) const {
    if (!grid_.contains(y)) {
      std::cerr << "warning: map_decode outcome " << y << " outside the grid; using the nearest edge\n";
    }
    const int j = grid_.nearest(y);
    return table_.pos[j] > table_.neg[j] ? 1 : 0;
  }

 private:
  QuadratureGrid grid_;
  detail::DecisionTable table_;
};

inline int map_decode(double y, const JointTable& t, ModeLabel bob_mode = ModeLabel::A) {
  return MapDecoder(t, bob_mode)(y);
}

/// Monte Carlo BER: (x, y) pairs drawn from the joint table on grid points,
/// Alice's bit = [x > 0], Bob's bit = MAP decision on y.
inline BerResult bit_error_rate(const JointTable& t, const BerConfig& cfg) {
  cfg.validate();
  const int n = t.grid.size();
  const auto dt = detail::decision_table(t, cfg.bob_mode);
  // Flattened cells indexed y * n + x with Alice's outcome x, Bob's y.
  std::vector<double> w(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      w[static_cast<std::size_t>(y) * n + x] = cfg.bob_mode == ModeLabel::A ? t.density(y, x) : t.density(x, y);
    }
  const DiscreteSampler sampler(w);
  const std::size_t chunks = (cfg.n_samples + kChunkSize - 1) / kChunkSize;
  std::vector<std::size_t> errs(chunks, 0);
  parallel_for(chunks, cfg.workers, [&](std::size_t c) {
    auto rng = make_stream(cfg.rng_seed, Stream::bit_error, c);
    const std::size_t hi = std::min(cfg.n_samples, (c + 1) * kChunkSize);
    std::size_t e = 0;
    for (std::size_t i = c * kChunkSize; i < hi; ++i) {
      const std::size_t cell = sampler.sample(uniform01(rng));
      const int y = static_cast<int>(cell / n);
      const int x = static_cast<int>(cell % n);
      const int alice = t.grid[x] > 0.0 ? 1 : 0;
      const int bob = dt.pos[y] > dt.neg[y] ? 1 : 0;
      e += alice != bob;
    }
    errs[c] = e;
  });
  BerResult r;
  r.samples = cfg.n_samples;
  for (auto e : errs) r.errors += e;
  r.ber = static_cast<double>(r.errors) / static_cast<double>(r.samples);
  r.std_error = std::sqrt(r.ber * (1.0 - r.ber) / static_cast<double>(r.samples));
  return r;
}

/// Default BER grid: cell midpoints, so no point sits on x = 0 where the
/// x <= 0 rule would hand a whole cell to bit 0.
inline QuadratureGrid ber_grid() { return QuadratureGrid(-10.025, 10.025, 0.05); }

inline BerResult bit_error_rate(const TwoModeState& state, const BerConfig& cfg,
                                const QuadratureGrid& grid = ber_grid()) {
  return bit_error_rate(joint_quadrature_distribution(state, cfg.theta, cfg.theta, grid), cfg);
}

/// Exact BER of the MAP decoder on the table, for checking the Monte Carlo.
inline double exact_bit_error_rate(const JointTable& t, ModeLabel bob_mode = ModeLabel::A) {
  const auto dt = detail::decision_table(t, bob_mode);
  double err = 0.0;
  double total = 0.0;
  for (std::size_t y = 0; y < dt.pos.size(); ++y) {
    err += dt.pos[y] > dt.neg[y] ? dt.neg[y] : dt.pos[y];
    total += dt.pos[y] + dt.neg[y];
  }
  return err / total;
}

}  // namespace ngqkd
