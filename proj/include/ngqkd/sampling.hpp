#pragma once

// Deterministic random streams and grid-based inverse-CDF sampling.

#include <algorithm>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "ngqkd/types.hpp"

namespace ngqkd {

/// Stream identifiers; each consumer gets an independent sequence per seed.
enum class Stream : std::uint32_t {
  sampling = 0,
  postselection = 1,
  bit_error = 2,
};

inline constexpr std::size_t kChunkSize = 1u << 16;

/// Generator for (seed, stream, chunk). Chunk boundaries are fixed, so the
/// output never depends on how many workers process the chunks.
inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(chunk),
                    static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Runs fn(i) for i in [0, n) across up to `workers` threads, contiguous blocks.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Inverse-CDF sampler over a finite set of nonnegative weights.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(const std::vector<double>& weights) : cdf_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += std::max(0.0, weights[i]);
      cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw Error(ErrorKind::zero_probability, "sampler weights sum to zero");
  }

  double total() const { return cdf_.empty() ? 0.0 : cdf_.back(); }
  std::size_t size() const { return cdf_.size(); }

  std::size_t sample(double u) const {
    const double target = u * total();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.end()) --it;
    return static_cast<std::size_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace ngqkd
