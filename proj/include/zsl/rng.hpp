#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace zsl {

/// Counter-based 64-bit generator (splitmix64 finalizer over key+counter).
/// Output is a pure function of (key, counter), so replicate streams can be
/// derived by key mixing and consumed from any thread without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }

  /// Uniform in (0, 1); never returns an exact 0 (safe under log()).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  /// Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) { return next_u64() % n; }

  /// Independent substream; replicate seeds are base XOR index by convention.
  CounterRng derive(std::uint64_t stream) const {
    return CounterRng(mix(key_ ^ mix(stream + 0x51ed2701a9b5e9a7ULL)));
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seeded Fisher-Yates shuffle of index vector [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  CounterRng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace zsl
