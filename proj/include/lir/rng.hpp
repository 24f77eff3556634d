#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lir {

/// Splittable counter-based generator. Every component of the artifact draws
/// from one 64-bit seed; independent streams are derived with split(), so
/// parallel suite cells see the same numbers regardless of scheduling.
///
/// Output is the SplitMix64 finalizer applied to key + counter * golden ratio.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(finalize(seed ^ kSalt)) {}

  /// Derives an independent child stream. Depends only on (key, stream),
  /// never on how many numbers the parent has produced.
  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = finalize(key_ ^ finalize(stream * kGamma + kSalt));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return finalize(key_ + (++counter_) * kGamma); }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1); never returns an exact endpoint.
  double next_open_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  int next_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::next_int: n must be positive");
    int v = static_cast<int>(next_double() * n);
    return v < n ? v : n - 1;
  }

  double next_normal() {
    double u1 = next_open_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double next_exp(double rate) {
    if (rate <= 0) throw std::invalid_argument("Rng::next_exp: rate must be positive");
    return -std::log(next_open_double()) / rate;
  }

  /// Uniform draw from the probability simplex (Dirichlet(1,...,1)):
  /// normalized i.i.d. exponentials.
  std::vector<double> next_simplex(int k) {
    std::vector<double> v(k);
    double total = 0;
    for (int i = 0; i < k; ++i) {
      v[i] = -std::log(next_open_double());
      total += v[i];
    }
    for (double& x : v) x /= total;
    return v;
  }

  /// Partial Fisher-Yates: k distinct values from 0..n-1, order random.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) throw std::invalid_argument("Rng: sample size exceeds population");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + next_int(n - i)]);
    pool.resize(k);
    return pool;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kSalt = 0x5851F42D4C957F2Dull;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lir
