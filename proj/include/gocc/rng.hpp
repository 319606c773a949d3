#ifndef GOCC_RNG_HPP
#define GOCC_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace gocc {

// Seeded draw sequence with hand-mapped outputs. The standard distribution
// adaptors are implementation-defined, which would break byte-identical
// artifacts across toolchains, so only the raw mt19937_64 stream is used.
class RngSequence {
 public:
  explicit RngSequence(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant here.
  std::uint64_t bounded(std::uint64_t n) { return next() % n; }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Standard normal via Box-Muller; draws two uniforms per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    while (u <= 0.0) u = u01();
    double v = u01();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// First-k Fisher-Yates: after the call, indices[0..k) is a uniform random
// k-subset of the initial contents, in random order.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t k, RngSequence& rng) {
  const std::size_t n = items.size();
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace gocc

#endif
