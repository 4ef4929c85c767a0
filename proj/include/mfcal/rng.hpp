#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace mfcal {

/// Seed-splitting rule used everywhere a run seed fans out into per-member,
/// per-stage or per-purpose streams: fold each key into the seed with a
/// splitmix64 finalizer. Order of keys matters.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Purpose tags for derive_seed so unrelated streams never collide.
namespace stream {
inline constexpr std::uint64_t init = 0x696e6974;      // weight initialization
inline constexpr std::uint64_t split = 0x73706c74;     // train/test split
inline constexpr std::uint64_t train = 0x7472616e;     // epoch shuffling
inline constexpr std::uint64_t sample = 0x73616d70;    // row subsampling
inline constexpr std::uint64_t design = 0x64736e67;    // design-space sampling
inline constexpr std::uint64_t noise = 0x6e6f6973;     // observation noise
inline constexpr std::uint64_t coeffs = 0x636f6566;    // generator coefficients
}  // namespace stream

/// Portable random stream. std::mt19937_64's output sequence is fixed by the
/// standard, but the std:: distributions are not, so the distributions used
/// by the library are defined here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mfcal
