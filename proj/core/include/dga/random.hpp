#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace dga {

// Mixes a base seed with a stream index (splitmix64 finalizer) so independent
// consumers (per identity, per layer, per epoch) get decorrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded generator whose draws depend only on the seed, never on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dga
