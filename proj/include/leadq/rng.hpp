#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace leadq {

// Deterministic random source. Wraps std::mt19937_64 (whose raw output
// sequence is pinned by the standard) and implements all distributions
// in-house, because the std::*_distribution adapters are
// implementation-defined and would break bit-reproducibility across
// standard libraries.
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n), unbiased via rejection.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller (second value cached).
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape);

  // Symmetric Dirichlet(alpha) over k components.
  std::vector<double> dirichlet(double alpha, int k);

  // Fisher-Yates with our own bounded draw.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First n_take entries of a shuffled [0, n) index list (partial
  // Fisher-Yates); a uniform random subset in random order.
  std::vector<int> sample_without_replacement(int n, int n_take);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable seed derivation: hashes a purpose tag and up to three indices
// into a substream seed. Every stochastic site in the simulator draws
// from rng_for(run_seed, tag, ...) so that runs are pure functions of
// the seed and resumption needs no RNG state.
uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t a = 0,
                  uint64_t b = 0, uint64_t c = 0);

inline DetRng rng_for(uint64_t seed, std::string_view tag, uint64_t a = 0,
                      uint64_t b = 0, uint64_t c = 0) {
  return DetRng(mix_seed(seed, tag, a, b, c));
}

}  // namespace leadq
