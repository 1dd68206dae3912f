#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace geodecomp::detail {

// Seeded generator with explicitly coded distributions, so identical seeds
// produce identical streams on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Box-Muller; two uniforms per draw, no cached spare.
  double gaussian() {
    // offset keeps log() finite
    double u1 = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, bound).
  std::uint64_t integer(std::uint64_t bound) { return bound == 0 ? 0 : gen_() % bound; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[integer(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace geodecomp::detail
