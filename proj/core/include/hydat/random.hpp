#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hydat {

/// Seeded random source whose every output is fixed by the algorithm below,
/// independent of the standard library's distribution implementations:
///
///   engine   : std::mt19937_64 (bit-exact by the C++ standard)
///   uniform  : (engine() >> 11) * 2^-53, in [0, 1)
///   gaussian : Box-Muller, u1 = 1 - uniform(), u2 = uniform(),
///              sqrt(-2 ln u1) * cos(2 pi u2); one engine pair per draw
///   index(n) : floor(uniform() * n)
///   shuffle  : Fisher-Yates from the back, j = index(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian(double mean = 0.0, double sigma = 1.0);
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hydat
