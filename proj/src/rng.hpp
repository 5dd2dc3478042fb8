#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace gnss_sentry {

// Seeded generator with explicit output mapping. std::mt19937_64's raw
// stream is pinned by the standard; distributions are not, so every
// mapping lives here and results stay reproducible across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  // Standard normal via Box-Muller.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
};

}  // namespace gnss_sentry
