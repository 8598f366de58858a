#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cdcp {

// Engine plus platform-independent conversions. std::uniform_*_distribution
// output is implementation defined, so the conversions are spelled out here to
// keep datasets and checkpoints reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], rejection sampled.
  int uniform_int(int lo, int hi);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Derives an independent stream for item `index`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace cdcp
