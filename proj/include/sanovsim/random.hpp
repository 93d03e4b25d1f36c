#ifndef SANOVSIM_RANDOM_HPP
#define SANOVSIM_RANDOM_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sanovsim/error.hpp"

namespace sanovsim {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the `index`-th independent stream under `master`. Streams do not
/// depend on which thread consumes them.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index ^ 0xd1b54a32d192ed03ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::uint64_t index = 0) {
  return Engine(stream_seed(master, index));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF categorical sampler; zero-probability categories are never drawn.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> probs) : cdf_(probs.size()) {
    if (probs.empty()) throw Error(Errc::invalid_argument, "empty categorical distribution");
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[i] = acc;
    }
    // Pin the top of the last positive category to 1 so every u in [0,1) lands.
    std::size_t last = probs.size();
    while (last > 0 && probs[last - 1] <= 0.0) --last;
    if (last == 0) throw Error(Errc::invalid_argument, "categorical distribution has no mass");
    for (std::size_t i = last - 1; i < cdf_.size(); ++i) cdf_[i] = 1.0;
  }

  std::size_t operator()(Engine& eng) const {
    const double u = uniform01(eng);
    if (cdf_.size() <= 8) {
      std::size_t i = 0;
      while (u >= cdf_[i]) ++i;
      return i;
    }
    return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

  std::size_t size() const noexcept { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace sanovsim

#endif  // SANOVSIM_RANDOM_HPP
