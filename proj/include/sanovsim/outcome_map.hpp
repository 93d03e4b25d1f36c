#ifndef SANOVSIM_OUTCOME_MAP_HPP
#define SANOVSIM_OUTCOME_MAP_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sanovsim/error.hpp"
#include "sanovsim/measures.hpp"

namespace sanovsim {

/// Map chi from phase-space indices onto observable indices.
class OutcomeMap {
 public:
  OutcomeMap(std::vector<std::size_t> image, Labels observables)
      : image_(std::move(image)), observables_(std::move(observables)) {
    if (observables_.empty()) throw Error(Errc::invalid_argument, "outcome map has no observables");
    for (std::size_t j = 0; j < image_.size(); ++j) {
      if (image_[j] >= observables_.size()) {
        throw Error(Errc::invalid_argument, "state " + std::to_string(j) + " maps outside the observable set");
      }
    }
  }

  OutcomeMap(std::vector<std::size_t> image, std::size_t n_observables)
      : OutcomeMap(std::move(image), index_labels(n_observables)) {}

  /// chi on the index set {0..n-1} into itself.
  static OutcomeMap identity(std::size_t n) {
    std::vector<std::size_t> image(n);
    for (std::size_t j = 0; j < n; ++j) image[j] = j;
    return OutcomeMap(std::move(image), n);
  }

  std::size_t domain_size() const noexcept { return image_.size(); }
  std::size_t n_observables() const noexcept { return observables_.size(); }
  std::size_t operator()(std::size_t state) const { return image_[state]; }
  std::span<const std::size_t> image() const noexcept { return image_; }
  const Labels& observables() const noexcept { return observables_; }

  /// chi^{-1}(i)
  std::vector<std::size_t> preimage(std::size_t observable) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < image_.size(); ++j) {
      if (image_[j] == observable) out.push_back(j);
    }
    return out;
  }

  /// Per-observable sums of `weights` over preimages (no sign handling).
  std::vector<double> image_sums(std::span<const double> weights) const {
    if (weights.size() != image_.size()) {
      throw Error(Errc::dimension_mismatch, "weights have " + std::to_string(weights.size()) +
                                                " entries, outcome map expects " + std::to_string(image_.size()));
    }
    std::vector<double> out(observables_.size(), 0.0);
    for (std::size_t j = 0; j < image_.size(); ++j) out[image_[j]] += weights[j];
    return out;
  }

 private:
  std::vector<std::size_t> image_;
  Labels observables_;
};

}  // namespace sanovsim

#endif  // SANOVSIM_OUTCOME_MAP_HPP
