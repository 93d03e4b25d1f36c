#ifndef SANOVSIM_MEASURES_HPP
#define SANOVSIM_MEASURES_HPP

// Signed and non-negative distributions on finite, labelled index sets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sanovsim/error.hpp"

namespace sanovsim {

using Labels = std::vector<std::string>;

/// Normalization tolerance applied on construction.
inline constexpr double kNormTolerance = 1e-9;

inline Labels index_labels(std::size_t n, const std::string& prefix = "") {
  Labels out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

namespace detail {

inline void check_labels(const Labels& labels, std::size_t n) {
  if (labels.size() != n) {
    throw Error(Errc::dimension_mismatch,
                "label count " + std::to_string(labels.size()) + " does not match " +
                    std::to_string(n) + " weights");
  }
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw Error(Errc::invalid_argument, "duplicate label '" + l + "'");
  }
}

// Accepts weights summing to 1 within kNormTolerance and removes the drift.
inline void renormalize(std::vector<double>& w, const char* what) {
  if (w.empty()) throw Error(Errc::invalid_argument, std::string(what) + " is empty");
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x)) throw Error(Errc::invalid_argument, std::string(what) + " has a non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw Error(Errc::invalid_argument,
                std::string(what) + " sums to " + std::to_string(sum) + ", not 1", {sum});
  }
  if (sum != 1.0) {
    for (double& x : w) x /= sum;
  }
}

inline double xlogx_over_y(double x, double y) {
  if (x == 0.0) return 0.0;
  if (y == 0.0) return std::numeric_limits<double>::infinity();
  return x * std::log(x / y);
}

}  // namespace detail

/// Real weights on a finite set summing to one; entries may be negative.
class SignedMeasure {
 public:
  explicit SignedMeasure(const std::vector<double>& weights)
      : SignedMeasure(index_labels(weights.size()), weights) {}

  SignedMeasure(Labels labels, std::vector<double> weights)
      : labels_(std::move(labels)), weights_(std::move(weights)) {
    detail::check_labels(labels_, weights_.size());
    detail::renormalize(weights_, "signed measure");
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const noexcept { return weights_; }
  const Labels& labels() const noexcept { return labels_; }

  bool is_nonnegative() const noexcept {
    for (double w : weights_) {
      if (w < 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const SignedMeasure&, const SignedMeasure&) = default;

 private:
  Labels labels_;
  std::vector<double> weights_;
};

/// Probability distribution: non-negative entries summing to one.
class ProbDist {
 public:
  explicit ProbDist(const std::vector<double>& probs) : ProbDist(index_labels(probs.size()), probs) {}

  ProbDist(Labels labels, std::vector<double> probs) : labels_(std::move(labels)), probs_(std::move(probs)) {
    detail::check_labels(labels_, probs_.size());
    for (double p : probs_) {
      if (!(p >= 0.0)) {
        throw Error(Errc::invalid_argument, "probability " + std::to_string(p) + " is negative");
      }
    }
    detail::renormalize(probs_, "probability distribution");
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const Labels& labels() const noexcept { return labels_; }

  std::size_t support_size() const noexcept {
    return static_cast<std::size_t>(std::count_if(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; }));
  }

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  Labels labels_;
  std::vector<double> probs_;
};

/// Sample counts together with their empirical distribution.
class FrequencyDist {
 public:
  FrequencyDist(Labels labels, std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
    n_samples_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
    if (n_samples_ == 0) throw Error(Errc::empty_sample, "counts sum to zero");
    std::vector<double> probs(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      probs[i] = static_cast<double>(counts_[i]) / static_cast<double>(n_samples_);
    }
    dist_ = ProbDist(std::move(labels), std::move(probs));
  }

  explicit FrequencyDist(std::vector<std::uint64_t> counts)
      : FrequencyDist(index_labels(counts.size()), counts) {}

  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t n_samples() const noexcept { return n_samples_; }
  const ProbDist& probs() const noexcept { return dist_; }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_samples_ = 0;
  ProbDist dist_{std::vector<double>{1.0}};
};

inline FrequencyDist empirical_from_counts(std::vector<std::uint64_t> counts) {
  return FrequencyDist(std::move(counts));
}

inline void require_same_labels(const Labels& a, const Labels& b) {
  if (a != b) throw Error(Errc::label_mismatch, "distributions are defined on different label sets");
}

/// D(q || p) in nats, with 0 log 0 = 0 and +inf when q puts mass where p has none.
inline double kl_divergence(const ProbDist& q, const ProbDist& p) {
  require_same_labels(q.labels(), p.labels());
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double term = detail::xlogx_over_y(q[i], p[i]);
    if (std::isinf(term)) return term;
    d += term;
  }
  // Rounding can leave tiny negative totals when q is numerically p.
  return d < 0.0 ? 0.0 : d;
}

/// Lambda = sum_j |lambda_j|.
inline double total_variation_weight(const SignedMeasure& lam) {
  double s = 0.0;
  for (double w : lam.weights()) s += std::abs(w);
  return s;
}

inline double l1_distance(const ProbDist& a, const ProbDist& b) {
  require_same_labels(a.labels(), b.labels());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace sanovsim

#endif  // SANOVSIM_MEASURES_HPP
