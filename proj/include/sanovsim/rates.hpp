#ifndef SANOVSIM_RATES_HPP
#define SANOVSIM_RATES_HPP

// Large-deviation rates and the probabilities they approximate.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "sanovsim/error.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/random.hpp"

namespace sanovsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Slack on the ball boundary so lattice points exactly on it are kept.
inline constexpr double kBallTolerance = 1e-12;

/// Largest multinomial lattice the exact oracle will enumerate.
inline constexpr double kMaxLatticeSize = 1e7;

/// exp(-n * rate); 0 for an infinite rate.
inline double sanov_probability(double rate, std::uint64_t n) {
  if (!(rate >= 0.0)) throw Error(Errc::invalid_argument, "rate must be non-negative");
  if (std::isinf(rate)) return 0.0;
  return std::exp(-static_cast<double>(n) * rate);
}

/// Closed L1 ball around a distribution.
struct BallSpec {
  ProbDist center;
  double radius = 0.02;
};

namespace detail {

inline double lattice_size(std::uint64_t n, std::size_t k) {
  // C(n + k - 1, k - 1)
  if (k <= 1) return 1.0;
  return std::exp(std::lgamma(static_cast<double>(n + k)) - std::lgamma(static_cast<double>(k)) -
                  std::lgamma(static_cast<double>(n + 1)));
}

/// Cumulative table log(i!) for i = 0..n.
inline std::vector<double> log_factorials(std::uint64_t n) {
  std::vector<double> lf(n + 1, 0.0);
  for (std::uint64_t i = 2; i <= n; ++i) lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
  return lf;
}

// Visits every count vector on the support of p (sum n) whose empirical
// distribution lies in the ball. The visitor receives the per-category counts
// (indexed like p) and the log multinomial probability.
template <class Visitor>
void for_each_lattice_point_in_ball(const ProbDist& p, const BallSpec& ball, std::uint64_t n, Visitor&& visit) {
  require_same_labels(p.labels(), ball.center.labels());
  if (!(ball.radius >= 0.0)) throw Error(Errc::invalid_argument, "ball radius must be non-negative");
  if (n == 0) throw Error(Errc::invalid_argument, "sample size must be positive");

  std::vector<std::size_t> support;
  double outside = 0.0;  // distance contributed by categories p never draws
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      support.push_back(i);
    } else {
      outside += ball.center[i];
    }
  }
  if (lattice_size(n, support.size()) > kMaxLatticeSize) {
    throw Error(Errc::too_large, "multinomial lattice exceeds 1e7 points", {lattice_size(n, support.size())});
  }
  const double limit = ball.radius + kBallTolerance;
  if (outside > limit) return;

  const auto lf = log_factorials(n);
  const double nd = static_cast<double>(n);
  std::vector<double> log_p(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) log_p[s] = std::log(p[support[s]]);

  // Center mass still to be matched by categories after position s.
  std::vector<double> rest_center(support.size(), 0.0);
  for (std::size_t s = support.size(); s-- > 1;) rest_center[s - 1] = rest_center[s] + ball.center[support[s]];

  std::vector<std::uint64_t> counts(p.size(), 0);
  // Depth-first over the support; the distance only grows, so prune early.
  auto recurse = [&](auto&& self, std::size_t s, std::uint64_t remaining, double dist, double logw) -> void {
    const std::size_t cat = support[s];
    if (s + 1 == support.size()) {
      const double d = dist + std::abs(static_cast<double>(remaining) / nd - ball.center[cat]);
      if (d > limit) return;
      counts[cat] = remaining;
      visit(std::span<const std::uint64_t>(counts),
            lf[n] + logw + static_cast<double>(remaining) * log_p[s] - lf[remaining]);
      counts[cat] = 0;
      return;
    }
    for (std::uint64_t c = 0; c <= remaining; ++c) {
      const double d = dist + std::abs(static_cast<double>(c) / nd - ball.center[cat]);
      if (d > limit) {
        // |c/n - center| is V-shaped in c: once past the center, stop.
        if (static_cast<double>(c) / nd > ball.center[cat]) break;
        continue;
      }
      // The remaining categories add at least |remaining mass - their center mass|.
      if (d + std::abs(static_cast<double>(remaining - c) / nd - rest_center[s]) > limit) continue;
      counts[cat] = c;
      self(self, s + 1, remaining - c, d, logw + static_cast<double>(c) * log_p[s] - lf[c]);
    }
    counts[cat] = 0;
  };
  recurse(recurse, 0, n, outside, 0.0);
}

}  // namespace detail

/// log Pr(empirical distribution of n draws from p lies in the ball), exact.
inline double exact_ball_log_probability(const ProbDist& p, const BallSpec& ball, std::uint64_t n) {
  double max_log = -kInf;
  double scaled = 0.0;
  detail::for_each_lattice_point_in_ball(p, ball, n, [&](std::span<const std::uint64_t>, double logw) {
    if (logw > max_log) {
      scaled = scaled * std::exp(max_log - logw) + 1.0;
      max_log = logw;
    } else {
      scaled += std::exp(logw - max_log);
    }
  });
  if (std::isinf(max_log)) return -kInf;
  return std::min(0.0, max_log + std::log(scaled));
}

inline double exact_ball_probability(const ProbDist& p, const BallSpec& ball, std::uint64_t n) {
  return std::exp(exact_ball_log_probability(p, ball, n));
}

/// min of D(q || p) over lattice points q = counts/n inside the ball.
inline double min_ball_kl(const ProbDist& p, const BallSpec& ball, std::uint64_t n) {
  double best = kInf;
  const double nd = static_cast<double>(n);
  detail::for_each_lattice_point_in_ball(p, ball, n, [&](std::span<const std::uint64_t> counts, double) {
    double d = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i]) d += detail::xlogx_over_y(static_cast<double>(counts[i]) / nd, p[i]);
    }
    best = std::min(best, std::max(d, 0.0));
  });
  return best;
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
};

/// Trials per random stream. Fixed so results do not depend on thread count.
inline constexpr std::uint64_t kTrialsPerStream = 1024;

/// Monte Carlo estimate of the ball probability. Trial block b uses stream
/// `stream_seed(seed, b)`, so any `threads` value gives the same answer.
inline McEstimate mc_ball_probability(const ProbDist& p, const BallSpec& ball, std::uint64_t n,
                                      std::uint64_t trials, std::uint64_t seed, unsigned threads = 1) {
  require_same_labels(p.labels(), ball.center.labels());
  if (trials == 0) throw Error(Errc::invalid_argument, "trials must be positive");
  if (n == 0) throw Error(Errc::invalid_argument, "sample size must be positive");

  const CategoricalSampler draw(p.probs());
  const double limit = ball.radius + kBallTolerance;
  const double nd = static_cast<double>(n);
  const std::uint64_t blocks = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
  std::vector<std::uint64_t> block_hits(blocks, 0);
  std::atomic<std::uint64_t> next{0};

  auto worker = [&] {
    std::vector<std::uint64_t> counts(p.size());
    for (std::uint64_t b = next++; b < blocks; b = next++) {
      Engine eng = make_engine(seed, b);
      const std::uint64_t begin = b * kTrialsPerStream;
      const std::uint64_t end = std::min(trials, begin + kTrialsPerStream);
      std::uint64_t hits = 0;
      for (std::uint64_t t = begin; t < end; ++t) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint64_t s = 0; s < n; ++s) ++counts[draw(eng)];
        double d = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
          d += std::abs(static_cast<double>(counts[i]) / nd - ball.center[i]);
        }
        if (d <= limit) ++hits;
      }
      block_hits[b] = hits;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  McEstimate est;
  est.trials = trials;
  for (auto h : block_hits) est.hits += h;
  est.estimate = static_cast<double>(est.hits) / static_cast<double>(trials);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
  return est;
}

/// -(1/n) log(probability); the finite-n proxy for the Sanov rate.
inline double empirical_rate_from_probability(double probability, std::uint64_t n) {
  if (!(probability > 0.0)) throw Error(Errc::zero_probability, "ball event has probability zero");
  return -std::log(probability) / static_cast<double>(n);
}

/// Empirical rate of the ball event, from the exact oracle.
inline double empirical_rate(const ProbDist& p, const BallSpec& ball, std::uint64_t n) {
  const double lp = exact_ball_log_probability(p, ball, n);
  if (std::isinf(lp)) throw Error(Errc::zero_probability, "ball event has probability zero");
  return -lp / static_cast<double>(n);
}

/// Paired rates of a simulation-side deviation g (from nu) and an observed
/// deviation f (from mu).
struct RateComparison {
  double d_fine = 0.0;
  double d_coarse = 0.0;
  std::uint64_t n = 1;
  double p_fine = 1.0;
  double p_coarse = 1.0;
  bool reversal = false;
};

inline RateComparison compare_rates(const ProbDist& g, const ProbDist& nu, const ProbDist& f, const ProbDist& mu,
                                    std::uint64_t n) {
  RateComparison rc;
  rc.d_fine = kl_divergence(g, nu);
  rc.d_coarse = kl_divergence(f, mu);
  rc.n = n;
  rc.p_fine = sanov_probability(rc.d_fine, n);
  rc.p_coarse = sanov_probability(rc.d_coarse, n);
  rc.reversal = rc.d_fine < rc.d_coarse - 1e-12;
  return rc;
}

namespace detail {

inline void check_covariance_support(const ProbDist& q, const ProbDist& p) {
  require_same_labels(q.labels(), p.labels());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 && q[i] != p[i]) {
      throw Error(Errc::singular_covariance, "p vanishes at '" + p.labels()[i] + "' where q does not");
    }
  }
}

}  // namespace detail

/// Pearson chi-square sum (q_i - p_i)^2 / p_i over the support of p.
inline double chi_square_statistic(const ProbDist& q, const ProbDist& p) {
  detail::check_covariance_support(q, p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += (q[i] - p[i]) * (q[i] - p[i]) / p[i];
  }
  return s;
}

/// (q - p)' Sigma_p^+ (q - p) with Sigma_p = diag(p) - p p' the one-draw
/// multinomial covariance on the support of p, pseudo-inverted on the simplex
/// tangent space.
inline double small_deviation_form(const ProbDist& q, const ProbDist& p) {
  detail::check_covariance_support(q, p);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) support.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd ps(k), d(k);
  for (Eigen::Index s = 0; s < k; ++s) {
    ps(s) = p[support[static_cast<std::size_t>(s)]];
    d(s) = q[support[static_cast<std::size_t>(s)]] - ps(s);
  }
  const Eigen::MatrixXd sigma = Eigen::MatrixXd(ps.asDiagonal()) - ps * ps.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
  const Eigen::VectorXd coords = eig.eigenvectors().transpose() * d;
  double form = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (ev(i) > cutoff) form += coords(i) * coords(i) / ev(i);
  }
  return form;
}

/// Two-spin Ising model observed through the noisy two-outcome kernel
/// ++ -> A, -- -> B, +- and -+ -> A or B with probability 1/2 each.
struct IsingBaseline {
  double coupling = 1.0;
  double temperature = 1.0;
  ProbDist fine{Labels{"++", "+-", "-+", "--"}, {0.25, 0.25, 0.25, 0.25}};
  /// Row-stochastic: rows are microstates, columns are (A, B).
  Eigen::Matrix<double, 4, 2> kernel;
  ProbDist coarse{Labels{"A", "B"}, {0.5, 0.5}};
  double partition = 4.0;
};

inline Labels ising_microstates() { return {"++", "+-", "-+", "--"}; }
inline Labels ising_macrostates() { return {"A", "B"}; }

/// Pushes a microstate distribution through the kernel. The shared noisy half
/// is summed once, so symmetric inputs give bit-identical A and B.
inline ProbDist apply_ising_kernel(const ProbDist& g) {
  require_same_labels(g.labels(), ising_microstates());
  const double noisy = 0.5 * (g[1] + g[2]);
  return ProbDist(ising_macrostates(), {g[0] + noisy, g[3] + noisy});
}

inline IsingBaseline ising_baseline(double coupling, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::invalid_argument, "temperature must be positive");
  }
  if (!std::isfinite(coupling)) throw Error(Errc::invalid_argument, "coupling must be finite");
  IsingBaseline b;
  b.coupling = coupling;
  b.temperature = temperature;
  // E(s1, s2) = -J s1 s2; aligned pairs share one energy, anti-aligned the other.
  const double e_aligned = -coupling;
  const double e_anti = coupling;
  const double e_min = std::min(e_aligned, e_anti);
  const double w_aligned = std::exp(-(e_aligned - e_min) / temperature);
  const double w_anti = std::exp(-(e_anti - e_min) / temperature);
  const double z_shifted = 2.0 * w_aligned + 2.0 * w_anti;
  b.partition = z_shifted * std::exp(-e_min / temperature);
  b.fine = ProbDist(ising_microstates(),
                    {w_aligned / z_shifted, w_anti / z_shifted, w_anti / z_shifted, w_aligned / z_shifted});
  b.kernel << 1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.0, 1.0;
  b.coarse = apply_ising_kernel(b.fine);
  return b;
}

}  // namespace sanovsim

#endif  // SANOVSIM_RATES_HPP
