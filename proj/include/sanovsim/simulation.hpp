#ifndef SANOVSIM_SIMULATION_HPP
#define SANOVSIM_SIMULATION_HPP

// Classical simulation of a signed measure by sampling on a doubled phase
// space Psi = Omega+ |_| Omega- and cancelling plus/minus occurrences.
//
// Psi is laid out as [Omega+ then Omega-]: slot j is the plus copy of state j,
// slot n + j its minus copy. Zero-weight slots are kept so indices line up.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sanovsim/error.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/outcome_map.hpp"
#include "sanovsim/random.hpp"
#include "sanovsim/scenario.hpp"

namespace sanovsim {

inline constexpr double kCancellationTolerance = 1e-12;

/// Labels of the doubled space for a base space with the given labels.
inline Labels doubled_labels(const Labels& base) {
  Labels out;
  out.reserve(2 * base.size());
  for (const auto& l : base) out.push_back("+" + l);
  for (const auto& l : base) out.push_back("-" + l);
  return out;
}

/// Non-negative simulation measure nu on the doubled space.
struct DoubledSimulation {
  SignedMeasure lam;
  std::vector<double> nu_plus;
  std::vector<double> nu_minus;
  double total_weight = 1.0;

  std::size_t base_size() const noexcept { return lam.size(); }

  /// nu as a distribution over Psi.
  ProbDist as_dist() const {
    std::vector<double> p(nu_plus);
    p.insert(p.end(), nu_minus.begin(), nu_minus.end());
    return ProbDist(doubled_labels(lam.labels()), std::move(p));
  }

  /// Sign s_j attached to slot k of Psi: +1 on the plus copy, -1 on the minus copy.
  double slot_sign(std::size_t k) const noexcept { return k < base_size() ? 1.0 : -1.0; }
  std::size_t slot_state(std::size_t k) const noexcept { return k < base_size() ? k : k - base_size(); }
};

inline DoubledSimulation doubled_simulation(const SignedMeasure& lam) {
  const double total = total_variation_weight(lam);
  DoubledSimulation sim{lam, std::vector<double>(lam.size(), 0.0), std::vector<double>(lam.size(), 0.0), total};
  for (std::size_t j = 0; j < lam.size(); ++j) {
    if (lam[j] > 0.0) sim.nu_plus[j] = lam[j] / total;
    if (lam[j] < 0.0) sim.nu_minus[j] = -lam[j] / total;
  }
  return sim;
}

/// mu_i = sum of lambda over chi^{-1}(i). Requires a non-negative image.
inline ProbDist classical_pushforward(const SignedMeasure& lam, const OutcomeMap& chi) {
  std::vector<double> mu = chi.image_sums(lam.weights());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] < -kCancellationTolerance) {
      throw Error(Errc::negative_image, "image mass of '" + chi.observables()[i] + "' is " + std::to_string(mu[i]),
                  mu);
    }
    if (mu[i] < 0.0) mu[i] = 0.0;
  }
  return ProbDist(chi.observables(), std::move(mu));
}

struct PushforwardResult {
  ProbDist dist;
  /// F = 1 / sum_i (net mass)_i.
  double normalizer = 1.0;
  std::vector<double> net_masses;
};

/// Per-observable net masses sum_{j in chi^{-1}(i)} (g+_j - g-_j), no checks.
inline std::vector<double> net_masses(std::span<const double> g, const OutcomeMap& chi) {
  const std::size_t n = chi.domain_size();
  if (g.size() != 2 * n) {
    throw Error(Errc::dimension_mismatch, "doubled-space vector has " + std::to_string(g.size()) +
                                              " entries, expected " + std::to_string(2 * n));
  }
  std::vector<double> net(chi.n_observables(), 0.0);
  for (std::size_t j = 0; j < n; ++j) net[chi(j)] += g[j] - g[n + j];
  return net;
}

/// Signed pushforward Gamma: net plus/minus occurrences per observable, then
/// renormalize by the total net mass. Negative net masses are reported, never
/// clipped.
inline PushforwardResult signed_pushforward(const ProbDist& g, const OutcomeMap& chi) {
  std::vector<double> net = net_masses(g.probs(), chi);
  double denom = 0.0;
  for (double x : net) denom += x;
  if (!(denom > kCancellationTolerance)) {
    throw Error(Errc::signed_normalization_failure,
                "total net mass " + std::to_string(denom) + " is not positive", net);
  }
  const double F = 1.0 / denom;
  std::vector<double> dist(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net[i] < -kCancellationTolerance) {
      throw Error(Errc::negative_net_mass,
                  "net mass of '" + chi.observables()[i] + "' is " + std::to_string(net[i]), net);
    }
    dist[i] = net[i] < 0.0 ? 0.0 : net[i] * F;
  }
  return PushforwardResult{ProbDist(chi.observables(), std::move(dist)), F, std::move(net)};
}

/// Signed column-stochastic matrix T with T = T+ - T-.
struct SignedChannel {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd plus;
  Eigen::MatrixXd minus;
};

/// T_ij = sign(lambda_j) if chi(j) = i. Zero-weight states are given sign +1;
/// they carry no mass under nu or any g with finite divergence.
inline SignedChannel build_channel(const SignedMeasure& lam, const OutcomeMap& chi) {
  if (lam.size() != chi.domain_size()) {
    throw Error(Errc::dimension_mismatch, "outcome map domain does not match the measure");
  }
  const auto rows = static_cast<Eigen::Index>(chi.n_observables());
  const auto cols = static_cast<Eigen::Index>(lam.size());
  SignedChannel ch{Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols),
                   Eigen::MatrixXd::Zero(rows, cols)};
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto i = static_cast<Eigen::Index>(chi(static_cast<std::size_t>(j)));
    const bool negative = lam[static_cast<std::size_t>(j)] < 0.0;
    ch.matrix(i, j) = negative ? -1.0 : 1.0;
    ch.plus(i, j) = 1.0;
    ch.minus(i, j) = negative ? 2.0 : 0.0;
  }
  return ch;
}

/// Collapses a doubled-space vector onto Omega by keeping, for each state, the
/// slot that carries the sign of lambda_j (the other slot is a zero-probability
/// event under nu).
inline std::vector<double> reindex_to_base(const DoubledSimulation& sim, std::span<const double> doubled) {
  const std::size_t n = sim.base_size();
  if (doubled.size() != 2 * n) throw Error(Errc::dimension_mismatch, "expected a doubled-space vector");
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = sim.lam[j] < 0.0 ? doubled[n + j] : doubled[j];
  return out;
}

/// Inverse of reindex_to_base: place each base entry in its signed slot.
inline std::vector<double> expand_to_doubled(const DoubledSimulation& sim, std::span<const double> base) {
  const std::size_t n = sim.base_size();
  if (base.size() != n) throw Error(Errc::dimension_mismatch, "expected a base-space vector");
  std::vector<double> out(2 * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) out[sim.lam[j] < 0.0 ? n + j : j] = base[j];
  return out;
}

/// Multinomial draw of `n` i.i.d. samples from `dist`; deterministic in `seed`.
inline FrequencyDist sample(const ProbDist& dist, std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::invalid_argument, "sample size must be positive");
  const CategoricalSampler draw(dist.probs());
  Engine eng = make_engine(seed);
  std::vector<std::uint64_t> counts(dist.size(), 0);
  for (std::uint64_t t = 0; t < n; ++t) ++counts[draw(eng)];
  return FrequencyDist(dist.labels(), std::move(counts));
}

/// The empirical model a (suitably non-negative) signed measure induces on
/// every context of a scenario.
inline EmpiricalModel push_model(const SignedMeasure& lam, const MeasurementScenario& scenario) {
  const PhaseSpace space(scenario);
  if (lam.size() != space.size()) throw Error(Errc::dimension_mismatch, "measure does not live on the phase space");
  std::map<Context, ProbDist> rows;
  for (const auto& ctx : scenario.contexts()) {
    rows.emplace(ctx, classical_pushforward(lam, context_outcome_map(space, ctx)));
  }
  return EmpiricalModel(scenario, std::move(rows));
}

}  // namespace sanovsim

#endif  // SANOVSIM_SIMULATION_HPP
