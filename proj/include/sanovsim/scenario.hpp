#ifndef SANOVSIM_SCENARIO_HPP
#define SANOVSIM_SCENARIO_HPP

// Measurement scenarios, empirical models and their phase-space realizations.
//
// Layout conventions used throughout:
//  * measurements are numbered party-major (Alice's a, a', then Bob's b, b');
//  * a phase-space state index spells its outcome assignment as base-|O|
//    digits, first measurement most significant (w7 = 0111 -> a=0 a'=1 b=1 b'=1);
//  * within a context row, joint outcomes are ordered with the first party's
//    outcome varying fastest: (0,0), (1,0), (0,1), (1,1);
//  * contexts are enumerated the same way: (a,b), (a',b), (a,b'), (a',b').

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sanovsim/error.hpp"
#include "sanovsim/lp.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/outcome_map.hpp"

namespace sanovsim {

/// One measurement choice (local index) per party.
using Context = std::vector<std::size_t>;

class MeasurementScenario {
 public:
  MeasurementScenario(Labels parties, std::vector<Labels> measurements, Labels outcomes)
      : parties_(std::move(parties)), measurements_(std::move(measurements)), outcomes_(std::move(outcomes)) {
    if (parties_.empty()) throw Error(Errc::invalid_argument, "scenario needs at least one party");
    if (measurements_.size() != parties_.size()) {
      throw Error(Errc::dimension_mismatch, "one measurement list per party is required");
    }
    if (outcomes_.size() < 2) throw Error(Errc::invalid_argument, "each measurement needs at least two outcomes");
    detail::check_labels(parties_, parties_.size());
    detail::check_labels(outcomes_, outcomes_.size());
    Labels all;
    for (const auto& ms : measurements_) {
      if (ms.empty()) throw Error(Errc::invalid_argument, "every party needs at least one measurement");
      all.insert(all.end(), ms.begin(), ms.end());
    }
    detail::check_labels(all, all.size());
  }

  const Labels& parties() const noexcept { return parties_; }
  const std::vector<Labels>& measurements() const noexcept { return measurements_; }
  const Labels& outcomes() const noexcept { return outcomes_; }

  std::size_t n_parties() const noexcept { return parties_.size(); }
  std::size_t n_outcomes() const noexcept { return outcomes_.size(); }

  std::size_t n_measurements() const noexcept {
    std::size_t n = 0;
    for (const auto& ms : measurements_) n += ms.size();
    return n;
  }

  /// Position of (party, local measurement) in the party-major order.
  std::size_t global_measurement(std::size_t party, std::size_t local) const {
    std::size_t g = 0;
    for (std::size_t p = 0; p < party; ++p) g += measurements_[p].size();
    return g + local;
  }

  /// Joint outcomes per context: |O|^parties.
  std::size_t n_joint_outcomes() const {
    std::size_t n = 1;
    for (std::size_t p = 0; p < n_parties(); ++p) n *= n_outcomes();
    return n;
  }

  std::size_t party_outcome(std::size_t joint, std::size_t party) const {
    for (std::size_t p = 0; p < party; ++p) joint /= n_outcomes();
    return joint % n_outcomes();
  }

  Labels joint_outcome_labels() const {
    Labels out;
    for (std::size_t j = 0; j < n_joint_outcomes(); ++j) {
      std::string s = "(";
      for (std::size_t p = 0; p < n_parties(); ++p) {
        if (p) s += ",";
        s += outcomes_[party_outcome(j, p)];
      }
      out.push_back(s + ")");
    }
    return out;
  }

  void check_context(const Context& ctx) const {
    if (ctx.size() != n_parties()) {
      throw Error(Errc::dimension_mismatch, "context must name one measurement per party");
    }
    for (std::size_t p = 0; p < ctx.size(); ++p) {
      if (ctx[p] >= measurements_[p].size()) {
        throw Error(Errc::invalid_argument, "party " + parties_[p] + " has no measurement #" + std::to_string(ctx[p]));
      }
    }
  }

  /// All contexts, first party's choice varying fastest.
  std::vector<Context> contexts() const {
    std::vector<Context> out;
    Context ctx(n_parties(), 0);
    while (true) {
      out.push_back(ctx);
      std::size_t p = 0;
      while (p < ctx.size() && ++ctx[p] == measurements_[p].size()) ctx[p++] = 0;
      if (p == ctx.size()) break;
    }
    return out;
  }

  std::string context_name(const Context& ctx) const {
    check_context(ctx);
    std::string s;
    for (std::size_t p = 0; p < ctx.size(); ++p) {
      if (p) s += ",";
      s += measurements_[p][ctx[p]];
    }
    return s;
  }

  /// Parses "a,b'" style context names.
  Context parse_context(const std::string& text) const {
    Context ctx;
    std::size_t start = 0;
    for (std::size_t p = 0; p < n_parties(); ++p) {
      const std::size_t comma = text.find(',', start);
      const std::string token = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto& ms = measurements_[p];
      const auto it = std::find(ms.begin(), ms.end(), token);
      if (it == ms.end()) {
        throw Error(Errc::invalid_argument, "'" + token + "' is not a measurement of party " + parties_[p]);
      }
      ctx.push_back(static_cast<std::size_t>(it - ms.begin()));
      if (comma == std::string::npos) {
        if (p + 1 != n_parties()) throw Error(Errc::invalid_argument, "context '" + text + "' is too short");
        break;
      }
      start = comma + 1;
      if (p + 1 == n_parties()) throw Error(Errc::invalid_argument, "context '" + text + "' is too long");
    }
    return ctx;
  }

  friend bool operator==(const MeasurementScenario&, const MeasurementScenario&) = default;

 private:
  Labels parties_;
  std::vector<Labels> measurements_;
  Labels outcomes_;
};

/// Outcome-probability table: one joint-outcome distribution per context.
class EmpiricalModel {
 public:
  EmpiricalModel(MeasurementScenario scenario, std::map<Context, ProbDist> rows)
      : scenario_(std::move(scenario)), rows_(std::move(rows)) {
    const Labels labels = scenario_.joint_outcome_labels();
    for (auto& [ctx, dist] : rows_) {
      scenario_.check_context(ctx);
      if (dist.size() != labels.size()) {
        throw Error(Errc::dimension_mismatch,
                    "row " + scenario_.context_name(ctx) + " needs " + std::to_string(labels.size()) + " entries");
      }
      if (dist.labels() != labels) dist = ProbDist(labels, {dist.probs().begin(), dist.probs().end()});
    }
  }

  const MeasurementScenario& scenario() const noexcept { return scenario_; }
  const std::map<Context, ProbDist>& rows() const noexcept { return rows_; }

  const ProbDist& row(const Context& ctx) const {
    const auto it = rows_.find(ctx);
    if (it == rows_.end()) throw Error(Errc::missing_context, "no row for context " + scenario_.context_name(ctx));
    return it->second;
  }

  bool has_all_contexts() const {
    for (const auto& ctx : scenario_.contexts()) {
      if (!rows_.contains(ctx)) return false;
    }
    return true;
  }

 private:
  MeasurementScenario scenario_;
  std::map<Context, ProbDist> rows_;
};

struct NoSignalingReport {
  bool pass = true;
  double max_gap = 0.0;
  /// Offending pair (meaningful when max_gap > 0).
  std::optional<std::pair<Context, Context>> worst_pair;
  std::size_t worst_party = 0;
};

inline constexpr double kNoSignalingTolerance = 1e-9;

/// Checks that each party's marginal for a given measurement is the same in
/// every context containing that measurement.
inline NoSignalingReport no_signaling_check(const EmpiricalModel& model) {
  const auto& sc = model.scenario();
  for (const auto& ctx : sc.contexts()) {
    if (!model.rows().contains(ctx)) {
      throw Error(Errc::missing_context, "no row for context " + sc.context_name(ctx));
    }
  }
  auto marginal = [&](const Context& ctx, std::size_t party) {
    std::vector<double> m(sc.n_outcomes(), 0.0);
    const ProbDist& row = model.row(ctx);
    for (std::size_t j = 0; j < row.size(); ++j) m[sc.party_outcome(j, party)] += row[j];
    return m;
  };

  NoSignalingReport report;
  for (std::size_t party = 0; party < sc.n_parties(); ++party) {
    for (std::size_t x = 0; x < sc.measurements()[party].size(); ++x) {
      std::optional<Context> reference;
      std::vector<double> ref_marginal;
      for (const auto& ctx : sc.contexts()) {
        if (ctx[party] != x) continue;
        auto m = marginal(ctx, party);
        if (!reference) {
          reference = ctx;
          ref_marginal = std::move(m);
          continue;
        }
        for (std::size_t o = 0; o < m.size(); ++o) {
          const double gap = std::abs(m[o] - ref_marginal[o]);
          if (gap > report.max_gap) {
            report.max_gap = gap;
            report.worst_pair = std::make_pair(*reference, ctx);
            report.worst_party = party;
          }
        }
      }
    }
  }
  report.pass = report.max_gap <= kNoSignalingTolerance;
  return report;
}

/// Deterministic outcome assignments of a scenario (hidden-variable states).
class PhaseSpace {
 public:
  explicit PhaseSpace(MeasurementScenario scenario) : scenario_(std::move(scenario)) {
    const std::size_t k = scenario_.n_outcomes();
    const std::size_t m = scenario_.n_measurements();
    std::size_t n = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (n > (std::size_t{1} << 24) / k) throw Error(Errc::too_large, "phase space exceeds 2^24 states");
      n *= k;
    }
    size_ = n;
  }

  const MeasurementScenario& scenario() const noexcept { return scenario_; }
  std::size_t size() const noexcept { return size_; }

  /// Outcome index that `state` assigns to the global measurement `g`.
  std::size_t outcome(std::size_t state, std::size_t g) const {
    const std::size_t k = scenario_.n_outcomes();
    for (std::size_t i = g + 1; i < scenario_.n_measurements(); ++i) state /= k;
    return state % k;
  }

  std::vector<std::size_t> assignment(std::size_t state) const {
    std::vector<std::size_t> out(scenario_.n_measurements());
    for (std::size_t g = 0; g < out.size(); ++g) out[g] = outcome(state, g);
    return out;
  }

  Labels labels() const { return index_labels(size_, "w"); }

  /// Joint outcome produced by `state` when the parties measure `ctx`.
  std::size_t joint_outcome(std::size_t state, const Context& ctx) const {
    std::size_t joint = 0;
    std::size_t stride = 1;
    for (std::size_t p = 0; p < ctx.size(); ++p) {
      joint += outcome(state, scenario_.global_measurement(p, ctx[p])) * stride;
      stride *= scenario_.n_outcomes();
    }
    return joint;
  }

 private:
  MeasurementScenario scenario_;
  std::size_t size_ = 0;
};

inline PhaseSpace canonical_phase_space(const MeasurementScenario& scenario) { return PhaseSpace(scenario); }

inline std::vector<std::size_t> states_consistent_with(const PhaseSpace& space, const Context& ctx,
                                                       std::size_t joint_outcome) {
  space.scenario().check_context(ctx);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < space.size(); ++s) {
    if (space.joint_outcome(s, ctx) == joint_outcome) out.push_back(s);
  }
  return out;
}

/// chi for one context: every state goes to the joint outcome it produces.
inline OutcomeMap context_outcome_map(const PhaseSpace& space, const Context& ctx) {
  const auto& sc = space.scenario();
  std::vector<std::size_t> image(space.size());
  for (std::size_t o = 0; o < sc.n_joint_outcomes(); ++o) {
    for (std::size_t s : states_consistent_with(space, ctx, o)) image[s] = o;
  }
  return OutcomeMap(std::move(image), sc.joint_outcome_labels());
}

/// max over (context, outcome) of |sum of consistent weights - model probability|.
inline double realization_residual(const SignedMeasure& lam, const EmpiricalModel& model) {
  const PhaseSpace space(model.scenario());
  if (lam.size() != space.size()) {
    throw Error(Errc::dimension_mismatch, "measure has " + std::to_string(lam.size()) + " weights, phase space has " +
                                              std::to_string(space.size()) + " states");
  }
  double worst = 0.0;
  for (const auto& [ctx, row] : model.rows()) {
    const auto sums = context_outcome_map(space, ctx).image_sums(lam.weights());
    for (std::size_t o = 0; o < sums.size(); ++o) worst = std::max(worst, std::abs(sums[o] - row[o]));
  }
  return worst;
}

struct Realization {
  SignedMeasure lam;
  EmpiricalModel model;
  double residual = 0.0;
  double total_weight = 1.0;
};

namespace detail {

// Constraint rows (one per context/outcome, then normalization) over states.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> realization_system(const EmpiricalModel& model) {
  const PhaseSpace space(model.scenario());
  const auto n = static_cast<Eigen::Index>(space.size());
  const auto per_row = model.scenario().n_joint_outcomes();
  const auto rows = static_cast<Eigen::Index>(model.rows().size() * per_row + 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n);
  Eigen::VectorXd b(rows);
  Eigen::Index r = 0;
  for (const auto& [ctx, dist] : model.rows()) {
    const OutcomeMap chi = context_outcome_map(space, ctx);
    for (std::size_t o = 0; o < per_row; ++o, ++r) {
      for (std::size_t s : chi.preimage(o)) A(r, static_cast<Eigen::Index>(s)) = 1.0;
      b(r) = dist[o];
    }
  }
  A.row(r).setOnes();
  b(r) = 1.0;
  return {std::move(A), std::move(b)};
}

}  // namespace detail

/// L1-minimal signed realization: minimize sum |lambda_j| subject to the
/// model's constraints, as an LP over the split lambda = lambda+ - lambda-.
inline Realization realize_minimal(const EmpiricalModel& model, const lp::Options& opt = {}) {
  const PhaseSpace space(model.scenario());
  auto [A, b] = detail::realization_system(model);
  const Eigen::Index n = A.cols();

  lp::Problem prob;
  prob.A.resize(A.rows(), 2 * n);
  prob.A << A, -A;
  prob.b = b;
  prob.c = Eigen::VectorXd::Ones(2 * n);

  const lp::Solution sol = lp::solve(prob, opt);
  if (sol.status != lp::Status::optimal) {
    throw Error(Errc::infeasible, "no signed measure realizes the model (is it signaling?)");
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = sol.x(j) - sol.x(n + j);

  SignedMeasure lam(space.labels(), std::move(w));
  const double residual = realization_residual(lam, model);
  if (residual > 1e-9) {
    throw Error(Errc::internal_inconsistency, "LP solution violates the realization constraints", {residual});
  }
  const double total = total_variation_weight(lam);
  return Realization{std::move(lam), model, residual, total};
}

inline MeasurementScenario bell_scenario() {
  return MeasurementScenario({"Alice", "Bob"}, {{"a", "a'"}, {"b", "b'"}}, {"0", "1"});
}

struct BellFixture {
  EmpiricalModel model;
  SignedMeasure lam;
};

/// Bell-state table and the signed measure that realizes it.
inline BellFixture bell_fixture() {
  const MeasurementScenario sc = bell_scenario();
  const Labels joint = sc.joint_outcome_labels();
  std::map<Context, ProbDist> rows;
  rows.emplace(Context{0, 0}, ProbDist(joint, {0.5, 0.0, 0.0, 0.5}));
  rows.emplace(Context{1, 0}, ProbDist(joint, {0.375, 0.125, 0.125, 0.375}));
  rows.emplace(Context{0, 1}, ProbDist(joint, {0.375, 0.125, 0.125, 0.375}));
  rows.emplace(Context{1, 1}, ProbDist(joint, {0.125, 0.375, 0.375, 0.125}));

  std::vector<double> w(16, 0.0);
  w[0] = 0.25;
  w[1] = 0.125;
  w[4] = 0.125;
  w[10] = -0.125;
  w[11] = 0.25;
  w[14] = 0.25;
  w[15] = 0.125;
  return BellFixture{EmpiricalModel(sc, std::move(rows)), SignedMeasure(PhaseSpace(sc).labels(), std::move(w))};
}

}  // namespace sanovsim

#endif  // SANOVSIM_SCENARIO_HPP
