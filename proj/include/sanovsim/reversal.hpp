#ifndef SANOVSIM_REVERSAL_HPP
#define SANOVSIM_REVERSAL_HPP

// Reversals of the data processing inequality under the signed pushforward:
//  * the cheapest simulation-side deviation g that cancels down to a target f
//    (an I-projection of nu onto a linear family),
//  * the exact intermediate bound behind the signed DPI for a measure with a
//    single negative weight,
//  * the near-uniform family lambda(eps) = (-eps, 1/m + eps, 1/m, ..., 1/m).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sanovsim/error.hpp"
#include "sanovsim/lp.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/outcome_map.hpp"
#include "sanovsim/rates.hpp"
#include "sanovsim/simulation.hpp"

namespace sanovsim {

struct ReversalProblem {
  DoubledSimulation sim;
  OutcomeMap chi;
  ProbDist target;
};

struct IProjectionOptions {
  std::size_t max_iterations = 100000;
  /// Stop once every linearized constraint is satisfied to this level.
  double gradient_tolerance = 1e-14;
  /// Optional starting tilt (one entry per observable); zero starts at nu.
  std::vector<double> initial_tilt;
};

struct IProjection {
  ProbDist g;
  double divergence = 0.0;
  /// max_i |Gamma(g)_i - f_i|
  double constraint_residual = 0.0;
  /// Distance of log(g/nu) from the span of the constraint rows and 1 on the
  /// support of g (zero at a KKT point of the I-projection).
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  /// Doubled-space slots that every feasible deviation must leave empty.
  std::vector<std::size_t> forced_zero;
};

namespace detail {

struct LinearFamily {
  std::vector<std::size_t> slots;  // support of nu in Psi
  Eigen::MatrixXd rows;            // (observables) x (slots): s_k [chi(k) = i] - f_i s_k
  Eigen::VectorXd sign;            // s_k over slots
  Eigen::VectorXd nu;              // nu over slots
};

inline LinearFamily linear_family(const ReversalProblem& prob) {
  const DoubledSimulation& sim = prob.sim;
  const std::size_t n = sim.base_size();
  const ProbDist nu = sim.as_dist();
  LinearFamily fam;
  for (std::size_t k = 0; k < 2 * n; ++k) {
    if (nu[k] > 0.0) fam.slots.push_back(k);
  }
  const auto q = static_cast<Eigen::Index>(fam.slots.size());
  const auto r = static_cast<Eigen::Index>(prob.chi.n_observables());
  fam.rows = Eigen::MatrixXd::Zero(r, q);
  fam.sign.resize(q);
  fam.nu.resize(q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const std::size_t k = fam.slots[static_cast<std::size_t>(c)];
    const double s = sim.slot_sign(k);
    fam.sign(c) = s;
    fam.nu(c) = nu[k];
    const auto obs = static_cast<Eigen::Index>(prob.chi(sim.slot_state(k)));
    for (Eigen::Index i = 0; i < r; ++i) fam.rows(i, c) = -prob.target[static_cast<std::size_t>(i)] * s;
    fam.rows(obs, c) += s;
  }
  return fam;
}

// max objective'g over {rows g = 0, 1'g = 1, g >= 0}; nullopt if infeasible.
inline std::optional<Eigen::VectorXd> maximize_over_family(const LinearFamily& fam, const Eigen::VectorXd& objective) {
  const Eigen::Index q = fam.rows.cols();
  lp::Problem p;
  p.A.resize(fam.rows.rows() + 1, q);
  p.A << fam.rows, Eigen::RowVectorXd::Ones(q);
  p.b = Eigen::VectorXd::Zero(fam.rows.rows() + 1);
  p.b(fam.rows.rows()) = 1.0;
  p.c = -objective;
  const lp::Solution sol = lp::solve(p);
  if (sol.status == lp::Status::infeasible) return std::nullopt;
  if (sol.status == lp::Status::unbounded) throw Error(Errc::internal_inconsistency, "bounded LP reported unbounded");
  return sol.x;
}

inline constexpr double kSupportTolerance = 1e-10;

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

/// Minimizes D(g || nu) over deviations g on Psi whose signed pushforward is
/// the target, i.e. subject to sum_{chi(k)=i} s_k g_k = f_i * sum_k s_k g_k.
///
/// The minimizer is an exponential tilt of nu on the largest support the
/// constraints allow; it is found by Newton's method on the convex dual
/// log sum_k nu_k exp(theta' a_k), after an LP pass removes the slots that
/// the constraints force to zero.
inline IProjection min_kl_given_pushforward(const ReversalProblem& prob, const IProjectionOptions& opt = {}) {
  if (prob.chi.domain_size() != prob.sim.base_size()) {
    throw Error(Errc::dimension_mismatch, "outcome map domain does not match the simulated measure");
  }
  require_same_labels(prob.target.labels(), prob.chi.observables());

  detail::LinearFamily fam = detail::linear_family(prob);
  const Eigen::Index q = fam.rows.cols();
  const Eigen::Index r = fam.rows.rows();

  // Feasibility with a positive cancellation denominator.
  const auto best_denominator = detail::maximize_over_family(fam, fam.sign);
  if (!best_denominator || fam.sign.dot(*best_denominator) <= kCancellationTolerance) {
    throw Error(Errc::infeasible, "no deviation pushes forward to the target");
  }

  // Facial reduction: which slots can carry mass at all.
  std::vector<bool> positive(static_cast<std::size_t>(q), false);
  auto absorb = [&](const Eigen::VectorXd& x) {
    for (Eigen::Index c = 0; c < q; ++c) {
      if (x(c) > detail::kSupportTolerance) positive[static_cast<std::size_t>(c)] = true;
    }
  };
  absorb(*best_denominator);
  std::vector<std::size_t> forced_zero;
  for (Eigen::Index c = 0; c < q; ++c) {
    if (positive[static_cast<std::size_t>(c)]) continue;
    const auto x = detail::maximize_over_family(fam, Eigen::VectorXd::Unit(q, c));
    if (x && (*x)(c) > detail::kSupportTolerance) {
      absorb(*x);
    } else {
      forced_zero.push_back(fam.slots[static_cast<std::size_t>(c)]);
    }
  }

  std::vector<Eigen::Index> live;
  for (Eigen::Index c = 0; c < q; ++c) {
    if (positive[static_cast<std::size_t>(c)]) live.push_back(c);
  }
  const auto s = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd A(r, s);
  Eigen::VectorXd log_nu(s);
  for (Eigen::Index c = 0; c < s; ++c) {
    A.col(c) = fam.rows.col(live[static_cast<std::size_t>(c)]);
    log_nu(c) = std::log(fam.nu(live[static_cast<std::size_t>(c)]));
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(r);
  if (!opt.initial_tilt.empty()) {
    if (static_cast<Eigen::Index>(opt.initial_tilt.size()) != r) {
      throw Error(Errc::dimension_mismatch, "initial tilt needs one entry per observable");
    }
    for (Eigen::Index i = 0; i < r; ++i) theta(i) = opt.initial_tilt[static_cast<std::size_t>(i)];
  }

  auto dual = [&](const Eigen::VectorXd& t) { return detail::log_sum_exp(log_nu + A.transpose() * t); };
  auto tilt = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd logits = log_nu + A.transpose() * t;
    const double lz = detail::log_sum_exp(logits);
    return Eigen::VectorXd((logits.array() - lz).exp());
  };

  std::size_t iter = 0;
  Eigen::VectorXd g_live = tilt(theta);
  for (; iter < opt.max_iterations; ++iter) {
    const Eigen::VectorXd grad = A * g_live;
    if (grad.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) break;
    const Eigen::VectorXd mean = grad;
    const Eigen::MatrixXd hess = A * g_live.asDiagonal() * A.transpose() - mean * mean.transpose();

    const double phi = dual(theta);
    auto line_search = [&](const Eigen::VectorXd& dir) -> bool {
      const double slope = grad.dot(dir);
      if (!(slope < 0.0)) return false;
      double step = 1.0;
      for (int k = 0; k < 60; ++k, step *= 0.5) {
        const Eigen::VectorXd cand = theta + step * dir;
        const double val = dual(cand);
        if (val < phi && val <= phi + 1e-4 * step * slope) {
          theta = cand;
          return true;
        }
      }
      return false;
    };

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hess);
    cod.setThreshold(1e-13);
    const Eigen::VectorXd newton = -cod.solve(grad);
    if (-grad.dot(newton) <= 1e-32) break;  // Newton decrement at rounding level
    if (!line_search(newton) && !line_search(-grad)) break;  // numerical floor
    g_live = tilt(theta);
  }
  if (iter == opt.max_iterations) {
    throw Error(Errc::non_convergence, "dual Newton iteration cap reached");
  }

  const std::size_t n = prob.sim.base_size();
  std::vector<double> g(2 * n, 0.0);
  for (Eigen::Index c = 0; c < s; ++c) {
    g[fam.slots[static_cast<std::size_t>(live[static_cast<std::size_t>(c)])]] = g_live(c);
  }
  ProbDist gd(doubled_labels(prob.sim.lam.labels()), std::move(g));

  double denom = 0.0;
  for (Eigen::Index c = 0; c < s; ++c) denom += fam.sign(live[static_cast<std::size_t>(c)]) * g_live(c);
  if (denom <= kCancellationTolerance) {
    throw Error(Errc::infeasible, "the closest deviation cancels to zero net mass", {denom});
  }

  const PushforwardResult pf = signed_pushforward(gd, prob.chi);
  double residual = 0.0;
  for (std::size_t i = 0; i < prob.target.size(); ++i) {
    residual = std::max(residual, std::abs(pf.dist[i] - prob.target[i]));
  }
  if (residual > 1e-8) {
    throw Error(Errc::non_convergence, "I-projection did not reach the target", {residual});
  }

  // KKT: log(g/nu) must lie in span{constraint rows, 1} on the support.
  Eigen::MatrixXd basis(s, r + 1);
  basis << A.transpose(), Eigen::VectorXd::Ones(s);
  const Eigen::VectorXd log_ratio = g_live.array().log().matrix() - log_nu;
  const Eigen::VectorXd coef = basis.completeOrthogonalDecomposition().solve(log_ratio);
  const double kkt = (basis * coef - log_ratio).cwiseAbs().maxCoeff();

  IProjection out{gd, 0.0, residual, kkt, iter, std::move(forced_zero)};
  out.divergence = kl_divergence(out.g, prob.sim.as_dist());
  return out;
}

/// Both sides of the signed DPI and the exact intermediate bound it rests on.
struct SdpiBoundReport {
  std::optional<std::size_t> negative_index;
  std::size_t row = 0;  // chi of the negative state
  double lam1_abs = 0.0;
  double total_weight = 1.0;
  double K_nu = 0.0;
  double K_g = 0.0;
  double normalizer = 1.0;  // F = 1 / sum_i (Tg)_i
  double d_fine = 0.0;      // D(g || nu)
  double lhs = 0.0;         // D(f || mu)
  double factor = 1.0;      // 1 + 2|lambda_1| / Lambda
  double rhs = 0.0;         // factor * D(g || nu)
  double slack = 0.0;       // rhs - lhs (first-order statement, diagnostic)
  /// Exact decomposition of D(f || mu) through T+ (should vanish).
  double identity_gap = 0.0;
  /// Right side after the classical DPI on T+; always >= lhs.
  double exact_rhs = 0.0;
  double exact_slack = 0.0;
  double nu_ratio = 0.0;  // nu_1 / K_nu
  double g_ratio = 0.0;   // g_1 / K_g
};

inline SdpiBoundReport sdpi_bound_check(const SignedMeasure& lam, const OutcomeMap& chi, const ProbDist& g) {
  const std::size_t n = lam.size();
  if (chi.domain_size() != n) throw Error(Errc::dimension_mismatch, "outcome map domain does not match the measure");
  if (g.size() != 2 * n) throw Error(Errc::dimension_mismatch, "g must live on the doubled space");

  SdpiBoundReport rep;
  for (std::size_t j = 0; j < n; ++j) {
    if (lam[j] < 0.0) {
      if (rep.negative_index) throw Error(Errc::shape_violation, "more than one negative weight");
      rep.negative_index = j;
    } else if (lam[j] == 0.0) {
      throw Error(Errc::shape_violation, "weight " + std::to_string(j) + " is zero");
    }
  }

  const DoubledSimulation sim = doubled_simulation(lam);
  const ProbDist nu_d = sim.as_dist();
  for (std::size_t k = 0; k < 2 * n; ++k) {
    if (nu_d[k] == 0.0 && g[k] > 0.0) {
      throw Error(Errc::shape_violation, "g charges slot " + nu_d.labels()[k] + " which nu never draws");
    }
  }
  const auto nu_b = reindex_to_base(sim, nu_d.probs());
  const auto g_b = reindex_to_base(sim, g.probs());
  const Eigen::Map<const Eigen::VectorXd> nu_v(nu_b.data(), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::VectorXd> g_v(g_b.data(), static_cast<Eigen::Index>(n));

  const SignedChannel ch = build_channel(lam, chi);
  const Eigen::VectorXd t_nu = ch.matrix * nu_v;
  const Eigen::VectorXd t_g = ch.matrix * g_v;
  const Eigen::VectorXd tp_nu = ch.plus * nu_v;
  const Eigen::VectorXd tp_g = ch.plus * g_v;

  const double denom = t_g.sum();
  if (!(denom > kCancellationTolerance)) {
    throw Error(Errc::signed_normalization_failure, "g cancels to non-positive net mass", {denom});
  }
  rep.total_weight = sim.total_weight;
  rep.normalizer = 1.0 / denom;
  const double F = rep.normalizer;
  const double L = rep.total_weight;

  std::vector<double> f(chi.n_observables()), mu(chi.n_observables());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fi = F * t_g(static_cast<Eigen::Index>(i));
    if (fi < -kCancellationTolerance) throw Error(Errc::negative_net_mass, "Tg has a negative component");
    f[i] = std::max(0.0, fi);
    mu[i] = std::max(0.0, L * t_nu(static_cast<Eigen::Index>(i)));
  }
  rep.lhs = kl_divergence(ProbDist(chi.observables(), f), ProbDist(chi.observables(), mu));
  rep.d_fine = kl_divergence(g, nu_d);

  const std::size_t j1 = rep.negative_index.value_or(0);
  const double nu1 = rep.negative_index ? nu_b[j1] : 0.0;
  const double g1 = rep.negative_index ? g_b[j1] : 0.0;
  rep.row = chi(j1);
  const auto i = static_cast<Eigen::Index>(rep.row);
  rep.K_nu = t_nu(i) + nu1;
  rep.K_g = t_g(i) + g1;
  rep.lam1_abs = rep.negative_index ? -lam[j1] : 0.0;

  using detail::xlogx_over_y;
  const double term_neg = F * xlogx_over_y(rep.K_g - g1, rep.K_nu - nu1);
  const double term_pos = -F * xlogx_over_y(rep.K_g + g1, rep.K_nu + nu1);
  double plus_divergence = 0.0;
  for (Eigen::Index k = 0; k < tp_g.size(); ++k) plus_divergence += xlogx_over_y(tp_g(k), tp_nu(k));
  const double log_ratio = std::log(F / L);

  rep.identity_gap = std::abs(rep.lhs - (term_neg + term_pos + F * plus_divergence + log_ratio));
  rep.exact_rhs = term_neg + term_pos + F * rep.d_fine + log_ratio;
  rep.exact_slack = rep.exact_rhs - rep.lhs;

  rep.factor = 1.0 + 2.0 * rep.lam1_abs / L;
  rep.rhs = rep.factor * rep.d_fine;
  rep.slack = rep.rhs - rep.lhs;
  rep.nu_ratio = rep.K_nu > 0.0 ? nu1 / rep.K_nu : 0.0;
  rep.g_ratio = rep.K_g > 0.0 ? g1 / rep.K_g : 0.0;
  return rep;
}

struct NearUniformConfig {
  std::size_t m = 4;
  double epsilon = 0.0;
  double c = 1.0;
  /// Distribution over observables 0..m with f_0 = 0.
  ProbDist target{std::vector<double>{0.0, 0.25, 0.25, 0.25, 0.25}};
};

struct NearUniformFamily {
  SignedMeasure lam;
  DoubledSimulation sim;
  OutcomeMap chi;
  ProbDist mu;
  ProbDist f;
  /// Deviation on the doubled space with g_0 = c*eps on the minus copy of state 0.
  ProbDist g;
  double normalizer = 1.0;  // F = 1 / (1 - 2 g_0)
};

inline void validate(const NearUniformConfig& cfg) {
  if (cfg.m < 2) throw Error(Errc::invalid_config, "m must be at least 2");
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(Errc::invalid_config, "epsilon must be finite and non-negative");
  }
  if (cfg.c == 0.0 || !std::isfinite(cfg.c)) throw Error(Errc::invalid_config, "c must be finite and nonzero");
  const double g0 = cfg.c * cfg.epsilon;
  if (g0 < 0.0) throw Error(Errc::invalid_config, "g_0 = c*eps must be non-negative");
  if (!(2.0 * g0 < 1.0)) throw Error(Errc::invalid_config, "need eps < 1/(2|c|)");
  if (cfg.target.size() != cfg.m + 1) throw Error(Errc::invalid_config, "target needs m + 1 entries");
  if (cfg.target[0] != 0.0) throw Error(Errc::invalid_config, "target must put no mass on observable 0");
}

inline SignedMeasure near_uniform_measure(std::size_t m, double epsilon) {
  const double u = 1.0 / static_cast<double>(m);
  std::vector<double> w(m + 1, u);
  w[0] = -epsilon;
  w[1] = u + epsilon;
  return SignedMeasure(std::move(w));
}

/// chi(0) = chi(1) = 1, chi(j) = j otherwise.
inline OutcomeMap near_uniform_map(std::size_t m) {
  std::vector<std::size_t> image(m + 1);
  for (std::size_t j = 0; j <= m; ++j) image[j] = j;
  image[0] = 1;
  return OutcomeMap(std::move(image), m + 1);
}

inline NearUniformFamily near_uniform_family(const NearUniformConfig& cfg) {
  validate(cfg);
  const std::size_t m = cfg.m;
  SignedMeasure lam = near_uniform_measure(m, cfg.epsilon);
  DoubledSimulation sim = doubled_simulation(lam);
  OutcomeMap chi = near_uniform_map(m);
  ProbDist mu = classical_pushforward(lam, chi);
  const ProbDist& f = cfg.target;

  // Invert f_1 = F (g_1 - g_0), f_j = F g_j with F = 1 / (1 - 2 g_0).
  const double g0 = cfg.c * cfg.epsilon;
  const double inv_f = 1.0 - 2.0 * g0;
  std::vector<double> base(m + 1);
  base[0] = g0;
  base[1] = f[1] * inv_f + g0;
  for (std::size_t j = 2; j <= m; ++j) base[j] = f[j] * inv_f;
  std::vector<double> doubled(2 * (m + 1), 0.0);
  doubled[m + 1] = base[0];  // minus copy of state 0
  for (std::size_t j = 1; j <= m; ++j) doubled[j] = base[j];

  ProbDist g(doubled_labels(lam.labels()), std::move(doubled));
  return NearUniformFamily{std::move(lam), std::move(sim), std::move(chi), std::move(mu), f, std::move(g),
                           1.0 / inv_f};
}

struct GapEvaluation {
  double direct = 0.0;       // D(g || nu) - D(f || mu) from the family's vectors
  double closed_form = 0.0;  // analytic expression in (eps, c, f_1, D(f || mu))
};

inline constexpr double kGapAgreement = 1e-10;

/// Delta(eps) = D(g || nu) - D(f || mu), evaluated two independent ways.
/// Throws InternalInconsistency if they disagree by more than 1e-10.
inline GapEvaluation near_uniform_gap(const NearUniformConfig& cfg) {
  const NearUniformFamily fam = near_uniform_family(cfg);
  GapEvaluation out;
  out.direct = kl_divergence(fam.g, fam.sim.as_dist()) - kl_divergence(fam.f, fam.mu);

  const double m = static_cast<double>(cfg.m);
  const double e = cfg.epsilon;
  const double c = cfg.c;
  const double f1 = cfg.target[1];
  std::vector<double> uniform(cfg.m + 1, 1.0 / m);
  uniform[0] = 0.0;
  const double d_coarse = kl_divergence(cfg.target, ProbDist(cfg.target.labels(), uniform));
  const double ce = c * e;
  const double t = ce + (1.0 - 2.0 * ce) * f1;
  using detail::xlogx_over_y;
  out.closed_form = std::log1p(2.0 * e) + (e == 0.0 ? 0.0 : ce * std::log(c)) + xlogx_over_y(t, 1.0 / m + e) -
                    2.0 * ce * d_coarse - (1.0 - 2.0 * ce) * xlogx_over_y(f1, 1.0 / m) +
                    (1.0 - f1) * (1.0 - 2.0 * ce) * std::log1p(-2.0 * ce);

  if (!(std::abs(out.direct - out.closed_form) <= kGapAgreement)) {
    throw Error(Errc::internal_inconsistency, "direct and closed-form gaps disagree",
                {out.direct, out.closed_form});
  }
  return out;
}

struct DerivativeEstimate {
  double step = 1e-4;
  /// Second-order forward difference (-3 D(0) + 4 D(h) - D(2h)) / 2h.
  double finite_difference = 0.0;
  /// 2 + c log c + c log(f_1 m) - f_1 m - 2c D(f || mu) - c
  double analytic = 0.0;
  /// -2 D(f || mu), the large-sample value at c = 1, f_1 = 1/m.
  double minus_twice_kl = 0.0;
};

/// d Delta / d eps at eps = 0, numerically and in closed form.
inline DerivativeEstimate near_uniform_derivative(const NearUniformConfig& cfg, double h = 1e-4) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw Error(Errc::step_too_large, "step must lie in [1e-6, 1e-3]");
  NearUniformConfig at = cfg;
  auto gap_at = [&](double eps) {
    at.epsilon = eps;
    return near_uniform_gap(at).direct;
  };
  DerivativeEstimate d;
  d.step = h;
  d.finite_difference = (-3.0 * gap_at(0.0) + 4.0 * gap_at(h) - gap_at(2.0 * h)) / (2.0 * h);

  const double m = static_cast<double>(cfg.m);
  const double c = cfg.c;
  const double f1 = cfg.target[1];
  std::vector<double> uniform(cfg.m + 1, 1.0 / m);
  uniform[0] = 0.0;
  const double d_coarse = kl_divergence(cfg.target, ProbDist(cfg.target.labels(), uniform));
  const double log_f1m = f1 > 0.0 ? std::log(f1 * m) : -kInf;
  d.analytic = 2.0 + c * std::log(c) + c * log_f1m - f1 * m - 2.0 * c * d_coarse - c;
  d.minus_twice_kl = -2.0 * d_coarse;
  return d;
}

}  // namespace sanovsim

#endif  // SANOVSIM_REVERSAL_HPP
