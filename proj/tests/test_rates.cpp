#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sanovsim/rates.hpp"
#include "sanovsim/scenario.hpp"
#include "sanovsim/simulation.hpp"

using namespace sanovsim;

namespace {

// Binary ball probability and lattice min-KL by direct summation over k.
struct BinaryOracle {
  double probability = 0.0;
  double min_kl = std::numeric_limits<double>::infinity();
};

BinaryOracle binary_oracle(double p0, double c0, double radius, int n) {
  BinaryOracle o;
  for (int k = 0; k <= n; ++k) {
    const double x = k / static_cast<double>(n);
    if (2.0 * std::abs(x - c0) > radius + 1e-12) continue;
    o.probability += std::exp(oracle::multinomial_log_pmf({k, n - k}, {p0, 1.0 - p0}));
    o.min_kl = std::min(o.min_kl, oracle::kl({x, 1.0 - x}, {p0, 1.0 - p0}));
  }
  return o;
}

ProbDist random_dist(std::mt19937_64& rng, std::size_t k, double floor = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(k);
  double s = 0.0;
  for (auto& x : w) s += x = floor + u(rng);
  for (auto& x : w) x /= s;
  return ProbDist(w);
}

}  // namespace

TEST(Rates, SanovProbability) {
  EXPECT_NEAR(sanov_probability(0.0566, 100), 0.0034825169, 1e-10);
  EXPECT_EQ(sanov_probability(kInf, 10), 0.0);
  EXPECT_EQ(sanov_probability(0.0, 10), 1.0);
  EXPECT_THROW(sanov_probability(-1.0, 10), Error);
}

TEST(Rates, ExactBallSmallCase) {
  const ProbDist p({0.5, 0.5});
  const BallSpec ball{ProbDist({0.7, 0.3}), 0.02};
  // Only k = 7 lies in the ball: C(10, 7) / 2^10.
  EXPECT_NEAR(exact_ball_probability(p, ball, 10), 0.1171875, 1e-15);
}

TEST(Rates, ExactBallMatchesEnumeration) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const ProbDist p = random_dist(rng, 3, 0.1);
    const ProbDist c = random_dist(rng, 3);
    const double radius = 0.1 + 0.05 * (t % 6);
    const int n = 10 + 3 * t;
    const std::vector<double> pv(p.probs().begin(), p.probs().end());
    const std::vector<double> cv(c.probs().begin(), c.probs().end());
    const double ref = oracle::ball_probability(pv, cv, radius, n);
    EXPECT_NEAR(exact_ball_probability(p, {c, radius}, static_cast<std::uint64_t>(n)), ref, 1e-12 + 1e-10 * ref)
        << "trial " << t;
  }
}

TEST(Rates, ExactBallHandlesZeroCategories) {
  const ProbDist p({0.5, 0.0, 0.5});
  const ProbDist c({0.4, 0.1, 0.5});
  const double ref = oracle::ball_probability({0.5, 0.0, 0.5}, {0.4, 0.1, 0.5}, 0.3, 20);
  EXPECT_NEAR(exact_ball_probability(p, {c, 0.3}, 20), ref, 1e-14);
  // The zero category alone already costs 0.1 of the radius.
  EXPECT_EQ(exact_ball_probability(p, {c, 0.05}, 20), 0.0);
}

TEST(Rates, LargeRadiusCoversEverything) {
  const ProbDist p({0.5, 0.5});
  EXPECT_NEAR(exact_ball_probability(p, {ProbDist({0.7, 0.3}), 2.0}, 400), 1.0, 1e-12);
}

TEST(Rates, SanovGapSequence) {
  const ProbDist p({0.5, 0.5});
  const BallSpec ball{ProbDist({0.7, 0.3}), 0.02};
  double prev_gap = kInf, prev_limit_gap = kInf;
  const double limit = kl_divergence(ball.center, p);
  EXPECT_NEAR(limit, 0.0822828785, 1e-10);
  for (int n : {50, 100, 200, 400}) {
    const BinaryOracle o = binary_oracle(0.5, 0.7, 0.02, n);
    const auto un = static_cast<std::uint64_t>(n);
    EXPECT_NEAR(exact_ball_probability(p, ball, un), o.probability, 1e-12 * o.probability);
    EXPECT_NEAR(min_ball_kl(p, ball, un), o.min_kl, 1e-14);
    const double rate = empirical_rate(p, ball, un);
    EXPECT_NEAR(rate, -std::log(o.probability) / n, 1e-12);
    const double gap = std::abs(rate - o.min_kl);
    const double limit_gap = std::abs(rate - limit);
    EXPECT_LT(gap, prev_gap) << "n = " << n;
    EXPECT_LT(limit_gap, prev_limit_gap) << "n = " << n;
    prev_gap = gap;
    prev_limit_gap = limit_gap;
  }
  EXPECT_NEAR(empirical_rate(p, ball, 50), 0.12430, 5e-6);
  EXPECT_NEAR(empirical_rate(p, ball, 400), 0.08044, 5e-6);
}

TEST(Rates, LatticeTooLarge) {
  const ProbDist p(std::vector<double>(12, 1.0 / 12));
  try {
    exact_ball_probability(p, {p, 0.1}, 1000);
    FAIL() << "expected TooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_large);
  }
}

TEST(Rates, ZeroProbabilityBall) {
  const ProbDist p({1.0, 0.0});
  try {
    empirical_rate(p, {ProbDist({0.0, 1.0}), 0.1}, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_probability);
  }
  EXPECT_THROW(empirical_rate_from_probability(0.0, 10), Error);
}

TEST(Rates, MonteCarloAgreesWithExact) {
  const ProbDist p({0.5, 0.3, 0.2});
  const BallSpec ball{ProbDist({0.45, 0.35, 0.2}), 0.15};
  for (std::uint64_t n : {20u, 60u}) {
    const double exact = exact_ball_probability(p, ball, n);
    const McEstimate mc = mc_ball_probability(p, ball, n, 40000, 99);
    const double se = std::sqrt(exact * (1 - exact) / 40000.0);
    EXPECT_NEAR(mc.estimate, exact, 3 * se) << "n = " << n;
    EXPECT_EQ(mc.trials, 40000u);
  }
}

TEST(Rates, MonteCarloIndependentOfThreads) {
  const ProbDist p({0.5, 0.5});
  const BallSpec ball{ProbDist({0.6, 0.4}), 0.1};
  const McEstimate a = mc_ball_probability(p, ball, 50, 10000, 1234, 1);
  const McEstimate b = mc_ball_probability(p, ball, 50, 10000, 1234, 4);
  const McEstimate c = mc_ball_probability(p, ball, 50, 10000, 1235, 1);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_NE(a.hits, c.hits);
  EXPECT_THROW(mc_ball_probability(p, ball, 50, 0, 1), Error);
}

TEST(Rates, BellRateComparison) {
  const BellFixture fx = bell_fixture();
  const DoubledSimulation sim = doubled_simulation(fx.lam);
  std::vector<double> g(32, 0.0);
  g[0] = 0.284;
  g[1] = 0.078;
  g[4] = 0.078;
  g[26] = 0.170;
  g[11] = 0.156;
  g[14] = 0.156;
  g[15] = 0.078;
  const ProbDist gd(doubled_labels(fx.lam.labels()), g);
  const OutcomeMap chi = context_outcome_map(PhaseSpace(bell_scenario()), {0, 0});
  const ProbDist f(chi.observables(), {2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0});
  const RateComparison rc = compare_rates(gd, sim.as_dist(), f, classical_pushforward(fx.lam, chi), 100);
  EXPECT_NEAR(rc.d_coarse, 0.0566, 1e-4);
  EXPECT_NEAR(rc.d_fine, 0.0541, 5e-4);
  EXPECT_NEAR(rc.d_fine, 0.0541334520, 1e-10);
  EXPECT_TRUE(rc.reversal);
  EXPECT_GT(rc.p_fine, rc.p_coarse);
}

TEST(Rates, SmallDeviationEqualsChiSquare) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(t % 6);
    std::vector<double> pv(k), qv(k);
    {
      const ProbDist p = random_dist(rng, k, 0.01);
      const ProbDist q = random_dist(rng, k);
      pv.assign(p.probs().begin(), p.probs().end());
      qv.assign(q.probs().begin(), q.probs().end());
    }
    if (t % 3 == 0) {  // zero out one category in both
      pv[0] = qv[0] = 0.0;
      double sp = 0, sq = 0;
      for (std::size_t i = 0; i < k; ++i) sp += pv[i], sq += qv[i];
      for (std::size_t i = 0; i < k; ++i) pv[i] /= sp, qv[i] /= sq;
    }
    const ProbDist p(pv), q(qv);
    double ref = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (pv[i] > 0) ref += (qv[i] - pv[i]) * (qv[i] - pv[i]) / pv[i];
    }
    const double form = small_deviation_form(q, p);
    EXPECT_NEAR(form, ref, 1e-10 * std::max(1.0, ref)) << "trial " << t;
    EXPECT_NEAR(chi_square_statistic(q, p), ref, 1e-12 * std::max(1.0, ref));
  }
}

TEST(Rates, SmallDeviationNeedsSupport) {
  try {
    small_deviation_form(ProbDist({0.5, 0.5}), ProbDist({1.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::singular_covariance);
  }
}

TEST(Rates, IsingBaselineAtUnitCoupling) {
  const IsingBaseline b = ising_baseline(1.0, 1.0);
  EXPECT_NEAR(b.fine[0], 0.4403985390, 1e-10);
  EXPECT_NEAR(b.fine[0], std::exp(1.0) / (2 * std::exp(1.0) + 2 * std::exp(-1.0)), 1e-15);
  EXPECT_EQ(b.fine[0], b.fine[3]);
  EXPECT_EQ(b.fine[1], b.fine[2]);
  EXPECT_EQ(b.coarse[0], 0.5);
  EXPECT_EQ(b.coarse[1], 0.5);
  EXPECT_NEAR(b.partition, 2 * std::exp(1.0) + 2 * std::exp(-1.0), 1e-12);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(b.kernel.row(i).sum(), 1.0);
  EXPECT_THROW(ising_baseline(1.0, 0.0), Error);
  EXPECT_THROW(ising_baseline(1.0, -1.0), Error);
}

TEST(Rates, IsingCoarseIsHalfForAnyParameters) {
  for (double J : {-2.0, -0.3, 0.0, 0.7, 5.0}) {
    for (double T : {0.1, 1.0, 3.0}) {
      const IsingBaseline b = ising_baseline(J, T);
      EXPECT_EQ(b.coarse[0], 0.5);
      EXPECT_EQ(b.coarse[1], 0.5);
    }
  }
}

TEST(Rates, IsingStrictDpi) {
  const IsingBaseline b = ising_baseline(1.0, 1.0);
  std::mt19937_64 rng(31);
  for (int t = 0; t < 1000; ++t) {
    const ProbDist g0 = random_dist(rng, 4, 0.02);
    const ProbDist g(ising_microstates(), {g0.probs().begin(), g0.probs().end()});
    const double fine = kl_divergence(g, b.fine);
    const double coarse = kl_divergence(apply_ising_kernel(g), b.coarse);
    EXPECT_GT(fine - coarse, 1e-12) << "trial " << t;
  }
  EXPECT_EQ(kl_divergence(b.fine, b.fine), 0.0);
  EXPECT_EQ(kl_divergence(apply_ising_kernel(b.fine), b.coarse), 0.0);
}

TEST(Rates, IsingSmallDeviationDpi) {
  const IsingBaseline b = ising_baseline(1.0, 1.0);
  std::mt19937_64 rng(32);
  std::normal_distribution<double> z(0.0, 1e-3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> d(4);
    double mean = 0;
    for (auto& x : d) mean += x = z(rng);
    mean /= 4;
    std::vector<double> g(4);
    for (std::size_t i = 0; i < 4; ++i) g[i] = b.fine[i] + d[i] - mean;
    const ProbDist gd(ising_microstates(), g);
    EXPECT_GE(small_deviation_form(gd, b.fine) + 1e-15,
              small_deviation_form(apply_ising_kernel(gd), b.coarse));
  }
}
