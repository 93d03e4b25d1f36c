#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/random.hpp"

using namespace sanovsim;

TEST(Measures, KlOfBinaryPair) {
  const ProbDist q({0.7, 0.3});
  const ProbDist p({0.5, 0.5});
  EXPECT_NEAR(kl_divergence(q, p), 0.0822828785, 1e-10);
  EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-15);
}

TEST(Measures, KlMatchesBellRow) {
  const ProbDist f({2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0});
  const ProbDist mu({0.5, 0.0, 0.0, 0.5});
  EXPECT_NEAR(kl_divergence(f, mu), 0.056633012265, 1e-12);
}

TEST(Measures, KlInfiniteOffSupport) {
  const ProbDist q({0.5, 0.5});
  const ProbDist p({1.0, 0.0});
  EXPECT_TRUE(std::isinf(kl_divergence(q, p)));
  EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
}

TEST(Measures, KlNonNegativeOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(5), b(5);
    double sa = 0, sb = 0;
    for (int i = 0; i < 5; ++i) {
      sa += a[static_cast<std::size_t>(i)] = u(rng);
      sb += b[static_cast<std::size_t>(i)] = u(rng) + 1e-3;
    }
    for (auto& x : a) x /= sa;
    for (auto& x : b) x /= sb;
    const double d = kl_divergence(ProbDist(a), ProbDist(b));
    EXPECT_GE(d, 0.0);
    EXPECT_NEAR(d, oracle::kl(a, b), 1e-13);
  }
}

TEST(Measures, LabelMismatchIsRejected) {
  const ProbDist q({"x", "y"}, {0.5, 0.5});
  const ProbDist p({"x", "z"}, {0.5, 0.5});
  try {
    kl_divergence(q, p);
    FAIL() << "expected LabelMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::label_mismatch);
  }
}

TEST(Measures, ProbDistValidation) {
  EXPECT_THROW(ProbDist({0.5, 0.6}), Error);
  EXPECT_THROW(ProbDist({1.2, -0.2}), Error);
  EXPECT_THROW(ProbDist({"a", "a"}, {0.5, 0.5}), Error);
  EXPECT_THROW(ProbDist({"a"}, {0.5, 0.5}), Error);
  // Within tolerance the weights are rescaled onto the simplex.
  const ProbDist p({0.5 + 4e-10, 0.5});
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Measures, SignedMeasureAllowsNegatives) {
  const SignedMeasure lam({-0.125, 0.625, 0.5});
  EXPECT_FALSE(lam.is_nonnegative());
  EXPECT_DOUBLE_EQ(total_variation_weight(lam), 1.25);
  EXPECT_THROW(SignedMeasure({0.5, 0.6}), Error);
  EXPECT_TRUE(SignedMeasure({0.25, 0.75}).is_nonnegative());
  EXPECT_DOUBLE_EQ(total_variation_weight(SignedMeasure({0.25, 0.75})), 1.0);
}

TEST(Measures, IndexLabelsAreDefaulted) {
  const ProbDist p({0.25, 0.75});
  ASSERT_EQ(p.labels().size(), 2u);
  EXPECT_EQ(p.labels()[0], "0");
  EXPECT_EQ(p.labels()[1], "1");
  EXPECT_EQ(index_labels(3, "w")[2], "w2");
}

TEST(Measures, FrequencyDistFromCounts) {
  const FrequencyDist f({3, 1, 0});
  EXPECT_EQ(f.n_samples(), 4u);
  EXPECT_DOUBLE_EQ(f.probs()[0], 0.75);
  EXPECT_DOUBLE_EQ(f.probs()[2], 0.0);
  try {
    empirical_from_counts({0, 0});
    FAIL() << "expected EmptySample";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_sample);
  }
}

TEST(Measures, L1Distance) {
  EXPECT_DOUBLE_EQ(l1_distance(ProbDist({1.0, 0.0}), ProbDist({0.0, 1.0})), 2.0);
}

TEST(Random, StreamsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(stream_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(stream_seed(42, 3), stream_seed(42, 3));
  Engine a = make_engine(5, 1), b = make_engine(5, 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(Random, Uniform01InRange) {
  Engine eng = make_engine(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(eng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

// Cross-check the CDF sampler against std::discrete_distribution: both sets
// of frequencies must sit within 5 binomial standard errors of p.
TEST(Random, CategoricalSamplerAgreesWithStd) {
  const std::vector<double> p = {0.05, 0.0, 0.3, 0.15, 0.2, 0.1, 0.1, 0.05, 0.05};
  const int n = 200000;
  const CategoricalSampler draw(p);
  Engine eng = make_engine(9);
  std::mt19937_64 ref(9);
  std::discrete_distribution<std::size_t> std_draw(p.begin(), p.end());
  std::vector<int> ours(p.size()), theirs(p.size());
  for (int i = 0; i < n; ++i) {
    ++ours[draw(eng)];
    ++theirs[std_draw(ref)];
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double se = std::sqrt(p[i] * (1 - p[i]) / n);
    EXPECT_NEAR(ours[i] / double(n), p[i], 5 * se + 1e-12) << "category " << i;
    EXPECT_NEAR(theirs[i] / double(n), p[i], 5 * se + 1e-12) << "category " << i;
  }
  EXPECT_EQ(ours[1], 0);
}
