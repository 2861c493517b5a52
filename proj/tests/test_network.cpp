#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "spmvd/network.hpp"
#include "spmvd/oracle.hpp"
#include "spmvd/stats.hpp"
#include "test_support.hpp"

namespace spmvd {
namespace {

using testing::random_clamp;
using testing::random_params;
using testing::random_state;

TEST(Sigmoid, ReferencePoints) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  // 1 / (1 + e^2) evaluated in long double.
  const long double expected = 1.0L / (1.0L + std::exp(2.0L));
  EXPECT_NEAR(sigmoid(-2.0), static_cast<double>(expected), 1e-16);
  EXPECT_NEAR(sigmoid(-2.0), 0.11920292202211755, 1e-16);
}

TEST(Sigmoid, SymmetryMonotoneAndSaturation) {
  UniformStream s(1);
  double prev = sigmoid(-50.0);
  for (double x = -50.0; x <= 50.0; x += 0.25) {
    const double v = sigmoid(x);
    EXPECT_GE(v, prev);
    prev = v;
    EXPECT_NEAR(1.0 - sigmoid(x), sigmoid(-x), 1e-15);
  }
  for (double x : {-1e308, -1e6, -800.0, 800.0, 1e6, 1e308}) {
    const double v = sigmoid(x);
    EXPECT_FALSE(std::isnan(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(sigmoid(1e6), 1.0);
  EXPECT_EQ(sigmoid(-1e6), 0.0);
}

TEST(LocalField, Examples) {
  const NetworkParams p(2, {0.0, 1.0, 1.0, 0.0}, {0.5, -0.5});
  const auto u = local_field(p, NetworkState{1, 1});
  EXPECT_DOUBLE_EQ(u[0], 1.5);
  EXPECT_DOUBLE_EQ(u[1], 0.5);

  const NetworkParams zero(3);
  for (double f : local_field(zero, NetworkState{1, 0, 1})) EXPECT_EQ(f, 0.0);

  const NetworkParams one(1, {2.0}, {-1.0});
  EXPECT_DOUBLE_EQ(local_field(one, NetworkState{1})[0], 1.0);
}

TEST(LocalField, DimensionMismatch) {
  const NetworkParams p(2);
  EXPECT_THROW(local_field(p, NetworkState{1, 0, 1}), DimensionError);
  EXPECT_THROW(NetworkParams(2, {1.0}, {0.0, 0.0}), DimensionError);
  EXPECT_THROW(NetworkState({0, 2}), Error);
}

TEST(TransitionProbability, Examples) {
  const NetworkParams zero(2);
  for (std::uint64_t a = 0; a < 4; ++a)
    for (std::uint64_t b = 0; b < 4; ++b)
      EXPECT_DOUBLE_EQ(transition_probability(zero, NetworkState::from_index(2, a),
                                              NetworkState::from_index(2, b)),
                       0.25);
  const NetworkParams p(1, {0.0}, {std::log(3.0)});
  EXPECT_NEAR(transition_probability(p, NetworkState{0}, NetworkState{1}), 0.75, 1e-15);
  EXPECT_NEAR(transition_probability(p, NetworkState{0}, NetworkState{0}), 0.25, 1e-15);
}

TEST(TransitionProbability, ProductFormsAgreeAndRowsSumToOne) {
  UniformStream s(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const NetworkParams p = random_params(n, 3.0, s);
    for (int rep = 0; rep < 4; ++rep) {
      const NetworkState x0 = random_state(n, s);
      double row = 0.0;
      for (std::uint64_t idx = 0; idx < (1ULL << n); ++idx) {
        const NetworkState x1 = NetworkState::from_index(n, idx);
        const double a = transition_probability(p, x0, x1);
        const double b = transition_probability_bernoulli(p, x0, x1);
        EXPECT_NEAR(a, b, 1e-12);
        row += a;
      }
      EXPECT_NEAR(row, 1.0, 1e-10);
    }
  }
}

TEST(Step, SaturatedBiasesGiveAllOnes) {
  NetworkParams p(4);
  for (std::size_t i = 0; i < 4; ++i) p.bias(i) = 1e6;
  UniformStream s(3);
  const NetworkState x = step(p, NetworkState(4), s);
  EXPECT_EQ(x, (NetworkState{1, 1, 1, 1}));
}

TEST(Step, ConsumesExactlyNUniformsAndIsDeterministic) {
  UniformStream s(1);
  const NetworkParams p = random_params(5, 1.0, s);
  std::vector<std::size_t> nodes{1, 3};
  std::vector<std::uint8_t> vals{1, 0};
  const ClampSpec clamp(5, nodes, vals);
  UniformStream a(77);
  UniformStream b(77);
  const NetworkState x0{0, 1, 1, 0, 1};
  const NetworkState ya = step(p, x0, clamp, a);
  const NetworkState yb = step(p, x0, clamp, b);
  EXPECT_EQ(ya, yb);
  EXPECT_EQ(a.position(), 5U);
}

TEST(Step, ZeroParamsBitFrequencyIsHalf) {
  const NetworkParams p(3);
  UniformStream s(5);
  NetworkState x(3);
  std::vector<RunningMoments> freq(3);
  for (int t = 0; t < 100000; ++t) {
    x = step(p, x, s);
    for (std::size_t i = 0; i < 3; ++i) freq[i].add(x[i]);
  }
  for (const auto& f : freq) EXPECT_NEAR(f.mean(), 0.5, 3.0 * f.standard_error());
}

TEST(Step, EmpiricalKernelMatchesTransitionProbability) {
  UniformStream gen(21);
  for (std::size_t n = 1; n <= 3; ++n) {
    const NetworkParams p = random_params(n, 1.5, gen);
    const NetworkState x0 = random_state(n, gen);
    std::vector<std::uint64_t> counts(1ULL << n, 0);
    UniformStream s(100 + n);
    const std::size_t draws = 100000;
    for (std::size_t t = 0; t < draws; ++t) ++counts[step(p, x0, s).index()];
    for (std::uint64_t idx = 0; idx < counts.size(); ++idx) {
      const double prob = transition_probability(p, x0, NetworkState::from_index(n, idx));
      const double se = std::sqrt(prob * (1.0 - prob) / draws);
      EXPECT_NEAR(static_cast<double>(counts[idx]) / draws, prob, 4.0 * se + 1e-12)
          << "n=" << n << " state=" << idx;
    }
  }
}

TEST(Step, ClampedBitsNeverChange) {
  UniformStream s(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const NetworkParams p = random_params(n, 4.0, s);
    const ClampSpec clamp = random_clamp(n, s);
    NetworkState x = random_state(n, s);
    clamp.apply(x);
    for (int t = 0; t < 50; ++t) {
      const NetworkState y = step(p, x, clamp, s);
      for (std::size_t i = 0; i < n; ++i)
        if (clamp.is_clamped(i)) {
          ASSERT_EQ(y[i], x[i]);
        }
      x = y;
    }
  }
}

TEST(ClampSpec, RejectsBadInput) {
  std::vector<std::size_t> nodes{0, 0};
  std::vector<std::uint8_t> vals{1, 0};
  EXPECT_THROW(ClampSpec(3, nodes, vals), Error);
  std::vector<std::size_t> far{5};
  std::vector<std::uint8_t> one{1};
  EXPECT_THROW(ClampSpec(3, far, one), DimensionError);
}

TEST(ContractionEpsilon, Examples) {
  EXPECT_DOUBLE_EQ(contraction_epsilon(NetworkParams(3)), 0.125);
  EXPECT_NEAR(contraction_epsilon(NetworkParams(1, {1.0}, {1.0})), 0.11920292202211755, 1e-16);
  EXPECT_DOUBLE_EQ(contraction_epsilon(NetworkParams(2)), 0.25);
}

TEST(ContractionEpsilon, UsesMaxRowAbsoluteSum) {
  // Row sums |.|: 3 and 0.5; max bias 2. Column sums would give 2.5.
  const NetworkParams p(2, {1.0, -2.0, 0.5, 0.0}, {0.0, -2.0});
  EXPECT_DOUBLE_EQ(weight_inf_norm(p), 3.0);
  EXPECT_NEAR(contraction_epsilon(p), std::pow(sigmoid(-5.0), 2.0), 1e-18);
}

TEST(ContractionEpsilon, LowerBoundsEveryKernelEntry) {
  UniformStream s(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const NetworkParams p = random_params(n, 1.0, s);
    const TransitionMatrix m = build_transition_matrix(p);
    EXPECT_GE(m.min_entry(), contraction_epsilon(p) * (1.0 - 1e-12));
  }
}

}  // namespace
}  // namespace spmvd
