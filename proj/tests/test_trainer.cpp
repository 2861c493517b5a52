#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spmvd/oracle.hpp"
#include "spmvd/stats.hpp"
#include "spmvd/trainer.hpp"

namespace spmvd {
namespace {

TEST(ErrorFunction, CountsMismatchedOutputs) {
  const std::vector<std::size_t> out{2, 3};
  const std::vector<std::uint8_t> label{1, 0};
  EXPECT_EQ(error_function(NetworkState{0, 0, 1, 0}, label, out), 0.0);
  EXPECT_EQ(error_function(NetworkState{0, 0, 0, 1}, label, out), 2.0);

  std::vector<std::size_t> ten(10);
  std::vector<std::uint8_t> lab(10, 0);
  NetworkState x(10);
  for (std::size_t k = 0; k < 10; ++k) ten[k] = k;
  x.set(0, true);
  x.set(1, true);
  lab[2] = 1;  // outputs 0, 1 wrongly on, output 2 wrongly off
  EXPECT_EQ(error_function(x, lab, ten), 3.0);
}

TEST(ErrorFunction, LabelCostAgrees) {
  const std::vector<std::uint8_t> label{0, 1, 1};
  const std::vector<std::size_t> out{2, 3, 4};
  const LabelCost cost(label, 2);
  for (std::uint64_t idx = 0; idx < 32; ++idx) {
    const NetworkState x = NetworkState::from_index(5, idx);
    EXPECT_EQ(cost(x), error_function(x, label, out));
  }
  const std::vector<std::size_t> bad{9};
  const std::vector<std::uint8_t> one{1};
  EXPECT_THROW(error_function(NetworkState(3), one, bad), DimensionError);
}

TEST(InitParams, RangeMeanAndDeterminism) {
  TrainConfig cfg;
  cfg.n_input = 100;
  cfg.n_output = 216;  // n = 316, n^2 + n = 100172 entries
  UniformStream s(1);
  const NetworkParams p = init_params(cfg, s);
  RunningMoments m;
  for (double v : p.values()) {
    ASSERT_GE(v, -0.01);
    ASSERT_LE(v, 0.01);
    m.add(v);
  }
  EXPECT_GE(p.size(), 100000U);
  EXPECT_NEAR(m.mean(), 0.0, 4.0 * m.standard_error());
  UniformStream t(1);
  EXPECT_EQ(init_params(cfg, t), p);
}

TEST(SyntheticDataset, StripesAreOneHotAndSeparable) {
  UniformStream s(2);
  const Dataset d = make_synthetic_dataset(SyntheticKind::stripes, 6, 4, 2, s);
  ASSERT_EQ(d.size(), 6U);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_TRUE(d.patterns[i].is_one_hot());
    const auto expected = i % 2 == 0 ? std::vector<std::uint8_t>{1, 1, 0, 0}
                                     : std::vector<std::uint8_t>{0, 0, 1, 1};
    EXPECT_EQ(d.patterns[i].input, expected);
    EXPECT_EQ(d.patterns[i].label[i % 2], 1);
  }
}

TEST(SyntheticDataset, DeterministicUnderSeedAndParityLabels) {
  UniformStream a(5);
  UniformStream b(5);
  const Dataset da = make_synthetic_dataset(SyntheticKind::parity, 40, 5, 2, a);
  const Dataset db = make_synthetic_dataset(SyntheticKind::parity, 40, 5, 2, b);
  EXPECT_EQ(da, db);
  for (const auto& p : da.patterns) {
    EXPECT_TRUE(p.is_one_hot());
    const unsigned parity = p.input[0] ^ p.input[1] ^ p.input[2];
    EXPECT_EQ(p.label[parity], 1);
  }
  UniformStream c(5);
  const Dataset flipped = make_synthetic_dataset(SyntheticKind::stripes, 40, 4, 2, c, 0.5);
  UniformStream d(5);
  EXPECT_EQ(make_synthetic_dataset(SyntheticKind::stripes, 40, 4, 2, d, 0.5), flipped);
  EXPECT_THROW(parse_synthetic_kind("spiral"), ConfigError);
}

class IdxFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("spmvd_idx_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string write(const std::string& name, const std::vector<unsigned char>& bytes) {
    const auto path = (dir_ / name).string();
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return path;
  }

  std::filesystem::path dir_;
};

// Two 2x2 images: pixels (0, 127, 128, 255) and (255, 0, 200, 1); labels 3, 9.
std::vector<unsigned char> two_images() {
  return {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 127, 128, 255, 255, 0, 200, 1};
}
std::vector<unsigned char> two_labels() { return {0, 0, 8, 1, 0, 0, 0, 2, 3, 9}; }

TEST_F(IdxFiles, ParsesHeaderThresholdAndLabels) {
  const Dataset d = load_idx(write("img", two_images()), write("lab", two_labels()));
  ASSERT_EQ(d.size(), 2U);
  EXPECT_EQ(d.n_input, 4U);
  EXPECT_EQ(d.n_output, 10U);
  EXPECT_EQ(d.patterns[0].input, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(d.patterns[1].input, (std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(d.patterns[0].label[3], 1);
  EXPECT_EQ(d.patterns[1].label[9], 1);
  EXPECT_TRUE(d.patterns[0].is_one_hot());
  EXPECT_EQ(load_idx(write("i2", two_images()), write("l2", two_labels()), 1).size(), 1U);
}

TEST_F(IdxFiles, RejectsBadInput) {
  auto img = two_images();
  img[3] = 0x04;
  EXPECT_THROW(load_idx(write("bad_magic", img), write("lab", two_labels())), FormatError);
  auto shortened = two_images();
  shortened.pop_back();
  EXPECT_THROW(load_idx(write("short", shortened), write("lab", two_labels())), FormatError);
  auto labels = two_labels();
  labels[7] = 3;
  labels.push_back(0);
  EXPECT_THROW(load_idx(write("img", two_images()), write("lab3", labels)), FormatError);
  EXPECT_THROW(load_idx((dir_ / "missing").string(), write("lab", two_labels())), IoError);
}

Dataset stripes() {
  UniformStream s(0);
  return make_synthetic_dataset(SyntheticKind::stripes, 2, 4, 2, s);
}

TEST(SgdTrain, ZeroStepLeavesParamsAndTrajectoryFlat) {
  TrainConfig cfg;
  cfg.step_size = 0.0;
  cfg.updates = 200;
  cfg.report_every = 50;
  UniformStream s(3);
  const TrainTrajectory t = sgd_train(cfg, stripes(), s);
  ASSERT_EQ(t.rows.size(), 5U);
  for (const auto& r : t.rows) EXPECT_EQ(r.empirical_error, t.rows.front().empirical_error);
  UniformStream again(3);
  UniformStream init = again.derive(0);
  EXPECT_EQ(t.final_params, init_params(cfg, init));
}

TEST(SgdTrain, RowCountAndIncreasingUpdates) {
  TrainConfig cfg;
  cfg.updates = 1000;
  cfg.report_every = 500;
  UniformStream s(4);
  const TrainTrajectory t = sgd_train(cfg, stripes(), s);
  ASSERT_EQ(t.rows.size(), 3U);
  for (std::size_t k = 0; k < t.rows.size(); ++k) EXPECT_EQ(t.rows[k].update, 500 * k);
}

TEST(SgdTrain, BitIdenticalUnderSeed) {
  TrainConfig cfg;
  cfg.updates = 300;
  cfg.report_every = 100;
  cfg.step_size = 0.05;
  UniformStream a(9);
  UniformStream b(9);
  const TrainTrajectory ta = sgd_train(cfg, stripes(), a);
  const TrainTrajectory tb = sgd_train(cfg, stripes(), b);
  EXPECT_EQ(ta.errors(), tb.errors());
  EXPECT_EQ(ta.final_params, tb.final_params);
}

TEST(SgdTrain, ToyTaskErrorDecreases) {
  TrainConfig cfg;
  cfg.step_size = 0.05;
  cfg.updates = 3000;
  cfg.report_every = 50;
  cfg.eval_repeats = 200;
  UniformStream s(1);
  const TrainTrajectory t = sgd_train(cfg, stripes(), s);
  const auto e = t.errors();
  const auto [head, tail] = smoothed_endpoints(e, 5);
  EXPECT_LT(tail, head);
}

TEST(SgdTrain, ClampedInputsAreNeverPerturbed) {
  // Rows of clamped units are masked, so their weights and biases keep the
  // initial values for the whole run.
  TrainConfig cfg;
  cfg.step_size = 0.1;
  cfg.updates = 300;
  cfg.report_every = 300;
  UniformStream s(6);
  const TrainTrajectory t = sgd_train(cfg, stripes(), s);
  UniformStream again(6);
  UniformStream init_stream = again.derive(0);
  const NetworkParams init = init_params(cfg, init_stream);
  for (std::size_t i = 0; i < cfg.n_input; ++i) {
    EXPECT_EQ(t.final_params.bias(i), init.bias(i));
    for (std::size_t j = 0; j < cfg.n(); ++j) EXPECT_EQ(t.final_params.weight(i, j), init.weight(i, j));
  }
}

TEST(SgdTrain, ExactGradientDescentDecreasesObjective) {
  // One pattern, so the per-update gradient is the gradient of the objective.
  TrainConfig cfg;
  cfg.n_input = 2;
  cfg.n_output = 2;
  cfg.n_hidden = 1;
  cfg.step_size = 0.2;
  cfg.updates = 40;
  cfg.report_every = 1;
  cfg.init_range = 0.5;
  UniformStream ds(0);
  Dataset data = make_synthetic_dataset(SyntheticKind::stripes, 1, 2, 2, ds);
  const ClampSpec clamp = input_clamp(cfg, data.patterns[0]);
  const LabelCost cost(data.patterns[0].label, cfg.first_output());

  std::vector<double> objective;
  auto exact = [&](const NetworkParams& p, const auto& c, const ClampSpec& cl,
                   const EstimatorConfig&, UniformStream&) {
    objective.push_back(stationary_cost(p, c, cl));
    return exact_gradient(p, c, cl);
  };
  UniformStream s(2);
  const TrainTrajectory t = sgd_train(cfg, data, s, exact);
  objective.push_back(stationary_cost(t.final_params, cost, clamp));
  ASSERT_EQ(objective.size(), cfg.updates + 1);
  for (std::size_t k = 1; k < objective.size(); ++k) EXPECT_LT(objective[k], objective[k - 1]);
}

TEST(SgdTrain, RejectsBadSetup) {
  TrainConfig cfg;
  UniformStream s(1);
  EXPECT_THROW(sgd_train(cfg, Dataset{4, 2, {}}, s), Error);
  cfg.init_range = 0.0;
  EXPECT_THROW(sgd_train(cfg, stripes(), s), ConfigError);
  cfg.init_range = 0.01;
  cfg.n_output = 3;
  EXPECT_THROW(sgd_train(cfg, stripes(), s), DimensionError);
}

TEST(WindowedStd, LinearTrendHasZeroSpread) {
  std::vector<double> line(20);
  for (std::size_t k = 0; k < line.size(); ++k) line[k] = 3.0 - 0.1 * static_cast<double>(k);
  EXPECT_NEAR(windowed_std(line, 5), 0.0, 1e-12);
}

TEST(WindowedStd, AlternatingSequence) {
  // Residuals of +-1 about a flat line in an odd window of width 3:
  // values (1,-1,1) -> fit slope 0, mean 1/3; residuals (2/3,-4/3,2/3),
  // ss = 8/3, std = sqrt(8/3 / 1).
  std::vector<double> alt{1, -1, 1, -1, 1};
  EXPECT_NEAR(windowed_std(alt, 3), std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_THROW(windowed_std(alt, 2), Error);
}

TEST(SmoothedEndpoints, Means) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6};
  const auto [head, tail] = smoothed_endpoints(v, 2);
  EXPECT_DOUBLE_EQ(head, 1.5);
  EXPECT_DOUBLE_EQ(tail, 5.5);
}

}  // namespace
}  // namespace spmvd
