#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spmvd/commands.hpp"

namespace spmvd {
namespace {

class CommandTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("spmvd_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
  }

  static std::vector<std::vector<std::string>> rows(const std::string& p) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (!line.empty() && line.back() == ',') cells.emplace_back();
      out.push_back(cells);
    }
    return out;
  }

  std::filesystem::path dir_;
  std::ostringstream log_;
};

RunConfig reference_config() {
  return parse_config_text(
      "seed = 7\nn = 1\nweights = 0\nbiases = 1.0986122886681098\ncost = bits\n"
      "cost_nodes = 0\nm0 = 100\nm1 = 100\nreplications = 20000\n");
}

TEST_F(CommandTest, EstimateReferenceMeansWithinThreeSe) {
  ASSERT_EQ(cmd_estimate(reference_config(), path("ref.csv"), true, log_), kExitOk);
  const auto r = rows(path("ref.csv"));
  ASSERT_EQ(r.front(), (std::vector<std::string>{"replication", "coordinate", "estimate",
                                                 "direction", "oracle"}));
  ASSERT_EQ(r.size(), 1 + 20000 * 2 + 4);
  const double target[2] = {0.140625, 0.1875};
  for (int k = 0; k < 2; ++k) {
    const auto& mean = r[r.size() - 4 + k];
    const auto& se = r[r.size() - 2 + k];
    ASSERT_EQ(mean[0], "mean");
    ASSERT_EQ(se[0], "se");
    EXPECT_NEAR(std::stod(mean[2]), target[k], 3.0 * std::stod(se[2]));
    EXPECT_NEAR(std::stod(mean[4]), target[k], 1e-7);
  }
  EXPECT_TRUE(std::filesystem::exists(manifest_path(path("ref.csv"))));
}

TEST_F(CommandTest, ZeroCostGivesZeroEstimates) {
  const RunConfig c = parse_config_text(
      "seed = 3\nn = 4\ninit_range = 0.5\ncost = constant\ncost_value = 2.5\nreplications = 30\n");
  ASSERT_EQ(cmd_estimate(c, path("z.csv"), false, log_), kExitOk);
  const auto r = rows(path("z.csv"));
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_EQ(r[k][2], "0");
}

TEST_F(CommandTest, EstimateDeterministicAndManifestReproduces) {
  RunConfig c = reference_config();
  c.replications = 500;
  cmd_estimate(c, path("a.csv"), true, log_);
  cmd_estimate(c, path("b.csv"), true, log_);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));

  const LoadedConfig lc = load_config(manifest_path(path("a.csv")));
  EXPECT_EQ(lc.config, c);
  EXPECT_TRUE(lc.oracle);
  ASSERT_TRUE(lc.command.has_value());
  EXPECT_EQ(*lc.command, "estimate");
  cmd_estimate(lc.config, path("c.csv"), lc.oracle, log_);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("c.csv")));

  const auto j = nlohmann::json::parse(slurp(manifest_path(path("a.csv"))));
  EXPECT_EQ(j["rng"], std::string(kRngAlgorithm));
  EXPECT_EQ(j["seed"], 7U);
  EXPECT_EQ(j["version"], std::string(kVersion));
  EXPECT_TRUE(j.contains("started"));
  EXPECT_TRUE(j.contains("finished"));
}

TEST_F(CommandTest, SpsaEstimatorRuns) {
  RunConfig c = reference_config();
  c.estimator = EstimatorKind::spsa;
  c.replications = 100;
  c.lambda = 0.1;
  ASSERT_EQ(cmd_estimate(c, path("s.csv"), false, log_), kExitOk);
  EXPECT_EQ(rows(path("s.csv")).size(), 1 + 100 * 2 + 4);
}

RunConfig toy_config(const std::string& m1) {
  return parse_config_text("seed = 1\ndataset = stripes\ndataset_size = 2\nn_input = 4\n"
                           "n_output = 2\nstep_size = 0.05\nupdates = 3000\n"
                           "report_every = 500\neval_repeats = 50\nm1 = " + m1 + "\n");
}

TEST_F(CommandTest, TrainRowCountAndSweepGrids) {
  ASSERT_EQ(cmd_train(toy_config("10,50"), path("t.csv"), log_), kExitOk);
  const auto a = rows(path("t_m1-10.csv"));
  const auto b = rows(path("t_m1-50.csv"));
  ASSERT_EQ(a.size(), 1 + 3000 / 500 + 1);
  ASSERT_EQ(b.size(), a.size());
  EXPECT_EQ(a.front(), (std::vector<std::string>{"update", "empirical_error"}));
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_EQ(a[k][0], b[k][0]);
  EXPECT_LT(std::stod(a.back()[1]), std::stod(a[1][1]));
  EXPECT_FALSE(std::filesystem::exists(path("t.csv")));
}

TEST_F(CommandTest, TrainManifestReproducesBytes) {
  ASSERT_EQ(cmd_train(toy_config("10"), path("t.csv"), log_), kExitOk);
  const LoadedConfig lc = load_config(manifest_path(path("t.csv")));
  EXPECT_EQ(*lc.command, "train");
  cmd_train(lc.config, path("again.csv"), log_);
  EXPECT_EQ(slurp(path("t.csv")), slurp(path("again.csv")));
}

TEST_F(CommandTest, ErrorsMapToTypes) {
  EXPECT_THROW(load_config(path("missing.conf")), IoError);
  {
    std::ofstream(path("broken.json")) << "{ not json";
  }
  EXPECT_THROW(load_config(path("broken.json")), ConfigError);
  EXPECT_THROW(cmd_estimate(parse_config_text("seed = 1\n"), path("x.csv"), false, log_),
               ConfigError);
  EXPECT_THROW(cmd_estimate(reference_config(), (dir_ / "no" / "dir.csv").string(), false, log_),
               IoError);
}

}  // namespace
}  // namespace spmvd
