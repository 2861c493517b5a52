// spmvd: validate | estimate | train

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spmvd/spmvd.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  std::string scale = "small";
  double fault = 0.0;
};

spmvd::RunConfig resolve(const Options& opt, const std::string& command, bool& oracle) {
  spmvd::LoadedConfig lc = spmvd::load_config(opt.config);
  if (lc.command && *lc.command != command)
    throw spmvd::ConfigError("manifest was written by '" + *lc.command + "', not '" + command +
                             "'");
  if (opt.seed) lc.config.seed = *opt.seed;
  oracle = opt.oracle || lc.oracle;
  return lc.config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary-cost gradient estimation for the Little model"};
  app.set_version_flag("--version", std::string(spmvd::kVersion));
  app.require_subcommand(1);
  Options opt;

  auto* validate = app.add_subcommand("validate", "run the oracle and property suites");
  validate->add_option("--scale", opt.scale, "instance counts")
      ->check(CLI::IsMember({"small", "full"}));
  validate->add_option("--seed", opt.seed, "suite seed");
  validate->add_option("--inject-fault", opt.fault, "add this to c in the identity check")
      ->group("");

  auto* estimate = app.add_subcommand("estimate", "replicated gradient estimates to CSV");
  estimate->add_option("--config", opt.config, "config file or manifest")->required();
  estimate->add_option("--out", opt.out, "output CSV")->required();
  estimate->add_option("--seed", opt.seed, "overrides the config seed");
  estimate->add_flag("--oracle", opt.oracle, "append the exact gradient column");

  auto* train = app.add_subcommand("train", "SGD trajectory to CSV");
  train->add_option("--config", opt.config, "config file or manifest")->required();
  train->add_option("--out", opt.out, "output CSV")->required();
  train->add_option("--seed", opt.seed, "overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? spmvd::kExitOk : spmvd::kExitUsage;
  }

  try {
    if (validate->parsed()) {
      spmvd::ValidationOptions vo;
      vo.scale = opt.scale == "full" ? spmvd::ValidationScale::full : spmvd::ValidationScale::small;
      if (opt.seed) vo.seed = *opt.seed;
      vo.c_fault = opt.fault;
      return spmvd::cmd_validate(vo, std::cout);
    }
    bool oracle = false;
    if (estimate->parsed()) {
      const spmvd::RunConfig cfg = resolve(opt, "estimate", oracle);
      return spmvd::cmd_estimate(cfg, opt.out, oracle, std::cout);
    }
    const spmvd::RunConfig cfg = resolve(opt, "train", oracle);
    return spmvd::cmd_train(cfg, opt.out, std::cout);
  } catch (const spmvd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return spmvd::kExitUsage;
  } catch (const spmvd::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return spmvd::kExitIo;
  } catch (const spmvd::FormatError& e) {
    std::cerr << "input format error: " << e.what() << '\n';
    return spmvd::kExitIo;
  } catch (const spmvd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return spmvd::kExitValidation;
  }
}
