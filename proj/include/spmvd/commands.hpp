#pragma once

// Subcommands behind the `spmvd` executable. Each output CSV gets a sibling
// `<csv>.manifest.json` holding the exact configuration that produced it;
// passing that manifest back as --config reproduces the CSV byte for byte.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spmvd/config.hpp"
#include "spmvd/error.hpp"
#include "spmvd/estimators.hpp"
#include "spmvd/network.hpp"
#include "spmvd/oracle.hpp"
#include "spmvd/rng.hpp"
#include "spmvd/trainer.hpp"
#include "spmvd/validation.hpp"

namespace spmvd {

inline constexpr std::string_view kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitUsage = 2, kExitIo = 3 };

struct RunManifest {
  std::string command;
  std::string config_text;
  std::uint64_t seed = 0;
  std::string rng = std::string(kRngAlgorithm);
  std::string version = std::string(kVersion);
  bool oracle = false;
  std::string started;
  std::string finished;
  std::string output;
};

/// A parsed config plus the command options a manifest may carry.
struct LoadedConfig {
  RunConfig config;
  bool oracle = false;
  std::optional<std::string> command;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  out.close();
  if (!out) throw IoError("error writing '" + path + "'");
}

/// `out.csv` -> `out_m1-50.csv` when sweeping.
inline std::string sweep_path(const std::string& out, std::size_t m1, bool sweeping) {
  if (!sweeping) return out;
  const std::filesystem::path p(out);
  std::filesystem::path name = p.stem();
  name += "_m1-" + std::to_string(m1);
  name += p.extension();
  return (p.parent_path() / name).string();
}

class BitsCost {
 public:
  explicit BitsCost(std::vector<std::size_t> nodes) : nodes_(std::move(nodes)) {}
  double operator()(const NetworkState& x) const {
    double s = 0.0;
    for (std::size_t k : nodes_) s += x[k];
    return s;
  }

 private:
  std::vector<std::size_t> nodes_;
};

struct ConfigCost {
  CostKind kind;
  BitsCost bits;
  double value;
  double operator()(const NetworkState& x) const {
    return kind == CostKind::bits ? bits(x) : value;
  }
};

}  // namespace detail

inline std::string manifest_path(const std::string& csv_path) { return csv_path + ".manifest.json"; }

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"artifact", "spmvd"},     {"version", m.version}, {"command", m.command},
          {"seed", m.seed},          {"rng", m.rng},         {"oracle", m.oracle},
          {"started", m.started},    {"finished", m.finished},
          {"output", m.output},      {"config", m.config_text}};
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  detail::write_text(path, to_json(m).dump(2) + "\n");
}

/// Reads either a `key = value` config or a manifest written by this program.
inline LoadedConfig load_config(const std::string& path) {
  const std::string text = detail::read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest '" + path + "': " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_string())
      throw ConfigError("manifest '" + path + "' has no config text");
    LoadedConfig lc{parse_config_text(j["config"].get<std::string>()), false, std::nullopt};
    if (j.contains("oracle") && j["oracle"].is_boolean()) lc.oracle = j["oracle"].get<bool>();
    if (j.contains("command") && j["command"].is_string())
      lc.command = j["command"].get<std::string>();
    return lc;
  }
  return {parse_config_text(text), false, std::nullopt};
}

inline std::string format_real(double v) { return detail::format_double(v); }

/// Prints each suite and invariant; returns kExitValidation on any failure.
inline int cmd_validate(const ValidationOptions& opt, std::ostream& report) {
  const ValidationReport r = run_validation(opt);
  for (const auto& suite : r.suites) {
    report << (suite.passed() ? "PASS " : "FAIL ") << suite.name
           << "  max deviation " << format_real(suite.max_deviation()) << '\n';
    for (const auto& inv : suite.invariants)
      report << "    " << (inv.passed ? "ok   " : "FAIL ") << inv.name << ": "
             << format_real(inv.deviation) << " (tolerance " << format_real(inv.tolerance)
             << ")\n";
  }
  report << (r.passed() ? "all suites passed\n" : "validation FAILED\n");
  return r.passed() ? kExitOk : kExitValidation;
}

inline NetworkParams config_params(const RunConfig& cfg) {
  const std::size_t n = *cfg.n;
  if (!cfg.weights.empty()) return NetworkParams(n, cfg.weights, cfg.biases);
  UniformStream s = UniformStream(cfg.seed).derive(1);
  NetworkParams p(n);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = cfg.init_range * (2.0 * s.uniform() - 1.0);
  return p;
}

inline ClampSpec config_clamp(const RunConfig& cfg) {
  std::vector<std::uint8_t> values(cfg.clamp_values.begin(), cfg.clamp_values.end());
  return ClampSpec(*cfg.n, cfg.clamp_nodes, values);
}

/// One CSV per M1 value: rows (replication, coordinate, estimate, direction
/// [, oracle]) followed by `mean` and `se` summary rows.
inline int cmd_estimate(const RunConfig& cfg, const std::string& out, bool oracle,
                        std::ostream& log) {
  cfg.validate_for_estimate();
  const NetworkParams params = config_params(cfg);
  const ClampSpec clamp = config_clamp(cfg);
  const detail::ConfigCost cost{cfg.cost, detail::BitsCost(cfg.cost_nodes), cfg.cost_value};
  if (oracle && clamp.free_count() > kMaxDenseFreeUnits)
    throw ConfigError("--oracle needs at most 12 free units");
  const bool sweeping = cfg.m1.size() > 1;

  for (std::size_t m1 : cfg.m1) {
    RunManifest man;
    man.command = "estimate";
    man.started = detail::utc_timestamp();
    man.seed = cfg.seed;
    man.oracle = oracle;
    RunConfig single = cfg;
    single.m1 = {m1};
    man.config_text = write_config(single);

    const EstimatorConfig ecfg = cfg.estimator_config(m1);
    const std::vector<GradientEstimate> est =
        cfg.estimator == EstimatorKind::spmvd
            ? replicate_spmvd(params, cost, clamp, ecfg, cfg.seed)
            : replicate_spsa(params, cost, clamp, cfg.m0 + m1, cfg.lambda, cfg.replications,
                             cfg.seed, cfg.mask);
    const ReplicationSummary sum = summarize(est);
    std::optional<ParamGradient> exact;
    if (oracle) exact = exact_gradient(params, cost, clamp);

    const std::size_t n = params.n();
    std::ostringstream csv;
    csv << "replication,coordinate,estimate,direction" << (oracle ? ",oracle" : "") << '\n';
    auto oracle_cell = [&](std::size_t k) { return oracle ? "," + format_real((*exact)[k]) : ""; };
    for (std::size_t r = 0; r < est.size(); ++r)
      for (std::size_t k = 0; k < params.size(); ++k)
        csv << r << ',' << coordinate_name(n, k) << ',' << format_real(est[r].values[k]) << ','
            << format_real((*est[r].direction)[k]) << oracle_cell(k) << '\n';
    for (std::size_t k = 0; k < params.size(); ++k)
      csv << "mean," << coordinate_name(n, k) << ',' << format_real(sum.mean[k]) << ','
          << oracle_cell(k) << '\n';
    for (std::size_t k = 0; k < params.size(); ++k)
      csv << "se," << coordinate_name(n, k) << ',' << format_real(sum.standard_error[k]) << ','
          << oracle_cell(k) << '\n';

    const std::string path = detail::sweep_path(out, m1, sweeping);
    detail::write_text(path, csv.str());
    man.output = std::filesystem::path(path).filename().string();
    man.finished = detail::utc_timestamp();
    write_manifest(manifest_path(path), man);

    log << "m1=" << m1 << ": " << est.size() << " replications -> " << path << '\n';
    for (std::size_t k = 0; k < params.size(); ++k) {
      log << "  " << coordinate_name(n, k) << "  mean " << format_real(sum.mean[k]) << "  se "
          << format_real(sum.standard_error[k]);
      if (oracle) log << "  oracle " << format_real((*exact)[k]);
      log << '\n';
    }
  }
  return kExitOk;
}

inline Dataset config_dataset(const RunConfig& cfg) {
  if (*cfg.dataset == "idx") {
    Dataset d = load_idx(cfg.idx_images, cfg.idx_labels, cfg.idx_limit);
    if (d.n_input != cfg.n_input || d.n_output != cfg.n_output)
      throw ConfigError("idx data has " + std::to_string(d.n_input) + " inputs and " +
                        std::to_string(d.n_output) + " outputs; config disagrees");
    return d;
  }
  UniformStream s = UniformStream(cfg.seed).derive(7);
  return make_synthetic_dataset(parse_synthetic_kind(*cfg.dataset), cfg.dataset_size,
                                cfg.n_input, cfg.n_output, s, cfg.flip);
}

/// One trajectory CSV (update, empirical_error) per M1 value, all on the same
/// update grid and from the same initial parameters.
inline int cmd_train(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  cfg.validate_for_train();
  const Dataset data = config_dataset(cfg);
  const bool sweeping = cfg.m1.size() > 1;
  for (std::size_t m1 : cfg.m1) {
    RunManifest man;
    man.command = "train";
    man.started = detail::utc_timestamp();
    man.seed = cfg.seed;
    RunConfig single = cfg;
    single.m1 = {m1};
    man.config_text = write_config(single);

    UniformStream stream(cfg.seed);
    const TrainTrajectory traj = sgd_train(cfg.train_config(m1), data, stream);
    std::ostringstream csv;
    csv << "update,empirical_error\n";
    for (const auto& row : traj.rows)
      csv << row.update << ',' << format_real(row.empirical_error) << '\n';

    const std::string path = detail::sweep_path(out, m1, sweeping);
    detail::write_text(path, csv.str());
    man.output = std::filesystem::path(path).filename().string();
    man.finished = detail::utc_timestamp();
    write_manifest(manifest_path(path), man);
    log << "m1=" << m1 << ": " << traj.rows.size() << " rows, error "
        << format_real(traj.rows.front().empirical_error) << " -> "
        << format_real(traj.rows.back().empirical_error) << " -> " << path << '\n';
  }
  return kExitOk;
}

}  // namespace spmvd
