#pragma once

// Flat `key = value` run configuration. One pair per line, `#` starts a
// comment, lists are comma separated. Unknown and repeated keys are errors.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/estimators.hpp"
#include "spmvd/network.hpp"
#include "spmvd/trainer.hpp"

namespace spmvd {

enum class EstimatorKind { spmvd, spsa };
enum class CostKind { bits, constant };

struct RunConfig {
  std::uint64_t seed = 1;

  // estimator
  EstimatorKind estimator = EstimatorKind::spmvd;
  std::size_t m0 = 10;
  std::vector<std::size_t> m1 = {10};
  double lambda = 0.05;
  bool include_t0 = true;
  std::size_t replications = 1;
  bool mask = true;

  // network for `estimate`
  std::optional<std::size_t> n;
  std::vector<double> weights;  // row-major, empty = random in [-init_range, init_range]
  std::vector<double> biases;
  double init_range = 0.01;
  std::vector<std::size_t> clamp_nodes;
  std::vector<std::size_t> clamp_values;
  CostKind cost = CostKind::bits;
  std::vector<std::size_t> cost_nodes;
  double cost_value = 0.0;

  // training
  std::size_t n_input = 4;
  std::size_t n_output = 2;
  std::size_t n_hidden = 0;
  double step_size = 0.01;
  std::size_t updates = 3000;
  std::size_t report_every = 500;
  std::size_t eval_repeats = 1;
  std::optional<std::string> dataset;  // stripes | parity | idx
  std::size_t dataset_size = 2;
  double flip = 0.0;
  std::string idx_images;
  std::string idx_labels;
  std::size_t idx_limit = 0;

  EstimatorConfig estimator_config(std::size_t m1_value) const {
    EstimatorConfig c;
    c.m0 = m0;
    c.m1 = m1_value;
    c.lambda = lambda;
    c.include_t0 = include_t0;
    c.replications = replications;
    c.mask_clamped_rows = mask;
    return c;
  }

  TrainConfig train_config(std::size_t m1_value) const {
    TrainConfig t;
    t.n_input = n_input;
    t.n_output = n_output;
    t.n_hidden = n_hidden;
    t.step_size = step_size;
    t.updates = updates;
    t.report_every = report_every;
    t.eval_repeats = eval_repeats;
    t.estimator = estimator_config(m1_value);
    t.init_range = init_range;
    t.seed = seed;
    return t;
  }

  /// Checks shared by every command.
  void validate() const {
    if (m1.empty()) throw ConfigError("m1 must list at least one value");
    for (std::size_t v : m1) estimator_config(v).validate();
    if (!(init_range > 0.0)) throw ConfigError("init_range must be positive");
    for (std::size_t v : clamp_values)
      if (v > 1) throw ConfigError("clamp_values must be bits");
    if (clamp_nodes.size() != clamp_values.size())
      throw ConfigError("clamp_nodes and clamp_values differ in length");
  }

  void validate_for_estimate() const {
    validate();
    if (!n) throw ConfigError("missing required key 'n'");
    if (*n == 0) throw ConfigError("n must be positive");
    if (!weights.empty() && weights.size() != *n * *n)
      throw ConfigError("weights must have n*n entries");
    if (!biases.empty() && biases.size() != *n) throw ConfigError("biases must have n entries");
    if (weights.empty() != biases.empty())
      throw ConfigError("give both weights and biases or neither");
    for (std::size_t k : cost_nodes)
      if (k >= *n) throw ConfigError("cost_nodes entry out of range");
    for (std::size_t k : clamp_nodes)
      if (k >= *n) throw ConfigError("clamp_nodes entry out of range");
  }

  void validate_for_train() const {
    validate();
    if (!dataset) throw ConfigError("missing required key 'dataset'");
    if (*dataset == "idx" && (idx_images.empty() || idx_labels.empty()))
      throw ConfigError("dataset = idx needs idx_images and idx_labels");
    if (*dataset != "idx") (void)parse_synthetic_kind(*dataset);
    for (std::size_t v : m1) train_config(v).validate();
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = s.find(',', pos);
    out.push_back(trim(s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  if constexpr (std::is_unsigned_v<T>) {
    if (!text.empty() && text.front() == '-')
      throw ConfigError("key '" + std::string(key) + "': expected a nonnegative integer, got '" +
                        std::string(text) + "'");
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || text.empty())
    throw ConfigError("key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  for (auto item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" +
                    std::string(text) + "'");
}

inline std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string format_list(const std::vector<T>& values) {
  std::string s;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += format_double(values[k]);
    else
      s += std::to_string(values[k]);
  }
  return s;
}

}  // namespace detail

inline RunConfig parse_config_text(std::string_view text) {
  RunConfig c;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view val = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' repeated");

    using detail::parse_bool;
    using detail::parse_list;
    using detail::parse_number;
    if (key == "seed") c.seed = parse_number<std::uint64_t>(key, val);
    else if (key == "estimator") {
      if (val == "spmvd") c.estimator = EstimatorKind::spmvd;
      else if (val == "spsa") c.estimator = EstimatorKind::spsa;
      else throw ConfigError("estimator must be spmvd or spsa");
    } else if (key == "m0") c.m0 = parse_number<std::size_t>(key, val);
    else if (key == "m1") {
      c.m1 = parse_list<std::size_t>(key, val);
      for (auto m : c.m1)
        if (m == 0) throw ConfigError("m1 must be at least 1");
    } else if (key == "lambda") c.lambda = parse_number<double>(key, val);
    else if (key == "include_t0") c.include_t0 = parse_bool(key, val);
    else if (key == "replications") c.replications = parse_number<std::size_t>(key, val);
    else if (key == "mask") c.mask = parse_bool(key, val);
    else if (key == "n") c.n = parse_number<std::size_t>(key, val);
    else if (key == "weights") c.weights = parse_list<double>(key, val);
    else if (key == "biases") c.biases = parse_list<double>(key, val);
    else if (key == "init_range") c.init_range = parse_number<double>(key, val);
    else if (key == "clamp_nodes") c.clamp_nodes = parse_list<std::size_t>(key, val);
    else if (key == "clamp_values") c.clamp_values = parse_list<std::size_t>(key, val);
    else if (key == "cost") {
      if (val == "bits") c.cost = CostKind::bits;
      else if (val == "constant") c.cost = CostKind::constant;
      else throw ConfigError("cost must be bits or constant");
    } else if (key == "cost_nodes") c.cost_nodes = parse_list<std::size_t>(key, val);
    else if (key == "cost_value") c.cost_value = parse_number<double>(key, val);
    else if (key == "n_input") c.n_input = parse_number<std::size_t>(key, val);
    else if (key == "n_output") c.n_output = parse_number<std::size_t>(key, val);
    else if (key == "n_hidden") c.n_hidden = parse_number<std::size_t>(key, val);
    else if (key == "step_size") c.step_size = parse_number<double>(key, val);
    else if (key == "updates") c.updates = parse_number<std::size_t>(key, val);
    else if (key == "report_every") c.report_every = parse_number<std::size_t>(key, val);
    else if (key == "eval_repeats") c.eval_repeats = parse_number<std::size_t>(key, val);
    else if (key == "dataset") c.dataset = std::string(val);
    else if (key == "dataset_size") c.dataset_size = parse_number<std::size_t>(key, val);
    else if (key == "flip") c.flip = parse_number<double>(key, val);
    else if (key == "idx_images") c.idx_images = std::string(val);
    else if (key == "idx_labels") c.idx_labels = std::string(val);
    else if (key == "idx_limit") c.idx_limit = parse_number<std::size_t>(key, val);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  if (!seen.contains("seed")) throw ConfigError("missing required key 'seed'");
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Text that parse_config_text maps back to `c`. Optional keys are omitted
/// when unset.
inline std::string write_config(const RunConfig& c) {
  using detail::format_double;
  using detail::format_list;
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "seed = " << c.seed << '\n'
    << "estimator = " << (c.estimator == EstimatorKind::spmvd ? "spmvd" : "spsa") << '\n'
    << "m0 = " << c.m0 << '\n'
    << "m1 = " << format_list(c.m1) << '\n'
    << "lambda = " << format_double(c.lambda) << '\n'
    << "include_t0 = " << b(c.include_t0) << '\n'
    << "replications = " << c.replications << '\n'
    << "mask = " << b(c.mask) << '\n';
  if (c.n) o << "n = " << *c.n << '\n';
  o << "weights = " << format_list(c.weights) << '\n'
    << "biases = " << format_list(c.biases) << '\n'
    << "init_range = " << format_double(c.init_range) << '\n'
    << "clamp_nodes = " << format_list(c.clamp_nodes) << '\n'
    << "clamp_values = " << format_list(c.clamp_values) << '\n'
    << "cost = " << (c.cost == CostKind::bits ? "bits" : "constant") << '\n'
    << "cost_nodes = " << format_list(c.cost_nodes) << '\n'
    << "cost_value = " << format_double(c.cost_value) << '\n'
    << "n_input = " << c.n_input << '\n'
    << "n_output = " << c.n_output << '\n'
    << "n_hidden = " << c.n_hidden << '\n'
    << "step_size = " << format_double(c.step_size) << '\n'
    << "updates = " << c.updates << '\n'
    << "report_every = " << c.report_every << '\n'
    << "eval_repeats = " << c.eval_repeats << '\n';
  if (c.dataset) o << "dataset = " << *c.dataset << '\n';
  o << "dataset_size = " << c.dataset_size << '\n'
    << "flip = " << format_double(c.flip) << '\n'
    << "idx_images = " << c.idx_images << '\n'
    << "idx_labels = " << c.idx_labels << '\n'
    << "idx_limit = " << c.idx_limit << '\n';
  return o.str();
}

}  // namespace spmvd
