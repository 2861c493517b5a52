#pragma once

// Stochastic-approximation training of a clamped Little network on labeled
// bit patterns. Node layout: inputs [0, p), hidden [p, p + h), outputs last.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/estimators.hpp"
#include "spmvd/network.hpp"
#include "spmvd/rng.hpp"
#include "spmvd/stats.hpp"

namespace spmvd {

struct LabeledPattern {
  std::vector<std::uint8_t> input;
  std::vector<std::uint8_t> label;

  bool is_one_hot() const {
    return std::count(label.begin(), label.end(), std::uint8_t{1}) == 1 &&
           std::all_of(label.begin(), label.end(), [](std::uint8_t b) { return b <= 1; });
  }
  friend bool operator==(const LabeledPattern&, const LabeledPattern&) = default;
};

struct Dataset {
  std::size_t n_input = 0;
  std::size_t n_output = 0;
  std::vector<LabeledPattern> patterns;

  std::size_t size() const { return patterns.size(); }
  bool empty() const { return patterns.empty(); }

  void validate() const {
    for (const auto& p : patterns) {
      if (p.input.size() != n_input || p.label.size() != n_output)
        throw DimensionError("dataset: pattern size does not match dataset shape");
      for (auto b : p.input)
        if (b > 1) throw FormatError("dataset: input entries must be bits");
      for (auto b : p.label)
        if (b > 1) throw FormatError("dataset: label entries must be bits");
    }
  }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct TrainConfig {
  std::size_t n_input = 4;
  std::size_t n_output = 2;
  std::size_t n_hidden = 0;
  double step_size = 0.01;
  std::size_t updates = 3000;
  std::size_t report_every = 500;
  std::size_t eval_repeats = 1;  // fresh chains per pattern in each evaluation pass
  EstimatorConfig estimator;
  double init_range = 0.01;
  std::uint64_t seed = 1;

  std::size_t n() const { return n_input + n_hidden + n_output; }
  std::size_t first_output() const { return n_input + n_hidden; }

  void validate() const {
    if (n_output == 0) throw ConfigError("n_output must be positive");
    if (!(step_size >= 0.0) || !std::isfinite(step_size))
      throw ConfigError("step_size must be finite and nonnegative");
    if (!(init_range > 0.0) || !std::isfinite(init_range))
      throw ConfigError("init_range must be positive");
    if (report_every == 0) throw ConfigError("report_every must be positive");
    if (eval_repeats == 0) throw ConfigError("eval_repeats must be positive");
    estimator.validate();
  }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainRow {
  std::size_t update = 0;
  double empirical_error = 0.0;
  double wall_seconds = 0.0;
};

struct TrainTrajectory {
  std::vector<TrainRow> rows;
  NetworkParams final_params;

  std::vector<double> errors() const {
    std::vector<double> e;
    e.reserve(rows.size());
    for (const auto& r : rows) e.push_back(r.empirical_error);
    return e;
  }
};

/// Number of output bits that disagree with the label.
inline double error_function(const NetworkState& state, std::span<const std::uint8_t> label,
                             std::span<const std::size_t> output_nodes) {
  if (label.size() != output_nodes.size())
    throw DimensionError("error_function: label and output index lengths differ");
  double e = 0.0;
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (output_nodes[k] >= state.size()) throw DimensionError("error_function: output index");
    e += state[output_nodes[k]] != label[k] ? 1.0 : 0.0;
  }
  return e;
}

/// Error function of one pattern over a contiguous output block.
class LabelCost {
 public:
  LabelCost(std::span<const std::uint8_t> label, std::size_t first_output)
      : label_(label), first_(first_output) {}

  double operator()(const NetworkState& x) const {
    double e = 0.0;
    for (std::size_t k = 0; k < label_.size(); ++k)
      e += x[first_ + k] != label_[k] ? 1.0 : 0.0;
    return e;
  }

 private:
  std::span<const std::uint8_t> label_;
  std::size_t first_;
};

inline ClampSpec input_clamp(const TrainConfig& cfg, const LabeledPattern& pattern) {
  if (pattern.input.size() != cfg.n_input) throw DimensionError("pattern input size");
  std::vector<std::size_t> nodes(cfg.n_input);
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  return ClampSpec(cfg.n(), nodes, pattern.input);
}

inline NetworkParams init_params(const TrainConfig& cfg, UniformStream& stream) {
  if (!(cfg.init_range > 0.0)) throw ConfigError("init_range must be positive");
  NetworkParams p(cfg.n());
  for (std::size_t k = 0; k < p.size(); ++k)
    p[k] = cfg.init_range * (2.0 * stream.uniform() - 1.0);
  return p;
}

/// Mean error over the dataset: for each pattern, eval_repeats fresh chains run
/// M0 + M1 steps from the clamped zero state, cost read at the final state.
/// Chain r uses UniformStream(eval_seed).derive(r).
inline double evaluate_error(const NetworkParams& params, const TrainConfig& cfg,
                             const Dataset& data, std::uint64_t eval_seed,
                             unsigned threads = default_thread_count()) {
  if (data.empty()) throw Error("evaluate_error: empty dataset");
  const std::size_t steps = cfg.estimator.m0 + cfg.estimator.m1;
  const std::size_t repeats = cfg.eval_repeats;
  const auto errors = parallel_replicate(
      data.size() * repeats, UniformStream(eval_seed),
      [&](UniformStream& s, std::size_t r) {
        const LabeledPattern& pat = data.patterns[r / repeats];
        const ClampSpec clamp = input_clamp(cfg, pat);
        NetworkState x = initial_state(clamp);
        for (std::size_t t = 0; t < steps; ++t) x = step(params, x, clamp, s);
        return LabelCost(pat.label, cfg.first_output())(x);
      },
      threads);
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

/// SPMVD gradient for one pattern, averaged over cfg.estimator.replications.
struct SpmvdGradient {
  template <CostFunction Cost>
  ParamGradient operator()(const NetworkParams& params, const Cost& cost,
                           const ClampSpec& clamp, const EstimatorConfig& cfg,
                           UniformStream& stream) const {
    ParamGradient g(params.n());
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      const GradientEstimate est = spmvd_estimate(params, cost, clamp, cfg, stream);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += est.values[k];
    }
    for (std::size_t k = 0; k < g.size(); ++k) g[k] /= static_cast<double>(cfg.replications);
    return g;
  }
};

/// theta <- theta - step_size * grad for `updates` steps on uniformly chosen
/// patterns. Sub-streams of `stream`: 0 initial parameters, 1 evaluation seed,
/// 2 pattern choice and gradient estimation.
template <class GradientSource>
TrainTrajectory sgd_train(const TrainConfig& cfg, const Dataset& data, UniformStream& stream,
                          GradientSource&& gradient) {
  cfg.validate();
  if (data.empty()) throw Error("sgd_train: dataset is empty");
  if (data.n_input != cfg.n_input || data.n_output != cfg.n_output)
    throw DimensionError("sgd_train: dataset shape does not match n_input/n_output");
  data.validate();

  UniformStream init_stream = stream.derive(0);
  const std::uint64_t eval_seed = stream.derive(1).next_u64();
  UniformStream work = stream.derive(2);

  TrainTrajectory traj;
  NetworkParams params = init_params(cfg, init_stream);
  const auto start = std::chrono::steady_clock::now();
  auto report = [&](std::size_t update) {
    const double err = evaluate_error(params, cfg, data, eval_seed);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    traj.rows.push_back({update, err, elapsed.count()});
  };

  report(0);
  for (std::size_t u = 1; u <= cfg.updates; ++u) {
    const auto pick = std::min<std::size_t>(
        static_cast<std::size_t>(work.uniform() * static_cast<double>(data.size())),
        data.size() - 1);
    const LabeledPattern& pat = data.patterns[pick];
    const ClampSpec clamp = input_clamp(cfg, pat);
    const LabelCost cost(pat.label, cfg.first_output());
    ParamGradient g;
    try {
      g = gradient(std::as_const(params), cost, clamp, cfg.estimator, work);
    } catch (const Error& e) {
      throw Error("sgd_train: update " + std::to_string(u) + ": " + e.what());
    }
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= cfg.step_size * g[k];
    if (!params.all_finite())
      throw Error("sgd_train: parameters became non-finite at update " + std::to_string(u));
    if (u % cfg.report_every == 0) report(u);
  }
  traj.final_params = std::move(params);
  return traj;
}

inline TrainTrajectory sgd_train(const TrainConfig& cfg, const Dataset& data,
                                 UniformStream& stream) {
  return sgd_train(cfg, data, stream, SpmvdGradient{});
}

/// Mean of the first and last `width` entries.
inline std::pair<double, double> smoothed_endpoints(std::span<const double> values,
                                                    std::size_t width) {
  if (values.empty() || width == 0) throw Error("smoothed_endpoints: empty input");
  width = std::min(width, values.size());
  const double head =
      std::accumulate(values.begin(), values.begin() + width, 0.0) / static_cast<double>(width);
  const double tail =
      std::accumulate(values.end() - width, values.end(), 0.0) / static_cast<double>(width);
  return {head, tail};
}

/// Average over sliding windows of the sample standard deviation of the
/// residuals from a least-squares line through the window.
inline double windowed_std(std::span<const double> values, std::size_t width) {
  if (width < 3 || values.size() < width) throw Error("windowed_std: need at least 3 points");
  double total = 0.0;
  const std::size_t windows = values.size() - width + 1;
  const double w = static_cast<double>(width);
  const double tbar = (w - 1.0) / 2.0;
  double stt = 0.0;
  for (std::size_t t = 0; t < width; ++t) stt += (t - tbar) * (t - tbar);
  for (std::size_t s = 0; s < windows; ++s) {
    const auto win = values.subspan(s, width);
    const double ybar = std::accumulate(win.begin(), win.end(), 0.0) / w;
    double sty = 0.0;
    for (std::size_t t = 0; t < width; ++t) sty += (t - tbar) * (win[t] - ybar);
    const double slope = sty / stt;
    double ss = 0.0;
    for (std::size_t t = 0; t < width; ++t) {
      const double r = win[t] - ybar - slope * (t - tbar);
      ss += r * r;
    }
    total += std::sqrt(ss / (w - 2.0));
  }
  return total / static_cast<double>(windows);
}

enum class SyntheticKind { stripes, parity };

inline SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "stripes") return SyntheticKind::stripes;
  if (s == "parity") return SyntheticKind::parity;
  throw ConfigError("unknown synthetic dataset kind '" + std::string(s) + "'");
}

/// stripes: pattern i has class i mod q and lights the class's block of
///   floor(p / q) inputs; each input bit is then flipped with probability flip.
/// parity: uniform random inputs, label one-hot on the parity of the first
///   ceil(p / 2) inputs (q must be 2).
inline Dataset make_synthetic_dataset(SyntheticKind kind, std::size_t size, std::size_t n_input,
                                      std::size_t n_output, UniformStream& stream,
                                      double flip = 0.0) {
  if (size == 0) throw ConfigError("dataset_size must be positive");
  if (n_input == 0 || n_output == 0) throw ConfigError("dataset needs inputs and outputs");
  if (!(flip >= 0.0 && flip <= 1.0)) throw ConfigError("flip probability must lie in [0, 1]");
  Dataset d{n_input, n_output, {}};
  d.patterns.reserve(size);
  if (kind == SyntheticKind::stripes) {
    const std::size_t block = n_input / n_output;
    if (block == 0) throw ConfigError("stripes needs n_input >= n_output");
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t cls = i % n_output;
      LabeledPattern p{std::vector<std::uint8_t>(n_input, 0),
                       std::vector<std::uint8_t>(n_output, 0)};
      for (std::size_t j = cls * block; j < (cls + 1) * block; ++j) p.input[j] = 1;
      for (auto& b : p.input)
        if (stream.uniform() < flip) b ^= 1U;
      p.label[cls] = 1;
      d.patterns.push_back(std::move(p));
    }
  } else {
    if (n_output != 2) throw ConfigError("parity needs n_output = 2");
    const std::size_t prefix = (n_input + 1) / 2;
    for (std::size_t i = 0; i < size; ++i) {
      LabeledPattern p{std::vector<std::uint8_t>(n_input, 0), std::vector<std::uint8_t>(2, 0)};
      unsigned parity = 0;
      for (std::size_t j = 0; j < n_input; ++j) {
        p.input[j] = stream.uniform() < 0.5 ? 1 : 0;
        if (j < prefix) parity ^= p.input[j];
      }
      p.label[parity] = 1;
      d.patterns.push_back(std::move(p));
    }
  }
  return d;
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                               const std::string& path) {
  if (buf.size() < off + 4) throw FormatError("'" + path + "': truncated header");
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr unsigned kPixelThreshold = 128;

/// Big-endian IDX image/label pair. Pixels >= 128 become 1, labels become
/// one-hot over 10 outputs. At most `limit` items are read (0 = all).
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t limit = 0) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (detail::read_be32(img, 0, images_path) != kIdxImagesMagic)
    throw FormatError("'" + images_path + "': bad image magic");
  if (detail::read_be32(lab, 0, labels_path) != kIdxLabelsMagic)
    throw FormatError("'" + labels_path + "': bad label magic");
  const std::size_t count = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t label_count = detail::read_be32(lab, 4, labels_path);
  if (count != label_count)
    throw FormatError("image count " + std::to_string(count) + " != label count " +
                      std::to_string(label_count));
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw FormatError("'" + images_path + "': truncated");
  if (lab.size() < 8 + count) throw FormatError("'" + labels_path + "': truncated");

  const std::size_t take = limit == 0 ? count : std::min(limit, count);
  Dataset d{pixels, 10, {}};
  d.patterns.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    LabeledPattern p{std::vector<std::uint8_t>(pixels), std::vector<std::uint8_t>(10, 0)};
    for (std::size_t k = 0; k < pixels; ++k)
      p.input[k] = img[16 + i * pixels + k] >= kPixelThreshold ? 1 : 0;
    const unsigned digit = lab[8 + i];
    if (digit > 9) throw FormatError("label " + std::to_string(digit) + " out of range");
    p.label[digit] = 1;
    d.patterns.push_back(std::move(p));
  }
  return d;
}

}  // namespace spmvd
