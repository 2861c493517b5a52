#pragma once

// Little model: n binary units that all resample at once. Unit i turns on with
// probability sigmoid(sum_j w[i][j] * x[j] + b[i]).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/rng.hpp"

namespace spmvd {

/// Stable logistic function; only ever exponentiates a non-positive argument.
inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Parameter-shaped array: an n x n weight block (row i = receiving unit)
/// followed by n biases. Flat coordinate k < n*n is w[k / n][k % n], the
/// remaining coordinates are b[k - n*n].
///
/// The tag keeps network parameters, perturbation directions and gradients
/// from being mixed up by accident; convert explicitly with `reinterpret_as`.
template <class Tag>
class ParamArray {
 public:
  ParamArray() = default;

  explicit ParamArray(std::size_t n) : n_(n), data_(n * n + n, 0.0) {}

  ParamArray(std::size_t n, std::span<const double> weights, std::span<const double> biases)
      : n_(n) {
    if (weights.size() != n * n)
      throw DimensionError("weights: expected " + std::to_string(n * n) + " entries, got " +
                           std::to_string(weights.size()));
    if (biases.size() != n)
      throw DimensionError("biases: expected " + std::to_string(n) + " entries, got " +
                           std::to_string(biases.size()));
    data_.reserve(n * n + n);
    data_.insert(data_.end(), weights.begin(), weights.end());
    data_.insert(data_.end(), biases.begin(), biases.end());
    if (!all_finite()) throw Error("parameter array has non-finite entries");
  }

  ParamArray(std::size_t n, std::initializer_list<double> weights,
             std::initializer_list<double> biases)
      : ParamArray(n, std::span<const double>(weights.begin(), weights.size()),
                   std::span<const double>(biases.begin(), biases.size())) {}

  static ParamArray from_flat(std::size_t n, std::vector<double> flat) {
    if (flat.size() != n * n + n)
      throw DimensionError("flat parameter vector has wrong length");
    ParamArray out;
    out.n_ = n;
    out.data_ = std::move(flat);
    return out;
  }

  template <class OtherTag>
  ParamArray<OtherTag> reinterpret_as() const {
    return ParamArray<OtherTag>::from_flat(n_, data_);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return data_.size(); }

  double weight(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  double& weight(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double bias(std::size_t i) const noexcept { return data_[n_ * n_ + i]; }
  double& bias(std::size_t i) noexcept { return data_[n_ * n_ + i]; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * n_, n_};
  }
  std::span<const double> weights() const noexcept { return {data_.data(), n_ * n_}; }
  std::span<const double> biases() const noexcept { return {data_.data() + n_ * n_, n_}; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  double operator[](std::size_t k) const noexcept { return data_[k]; }
  double& operator[](std::size_t k) noexcept { return data_[k]; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ParamArray&, const ParamArray&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

using NetworkParams = ParamArray<struct NetworkParamsTag>;
using PerturbationDirection = ParamArray<struct PerturbationDirectionTag>;
using ParamGradient = ParamArray<struct ParamGradientTag>;

/// theta + scale * direction
template <class Tag>
NetworkParams shifted(const NetworkParams& params, const ParamArray<Tag>& direction,
                      double scale) {
  if (params.n() != direction.n()) throw DimensionError("shifted: size mismatch");
  NetworkParams out = params;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * direction[k];
  return out;
}

/// Human-readable coordinate label, e.g. "w[2][0]" or "b[1]".
inline std::string coordinate_name(std::size_t n, std::size_t k) {
  if (k < n * n) return "w[" + std::to_string(k / n) + "][" + std::to_string(k % n) + "]";
  return "b[" + std::to_string(k - n * n) + "]";
}

/// Element of {0,1}^n.
class NetworkState {
 public:
  NetworkState() = default;
  explicit NetworkState(std::size_t n) : bits_(n, 0) {}
  NetworkState(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) {
      if (b != 0 && b != 1) throw Error("network state entries must be 0 or 1");
      bits_.push_back(static_cast<std::uint8_t>(b));
    }
  }
  explicit NetworkState(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw Error("network state entries must be 0 or 1");
  }

  /// State whose bit i is bit i of `index` (bit 0 lowest order).
  static NetworkState from_index(std::size_t n, std::uint64_t index) {
    NetworkState s(n);
    for (std::size_t i = 0; i < n; ++i) s.bits_[i] = static_cast<std::uint8_t>((index >> i) & 1U);
    return s;
  }

  std::uint64_t index() const noexcept {
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) idx |= static_cast<std::uint64_t>(bits_[i]) << i;
    return idx;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }
  void set(std::size_t i, bool on) noexcept { bits_[i] = on ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const NetworkState&, const NetworkState&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Units frozen at external input values. Clamped units keep their value under
/// stepping; their outgoing weights still feed the free units.
class ClampSpec {
 public:
  ClampSpec() = default;

  static ClampSpec none(std::size_t n) {
    ClampSpec c;
    c.mask_.assign(n, kFree);
    return c;
  }

  ClampSpec(std::size_t n, std::span<const std::size_t> nodes, std::span<const std::uint8_t> values)
      : mask_(n, kFree) {
    if (nodes.size() != values.size()) throw DimensionError("clamp: nodes/values length mismatch");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] >= n) throw DimensionError("clamp: node index out of range");
      if (values[k] > 1) throw Error("clamp: values must be 0 or 1");
      if (mask_[nodes[k]] != kFree) throw Error("clamp: node listed twice");
      mask_[nodes[k]] = static_cast<std::int8_t>(values[k]);
    }
  }

  std::size_t n() const noexcept { return mask_.size(); }
  bool is_clamped(std::size_t i) const noexcept { return mask_[i] != kFree; }
  std::uint8_t value(std::size_t i) const noexcept { return static_cast<std::uint8_t>(mask_[i]); }

  std::vector<std::size_t> free_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (!is_clamped(i)) out.push_back(i);
    return out;
  }

  std::size_t free_count() const noexcept {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), kFree));
  }

  void apply(NetworkState& x) const noexcept {
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (is_clamped(i)) x.set(i, mask_[i] == 1);
  }

  bool respected_by(const NetworkState& x) const noexcept {
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (is_clamped(i) && x[i] != value(i)) return false;
    return true;
  }

 private:
  static constexpr std::int8_t kFree = -1;
  std::vector<std::int8_t> mask_;
};

/// A cost e: {0,1}^n -> R.
template <class F>
concept CostFunction = std::invocable<const F&, const NetworkState&> &&
                       std::convertible_to<std::invoke_result_t<const F&, const NetworkState&>, double>;

namespace detail {

inline void check_dims(const NetworkParams& params, const NetworkState& x) {
  if (x.size() != params.n())
    throw DimensionError("state has " + std::to_string(x.size()) + " units, network has " +
                         std::to_string(params.n()));
}

inline void check_dims(const NetworkParams& params, const ClampSpec& clamp) {
  if (clamp.n() != params.n()) throw DimensionError("clamp spec size does not match network");
}

inline double field(const NetworkParams& params, const NetworkState& x, std::size_t i) noexcept {
  const auto w = params.row(i);
  const auto bits = x.bits();
  double s = params.bias(i);
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * static_cast<double>(bits[j]);
  return s;
}

}  // namespace detail

/// u_i(x) = sum_j w[i][j] x_j + b_i for every unit.
inline std::vector<double> local_field(const NetworkParams& params, const NetworkState& x) {
  detail::check_dims(params, x);
  std::vector<double> u(params.n());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = detail::field(params, x, i);
  return u;
}

/// P(x0 -> x1) = prod_i sigmoid((2 x1_i - 1) u_i(x0)).
inline double transition_probability(const NetworkParams& params, const NetworkState& x0,
                                      const NetworkState& x1) {
  detail::check_dims(params, x0);
  detail::check_dims(params, x1);
  double p = 1.0;
  for (std::size_t i = 0; i < params.n(); ++i) {
    const double sign = x1[i] ? 1.0 : -1.0;
    p *= sigmoid(sign * detail::field(params, x0, i));
  }
  return p;
}

/// Same kernel in Bernoulli form prod_i s_i^{x1_i} (1 - s_i)^{1 - x1_i}; kept as
/// an independent route for cross-checking.
inline double transition_probability_bernoulli(const NetworkParams& params,
                                               const NetworkState& x0, const NetworkState& x1) {
  detail::check_dims(params, x0);
  detail::check_dims(params, x1);
  double p = 1.0;
  for (std::size_t i = 0; i < params.n(); ++i) {
    const double s = sigmoid(detail::field(params, x0, i));
    p *= x1[i] ? s : 1.0 - s;
  }
  return p;
}

/// Kernel of the clamped network: only free units contribute factors, and x1
/// must carry the clamp values (probability 0 otherwise).
inline double transition_probability(const NetworkParams& params, const ClampSpec& clamp,
                                      const NetworkState& x0, const NetworkState& x1) {
  detail::check_dims(params, clamp);
  detail::check_dims(params, x0);
  detail::check_dims(params, x1);
  if (!clamp.respected_by(x1)) return 0.0;
  double p = 1.0;
  for (std::size_t i = 0; i < params.n(); ++i) {
    if (clamp.is_clamped(i)) continue;
    const double sign = x1[i] ? 1.0 : -1.0;
    p *= sigmoid(sign * detail::field(params, x0, i));
  }
  return p;
}

/// One synchronous update driven by caller-supplied uniforms (one per unit,
/// including clamped units so that coupled chains stay aligned).
inline void advance(const NetworkParams& params, const NetworkState& x, const ClampSpec& clamp,
                    std::span<const double> uniforms, NetworkState& out) {
  const std::size_t n = params.n();
  if (out.size() != n) out = NetworkState(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (clamp.is_clamped(i)) {
      out.set(i, clamp.value(i) == 1);
    } else {
      out.set(i, uniforms[i] < sigmoid(detail::field(params, x, i)));
    }
  }
}

/// Draws exactly n uniforms from `stream` and applies one update.
inline NetworkState step(const NetworkParams& params, const NetworkState& x,
                         const ClampSpec& clamp, UniformStream& stream) {
  detail::check_dims(params, x);
  detail::check_dims(params, clamp);
  std::vector<double> u(params.n());
  stream.fill(u);
  NetworkState next(params.n());
  advance(params, x, clamp, u, next);
  return next;
}

inline NetworkState step(const NetworkParams& params, const NetworkState& x,
                         UniformStream& stream) {
  return step(params, x, ClampSpec::none(params.n()), stream);
}

/// max_i sum_j |w[i][j]|
inline double weight_inf_norm(const NetworkParams& params) noexcept {
  double best = 0.0;
  for (std::size_t i = 0; i < params.n(); ++i) {
    double s = 0.0;
    for (double w : params.row(i)) s += std::abs(w);
    best = std::max(best, s);
  }
  return best;
}

inline double bias_inf_norm(const NetworkParams& params) noexcept {
  double best = 0.0;
  for (double b : params.biases()) best = std::max(best, std::abs(b));
  return best;
}

/// Lower bound on every kernel entry: sigmoid(-|w|_inf - |b|_inf)^n. The kernel
/// contracts total variation by at least a factor 1 - epsilon per step.
inline double contraction_epsilon(const NetworkParams& params) {
  if (!params.all_finite()) throw Error("contraction_epsilon: non-finite parameters");
  const double s = sigmoid(-weight_inf_norm(params) - bias_inf_norm(params));
  return std::pow(s, static_cast<double>(params.n()));
}

}  // namespace spmvd
