#pragma once

// Exact brute-force computations for small networks. These are the reference
// values that the samplers and estimators are checked against.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/network.hpp"

namespace spmvd {

/// Largest number of free units for an exact distribution vector.
inline constexpr std::size_t kMaxExactFreeUnits = 20;
/// Largest number of free units for a dense transition matrix (4^f doubles).
inline constexpr std::size_t kMaxDenseFreeUnits = 12;
/// Largest n for the one-step enumeration over successor states.
inline constexpr std::size_t kMaxOneStepUnits = 12;

/// Enumerates {0,1}^f over the free units of a clamped network. Index bit k
/// is the k-th free unit (bit 0 lowest order); clamped units carry their clamp
/// values in every enumerated state.
class FreeStateSpace {
 public:
  explicit FreeStateSpace(const ClampSpec& clamp) : clamp_(clamp), free_(clamp.free_nodes()) {
    if (free_.size() > kMaxExactFreeUnits)
      throw SizeLimit("exact enumeration supports at most " + std::to_string(kMaxExactFreeUnits) +
                      " free units, got " + std::to_string(free_.size()));
  }

  std::size_t free_count() const noexcept { return free_.size(); }
  std::size_t size() const noexcept { return std::size_t{1} << free_.size(); }
  const std::vector<std::size_t>& free_nodes() const noexcept { return free_; }

  NetworkState state(std::uint64_t index) const {
    NetworkState x(clamp_.n());
    clamp_.apply(x);
    for (std::size_t k = 0; k < free_.size(); ++k) x.set(free_[k], (index >> k) & 1U);
    return x;
  }

  std::uint64_t index(const NetworkState& x) const noexcept {
    std::uint64_t idx = 0;
    for (std::size_t k = 0; k < free_.size(); ++k)
      idx |= static_cast<std::uint64_t>(x[free_[k]]) << k;
    return idx;
  }

 private:
  ClampSpec clamp_;
  std::vector<std::size_t> free_;
};

/// Dense row-stochastic matrix over the free-unit states.
struct TransitionMatrix {
  std::size_t dim = 0;
  std::vector<double> entries;  // row-major

  double operator()(std::size_t from, std::size_t to) const noexcept {
    return entries[from * dim + to];
  }
  std::span<const double> row(std::size_t from) const noexcept {
    return {entries.data() + from * dim, dim};
  }
  double min_entry() const noexcept {
    double m = entries.empty() ? 0.0 : entries.front();
    for (double p : entries) m = std::min(m, p);
    return m;
  }
};

/// Probability vector over free-unit states, ordered as FreeStateSpace.
struct ExactDistribution {
  std::vector<double> probabilities;

  std::size_t size() const noexcept { return probabilities.size(); }
  double operator[](std::size_t k) const noexcept { return probabilities[k]; }
};

namespace detail {

// Fills `row` with prod over free units of s_k^{x_k} (1 - s_k)^{1 - x_k}.
inline void product_row(std::span<const double> on_prob, std::span<double> row) {
  row[0] = 1.0;
  std::size_t filled = 1;
  for (double s : on_prob) {
    for (std::size_t idx = 0; idx < filled; ++idx) {
      row[idx + filled] = row[idx] * s;
      row[idx] *= 1.0 - s;
    }
    filled *= 2;
  }
}

}  // namespace detail

inline TransitionMatrix build_transition_matrix(const NetworkParams& params,
                                                const ClampSpec& clamp) {
  detail::check_dims(params, clamp);
  const FreeStateSpace space(clamp);
  if (space.free_count() > kMaxDenseFreeUnits)
    throw SizeLimit("dense transition matrix supports at most " +
                    std::to_string(kMaxDenseFreeUnits) + " free units");
  const std::size_t dim = space.size();
  TransitionMatrix m{dim, std::vector<double>(dim * dim)};
  std::vector<double> on_prob(space.free_count());
  for (std::size_t from = 0; from < dim; ++from) {
    const NetworkState x0 = space.state(from);
    for (std::size_t k = 0; k < on_prob.size(); ++k)
      on_prob[k] = sigmoid(detail::field(params, x0, space.free_nodes()[k]));
    detail::product_row(on_prob, {m.entries.data() + from * dim, dim});
  }
  return m;
}

inline TransitionMatrix build_transition_matrix(const NetworkParams& params) {
  return build_transition_matrix(params, ClampSpec::none(params.n()));
}

/// mu P
inline std::vector<double> propagate(std::span<const double> mu, const TransitionMatrix& m) {
  if (mu.size() != m.dim) throw DimensionError("propagate: distribution size mismatch");
  std::vector<double> out(m.dim, 0.0);
  for (std::size_t from = 0; from < m.dim; ++from) {
    const double w = mu[from];
    if (w == 0.0) continue;
    const auto row = m.row(from);
    for (std::size_t to = 0; to < m.dim; ++to) out[to] += w * row[to];
  }
  return out;
}

/// Half the L1 distance; equals the supremum over events on a finite space.
inline double total_variation(std::span<const double> mu1, std::span<const double> mu2) {
  if (mu1.size() != mu2.size()) throw DimensionError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < mu1.size(); ++k) s += std::abs(mu1[k] - mu2[k]);
  return 0.5 * s;
}

/// Fixed point of pi P = pi by power iteration from the uniform vector.
/// Stops once ||pi P - pi||_1 < tolerance.
inline ExactDistribution stationary_distribution(const TransitionMatrix& m,
                                                 double tolerance = 1e-13,
                                                 std::size_t max_iterations = 1'000'000) {
  if (m.dim == 0) throw DimensionError("stationary_distribution: empty matrix");
  std::vector<double> pi(m.dim, 1.0 / static_cast<double>(m.dim));
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::vector<double> next = propagate(pi, m);
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    for (double& p : next) p /= total;
    const double residual = 2.0 * total_variation(next, pi);
    pi = std::move(next);
    if (residual < tolerance) return {std::move(pi)};
  }
  throw ConvergenceError("stationary_distribution: power iteration did not converge");
}

/// J(theta) = sum_x e(x) pi_theta(x).
template <CostFunction Cost>
double stationary_cost(const NetworkParams& params, const Cost& cost, const ClampSpec& clamp) {
  const FreeStateSpace space(clamp);
  const ExactDistribution pi = stationary_distribution(build_transition_matrix(params, clamp));
  double j = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k)
    j += pi[k] * static_cast<double>(cost(space.state(k)));
  return j;
}

template <CostFunction Cost>
double stationary_cost(const NetworkParams& params, const Cost& cost) {
  return stationary_cost(params, cost, ClampSpec::none(params.n()));
}

/// Central finite differences of the stationary cost, one coordinate at a time.
template <CostFunction Cost>
ParamGradient exact_gradient(const NetworkParams& params, const Cost& cost,
                             const ClampSpec& clamp, double h = 1e-4) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw Error("exact_gradient: step h must lie in [1e-7, 1e-3]");
  ParamGradient g(params.n());
  for (std::size_t k = 0; k < params.size(); ++k) {
    NetworkParams up = params;
    NetworkParams down = params;
    up[k] += h;
    down[k] -= h;
    g[k] = (stationary_cost(up, cost, clamp) - stationary_cost(down, cost, clamp)) / (2.0 * h);
  }
  return g;
}

template <CostFunction Cost>
ParamGradient exact_gradient(const NetworkParams& params, const Cost& cost, double h = 1e-4) {
  return exact_gradient(params, cost, ClampSpec::none(params.n()), h);
}

/// sum_x1 e(x1) P(x0, x1) by enumeration.
template <CostFunction Cost>
double one_step_expectation(const NetworkParams& params, const NetworkState& x0,
                            const Cost& cost) {
  detail::check_dims(params, x0);
  if (params.n() > kMaxOneStepUnits) throw SizeLimit("one-step enumeration limited to n <= 12");
  const std::size_t n = params.n();
  std::vector<double> on_prob(n);
  for (std::size_t i = 0; i < n; ++i) on_prob[i] = sigmoid(detail::field(params, x0, i));
  std::vector<double> row(std::size_t{1} << n);
  detail::product_row(on_prob, row);
  double s = 0.0;
  for (std::size_t idx = 0; idx < row.size(); ++idx)
    s += row[idx] * static_cast<double>(cost(NetworkState::from_index(n, idx)));
  return s;
}

/// Analytic derivative of x0 -> sum_x1 e(x1) P_theta(x0, x1) along v:
///   sum_x1 e(x1) P(x0, x1) sum_i (x1_i - sigmoid(u_i(x0))) (sum_j v_ij x0_j + v_i).
template <CostFunction Cost>
double one_step_directional_derivative(const NetworkParams& params,
                                       const PerturbationDirection& v, const NetworkState& x0,
                                       const Cost& cost) {
  detail::check_dims(params, x0);
  const std::size_t n = params.n();
  if (v.n() != n) throw DimensionError("direction size does not match network");
  if (n > kMaxOneStepUnits) throw SizeLimit("one-step enumeration limited to n <= 12");

  std::vector<double> sig(n);
  std::vector<double> slope(n);
  for (std::size_t i = 0; i < n; ++i) {
    sig[i] = sigmoid(detail::field(params, x0, i));
    double s = v.bias(i);
    for (std::size_t j = 0; j < n; ++j) s += v.weight(i, j) * x0[j];
    slope[i] = s;
  }
  double total = 0.0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    const NetworkState x1 = NetworkState::from_index(n, idx);
    double p = 1.0;
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p *= x1[i] ? sig[i] : 1.0 - sig[i];
      score += (x1[i] - sig[i]) * slope[i];
    }
    total += static_cast<double>(cost(x1)) * p * score;
  }
  return total;
}

/// Exponential-weight mixture mu_theta = sum_i exp(-theta_i) / Z * mu_i.
struct MixtureSpec {
  std::vector<double> thetas;
  std::vector<std::vector<double>> components;  // each a probability vector

  void validate() const {
    if (thetas.empty()) throw Error("mixture: need at least one component");
    if (components.size() != thetas.size())
      throw DimensionError("mixture: thetas/components length mismatch");
    const std::size_t space = components.front().size();
    for (const auto& c : components) {
      if (c.size() != space) throw DimensionError("mixture: components on different spaces");
      double s = 0.0;
      for (double p : c) {
        if (p < 0.0) throw Error("mixture: negative component probability");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-12) throw Error("mixture: component does not sum to 1");
    }
  }
};

struct MixtureMvd {
  double c = 0.0;
  std::vector<double> plus_weights;
  std::vector<double> minus_weights;
  std::vector<double> plus;   // sum_i plus_weights_i mu_i
  std::vector<double> minus;  // sum_i minus_weights_i mu_i
};

namespace detail {

inline std::vector<double> mix(const MixtureSpec& spec, std::span<const double> weights) {
  std::vector<double> out(spec.components.front().size(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i)
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += weights[i] * spec.components[i][x];
  return out;
}

}  // namespace detail

/// Mixture weights exp(-theta_i) / Z at the given parameter.
inline std::vector<double> mixture_weights(std::span<const double> thetas) {
  double lo = thetas.front();
  for (double t : thetas) lo = std::min(lo, t);
  std::vector<double> w(thetas.size());
  double z = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    w[i] = std::exp(-(thetas[i] - lo));
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

inline std::vector<double> mixture_distribution(const MixtureSpec& spec,
                                                std::span<const double> thetas) {
  return detail::mix(spec, mixture_weights(thetas));
}

/// Directional MVD of the mixture. With p_i = exp(-theta_i)/Z,
///   d/dlambda p_i(theta + lambda v) = p_i (sum_j p_j v_j - v_i),
/// and splitting v into positive and negative parts gives
///   c = sum_j p_j |v_j| = K / Z,
///   plus_i  = p_i ((v_i)- + sum_j p_j (v_j)+) / c,
///   minus_i = p_i ((v_i)+ + sum_j p_j (v_j)-) / c,
/// both of which sum to 1.
inline MixtureMvd mixture_directional_mvd(const MixtureSpec& spec, std::span<const double> v) {
  spec.validate();
  const std::size_t m = spec.thetas.size();
  if (v.size() != m) throw DimensionError("mixture: direction length mismatch");
  const std::vector<double> p = mixture_weights(spec.thetas);
  double c = 0.0;
  double up = 0.0;
  double down = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    c += p[j] * std::abs(v[j]);
    up += p[j] * std::max(v[j], 0.0);
    down += p[j] * std::max(-v[j], 0.0);
  }
  if (!(c > 0.0)) throw DegenerateDirection("mixture: zero direction");
  MixtureMvd out;
  out.c = c;
  out.plus_weights.resize(m);
  out.minus_weights.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.plus_weights[i] = p[i] * (std::max(-v[i], 0.0) + up) / c;
    out.minus_weights[i] = p[i] * (std::max(v[i], 0.0) + down) / c;
  }
  out.plus = detail::mix(spec, out.plus_weights);
  out.minus = detail::mix(spec, out.minus_weights);
  return out;
}

}  // namespace spmvd
