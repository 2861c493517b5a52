#pragma once

// Gradient estimators for the stationary cost J(theta) = pi_theta(e):
//
//  * mvd_directional_estimate: scalar MVD estimate of grad J . v for a fixed
//    direction (burn-in, one draw from each of P+ and P-, two coupled chains).
//  * spmvd_estimate: the same along a random Rademacher direction, returned as
//    Delta * v, which is an estimate of the full gradient.
//  * spsa_estimate: two-sided finite difference along a random direction.
//
// Every pair of coupled chains consumes one shared block of n uniforms per step.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/mvd.hpp"
#include "spmvd/network.hpp"
#include "spmvd/rng.hpp"
#include "spmvd/stats.hpp"

namespace spmvd {

struct EstimatorConfig {
  std::size_t m0 = 10;          // burn-in steps
  std::size_t m1 = 10;          // accumulation horizon
  double lambda = 0.05;         // SPSA half step
  bool include_t0 = true;       // sum over t = 0..M1 (true) or t = 1..M1
  std::size_t replications = 1;
  bool mask_clamped_rows = true;  // no perturbation of weights/bias into clamped units

  void validate() const {
    if (m1 < 1) throw ConfigError("m1 must be at least 1");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (replications < 1) throw ConfigError("replications must be at least 1");
  }

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

struct GradientEstimate {
  ParamGradient values;
  std::optional<PerturbationDirection> direction;
  double scalar = 0.0;  // Delta (MVD) or finite-difference quotient (SPSA)
  std::uint64_t seed = 0;
  EstimatorConfig config;
};

/// Per-step record of the two coupled chains, for inspection in tests.
struct CoupledTrace {
  std::vector<NetworkState> plus;
  std::vector<NetworkState> minus;
  std::vector<double> summands;  // e(x+(t)) - e(x-(t))
  double c = 0.0;
};

/// True for coordinates that may be perturbed: everything except the weight
/// row and bias of a clamped unit (when masking is on).
inline bool is_trainable(const ClampSpec& clamp, std::size_t n, std::size_t k, bool mask) {
  if (!mask) return true;
  const std::size_t unit = k < n * n ? k / n : k - n * n;
  return !clamp.is_clamped(unit);
}

/// Independent +-1 entries with probability 1/2 each. One uniform is drawn for
/// every coordinate; non-trainable coordinates are then set to 0.
inline PerturbationDirection sample_rademacher_direction(std::size_t n, const ClampSpec& clamp,
                                                         UniformStream& stream,
                                                         bool mask_clamped_rows = true) {
  if (clamp.n() != n) throw DimensionError("clamp spec size does not match network");
  PerturbationDirection v(n);
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double sign = stream.uniform() < 0.5 ? 1.0 : -1.0;
    v[k] = is_trainable(clamp, n, k, mask_clamped_rows) ? sign : 0.0;
  }
  return v;
}

inline PerturbationDirection sample_rademacher_direction(std::size_t n, UniformStream& stream) {
  return sample_rademacher_direction(n, ClampSpec::none(n), stream, false);
}

/// All-zero state with clamp values applied.
inline NetworkState initial_state(const ClampSpec& clamp) {
  NetworkState x(clamp.n());
  clamp.apply(x);
  return x;
}

namespace detail {

inline void burn_in(const NetworkParams& params, const ClampSpec& clamp, std::size_t steps,
                    UniformStream& stream, NetworkState& x, std::vector<double>& u) {
  NetworkState next(params.n());
  for (std::size_t t = 0; t < steps; ++t) {
    stream.fill(u);
    advance(params, x, clamp, u, next);
    std::swap(x, next);
  }
}

template <CostFunction Cost>
double run_coupled_mvd(const NetworkParams& params, const PerturbationDirection& v,
                       const Cost& cost, const ClampSpec& clamp, const EstimatorConfig& cfg,
                       UniformStream& stream, const NetworkState& start, CoupledTrace* trace) {
  cfg.validate();
  check_dims(params, clamp);
  check_dims(params, start);
  const std::size_t n = params.n();
  std::vector<double> u(n);

  NetworkState x = start;
  clamp.apply(x);
  burn_in(params, clamp, cfg.m0, stream, x, u);

  const MvdTriple triple = mvd_triple(params, v, x, clamp);

  // x+(0) and x-(0) are drawn from the same uniforms.
  stream.fill(u);
  NetworkState xp = sample_q(triple.plus, u);
  NetworkState xm = sample_q(triple.minus, u);
  clamp.apply(xp);
  clamp.apply(xm);

  double sum = 0.0;
  auto record = [&](std::size_t t) {
    const double diff = static_cast<double>(cost(xp)) - static_cast<double>(cost(xm));
    if (t > 0 || cfg.include_t0) sum += diff;
    if (trace) {
      trace->plus.push_back(xp);
      trace->minus.push_back(xm);
      trace->summands.push_back(t > 0 || cfg.include_t0 ? diff : 0.0);
    }
  };
  if (trace) trace->c = triple.c_value;

  record(0);
  NetworkState np(n);
  NetworkState nm(n);
  for (std::size_t t = 1; t <= cfg.m1; ++t) {
    // Once the chains meet they move together for the rest of the horizon.
    if (!trace && xp == xm) break;
    stream.fill(u);
    advance(params, xp, clamp, u, np);
    advance(params, xm, clamp, u, nm);
    std::swap(xp, np);
    std::swap(xm, nm);
    record(t);
  }
  return triple.c_value * sum;
}

inline ParamGradient scaled_direction(const PerturbationDirection& v, double scale) {
  ParamGradient g(v.n());
  for (std::size_t k = 0; k < v.size(); ++k) g[k] = scale * v[k];
  return g;
}

}  // namespace detail

/// Scalar MVD estimate of grad J(theta) . v for a fixed direction.
template <CostFunction Cost>
double mvd_directional_estimate(const NetworkParams& params, const PerturbationDirection& v,
                                const Cost& cost, const ClampSpec& clamp,
                                const EstimatorConfig& cfg, UniformStream& stream,
                                const std::optional<NetworkState>& start = std::nullopt) {
  return detail::run_coupled_mvd(params, v, cost, clamp, cfg, stream,
                                 start ? *start : initial_state(clamp), nullptr);
}

template <CostFunction Cost>
double mvd_directional_estimate(const NetworkParams& params, const PerturbationDirection& v,
                                const Cost& cost, const EstimatorConfig& cfg,
                                UniformStream& stream) {
  return mvd_directional_estimate(params, v, cost, ClampSpec::none(params.n()), cfg, stream);
}

/// Same estimate, keeping every coupled state and summand (no early exit).
template <CostFunction Cost>
CoupledTrace trace_mvd_directional(const NetworkParams& params, const PerturbationDirection& v,
                                   const Cost& cost, const ClampSpec& clamp,
                                   const EstimatorConfig& cfg, UniformStream& stream) {
  CoupledTrace trace;
  detail::run_coupled_mvd(params, v, cost, clamp, cfg, stream, initial_state(clamp), &trace);
  return trace;
}

template <CostFunction Cost>
GradientEstimate spmvd_estimate(const NetworkParams& params, const Cost& cost,
                                const ClampSpec& clamp, const EstimatorConfig& cfg,
                                UniformStream& stream,
                                const std::optional<NetworkState>& start = std::nullopt) {
  cfg.validate();
  const std::uint64_t seed = stream.seed();
  PerturbationDirection v =
      sample_rademacher_direction(params.n(), clamp, stream, cfg.mask_clamped_rows);
  const double delta = mvd_directional_estimate(params, v, cost, clamp, cfg, stream, start);
  GradientEstimate out;
  out.values = detail::scaled_direction(v, delta);
  out.direction = std::move(v);
  out.scalar = delta;
  out.seed = seed;
  out.config = cfg;
  return out;
}

template <CostFunction Cost>
GradientEstimate spmvd_estimate(const NetworkParams& params, const Cost& cost,
                                const EstimatorConfig& cfg, UniformStream& stream) {
  return spmvd_estimate(params, cost, ClampSpec::none(params.n()), cfg, stream);
}

/// Two chains under theta + lambda v and theta - lambda v, both started from
/// the all-zero (clamped) state and driven by shared uniforms for `steps` steps.
template <CostFunction Cost>
GradientEstimate spsa_estimate(const NetworkParams& params, const Cost& cost,
                               const ClampSpec& clamp, std::size_t steps, double lambda,
                               UniformStream& stream, bool mask_clamped_rows = true) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  detail::check_dims(params, clamp);
  const std::uint64_t seed = stream.seed();
  const std::size_t n = params.n();
  PerturbationDirection v = sample_rademacher_direction(n, clamp, stream, mask_clamped_rows);
  const NetworkParams up = shifted(params, v, lambda);
  const NetworkParams down = shifted(params, v, -lambda);

  std::vector<double> u(n);
  NetworkState xp = initial_state(clamp);
  NetworkState xm = xp;
  NetworkState np(n);
  NetworkState nm(n);
  for (std::size_t t = 0; t < steps; ++t) {
    stream.fill(u);
    advance(up, xp, clamp, u, np);
    advance(down, xm, clamp, u, nm);
    std::swap(xp, np);
    std::swap(xm, nm);
  }
  const double quotient =
      (static_cast<double>(cost(xp)) - static_cast<double>(cost(xm))) / (2.0 * lambda);

  GradientEstimate out;
  out.values = detail::scaled_direction(v, quotient);
  out.direction = std::move(v);
  out.scalar = quotient;
  out.seed = seed;
  out.config.lambda = lambda;
  out.config.m1 = steps;
  out.config.m0 = 0;
  out.config.mask_clamped_rows = mask_clamped_rows;
  return out;
}

template <CostFunction Cost>
GradientEstimate spsa_estimate(const NetworkParams& params, const Cost& cost, std::size_t steps,
                               double lambda, UniformStream& stream) {
  return spsa_estimate(params, cost, ClampSpec::none(params.n()), steps, lambda, stream, false);
}

/// Mean and standard error of replicated gradient estimates.
struct ReplicationSummary {
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t replications = 0;
};

inline ReplicationSummary summarize(std::span<const GradientEstimate> estimates) {
  if (estimates.empty()) throw Error("summarize: no estimates");
  VectorMoments moments(estimates.front().values.size());
  for (const auto& e : estimates) moments.add(e.values.values());
  return {moments.means(), moments.standard_errors(), estimates.size()};
}

/// cfg.replications independent SPMVD estimates; replication r uses
/// UniformStream(seed).derive(r).
template <CostFunction Cost>
std::vector<GradientEstimate> replicate_spmvd(const NetworkParams& params, const Cost& cost,
                                              const ClampSpec& clamp,
                                              const EstimatorConfig& cfg, std::uint64_t seed,
                                              unsigned threads = default_thread_count()) {
  cfg.validate();
  return parallel_replicate(
      cfg.replications, UniformStream(seed),
      [&](UniformStream& s, std::size_t) { return spmvd_estimate(params, cost, clamp, cfg, s); },
      threads);
}

template <CostFunction Cost>
std::vector<GradientEstimate> replicate_spsa(const NetworkParams& params, const Cost& cost,
                                             const ClampSpec& clamp, std::size_t steps,
                                             double lambda, std::size_t replications,
                                             std::uint64_t seed, bool mask_clamped_rows = true,
                                             unsigned threads = default_thread_count()) {
  return parallel_replicate(
      replications, UniformStream(seed),
      [&](UniformStream& s, std::size_t) {
        return spsa_estimate(params, cost, clamp, steps, lambda, s, mask_clamped_rows);
      },
      threads);
}

}  // namespace spmvd
