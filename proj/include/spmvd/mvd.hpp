#pragma once

// Directional measure-valued derivative of the Little kernel P(x0, .) and the
// sequential-conditional sampler for the resulting measures.
//
// For a direction v, with s_i = sigmoid(u_i(x0)),
//   pos_i = (v_i)+ + sum_j (v_ij)+ x0_j,   neg_i = (v_i)- + sum_j (v_ij)- x0_j,
// the derivative of x0 -> sum_x1 e(x1) P(x0, x1) along v equals
//   c * (Q+(e) - Q-(e)),   c = sum_i s_i (pos_i + neg_i),
// where Q+ has data (d = sum_i s_i neg_i, a = pos, beta = s) and Q- has data
// (d = sum_i s_i pos_i, a = neg, beta = s), and a measure with data
// (c, d, a, beta) is
//   Q(x) = (d + sum_i a_i x_i) / c * prod_i beta_i^x_i (1 - beta_i)^(1 - x_i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spmvd/error.hpp"
#include "spmvd/network.hpp"
#include "spmvd/rng.hpp"

namespace spmvd {

inline constexpr double kDegenerateThreshold = 1e-300;
inline constexpr double kNormalizationTolerance = 1e-9;

struct MvdCoefficients {
  double d = 0.0;
  std::vector<double> a;
  std::vector<double> beta;
  double c = 0.0;

  std::size_t size() const noexcept { return a.size(); }

  /// d + sum_i beta_i a_i; equals c for a normalized measure.
  double total_mass_times_c() const noexcept {
    double s = d;
    for (std::size_t i = 0; i < a.size(); ++i) s += beta[i] * a[i];
    return s;
  }
};

struct MvdTriple {
  double c_value = 0.0;
  MvdCoefficients plus;
  MvdCoefficients minus;
};

namespace detail {

struct DirectionalParts {
  std::vector<double> sig;  // sigmoid(u_i(x0))
  std::vector<double> pos;  // (v_i)+ + sum_j (v_ij)+ x0_j
  std::vector<double> neg;  // (v_i)- + sum_j (v_ij)- x0_j
  double c = 0.0;
};

inline double positive_part(double g) noexcept { return g > 0.0 ? g : 0.0; }
inline double negative_part(double g) noexcept { return g < 0.0 ? -g : 0.0; }

// Rows of clamped units are skipped: they do not enter the clamped kernel.
inline DirectionalParts directional_parts(const NetworkParams& params,
                                          const PerturbationDirection& v, const NetworkState& x0,
                                          const ClampSpec* clamp) {
  const std::size_t n = params.n();
  check_dims(params, x0);
  if (v.n() != n) throw DimensionError("direction size does not match network");
  if (clamp) check_dims(params, *clamp);

  DirectionalParts parts;
  parts.sig.resize(n);
  parts.pos.assign(n, 0.0);
  parts.neg.assign(n, 0.0);
  const auto bits = x0.bits();
  for (std::size_t i = 0; i < n; ++i) {
    parts.sig[i] = sigmoid(field(params, x0, i));
    if (clamp && clamp->is_clamped(i)) continue;
    double p = positive_part(v.bias(i));
    double m = negative_part(v.bias(i));
    const auto vrow = v.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (!bits[j]) continue;
      p += positive_part(vrow[j]);
      m += negative_part(vrow[j]);
    }
    parts.pos[i] = p;
    parts.neg[i] = m;
    parts.c += parts.sig[i] * (p + m);
  }
  return parts;
}

inline void require_nondegenerate(double c) {
  if (!(c >= kDegenerateThreshold))
    throw DegenerateDirection("directional normalizer c = " + std::to_string(c) +
                              " is below 1e-300; direction does not move the kernel at this state");
}

inline MvdCoefficients assemble(const DirectionalParts& parts, bool plus) {
  MvdCoefficients q;
  q.c = parts.c;
  q.beta = parts.sig;
  q.a = plus ? parts.pos : parts.neg;
  const auto& other = plus ? parts.neg : parts.pos;
  for (std::size_t i = 0; i < other.size(); ++i) q.d += parts.sig[i] * other[i];
  return q;
}

inline double bernoulli_weight(double beta, std::uint8_t bit) noexcept {
  return bit ? beta : 1.0 - beta;
}

}  // namespace detail

/// c_{theta,v}(x0) = sum_i |v_i| s_i + sum_ij |v_ij| x0_j s_i.
/// Throws DegenerateDirection when the result is below 1e-300.
inline double directional_c(const NetworkParams& params, const PerturbationDirection& v,
                            const NetworkState& x0) {
  const double c = detail::directional_parts(params, v, x0, nullptr).c;
  detail::require_nondegenerate(c);
  return c;
}

inline double directional_c(const NetworkParams& params, const PerturbationDirection& v,
                            const NetworkState& x0, const ClampSpec& clamp) {
  const double c = detail::directional_parts(params, v, x0, &clamp).c;
  detail::require_nondegenerate(c);
  return c;
}

inline MvdCoefficients plus_coefficients(const NetworkParams& params,
                                         const PerturbationDirection& v, const NetworkState& x0) {
  const auto parts = detail::directional_parts(params, v, x0, nullptr);
  detail::require_nondegenerate(parts.c);
  return detail::assemble(parts, true);
}

inline MvdCoefficients minus_coefficients(const NetworkParams& params,
                                          const PerturbationDirection& v, const NetworkState& x0) {
  const auto parts = detail::directional_parts(params, v, x0, nullptr);
  detail::require_nondegenerate(parts.c);
  return detail::assemble(parts, false);
}

inline MvdTriple mvd_triple(const NetworkParams& params, const PerturbationDirection& v,
                            const NetworkState& x0) {
  const auto parts = detail::directional_parts(params, v, x0, nullptr);
  detail::require_nondegenerate(parts.c);
  return {parts.c, detail::assemble(parts, true), detail::assemble(parts, false)};
}

/// Triple for the clamped kernel. Clamped rows get a_i = 0 and contribute
/// nothing to c or d, so each clamped coordinate of Q+- is an independent
/// Bernoulli factor; callers overwrite it with the clamp value after sampling.
inline MvdTriple mvd_triple(const NetworkParams& params, const PerturbationDirection& v,
                            const NetworkState& x0, const ClampSpec& clamp) {
  const auto parts = detail::directional_parts(params, v, x0, &clamp);
  detail::require_nondegenerate(parts.c);
  return {parts.c, detail::assemble(parts, true), detail::assemble(parts, false)};
}

inline double q_probability(const MvdCoefficients& q, const NetworkState& x) {
  if (x.size() != q.size()) throw DimensionError("q_probability: state size mismatch");
  double mix = q.d;
  double prod = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (x[i]) mix += q.a[i];
    prod *= detail::bernoulli_weight(q.beta[i], x[i]);
  }
  return mix / q.c * prod;
}

/// Marginal probability of the first k = prefix.size() coordinates.
inline double q_prefix_marginal(const MvdCoefficients& q, std::span<const std::uint8_t> prefix) {
  const std::size_t k = prefix.size();
  if (k < 1 || k > q.size()) throw DimensionError("q_prefix_marginal: prefix length out of range");
  double mix = q.d;
  double prod = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (prefix[i] > 1) throw Error("q_prefix_marginal: prefix entries must be 0 or 1");
    if (prefix[i]) mix += q.a[i];
    prod *= detail::bernoulli_weight(q.beta[i], prefix[i]);
  }
  for (std::size_t i = k; i < q.size(); ++i) mix += q.a[i] * q.beta[i];
  return mix / q.c * prod;
}

inline void check_normalized(const MvdCoefficients& q) {
  const double mass = q.total_mass_times_c();
  if (!(std::abs(mass - q.c) <= kNormalizationTolerance * std::max(1.0, std::abs(q.c))))
    throw NormalizationViolation("sampler data not normalized: c = " + std::to_string(q.c) +
                                 ", d + sum(beta*a) = " + std::to_string(mass));
}

/// Sequential conditional sampling, one uniform per coordinate:
///   P(x_k = 1 | x_<k) = beta_k (D_k + a_k + T_{k+1}) / (D_k + T_k),
/// D_k = d + sum_{i<k} a_i x_i,  T_k = sum_{i>=k} beta_i a_i.
inline NetworkState sample_q(const MvdCoefficients& q, std::span<const double> uniforms) {
  const std::size_t n = q.size();
  if (uniforms.size() < n) throw DimensionError("sample_q: not enough uniforms");
  check_normalized(q);

  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + q.beta[i] * q.a[i];

  NetworkState x(n);
  double head = q.d;
  for (std::size_t k = 0; k < n; ++k) {
    const double denom = head + tail[k];
    double delta = q.beta[k];
    if (denom > 0.0) delta = q.beta[k] * (head + q.a[k] + tail[k + 1]) / denom;
    const bool on = uniforms[k] < delta;
    x.set(k, on);
    if (on) head += q.a[k];
  }
  return x;
}

inline NetworkState sample_q(const MvdCoefficients& q, UniformStream& stream) {
  std::vector<double> u(q.size());
  stream.fill(u);
  return sample_q(q, u);
}

}  // namespace spmvd
