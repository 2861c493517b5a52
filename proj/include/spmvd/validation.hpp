#pragma once

// Self-check suites run by `spmvd validate`. Each invariant reports its
// largest observed deviation next to the tolerance it is held to.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spmvd/mvd.hpp"
#include "spmvd/network.hpp"
#include "spmvd/oracle.hpp"
#include "spmvd/rng.hpp"
#include "spmvd/stats.hpp"

namespace spmvd {

enum class ValidationScale { small, full };

struct ValidationOptions {
  ValidationScale scale = ValidationScale::small;
  std::uint64_t seed = 20240601;
  double c_fault = 0.0;  // added to c in the MVD identity check; test hook
};

struct InvariantResult {
  std::string name;
  double deviation = 0.0;  // worst case observed; for p-values, the smallest p
  double tolerance = 0.0;
  bool passed = false;
  bool is_lower_bound = false;  // deviation must exceed tolerance (p-values)
};

struct SuiteResult {
  std::string name;
  std::vector<InvariantResult> invariants;

  bool passed() const {
    return std::all_of(invariants.begin(), invariants.end(),
                       [](const InvariantResult& r) { return r.passed; });
  }
  double max_deviation() const {
    double m = 0.0;
    for (const auto& r : invariants)
      if (!r.is_lower_bound) m = std::max(m, r.deviation);
    return m;
  }
};

struct ValidationReport {
  std::vector<SuiteResult> suites;

  bool passed() const {
    return std::all_of(suites.begin(), suites.end(),
                       [](const SuiteResult& s) { return s.passed(); });
  }
};

namespace detail {

inline double draw(UniformStream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform(); }

inline NetworkParams draw_params(std::size_t n, double scale, UniformStream& s) {
  NetworkParams p(n);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = draw(s, -scale, scale);
  return p;
}

inline NetworkState draw_state(std::size_t n, UniformStream& s) {
  NetworkState x(n);
  for (std::size_t i = 0; i < n; ++i) x.set(i, s.uniform() < 0.5);
  return x;
}

inline ClampSpec draw_clamp(std::size_t n, UniformStream& s) {
  std::vector<std::size_t> nodes;
  std::vector<std::uint8_t> values;
  for (std::size_t i = 0; i < n; ++i)
    if (nodes.size() + 1 < n && s.uniform() < 0.3) {
      nodes.push_back(i);
      values.push_back(s.uniform() < 0.5 ? 1 : 0);
    }
  return ClampSpec(n, nodes, values);
}

inline std::vector<double> draw_measure(std::size_t dim, UniformStream& s) {
  std::vector<double> mu(dim);
  double z = 0.0;
  for (double& m : mu) z += (m = s.uniform());
  for (double& m : mu) m /= z;
  return mu;
}

inline InvariantResult at_most(std::string name, double deviation, double tolerance) {
  return {std::move(name), deviation, tolerance, deviation <= tolerance};
}

inline double q_expectation(const MvdCoefficients& q, std::span<const double> e) {
  double s = 0.0;
  for (std::uint64_t idx = 0; idx < e.size(); ++idx)
    s += q_probability(q, NetworkState::from_index(q.size(), idx)) * e[idx];
  return s;
}

}  // namespace detail

/// Row sums of the clamped kernel and agreement of the two product forms.
inline SuiteResult validate_kernel(std::size_t instances, UniformStream& s) {
  double row_dev = 0.0;
  double form_dev = 0.0;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const NetworkParams p = detail::draw_params(n, 3.0, s);
    const ClampSpec clamp = detail::draw_clamp(n, s);
    const TransitionMatrix m = build_transition_matrix(p, clamp);
    for (std::size_t r = 0; r < m.dim; ++r) {
      double sum = 0.0;
      for (double v : m.row(r)) sum += v;
      row_dev = std::max(row_dev, std::abs(sum - 1.0));
    }
    for (int rep = 0; rep < 4; ++rep) {
      const NetworkState x0 = detail::draw_state(n, s);
      for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
        const NetworkState x1 = NetworkState::from_index(n, idx);
        form_dev = std::max(form_dev, std::abs(transition_probability(p, x0, x1) -
                                               transition_probability_bernoulli(p, x0, x1)));
      }
    }
  }
  return {"kernel-normalization",
          {detail::at_most("row sum - 1", row_dev, 1e-10),
           detail::at_most("product forms differ", form_dev, 1e-12)}};
}

/// Q+- are probability vectors and c (Q+(e) - Q-(e)) equals the analytic
/// derivative and a central difference of the one-step expectation.
inline SuiteResult validate_mvd_identity(std::size_t instances, UniformStream& s,
                                         double c_fault = 0.0) {
  double neg_dev = 0.0;
  double sum_dev = 0.0;
  double analytic_dev = 0.0;
  double fd_dev = 0.0;
  const double h = 1e-5;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    const std::size_t n = 1 + trial % 6;
    const NetworkParams p = detail::draw_params(n, 1.5, s);
    PerturbationDirection v(n);
    const bool rademacher = trial % 2 == 0;
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = rademacher ? (s.uniform() < 0.5 ? -1.0 : 1.0) : detail::draw(s, -1.0, 1.0);
    const NetworkState x0 = detail::draw_state(n, s);
    std::vector<double> e(std::size_t{1} << n);
    for (double& x : e) x = detail::draw(s, -1.0, 1.0);
    auto cost = [&](const NetworkState& x) { return e[x.index()]; };

    const MvdTriple t = mvd_triple(p, v, x0);
    for (const MvdCoefficients* q : {&t.plus, &t.minus}) {
      double sum = 0.0;
      for (std::uint64_t idx = 0; idx < e.size(); ++idx) {
        const double prob = q_probability(*q, NetworkState::from_index(n, idx));
        neg_dev = std::max(neg_dev, -prob);
        sum += prob;
      }
      sum_dev = std::max(sum_dev, std::abs(sum - 1.0));
    }
    const double mvd = (t.c_value + c_fault) *
                       (detail::q_expectation(t.plus, e) - detail::q_expectation(t.minus, e));
    const double analytic = one_step_directional_derivative(p, v, x0, cost);
    const double fd = (one_step_expectation(shifted(p, v, h), x0, cost) -
                       one_step_expectation(shifted(p, v, -h), x0, cost)) /
                      (2.0 * h);
    analytic_dev = std::max(analytic_dev, std::abs(mvd - analytic) / std::max(1.0, std::abs(analytic)));
    fd_dev = std::max(fd_dev, std::abs(mvd - fd) / std::max(1.0, std::abs(fd)));
  }
  return {"mvd-identity",
          {detail::at_most("most negative Q entry", neg_dev, 1e-14),
           detail::at_most("Q sum - 1", sum_dev, 1e-10),
           detail::at_most("relative error vs analytic derivative", analytic_dev, 1e-6),
           detail::at_most("relative error vs central difference", fd_dev, 1e-6)}};
}

/// Chi-square fit of the sequential sampler against exact Q for n = 4, and the
/// mass-point case d = c, a = 0 reproduced exactly.
inline SuiteResult validate_sampler(std::size_t coefficient_sets, std::size_t draws,
                                    UniformStream& s) {
  constexpr std::size_t n = 4;
  double min_p = 1.0;
  for (std::size_t set = 0; set < coefficient_sets; ++set) {
    MvdCoefficients q;
    q.d = detail::draw(s, 0.0, 1.0);
    q.a.resize(n);
    q.beta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      q.a[i] = detail::draw(s, 0.0, 2.0);
      q.beta[i] = detail::draw(s, 0.05, 0.95);
    }
    q.c = q.total_mass_times_c();
    std::vector<double> probs(std::size_t{1} << n);
    for (std::uint64_t idx = 0; idx < probs.size(); ++idx)
      probs[idx] = q_probability(q, NetworkState::from_index(n, idx));
    std::vector<std::uint64_t> counts(probs.size(), 0);
    UniformStream draw_stream = s.derive(set);
    std::vector<double> u(n);
    for (std::size_t k = 0; k < draws; ++k) {
      draw_stream.fill(u);
      ++counts[sample_q(q, u).index()];
    }
    min_p = std::min(min_p, chi_square_gof(counts, probs).p_value);
  }

  MvdCoefficients point;
  point.d = 1.0;
  point.a.assign(n, 0.0);
  point.beta = {1.0, 0.0, 1.0, 1.0};
  point.c = 1.0;
  const NetworkState expected{1, 0, 1, 1};
  std::size_t mismatches = 0;
  UniformStream ps = s.derive(coefficient_sets);
  for (int k = 0; k < 1000; ++k) mismatches += sample_q(point, ps) == expected ? 0 : 1;

  return {"sampler",
          {InvariantResult{"smallest chi-square p-value", min_p, 1e-3, min_p > 1e-3, true},
           detail::at_most("mass-point mismatches", static_cast<double>(mismatches), 0.0)}};
}

/// Kernel entries bounded below by epsilon and geometric contraction of the
/// total-variation distance between two propagated measures.
inline SuiteResult validate_contraction(std::size_t instances, std::size_t pairs,
                                        UniformStream& s) {
  double entry_dev = 0.0;
  double tv_dev = 0.0;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const NetworkParams p = detail::draw_params(n, 1.0, s);
    const TransitionMatrix m = build_transition_matrix(p);
    const double eps = contraction_epsilon(p);
    entry_dev = std::max(entry_dev, (eps - m.min_entry()) / eps);
    if (trial < pairs) {
      std::vector<double> mu1 = detail::draw_measure(m.dim, s);
      std::vector<double> mu2 = detail::draw_measure(m.dim, s);
      const double tv0 = total_variation(mu1, mu2);
      double bound = tv0;
      for (int t = 1; t <= 50; ++t) {
        mu1 = propagate(mu1, m);
        mu2 = propagate(mu2, m);
        bound *= 1.0 - eps;
        tv_dev = std::max(tv_dev, total_variation(mu1, mu2) - bound);
      }
    }
  }
  return {"contraction",
          {detail::at_most("relative shortfall of min entry below epsilon", std::max(entry_dev, 0.0),
                           1e-12),
           detail::at_most("TV excess over (1-eps)^t bound", std::max(tv_dev, 0.0), 1e-12)}};
}

/// Mixture MVD against a five-point difference quotient and the symmetric hand case.
inline SuiteResult validate_mixture(std::size_t instances, UniformStream& s) {
  double fd_dev = 0.0;
  for (std::size_t trial = 0; trial < instances; ++trial) {
    const std::size_t m = 1 + trial % 5;
    const std::size_t space = 3;
    MixtureSpec spec;
    for (std::size_t i = 0; i < m; ++i) {
      spec.thetas.push_back(detail::draw(s, -2.0, 2.0));
      spec.components.push_back(detail::draw_measure(space, s));
    }
    std::vector<double> v(m);
    std::vector<double> e(space);
    for (double& x : v) x = detail::draw(s, -1.0, 1.0);
    for (double& x : e) x = detail::draw(s, -1.0, 1.0);
    const MixtureMvd mvd = mixture_directional_mvd(spec, v);
    double value = 0.0;
    for (std::size_t x = 0; x < space; ++x) value += mvd.c * (mvd.plus[x] - mvd.minus[x]) * e[x];
    auto j = [&](double lambda) {
      std::vector<double> t(spec.thetas);
      for (std::size_t i = 0; i < m; ++i) t[i] += lambda * v[i];
      const auto mu = mixture_distribution(spec, t);
      double r = 0.0;
      for (std::size_t x = 0; x < space; ++x) r += mu[x] * e[x];
      return r;
    };
    const double h = 1e-3;
    const double fd = (8.0 * (j(h) - j(-h)) - (j(2 * h) - j(-2 * h))) / (12.0 * h);
    fd_dev = std::max(fd_dev, std::abs(value - fd));
  }

  MixtureSpec hand;
  hand.thetas = {0.0, 0.0};
  hand.components = {{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<double> v{1.0, -1.0};
  const MixtureMvd mvd = mixture_directional_mvd(hand, v);
  const double hand_dev =
      std::max({std::abs(mvd.c - 1.0), std::abs(mvd.plus_weights[0] - 0.25),
                std::abs(mvd.plus_weights[1] - 0.75), std::abs(mvd.minus_weights[0] - 0.75),
                std::abs(mvd.minus_weights[1] - 0.25)});

  return {"mixture",
          {detail::at_most("abs error vs finite difference", fd_dev, 1e-8),
           detail::at_most("hand-computed triple", hand_dev, 0.0)}};
}

inline ValidationReport run_validation(const ValidationOptions& opt = {}) {
  const bool full = opt.scale == ValidationScale::full;
  const UniformStream root(opt.seed);
  UniformStream k = root.derive(0);
  UniformStream m = root.derive(1);
  UniformStream q = root.derive(2);
  UniformStream c = root.derive(3);
  UniformStream x = root.derive(4);
  ValidationReport report;
  report.suites.push_back(validate_kernel(full ? 50 : 16, k));
  report.suites.push_back(validate_mvd_identity(full ? 200 : 40, m, opt.c_fault));
  report.suites.push_back(validate_sampler(full ? 20 : 5, full ? 1'000'000 : 100'000, q));
  report.suites.push_back(validate_contraction(full ? 50 : 16, full ? 20 : 8, c));
  report.suites.push_back(validate_mixture(full ? 50 : 20, x));
  return report;
}

}  // namespace spmvd
