#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "spmvd/error.hpp"
#include "spmvd/rng.hpp"

namespace spmvd {

/// Welford accumulator.
class RunningMoments {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  double standard_error() const noexcept {
    return count_ > 0 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Coordinate-wise moments of equally sized vectors.
class VectorMoments {
 public:
  explicit VectorMoments(std::size_t dim) : coords_(dim) {}

  void add(std::span<const double> x) {
    if (x.size() != coords_.size()) throw DimensionError("VectorMoments: dimension mismatch");
    for (std::size_t k = 0; k < x.size(); ++k) coords_[k].add(x[k]);
  }

  std::size_t dim() const noexcept { return coords_.size(); }
  const RunningMoments& operator[](std::size_t k) const noexcept { return coords_[k]; }

  std::vector<double> means() const {
    std::vector<double> m(coords_.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = coords_[k].mean();
    return m;
  }
  std::vector<double> standard_errors() const {
    std::vector<double> s(coords_.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = coords_[k].standard_error();
    return s;
  }

 private:
  std::vector<RunningMoments> coords_;
};

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit. Cells with expected count below `min_expected` are
/// pooled into one bin. An observation in a zero-probability cell gives p = 0.
inline ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed,
                                      std::span<const double> probabilities,
                                      double min_expected = 5.0) {
  if (observed.size() != probabilities.size())
    throw DimensionError("chi_square_gof: size mismatch");
  std::uint64_t total = 0;
  for (auto o : observed) total += o;
  const double n = static_cast<double>(total);

  std::vector<double> obs;
  std::vector<double> expd;
  double pooled_obs = 0.0;
  double pooled_exp = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * probabilities[k];
    if (probabilities[k] <= 0.0) {
      if (observed[k] > 0) return {std::numeric_limits<double>::infinity(), 0, 0.0};
      continue;
    }
    if (e < min_expected) {
      pooled_obs += static_cast<double>(observed[k]);
      pooled_exp += e;
    } else {
      obs.push_back(static_cast<double>(observed[k]));
      expd.push_back(e);
    }
  }
  if (pooled_exp > 0.0) {
    obs.push_back(pooled_obs);
    expd.push_back(pooled_exp);
  }
  if (obs.size() < 2) return {0.0, 0, 1.0};

  ChiSquareResult r;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double diff = obs[k] - expd[k];
    r.statistic += diff * diff / expd[k];
  }
  r.degrees_of_freedom = obs.size() - 1;
  const boost::math::chi_squared dist(static_cast<double>(r.degrees_of_freedom));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

inline unsigned default_thread_count() noexcept {
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs fn(stream, r) for r in [0, count), replication r driven by
/// base.derive(r). Results are returned in replication order and do not depend
/// on the thread count.
template <class Fn>
auto parallel_replicate(std::size_t count, const UniformStream& base, Fn fn,
                        unsigned threads = default_thread_count()) {
  using Result = decltype(fn(std::declval<UniformStream&>(), std::size_t{}));
  std::vector<Result> results(count);
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), std::max<std::size_t>(count, 1)));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned slot, std::size_t begin, std::size_t end) {
    try {
      for (std::size_t r = begin; r < end; ++r) {
        UniformStream s = base.derive(r);
        results[r] = fn(s, r);
      }
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  if (threads <= 1) {
    work(0, 0, count);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, t, begin, end);
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace spmvd
