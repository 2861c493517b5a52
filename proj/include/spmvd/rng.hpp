#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace spmvd {

inline constexpr std::string_view kRngAlgorithm = "splitmix64-counter/v1";

namespace detail {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based uniform(0,1) generator.
///
/// Output k of a stream is mix64(key + (k+1) * gamma), i.e. SplitMix64 addressed
/// by position, so the sequence is fully determined by (seed, counter) and is
/// identical on every platform. Period is 2^64. Independent sub-streams are
/// obtained with derive(), which rehashes the seed together with a child index.
class UniformStream {
 public:
  explicit constexpr UniformStream(std::uint64_t seed) noexcept
      : seed_(seed), key_(detail::mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGoldenGamma);
  }

  /// Uniform on [0,1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  void fill(std::span<double> out) noexcept {
    for (double& u : out) u = uniform();
  }

  /// Child stream `index`; does not advance this stream.
  constexpr UniformStream derive(std::uint64_t index) const noexcept {
    return UniformStream(detail::mix64(detail::mix64(seed_ + detail::kGoldenGamma) ^
                                       detail::mix64(index + 0x3c6ef372fe94f82bULL)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace spmvd
