#pragma once

#include <cstdint>
#include <string>
#include <string_view>

// Deterministic randomness utilities. Everything here is hand-rolled so a
// given (seed, key) pair produces the same stream on every platform and
// every run; std::uniform_real_distribution and friends are deliberately
// avoided because their output is implementation-defined.

namespace sentinel::rnd {

// SplitMix64 step; the workhorse for both hashing and stream generation.
std::uint64_t splitmix64(std::uint64_t& state);

// Stateless mix of a single value.
std::uint64_t mix(std::uint64_t x);

// FNV-1a over bytes, used to fold strings into seeds and to hash transcripts.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h);

// Combine pieces into one seed.
std::uint64_t combine(std::uint64_t a, std::uint64_t b);
std::uint64_t combine(std::uint64_t a, std::string_view b);

// Small counter-based generator: every draw advances a SplitMix64 state.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1), 53 bits of precision.
  double next_unit();

  // Uniform in [lo, hi).
  double next_range(double lo, double hi);

  // Standard normal via Box-Muller.
  double next_gauss();

 private:
  std::uint64_t state_;
};

// Regularized incomplete beta function I_x(a, b), the Beta(a,b) CDF.
double beta_cdf(double a, double b, double x);

// Inverse CDF by bisection; exact enough for sampling (|err| < 1e-15).
double beta_quantile(double a, double b, double u);

}  // namespace sentinel::rnd
