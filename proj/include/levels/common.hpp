#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace levels {

using Index = std::int64_t;

/// Bad user-supplied parameter (alpha, epsilon, theta, tolerances, config).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No admissible epsilon exists for the requested alpha.
class ThresholdError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Evaluation point outside the function's domain (chart endpoints etc.).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Point escaped the materialized range; carries the extension that would fix it.
class RangeEscape : public std::out_of_range {
 public:
  RangeEscape(const std::string& msg, int needed_k_max, Index needed_n_neg,
              std::size_t word_prefix = 0)
      : std::out_of_range(msg),
        needed_k_max(needed_k_max),
        needed_n_neg(needed_n_neg),
        word_prefix(word_prefix) {}

  int needed_k_max = 0;      // 0 = not the limiting side
  Index needed_n_neg = 0;    // 0 = not the limiting side
  std::size_t word_prefix = 0;  // letters applied before the escape
};

/// Parameters produce a geometrically degenerate model (underflow, overflow).
class DegenerateModel : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Internal consistency check failed while building a model.
class ModelError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::uniform_real_distribution is not bit-stable across
// standard libraries, so golden outputs use this fixed generator instead.

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  return z ^ (z >> 27);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_keys(mix_keys(a, b), c);
}

// ---------------------------------------------------------------------------
// Compensated (Neumaier) accumulator; keeps long telescoping sums exact to a
// couple of ulps instead of drifting with the term count.

template <class Real>
struct Compensated {
  Real sum = 0;
  Real comp = 0;

  void add(Real v) {
    Real t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }

  Real value() const { return sum + comp; }
};

}  // namespace levels
