#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "levels/common.hpp"

namespace levels {

template <class Real>
inline constexpr Real pi_v = std::numbers::pi_v<Real>;

// ---------------------------------------------------------------------------
// Cotangent chart primitives.
//
// The chart phi_{a,b}(x) = -ctg(pi (x-a)/(b-a)) / (b-a) maps ]a,b[ onto the
// real line; composing one chart with the inverse of another yields a
// diffeomorphism between the two intervals that is tangent to the identity at
// the endpoints.  All interval maps below reduce to the normalized transfer
//   T_r(t) = arccot(r * ctg(pi t)) / pi   on [0,1],  r = |target|/|source|,
// which only ever sees length ratios.

/// ctg(pi t) for t in (0, 1/2].  Laurent series below t = 1e-4, direct
/// quotient otherwise; the series keeps full accuracy where 1/sin overflows
/// the relative budget near the pole.
template <class Real>
Real cot_pi(Real t) {
  if (t < Real(1e-4)) {
    const Real z = pi_v<Real> * t;
    const Real z2 = z * z;
    return (Real(1) - z2 * (Real(1) / 3 + z2 * (Real(1) / 45 + z2 * (Real(2) / 945)))) / z;
  }
  return std::cos(pi_v<Real> * t) / std::sin(pi_v<Real> * t);
}

/// arccot with range ]0, pi[ (principal increasing-inverse branch).
template <class Real>
Real arccot(Real y) {
  return std::atan2(Real(1), y);
}

namespace detail {

/// T_r(t) for t in [0, 1/2].
template <class Real>
Real transfer_lower(Real t, Real ratio) {
  if (t <= Real(0)) return Real(0);
  return arccot(ratio * cot_pi(t)) / pi_v<Real>;
}

}  // namespace detail

/// Normalized transfer T_r on [0,1].  Strictly increasing, fixes 0 and 1,
/// odd-symmetric about the center: T_r(1-t) = 1 - T_r(t).
template <class Real>
Real transfer(Real t, Real ratio) {
  if (t <= Real(0)) return Real(0);
  if (t >= Real(1)) return Real(1);
  if (t <= Real(0.5)) return detail::transfer_lower(t, ratio);
  return Real(1) - detail::transfer_lower(Real(1) - t, ratio);
}

/// Inverse transfer; T_r^{-1} = T_{1/r} (swap the two charts).
template <class Real>
Real transfer_inverse(Real t, Real ratio) {
  return transfer(t, Real(1) / ratio);
}

/// Derivative of the induced interval map in original coordinates,
///   ratio * T_r'(t) = r^2 (1 + c^2) / (1 + r^2 c^2),  c = ctg(pi t).
/// Evaluates to exactly 1 at t = 0 and t = 1 (tangency to the identity).
template <class Real>
Real transfer_slope(Real t, Real ratio) {
  const Real tau = std::min(t, Real(1) - t);
  const Real r2 = ratio * ratio;
  if (tau < Real(0.25)) {
    const Real tn = std::tan(pi_v<Real> * tau);
    const Real w = tn * tn;  // 1/c^2, stable near the endpoints
    return r2 * (Real(1) + w) / (r2 + w);
  }
  const Real c = cot_pi(tau);
  const Real c2 = c * c;
  return r2 * (Real(1) + c2) / (Real(1) + r2 * c2);
}

// ---------------------------------------------------------------------------
// Charts in global coordinates.

template <class Real>
Real phi(Real a, Real b, Real x) {
  if (!(a < x && x < b)) throw DomainError("phi: x outside the open interval");
  const Real len = b - a;
  const Real dlo = x - a;
  const Real dhi = b - x;
  // Evaluate from the nearer endpoint; phi is odd about the midpoint.
  if (dlo <= dhi) return -cot_pi(dlo / len) / len;
  return cot_pi(dhi / len) / len;
}

template <class Real>
Real phi_inv(Real a, Real b, Real y) {
  if (!std::isfinite(y)) throw DomainError("phi_inv: y must be finite");
  const Real len = b - a;
  const Real t = arccot(-len * y) / pi_v<Real>;
  return a + len * t;
}

// ---------------------------------------------------------------------------

template <class Real>
struct Interval {
  Real lo;
  Real hi;
  Real length() const { return hi - lo; }
};

/// Modulus of continuity; only omega(s) = s^alpha is implemented.
template <class Real>
class Modulus {
 public:
  static Modulus power(Real alpha) {
    if (!(alpha > 0)) throw ParameterError("modulus: alpha must be positive");
    return Modulus(alpha);
  }

  Real operator()(Real s) const { return std::pow(s, alpha_); }
  Real alpha() const { return alpha_; }

 private:
  explicit Modulus(Real alpha) : alpha_(alpha) {}
  Real alpha_;
};

/// Diffeomorphism between two intervals, tangent to the identity at the
/// endpoints: phi_{a',b'}^{-1} o phi_{a,b}.
template <class Real>
class Bridge {
 public:
  Bridge(Interval<Real> source, Interval<Real> target)
      : src_(source),
        dst_(target),
        len_src_(source.length()),
        len_dst_(target.length()),
        ratio_(len_dst_ / len_src_) {
    if (!(len_src_ > 0) || !(len_dst_ > 0))
      throw ParameterError("bridge: intervals must be nondegenerate");
  }

  const Interval<Real>& source() const { return src_; }
  const Interval<Real>& target() const { return dst_; }
  Real source_length() const { return len_src_; }
  Real target_length() const { return len_dst_; }
  Real ratio() const { return ratio_; }

  /// Map value; endpoints map to endpoints exactly.
  Real operator()(Real x) const {
    if (!(x >= src_.lo && x <= src_.hi)) throw DomainError("bridge: x outside source");
    const Real dlo = x - src_.lo;
    const Real dhi = src_.hi - x;
    if (dlo <= dhi) {
      if (dlo == Real(0)) return dst_.lo;
      return dst_.lo + detail::transfer_lower(dlo / len_src_, ratio_) * len_dst_;
    }
    if (dhi == Real(0)) return dst_.hi;
    return dst_.hi - detail::transfer_lower(dhi / len_src_, ratio_) * len_dst_;
  }

  /// Derivative dy/dx; exactly 1 at both endpoints.
  Real derivative(Real x) const {
    if (!(x >= src_.lo && x <= src_.hi)) throw DomainError("bridge: x outside source");
    const Real dlo = x - src_.lo;
    const Real dhi = src_.hi - x;
    const Real tau = std::min(dlo, dhi) / len_src_;
    return transfer_slope(tau, ratio_);
  }

  Bridge inverse() const { return Bridge(dst_, src_); }

 private:
  Interval<Real> src_, dst_;
  Real len_src_, len_dst_, ratio_;
};

// ---------------------------------------------------------------------------

template <class Real>
struct LemmaCertificate {
  Real m;            // supplied constant
  bool ratio_ok;     // 1/2 <= |I|/|J| <= 2
  bool bound_ok;     // ||J|/|I| - 1| / omega(|I|) <= m
  Real quantity;     // the left-hand side above
  Real norm_bound;   // 6 pi m

  bool ok() const { return ratio_ok && bound_ok; }
};

/// Checks the smoothing-lemma hypothesis for a source/target pair.  The bound
/// comparison carries an 8-ulp relative slack so exact-arithmetic equality
/// cases are not rejected by roundoff.
template <class Real>
LemmaCertificate<Real> check_lemma_hypothesis(Interval<Real> source, Interval<Real> target,
                                              const Modulus<Real>& omega, Real m) {
  const Real li = source.length();
  const Real lj = target.length();
  if (!(li > 0) || !(lj > 0))
    throw ParameterError("check_lemma_hypothesis: intervals must be nondegenerate");
  LemmaCertificate<Real> cert{};
  cert.m = m;
  const Real si = li / lj;
  cert.ratio_ok = (si >= Real(0.5) && si <= Real(2));
  cert.quantity = std::abs(lj / li - Real(1)) / omega(li);
  const Real slack = Real(8) * std::numeric_limits<Real>::epsilon();
  cert.bound_ok = cert.quantity <= m * (Real(1) + slack);
  cert.norm_bound = Real(6) * pi_v<Real> * m;
  return cert;
}

// ---------------------------------------------------------------------------

/// Dyadic sampling grid for empirical omega-seminorms: pair separations 2^-j,
/// j = j_min..j_max, `samples_per_scale` random pairs each.  Streams are keyed
/// by (seed, j) and samples are drawn as a prefix, so refining the grid can
/// only grow the measured supremum.
struct OmegaGrid {
  int j_min = 0;
  int j_max = 40;
  int samples_per_scale = 64;
  std::uint64_t seed = 42;
};

/// max over sampled pairs of |D(x) - D(y)| / omega(|x - y|).
template <class Real, class Deriv>
Real empirical_omega_norm(Deriv&& deriv, Interval<Real> domain, const Modulus<Real>& omega,
                          const OmegaGrid& grid) {
  if (grid.samples_per_scale <= 0 || grid.j_max < grid.j_min)
    throw ParameterError("empirical_omega_norm: empty grid");
  const Real len = domain.length();
  Real best = 0;
  for (int j = grid.j_min; j <= grid.j_max; ++j) {
    const Real s = std::ldexp(Real(1), -j);
    if (s > len) continue;
    const Real ws = omega(s);
    SplitMix64 rng(mix_keys(grid.seed, static_cast<std::uint64_t>(j)));
    for (int i = 0; i < grid.samples_per_scale; ++i) {
      const Real x = domain.lo + Real(rng.uniform()) * (len - s);
      const Real d = std::abs(deriv(x + s) - deriv(x)) / ws;
      best = std::max(best, d);
    }
  }
  return best;
}

}  // namespace levels
