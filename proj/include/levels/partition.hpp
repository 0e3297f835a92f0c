#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "levels/common.hpp"

namespace levels {

enum class Schedule { PowersOfTwo, Linear };

inline const char* schedule_name(Schedule s) {
  return s == Schedule::PowersOfTwo ? "pow2" : "linear";
}

/// Construction parameters.  The three C^{1+alpha} admissibility conditions
/// live in regularity.hpp (check_parameters); building a model only requires
/// positivity, so degenerate configurations can be studied on purpose.
template <class Real>
struct Params {
  Real alpha = Real(0.5);     // Hoelder exponent of the target class
  Real epsilon = Real(0.125); // tail exponent perturbation
  Real theta = Real(0.625);   // marked-interval shrink exponent
  int k_max = 10;             // deepest materialized level
  Index n_neg = 32;           // fundamental intervals kept on the n < 0 side
  Schedule schedule = Schedule::PowersOfTwo;
  int precision_bits = 53;    // significand bits of the working type
  Real tol = Real(1e-12);     // generic certification tolerance

  /// n_k: position of level k in the fundamental-interval ladder.
  Index level_position(int k) const {
    return schedule == Schedule::PowersOfTwo ? (Index(1) << k) : Index(k);
  }

  /// p_k = n_{k+1} - n_k: length of the level-k marked chain.
  Index chain_steps(int k) const { return level_position(k + 1) - level_position(k); }

  void validate() const {
    if (!(alpha > 0) || !(epsilon > 0) || !(theta > 0))
      throw ParameterError("params: alpha, epsilon, theta must be strictly positive");
    if (k_max < 1) throw ParameterError("params: k_max must be >= 1");
    if (n_neg < 1) throw ParameterError("params: n_neg must be >= 1");
    if (!(tol > 0)) throw ParameterError("params: tol must be positive");
    if (precision_bits < 53)
      throw ParameterError("params: precision below 53 significand bits is not supported");
    if (precision_bits > std::numeric_limits<Real>::digits)
      throw ParameterError("params: precision exceeds the working type's significand");
    const int cap = 21;
    if (schedule == Schedule::PowersOfTwo ? (k_max > cap) : (k_max > (Index(1) << cap)))
      throw ParameterError("params: k_max materializes too many fundamental intervals");
  }
};

// ---------------------------------------------------------------------------
// Local coordinates.  A point is (cell, offset): either a fundamental
// interval [a_{n+1}, a_n] with offset s in [0,1], or one of the two tail
// cells outside the materialized range.  The fixed endpoints 0 and 1 are the
// boundary offsets of the tail cells.

inline constexpr Index kLeftTailCell = std::numeric_limits<Index>::min() / 2;
inline constexpr Index kRightTailCell = std::numeric_limits<Index>::max() / 2;

template <class Real>
struct LocalPoint {
  Index cell;
  Real s;

  static LocalPoint zero() { return {kLeftTailCell, Real(0)}; }
  static LocalPoint one() { return {kRightTailCell, Real(1)}; }

  bool is_interval() const { return cell != kLeftTailCell && cell != kRightTailCell; }
  bool operator==(const LocalPoint&) const = default;
};

// ---------------------------------------------------------------------------

namespace detail {

/// Tail sum_{j >= n0} j^{-s} by partial summation plus a two-term
/// Euler-Maclaurin closure.  Returns (value, certified error bound); the
/// remainder of the closure is bounded by the first omitted term since the
/// summand is completely monotone.
template <class Real>
std::pair<Real, Real> zeta_tail(Real s, Index n0, Index partial_terms) {
  Compensated<Real> acc;
  const Index cut = n0 + partial_terms;
  for (Index j = n0; j < cut; ++j) acc.add(std::pow(Real(j), -s));
  const Real n = Real(cut);
  const Real face = std::pow(n, -s);
  Real tail = std::pow(n, Real(1) - s) / (s - Real(1));
  tail += face / 2;
  tail += s * (face / n) / 12;
  const Real err = s * (s + 1) * (s + 2) * (face / (n * n * n)) / 720;
  acc.add(tail);
  return {acc.value(), err};
}

}  // namespace detail

/// Normalizer c making the fundamental-interval lengths
/// c (1+|n|)^{-(1+epsilon)} sum to 1 over all integers n.  Certified:
/// |c * sum - 1| <= tol.
template <class Real>
Real normalization_constant(Real epsilon, Real tol) {
  if (!(epsilon > 0)) throw ParameterError("normalization_constant: epsilon must be positive");
  if (!(tol > 0)) throw ParameterError("normalization_constant: tol must be positive");
  const Real s = Real(1) + epsilon;
  Index terms = 1024;
  for (;;) {
    auto [tail, err] = detail::zeta_tail(s, Index(2), terms);
    const Real total = Real(1) + 2 * tail;  // 1 + 2 sum_{j>=2} j^{-s}
    if (2 * err <= tol * total / 4 || terms >= (Index(1) << 26)) {
      if (2 * err > tol * total / 4)
        throw ParameterError("normalization_constant: tol unreachable for this epsilon");
      return Real(1) / total;
    }
    terms *= 4;
  }
}

// ---------------------------------------------------------------------------

/// Immutable interval combinatorics of one truncated construction: endpoint
/// ladder a_n, level markers b_k < u_k < v_k < c_k, scaling constants
/// lambda_k and the marked chains.  All marked geometry is kept in local
/// (per-cell) coordinates; [b_k, c_k] is the central half of its cell, so its
/// local endpoints are exactly 1/4 and 3/4.
template <class Real>
class PartitionModel {
 public:
  static PartitionModel build(Params<Real> params) {
    params.validate();
    PartitionModel m;
    m.params_ = params;
    m.n_top_ = params.level_position(params.k_max + 1);
    m.n_low_ = -params.n_neg - 1;  // one image-only cell past the last source
    m.c_ = normalization_constant(params.epsilon, params.tol);
    m.build_lengths();
    m.build_endpoints();
    m.build_levels();
    m.build_chains();
    return m;
  }

  const Params<Real>& params() const { return params_; }
  Real c_eps() const { return c_; }
  int k_max() const { return params_.k_max; }
  Index n_top() const { return n_top_; }          // highest cell index (deep end)
  Index n_low() const { return n_low_; }          // lowest stored cell index
  Index source_low() const { return n_low_ + 1; } // lowest cell in f's domain

  /// |[a_{n+1}, a_n]| by the defining formula; any n.
  Real interval_length(Index n) const {
    const Real base = Real(1) + Real(std::llabs(n));
    return c_ * std::pow(base, -(Real(1) + params_.epsilon));
  }

  /// Stored length (identical to the formula; cached for hot paths).
  Real cell_length(Index n) const { return ell_[cell_idx(n)]; }

  Real a_position(Index n) const {
    if (n < n_low_ || n > n_top_ + 1)
      throw RangeEscape("a_position: endpoint index outside the stored range", 0, 0);
    return a_[a_idx(n)];
  }

  /// a_position with a certification demand on the construction error.
  Real a_position(Index n, Real tol) const {
    if (!(tol > 0)) throw ParameterError("a_position: tol must be positive");
    if (a_err_ > tol)
      throw ParameterError("a_position: requested tol below the certified bound");
    return a_position(n);
  }

  /// Certified bound on |stored a_n - exact a_n| over the whole ladder.
  Real a_error_bound() const { return a_err_; }

  Real bc_length(int k) const {
    level_at(k);
    return cell_length(params_.level_position(k)) / 2;
  }
  Real uv_length(int k) const {
    level_at(k);
    return uv_[k - 1];
  }

  Real lambda(int k) const { return static_cast<Real>(lambda_ext(k)); }
  long double lambda_ext(int k) const {
    chain_level_at(k);
    return lambda_[k - 1];
  }

  // Local marker coordinates inside cell n_k.
  Real b_local() const { return Real(0.25); }
  Real c_local() const { return Real(0.75); }
  Real u_local(int k) const { return Real(0.5) - uv_half_width_local(k); }
  Real v_local(int k) const { return Real(0.5) + uv_half_width_local(k); }
  Real uv_half_width_local(int k) const {
    level_at(k);
    return uv_hw_[k - 1];
  }

  // Global marker coordinates.
  Real b_global(int k) const { return marker_global(k, b_local()); }
  Real c_global(int k) const { return marker_global(k, c_local()); }
  Real u_global(int k) const { return marker_global(k, u_local(k)); }
  Real v_global(int k) const { return marker_global(k, v_local(k)); }

  /// Local half-width of the i-th chain interval of level k (lives in cell
  /// n_{k+1} - i, centered at 1/2).
  Real chain_half_width_local(int k, Index i) const {
    chain_level_at(k);
    if (i < 0 || i > params_.chain_steps(k))
      throw ParameterError("chain_interval: index outside 0..n_{k+1}-n_k");
    return chain_hw_[k - 1][static_cast<std::size_t>(i)];
  }

  Index chain_cell(int k, Index i) const { return params_.level_position(k + 1) - i; }

  std::pair<LocalPoint<Real>, LocalPoint<Real>> chain_interval(int k, Index i) const {
    const Real hw = chain_half_width_local(k, i);
    const Index n = chain_cell(k, i);
    return {LocalPoint<Real>{n, Real(0.5) - hw}, LocalPoint<Real>{n, Real(0.5) + hw}};
  }

  /// Global length of the i-th chain interval of level k.
  Real chain_length(int k, Index i) const {
    return 2 * chain_half_width_local(k, i) * cell_length(chain_cell(k, i));
  }

  // -- cell classification --------------------------------------------------

  bool is_cell(Index n) const { return n >= n_low_ && n <= n_top_; }

  /// Level k with n == n_k, or 0.
  int level_of_cell(Index n) const {
    if (params_.schedule == Schedule::PowersOfTwo) {
      if (n < 2 || (n & (n - 1)) != 0) return 0;
      const int k = std::countr_zero(static_cast<std::uint64_t>(n));
      return k <= params_.k_max ? k : 0;
    }
    return (n >= 1 && n <= params_.k_max) ? static_cast<int>(n) : 0;
  }

  /// (k, i) when cell n carries the i-th source chain interval of level k.
  std::optional<std::pair<int, Index>> chain_slot_of_cell(Index n) const {
    if (params_.schedule == Schedule::PowersOfTwo) {
      if (n < 3) return std::nullopt;
      const int k = std::bit_width(static_cast<std::uint64_t>(n - 1)) - 1;
      if (k < 1 || k > params_.k_max - 1) return std::nullopt;
      return std::make_pair(k, (Index(1) << (k + 1)) - n);
    }
    if (n < 2 || n > params_.k_max) return std::nullopt;
    return std::make_pair(static_cast<int>(n - 1), Index(0));
  }

  // -- local/global conversions ---------------------------------------------

  Real to_global(const LocalPoint<Real>& p) const {
    if (p.cell == kLeftTailCell) return p.s * a_position(n_top_ + 1);
    if (p.cell == kRightTailCell) {
      const Real lo = a_position(n_low_);
      return lo + p.s * (Real(1) - lo);
    }
    return a_position(p.cell + 1) + p.s * cell_length(p.cell);
  }

  LocalPoint<Real> from_global(Real x) const {
    if (!(x >= 0 && x <= 1)) throw DomainError("from_global: x outside [0,1]");
    if (x == Real(0)) return LocalPoint<Real>::zero();
    if (x == Real(1)) return LocalPoint<Real>::one();
    const Real top = a_position(n_top_ + 1);
    if (x < top) return {kLeftTailCell, x / top};
    const Real low = a_position(n_low_);
    if (x >= low) return {kRightTailCell, (x - low) / (Real(1) - low)};
    // a_ is ascending in storage order; find the cell with a_{n+1} <= x < a_n.
    const auto it = std::upper_bound(a_.begin(), a_.end(), x);
    const Index n = n_top_ + 1 - static_cast<Index>(it - a_.begin());
    const Real s = (x - a_position(n + 1)) / cell_length(n);
    return {n, std::clamp(s, Real(0), Real(1))};
  }

  /// Canonical form: a shared endpoint belongs to the cell where it sits at
  /// offset 0.
  LocalPoint<Real> normalized(LocalPoint<Real> p) const {
    if (p.cell == kLeftTailCell && p.s == Real(1)) return {n_top_, Real(0)};
    if (p.is_interval() && p.s == Real(1)) {
      if (p.cell - 1 >= n_low_) return {p.cell - 1, Real(0)};
      return {kRightTailCell, Real(0)};
    }
    return p;
  }

 private:
  PartitionModel() = default;

  std::size_t cell_idx(Index n) const { return static_cast<std::size_t>(n - n_low_); }
  std::size_t a_idx(Index n) const { return static_cast<std::size_t>(n_top_ + 1 - n); }

  void level_at(int k) const {
    if (k < 1 || k > params_.k_max) throw ParameterError("level index outside 1..k_max");
  }
  void chain_level_at(int k) const {
    if (k < 1 || k > params_.k_max - 1)
      throw ParameterError("chain level index outside 1..k_max-1");
  }

  Real marker_global(int k, Real local) const {
    const Index n = params_.level_position(k);
    return a_position(n + 1) + local * cell_length(n);
  }

  void build_lengths() {
    ell_.resize(static_cast<std::size_t>(n_top_ - n_low_) + 1);
    for (Index n = n_low_; n <= n_top_; ++n) ell_[cell_idx(n)] = interval_length(n);
  }

  void build_endpoints() {
    // Anchor at the deep end with a certified tail, then telescope upward
    // with compensated additions so a_n - a_{n+1} stays within one rounding
    // of the stored length.
    const Real s = Real(1) + params_.epsilon;
    auto [tail, tail_err] = detail::zeta_tail(s, n_top_ + 2, Index(4096));
    a_.resize(static_cast<std::size_t>(n_top_ + 1 - n_low_) + 1);
    Compensated<Real> acc;
    acc.add(c_ * tail);
    a_[a_idx(n_top_ + 1)] = acc.value();
    for (Index n = n_top_; n >= n_low_; --n) {
      acc.add(cell_length(n));
      a_[a_idx(n)] = acc.value();
    }
    if (!(a_[a_idx(n_low_)] < Real(1)))
      throw ModelError("partition: endpoint ladder exceeds 1");
    a_err_ = c_ * tail_err + 8 * std::numeric_limits<Real>::epsilon();
  }

  void build_levels() {
    const int kmax = params_.k_max;
    uv_.resize(static_cast<std::size_t>(kmax));
    uv_hw_.resize(static_cast<std::size_t>(kmax));
    const Real min_normal = std::numeric_limits<Real>::min();
    for (int k = 1; k <= kmax; ++k) {
      const Real bc = cell_length(params_.level_position(k)) / 2;
      const Real uv = std::pow(bc, Real(1) + params_.theta);
      if (!(uv > min_normal))
        throw DegenerateModel("partition: marked interval underflows at level " +
                              std::to_string(k));
      uv_[k - 1] = uv;
      const Real hw = uv / (2 * cell_length(params_.level_position(k)));
      if (!(hw > 0) || !(hw < Real(0.25)))
        throw DegenerateModel("partition: marked interval not strictly inside ]b,c[");
      uv_hw_[k - 1] = hw;
    }
  }

  void build_chains() {
    const int kmax = params_.k_max;
    lambda_.assign(static_cast<std::size_t>(std::max(0, kmax - 1)), 1.0L);
    chain_hw_.resize(static_cast<std::size_t>(std::max(0, kmax - 1)));
    for (int k = 1; k <= kmax - 1; ++k) {
      const Index steps = params_.chain_steps(k);
      const Real bc = cell_length(params_.level_position(k)) / 2;
      const Real ratio = bc / uv_[k];  // |[b_k,c_k]| / |[u_{k+1},v_{k+1}]|
      if (!(ratio > 1))
        throw ModelError("partition: chain compatibility ratio must exceed 1");
      // lambda is carried in extended precision so that the p_k-th power
      // recovers the ratio to a few double ulps even for p_k = 2^k.
      const long double lam = std::pow(static_cast<long double>(ratio),
                                       1.0L / static_cast<long double>(steps));
      lambda_[k - 1] = lam;

      auto& hw = chain_hw_[k - 1];
      hw.resize(static_cast<std::size_t>(steps) + 1);
      hw[0] = uv_hw_[k];  // chain starts at the level-(k+1) marked interval
      long double len = static_cast<long double>(uv_[k]);
      for (Index i = 1; i < steps; ++i) {
        len *= lam;
        const Real w = Real(len) / (2 * cell_length(chain_cell(k, i)));
        if (!(w > 0) || !(w < Real(0.5)))
          throw ModelError("partition: chain interval escapes its cell");
        hw[static_cast<std::size_t>(i)] = w;
      }
      // The last chain interval is [b_k, c_k] itself; verify the closed-form
      // value lands there and snap it exact.
      len *= lam;
      const long double closing = len / (2.0L * static_cast<long double>(
                                                    cell_length(params_.level_position(k))));
      if (std::abs(static_cast<Real>(closing) / Real(0.25) - Real(1)) > Real(1e-10))
        throw ModelError("partition: chain does not close onto [b_k, c_k]");
      hw[static_cast<std::size_t>(steps)] = Real(0.25);
    }
  }

  Params<Real> params_;
  Real c_ = 0;
  Index n_top_ = 0;
  Index n_low_ = 0;
  std::vector<Real> ell_;
  std::vector<Real> a_;
  Real a_err_ = 0;
  std::vector<Real> uv_;
  std::vector<Real> uv_hw_;
  std::vector<long double> lambda_;
  std::vector<std::vector<Real>> chain_hw_;
};

}  // namespace levels
