#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "levels/bridge.hpp"
#include "levels/generators.hpp"
#include "levels/partition.hpp"

namespace levels {

// ---------------------------------------------------------------------------
// Admissibility of (alpha, theta, epsilon).

template <class Real>
struct ParameterCheck {
  Real product;      // (1 + eps)(1 + theta) alpha
  bool product_ok;   // product < 1
  Real tail_cap;     // 1 / (1 + eps)
  bool tail_ok;      // alpha < tail_cap
  bool theta_ok;     // theta > alpha

  bool pass() const { return product_ok && tail_ok && theta_ok; }
};

template <class Real>
ParameterCheck<Real> check_parameters(Real alpha, Real theta, Real epsilon) {
  if (!(alpha > 0) || !(theta > 0) || !(epsilon > 0))
    throw ParameterError("check_parameters: inputs must be strictly positive");
  ParameterCheck<Real> c{};
  c.product = (Real(1) + epsilon) * (Real(1) + theta) * alpha;
  c.product_ok = c.product < Real(1);
  c.tail_cap = Real(1) / (Real(1) + epsilon);
  c.tail_ok = alpha < c.tail_cap;
  c.theta_ok = theta > alpha;
  return c;
}

/// alpha range with an admissible epsilon: ]0, (sqrt 5 - 1)/2[.
template <class Real>
Real golden_ratio_bound() {
  return (std::sqrt(Real(5)) - Real(1)) / Real(2);
}

/// theta = alpha + epsilon with the largest epsilon in {2^-j} satisfying
/// (1 + eps)(1 + alpha + eps) alpha < 1; the other two conditions follow.
template <class Real>
std::pair<Real, Real> default_theta_epsilon(Real alpha) {
  if (!(alpha > 0)) throw ParameterError("default_theta_epsilon: alpha must be positive");
  for (int j = 0; j <= 60; ++j) {
    const Real eps = std::ldexp(Real(1), -j);
    if ((Real(1) + eps) * (Real(1) + alpha + eps) * alpha < Real(1)) return {alpha + eps, eps};
  }
  throw ThresholdError(
      "default_theta_epsilon: no admissible epsilon; alpha must lie below (sqrt(5)-1)/2 ~= "
      "0.6180339887498949");
}

// ---------------------------------------------------------------------------
// lambda_k against its two displayed bounds.  Both quantities are normalized
// with the level position n_k, which reduces to the dyadic forms under
// n_k = 2^k and stays meaningful for the n_k = k negative control.

template <class Real>
struct LambdaBoundsRow {
  int k;
  Real lambda;
  Real pow_quantity;  // lambda^{p_k} / n_k^{theta (1 + eps)}
  Real dev_quantity;  // |lambda - 1| n_k / k
};

template <class Real>
struct LambdaBoundsReport {
  std::vector<LambdaBoundsRow<Real>> rows;
  Real fitted_pow_m = 0;  // sup of pow_quantity
  Real fitted_dev_m = 0;  // sup of dev_quantity
  bool dev_bounded = true;
  bool diverging = false;  // trailing |lambda - 1| n_k / k still rising
};

template <class Real>
LambdaBoundsReport<Real> lambda_bounds_report(const PartitionModel<Real>& m) {
  const auto& p = m.params();
  LambdaBoundsReport<Real> rep;
  for (int k = 1; k <= p.k_max - 1; ++k) {
    LambdaBoundsRow<Real> row;
    row.k = k;
    row.lambda = m.lambda(k);
    const Real nk = Real(p.level_position(k));
    const long double lam_pow = std::pow(m.lambda_ext(k), static_cast<long double>(p.chain_steps(k)));
    row.pow_quantity = Real(lam_pow) / std::pow(nk, p.theta * (Real(1) + p.epsilon));
    row.dev_quantity = std::abs(row.lambda - Real(1)) * nk / Real(k);
    rep.fitted_pow_m = std::max(rep.fitted_pow_m, row.pow_quantity);
    rep.fitted_dev_m = std::max(rep.fitted_dev_m, row.dev_quantity);
    rep.rows.push_back(row);
  }
  const auto& rows = rep.rows;
  if (rows.size() >= 3) {
    bool rising = true;
    const std::size_t tail = std::min<std::size_t>(4, rows.size() - 1);
    for (std::size_t i = rows.size() - tail; i < rows.size(); ++i)
      rising = rising && rows[i].dev_quantity > rows[i - 1].dev_quantity;
    rep.diverging = rising && rows.back().dev_quantity > rows.front().dev_quantity;
    rep.dev_bounded = !rep.diverging;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The three estimate families, computed exactly from model lengths.

template <class Real>
struct EstimateRow {
  int k;
  Index i;
  Real quantity2, bound2;  // marked-piece ratio deviation over omega(|I|)
  Real quantity3, bound3;  // gap-piece analogue
};

template <class Real>
struct GEstimateRow {
  int k;
  Real quantity4, bound4;  // g-piece quantity against bc^(theta - alpha)
};

template <class Real>
struct EstimateReport {
  std::vector<EstimateRow<Real>> rows;       // k = 1..k_max-1, i = 0..p_k-1
  std::vector<GEstimateRow<Real>> g_rows;    // k = 1..k_max
  std::vector<Real> q2_max_by_k, q3_max_by_k;
  Real fitted_m2 = 0, fitted_m3 = 0, fitted_m4 = 0;
  bool decay2 = false, decay3 = false, decay4 = false;
};

namespace detail {

template <class Real>
bool trailing_decay(const std::vector<Real>& v) {
  if (v.size() < 2) return false;
  const std::size_t tail = std::min<std::size_t>(3, v.size() - 1);
  for (std::size_t i = v.size() - tail; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return v.back() < v.front();
}

}  // namespace detail

template <class Real>
EstimateReport<Real> estimate_quantities(const PartitionModel<Real>& m, Real alpha) {
  const auto& p = m.params();
  EstimateReport<Real> rep;
  for (int k = 1; k <= p.k_max - 1; ++k) {
    const Real nk = Real(p.level_position(k));
    const Real lambda = m.lambda(k);
    const Real dev = std::abs(lambda - Real(1));
    const Real bound2 =
        Real(k) * std::pow(nk, (Real(1) + p.epsilon) * (Real(1) + p.theta) * alpha - Real(1));
    const Real bound3 = Real(k) * std::pow(nk, (Real(1) + p.epsilon) * alpha - Real(1));
    Real q2max = 0, q3max = 0;
    for (Index i = 0; i < p.chain_steps(k); ++i) {
      EstimateRow<Real> row;
      row.k = k;
      row.i = i;
      const Real chain_i = m.chain_length(k, i);
      const Real chain_next = m.chain_length(k, i + 1);
      row.quantity2 = dev / std::pow(chain_i, alpha);
      row.bound2 = bound2;
      const Real b = m.cell_length(m.chain_cell(k, i));
      const Real d = m.cell_length(m.chain_cell(k, i) - 1);
      const Real gap_src = b - chain_i;
      row.quantity3 = std::abs((d - chain_next) / gap_src - Real(1)) * std::pow(Real(2), alpha) /
                      std::pow(gap_src, alpha);
      row.bound3 = bound3;
      q2max = std::max(q2max, row.quantity2);
      q3max = std::max(q3max, row.quantity3);
      rep.fitted_m2 = std::max(rep.fitted_m2, row.quantity2 / bound2);
      rep.fitted_m3 = std::max(rep.fitted_m3, row.quantity3 / bound3);
      rep.rows.push_back(row);
    }
    rep.q2_max_by_k.push_back(q2max);
    rep.q3_max_by_k.push_back(q3max);
  }
  std::vector<Real> q4;
  for (int k = 1; k <= p.k_max; ++k) {
    GEstimateRow<Real> row;
    row.k = k;
    const Real bc = m.bc_length(k);
    const Real uv = m.uv_length(k);
    const Real gap = (bc - uv) / 2;
    row.quantity4 = uv / std::pow(gap, Real(1) + alpha);
    row.bound4 = std::pow(bc, p.theta - alpha);
    rep.fitted_m4 = std::max(rep.fitted_m4, row.quantity4 / row.bound4);
    q4.push_back(row.quantity4);
    rep.g_rows.push_back(row);
  }
  rep.decay2 = detail::trailing_decay(rep.q2_max_by_k);
  rep.decay3 = detail::trailing_decay(rep.q3_max_by_k);
  rep.decay4 = detail::trailing_decay(q4);
  return rep;
}

// ---------------------------------------------------------------------------
// Smoothing-lemma audit of built maps.  Failures of the ratio window are
// expected for finitely many pieces near the coarse end; they are reported,
// never fatal.

template <class Real>
struct PieceHypothesis {
  Index src_cell;
  Real src_lo;
  Real ratio;
  bool ratio_ok;
  Real required_m;  // smallest M satisfying the displayed inequality
};

template <class Real>
std::vector<PieceHypothesis<Real>> hypothesis_report(const PiecewiseDiffeo<Real>& d,
                                                     const Modulus<Real>& omega,
                                                     bool only_failures = true) {
  std::vector<PieceHypothesis<Real>> out;
  for (const auto& pc : d.pieces()) {
    PieceHypothesis<Real> row;
    row.src_cell = pc.src_cell;
    row.src_lo = pc.src_lo;
    row.ratio = pc.ratio;
    const Real si = pc.src_len / pc.dst_len;
    row.ratio_ok = si >= Real(0.5) && si <= Real(2);
    row.required_m = std::abs(pc.ratio - Real(1)) / omega(pc.src_len);
    if (!only_failures || !row.ratio_ok) out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical omega-seminorm of a piecewise map's derivative.

/// Sampling plan: per piece, dyadic separations from half the piece length
/// down to `floor_rel` times the smallest marked interval of the model, with
/// `pairs_per_scale` deterministic pairs each; knots get the same treatment
/// with the pair straddling the joint.  Streams are keyed by the piece
/// geometry, so a piece shared by two truncation depths contributes the same
/// pairs to both sweeps.
struct SweepGrid {
  int pairs_per_scale = 64;
  double floor_rel = 1e-3;
  int max_scales_per_piece = 48;
  std::uint64_t seed = 42;
  int threads = 0;  // 0: LEVELS_LAB_THREADS env var, else 1
};

/// LEVELS_LAB_THREADS caps the worker count; an explicit request below the
/// cap wins, no request means "use the cap" (default 1).
inline int resolve_threads(int requested) {
  int cap = 0;
  if (const char* env = std::getenv("LEVELS_LAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) cap = v;
  }
  if (requested > 0) return cap > 0 ? std::min(requested, cap) : requested;
  return cap > 0 ? cap : 1;
}

namespace detail {

template <class Real>
std::uint64_t piece_key(const Piece<Real>& pc) {
  const double lo = static_cast<double>(pc.src_lo);
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(lo));
  std::memcpy(&bits, &lo, sizeof(bits));
  return mix_keys(static_cast<std::uint64_t>(pc.src_cell), bits);
}

/// max over sampled in-piece pairs of |D(x) - D(y)| / omega(|x - y|).
template <class Real>
Real piece_seminorm(const Piece<Real>& pc, const Modulus<Real>& omega, const SweepGrid& grid,
                    Real floor_len) {
  Real best = 0;
  const Real len = pc.src_len;
  Real sigma = Real(0.5);
  for (int j = 1; j <= grid.max_scales_per_piece; ++j, sigma /= 2) {
    const Real s = len * sigma;
    if (s < floor_len && j > 1) break;
    const Real ws = omega(s);
    SplitMix64 rng(mix_keys(piece_key(pc), static_cast<std::uint64_t>(j)));
    for (int q = 0; q < grid.pairs_per_scale; ++q) {
      const Real t1 = Real(rng.uniform()) * (Real(1) - sigma);
      const Real d1 = transfer_slope(t1, pc.ratio);
      const Real d2 = transfer_slope(t1 + sigma, pc.ratio);
      best = std::max(best, std::abs(d1 - d2) / ws);
    }
  }
  return best;
}

/// Pairs straddling a knot; either side may be the identity (derivative 1).
template <class Real>
Real knot_seminorm(const Piece<Real>* left, const Piece<Real>* right, const Modulus<Real>& omega,
                   const SweepGrid& grid, Real floor_len) {
  Real best = 0;
  const Real len_l = left ? left->src_len : std::numeric_limits<Real>::infinity();
  const Real len_r = right ? right->src_len : std::numeric_limits<Real>::infinity();
  Real len = std::min(len_l, len_r);
  if (!std::isfinite(len)) return 0;  // identity on both sides
  const std::uint64_t key =
      mix_keys(left ? piece_key(*left) : 11u, right ? piece_key(*right) : 13u, 0x9e37u);
  Real sigma = Real(0.5);
  for (int j = 1; j <= grid.max_scales_per_piece; ++j, sigma /= 2) {
    const Real s = len * sigma;
    if (s < floor_len && j > 1) break;
    const Real ws = omega(s);
    SplitMix64 rng(mix_keys(key, static_cast<std::uint64_t>(j)));
    for (int q = 0; q < grid.pairs_per_scale; ++q) {
      const Real xi = Real(rng.uniform());
      const Real dl = xi * s;         // distance from the knot, left leg
      const Real dr = s - dl;         // right leg
      const Real d1 = left ? transfer_slope(Real(1) - dl / len_l, left->ratio) : Real(1);
      const Real d2 = right ? transfer_slope(dr / len_r, right->ratio) : Real(1);
      best = std::max(best, std::abs(d1 - d2) / ws);
    }
  }
  return best;
}

template <class Real>
bool pieces_contiguous(const Piece<Real>& a, const Piece<Real>& b) {
  if (a.src_cell == b.src_cell) return a.src_hi == b.src_lo;
  return a.src_cell == b.src_cell + 1 && a.src_hi == Real(1) && b.src_lo == Real(0);
}

template <class Fn>
double parallel_max(std::size_t items, int threads, Fn&& worker) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(items ? items : 1)));
  if (threads == 1) return worker(std::size_t(0), items);
  std::vector<double> partial(static_cast<std::size_t>(threads), 0.0);
  std::vector<std::thread> pool;
  const std::size_t chunk = (items + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = std::min(items, t * chunk);
    const std::size_t hi = std::min(items, lo + chunk);
    pool.emplace_back([&, t, lo, hi] { partial[static_cast<std::size_t>(t)] = worker(lo, hi); });
  }
  for (auto& th : pool) th.join();
  double best = 0;
  for (double v : partial) best = std::max(best, v);
  return best;
}

}  // namespace detail

/// Empirical omega-seminorm of the derivative of a built map over the
/// materialized domain; monotone non-decreasing under grid refinement.
template <class Real>
Real holder_seminorm(const PartitionModel<Real>& m, const PiecewiseDiffeo<Real>& d,
                     const Modulus<Real>& omega, const SweepGrid& grid) {
  if (grid.pairs_per_scale <= 0 || grid.max_scales_per_piece < 1)
    throw ParameterError("holder_seminorm: empty grid");
  const Real floor_len = Real(grid.floor_rel) * m.uv_length(m.k_max());
  const auto& pieces = d.pieces();

  struct Item {
    const Piece<Real>* left;
    const Piece<Real>* right;  // nullptr = identity side; left==right: in-piece
  };
  std::vector<Item> items;
  items.reserve(pieces.size() * 2);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    items.push_back({&pieces[i], &pieces[i]});
    const bool joined_prev = i > 0 && detail::pieces_contiguous(pieces[i - 1], pieces[i]);
    if (joined_prev) items.push_back({&pieces[i - 1], &pieces[i]});
    if (d.identity_outside()) {
      if (!joined_prev) items.push_back({nullptr, &pieces[i]});
      const bool joined_next =
          i + 1 < pieces.size() && detail::pieces_contiguous(pieces[i], pieces[i + 1]);
      if (!joined_next) items.push_back({&pieces[i], nullptr});
    }
  }

  auto worker = [&](std::size_t lo, std::size_t hi) {
    Real best = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Item& it = items[i];
      if (it.left == it.right) {
        best = std::max(best, detail::piece_seminorm(*it.left, omega, grid, floor_len));
      } else {
        best = std::max(best, detail::knot_seminorm(it.left, it.right, omega, grid, floor_len));
      }
    }
    return static_cast<double>(best);
  };
  return Real(detail::parallel_max(items.size(), resolve_threads(grid.threads), worker));
}

// ---------------------------------------------------------------------------
// Depth sweep.  A "depth" materializes the same fundamental-interval range
// under both schedules (n up to 2^{depth+1}), so the two columns are
// comparable: under n_k = 2^k that is k_max = depth, under n_k = k it is
// k_max = 2^{depth+1} - 1.

template <class Real>
struct SweepRow {
  int depth;
  int k_max_used;
  Real seminorm_f;
  Real seminorm_g;
};

inline int depth_to_k_max(Schedule schedule, int depth) {
  if (depth < 1) throw ParameterError("sweep: depth must be >= 1");
  if (schedule == Schedule::PowersOfTwo) return depth;
  if (depth > 20) throw ParameterError("sweep: depth too large for the linear schedule");
  return (1 << (depth + 1)) - 1;
}

template <class Real>
std::vector<SweepRow<Real>> empirical_holder_sweep(Params<Real> base, Real alpha,
                                                   const std::vector<int>& depths,
                                                   const SweepGrid& grid, bool measure_g = true) {
  const auto omega = Modulus<Real>::power(alpha);
  std::vector<SweepRow<Real>> rows;
  for (int depth : depths) {
    Params<Real> p = base;
    p.k_max = depth_to_k_max(base.schedule, depth);
    const auto model = PartitionModel<Real>::build(p);
    const auto f = build_f(model);
    SweepRow<Real> row;
    row.depth = depth;
    row.k_max_used = p.k_max;
    row.seminorm_f = holder_seminorm(model, f, omega, grid);
    row.seminorm_g = 0;
    if (measure_g) {
      const auto g = build_g(model);
      row.seminorm_g = holder_seminorm(model, g, omega, grid);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace levels
