#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

#include "levels/generators.hpp"
#include "levels/partition.hpp"

namespace levels {

// ---------------------------------------------------------------------------
// Level classification.

struct LevelClass {
  enum class Kind { Gap, Interior, Endpoint, Tail };
  Kind kind = Kind::Gap;
  int k = 0;              // level when kind is Interior or Endpoint
  bool inside_uv = false; // within the marked sub-interval [u_k, v_k]
};

/// Which ]b_k, c_k[ contains the point; the supports are pairwise disjoint
/// (one per cell n_k), so the classification is unique.
template <class Real>
LevelClass level_of(const PartitionModel<Real>& m, const LocalPoint<Real>& p0) {
  const LocalPoint<Real> p = m.normalized(p0);
  LevelClass out;
  if (!p.is_interval()) {
    out.kind = LevelClass::Kind::Tail;
    return out;
  }
  const int k = m.level_of_cell(p.cell);
  if (k == 0) return out;
  if (p.s == m.b_local() || p.s == m.c_local()) {
    out.kind = LevelClass::Kind::Endpoint;
    out.k = k;
    return out;
  }
  if (p.s > m.b_local() && p.s < m.c_local()) {
    out.kind = LevelClass::Kind::Interior;
    out.k = k;
    out.inside_uv = p.s >= m.u_local(k) && p.s <= m.v_local(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Descent certificates: finite words carrying a level-k point strictly into
// the level-(k+1) support.

template <class Real>
struct DescentCertificate {
  int k = 0;
  Index m = 0;                 // g^{-1}-power of the canonical word
  Word word;                   // G^-m then F^-p_k, applied left to right
  LocalPoint<Real> start{};
  LocalPoint<Real> end{};
  Real margin_global = 0;      // distance from `end` to the nearer support endpoint
  bool contained = false;
};

template <class Real>
struct DescentSearch {
  int k = 0;
  std::optional<DescentCertificate<Real>> certificate;
  Real closest_approach_global = std::numeric_limits<Real>::infinity();
  Index m_tried = 0;
};

namespace detail {

template <class Real>
Real support_margin(const PartitionModel<Real>& m, int k, const LocalPoint<Real>& p) {
  if (p.cell != m.params().level_position(k)) return -1;
  const Real lo = p.s - m.b_local();
  const Real hi = m.c_local() - p.s;
  return std::min(lo, hi) * m.cell_length(p.cell);
}

/// Distance from a point to the level-k support, in global units.
template <class Real>
Real support_distance(const PartitionModel<Real>& m, int k, const LocalPoint<Real>& p) {
  const Real x = m.to_global(p);
  const Real b = m.b_global(k);
  const Real c = m.c_global(k);
  if (x < b) return b - x;
  if (x > c) return x - c;
  return 0;
}

}  // namespace detail

/// Minimal m <= m_max such that G^-m followed by F^-p_k carries `start`
/// strictly into ]b_{k+1}, c_{k+1}[.  `start` must lie in ]b_k, c_k[.
template <class Real>
DescentSearch<Real> descent_stage(const PartitionModel<Real>& m, const PiecewiseDiffeo<Real>& f,
                                  const PiecewiseDiffeo<Real>& g, int k,
                                  const LocalPoint<Real>& start, Index m_max) {
  if (k < 1 || k > m.k_max() - 1)
    throw ParameterError("descent: level must lie in 1..k_max-1");
  if (detail::support_margin(m, k, start) <= 0)
    throw ParameterError("descent: start point must lie strictly inside ]b_k, c_k[");
  // g must move points of the support to the right; spot-check before trusting
  // the inverse iteration to converge toward b_k.
  for (Real t : {Real(0.3), Real(0.5), Real(0.7)}) {
    const LocalPoint<Real> x{start.cell, t};
    if (!(g.eval(x).s > x.s)) throw ModelError("descent: g is not expanding on the support");
  }

  const Index steps = m.params().chain_steps(k);
  DescentSearch<Real> search;
  search.k = k;
  LocalPoint<Real> y = start;
  for (Index mm = 0; mm <= m_max; ++mm) {
    search.m_tried = mm;
    LocalPoint<Real> z = y;
    for (Index j = 0; j < steps; ++j) z = f.eval_inverse(z);
    const Real margin = detail::support_margin(m, k + 1, z);
    if (margin > 0) {
      DescentCertificate<Real> cert;
      cert.k = k;
      cert.m = mm;
      cert.word.append(Letter::Gi, mm).append(Letter::Fi, steps);
      cert.start = start;
      cert.end = z;
      cert.margin_global = margin;
      cert.contained = true;
      search.certificate = cert;
      return search;
    }
    search.closest_approach_global =
        std::min(search.closest_approach_global, detail::support_distance(m, k + 1, z));
    if (mm < m_max) y = g.eval_inverse(y);
  }
  return search;
}

/// Canonical certificate for level k: start at u_k.
template <class Real>
DescentSearch<Real> descent_certificate(const PartitionModel<Real>& m,
                                        const PiecewiseDiffeo<Real>& f,
                                        const PiecewiseDiffeo<Real>& g, int k, Index m_max) {
  const LocalPoint<Real> u{m.params().level_position(k), m.u_local(k)};
  return descent_stage(m, f, g, k, u, m_max);
}

template <class Real>
struct Cascade {
  std::vector<DescentCertificate<Real>> stages;
  Word word;
  LocalPoint<Real> start{};
  LocalPoint<Real> end{};
  bool complete = false;
  int failed_stage = -1;
  Real failed_closest_approach = 0;
};

/// Chains descent stages k_from..k_to, feeding each landing point into the
/// next level's search; the full word carries u_{k_from} into
/// ]b_{k_to+1}, c_{k_to+1}[.
template <class Real>
Cascade<Real> descent_cascade(const PartitionModel<Real>& m, const PiecewiseDiffeo<Real>& f,
                              const PiecewiseDiffeo<Real>& g, int k_from, int k_to, Index m_max) {
  if (k_from < 1 || k_to < k_from || k_to > m.k_max() - 1)
    throw ParameterError("descent_cascade: levels must satisfy 1 <= k_from <= k_to <= k_max-1");
  Cascade<Real> cascade;
  LocalPoint<Real> z{m.params().level_position(k_from), m.u_local(k_from)};
  cascade.start = z;
  for (int k = k_from; k <= k_to; ++k) {
    const auto search = descent_stage(m, f, g, k, z, m_max);
    if (!search.certificate) {
      cascade.failed_stage = k;
      cascade.failed_closest_approach = search.closest_approach_global;
      cascade.end = z;
      return cascade;
    }
    cascade.stages.push_back(*search.certificate);
    cascade.word.append(search.certificate->word);
    z = search.certificate->end;
  }
  cascade.end = z;
  cascade.complete = true;
  return cascade;
}

// ---------------------------------------------------------------------------
// Breadth-first orbit exploration.

struct OrbitSpec {
  int max_word_length = 8;
  std::size_t budget = 100000;  // node expansions before truncation
  std::vector<Letter> letters = {Letter::F, Letter::Fi, Letter::G, Letter::Gi};
};

template <class Real>
struct OrbitReport {
  std::size_t visited = 0;   // distinct nodes discovered (spatial-hash dedup)
  std::size_t expanded = 0;
  std::size_t out_of_domain_moves = 0;
  bool truncated = false;
  int deepest_level = 0;
  std::vector<int> levels_entered;  // distinct levels whose support was hit
  Real min_global = 0;
  Real max_global = 0;
};

/// Deterministic BFS over the generator action.  Revisits are pruned with a
/// spatial hash at resolution 1e-3 of the local cell, so the report is a
/// coverage statistic, not an exact orbit.
template <class Real>
OrbitReport<Real> orbit_explore(const PartitionModel<Real>& m, const PiecewiseDiffeo<Real>& f,
                                const PiecewiseDiffeo<Real>& g, const LocalPoint<Real>& start,
                                const OrbitSpec& spec) {
  struct Node {
    LocalPoint<Real> p;
    int depth;
  };
  auto key_of = [&](const LocalPoint<Real>& p) {
    const LocalPoint<Real> q = m.normalized(p);
    const auto bucket = static_cast<Index>(std::llround(static_cast<double>(q.s) * 1000.0));
    return std::pair<Index, Index>(q.cell, bucket);
  };

  OrbitReport<Real> report;
  std::set<std::pair<Index, Index>> seen;
  std::deque<Node> queue;
  std::set<int> levels;

  auto admit = [&](const LocalPoint<Real>& p, int depth) {
    if (!seen.insert(key_of(p)).second) return;
    ++report.visited;
    const Real x = m.to_global(p);
    if (report.visited == 1) {
      report.min_global = report.max_global = x;
    } else {
      report.min_global = std::min(report.min_global, x);
      report.max_global = std::max(report.max_global, x);
    }
    const LevelClass cls = level_of(m, p);
    if (cls.kind == LevelClass::Kind::Interior) {
      levels.insert(cls.k);
      report.deepest_level = std::max(report.deepest_level, cls.k);
    }
    queue.push_back({p, depth});
  };

  admit(start, 0);
  while (!queue.empty()) {
    if (report.expanded >= spec.budget) {
      report.truncated = true;
      break;
    }
    const Node node = queue.front();
    queue.pop_front();
    if (node.depth >= spec.max_word_length) continue;
    ++report.expanded;
    for (Letter l : spec.letters) {
      try {
        LocalPoint<Real> next;
        switch (l) {
          case Letter::F: next = f.eval(node.p); break;
          case Letter::Fi: next = f.eval_inverse(node.p); break;
          case Letter::G: next = g.eval(node.p); break;
          case Letter::Gi: next = g.eval_inverse(node.p); break;
        }
        admit(next, node.depth + 1);
      } catch (const RangeEscape&) {
        ++report.out_of_domain_moves;
      }
    }
  }
  report.levels_entered.assign(levels.begin(), levels.end());
  return report;
}

}  // namespace levels
