#pragma once

#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "levels/bridge.hpp"
#include "levels/partition.hpp"

namespace levels {

/// One bridge of a piecewise map, in local coordinates: offsets within the
/// source cell map to offsets within the target cell.
template <class Real>
struct Piece {
  Index src_cell;
  Real src_lo, src_hi;
  Index dst_cell;
  Real dst_lo, dst_hi;
  Real src_len;  // global length of the source sub-interval
  Real dst_len;  // global length of the target sub-interval
  Real ratio;    // dst_len / src_len

  Real src_width() const { return src_hi - src_lo; }
  Real dst_width() const { return dst_hi - dst_lo; }
};

/// f or g as an ordered fit of bridges.  Pieces are stored in ascending
/// global order (descending cell index); evaluation, inversion and the
/// derivative all reduce to the normalized cotangent transfer, so only
/// length ratios ever enter.
template <class Real>
class PiecewiseDiffeo {
 public:
  enum class Kind { F, G };

  Kind kind() const { return kind_; }
  bool identity_outside() const { return identity_outside_; }
  const std::vector<Piece<Real>>& pieces() const { return pieces_; }

  LocalPoint<Real> eval(const LocalPoint<Real>& p0) const {
    const LocalPoint<Real> p = canonical(p0);
    if (auto hit = locate(by_src_, p, /*dst_space=*/false)) return map_forward(*hit);
    if (identity_outside_ || is_fixed_endpoint(p)) return p0;
    escape(p, "eval");
  }

  LocalPoint<Real> eval_inverse(const LocalPoint<Real>& p0) const {
    const LocalPoint<Real> p = canonical(p0);
    if (auto hit = locate(by_dst_, p, /*dst_space=*/true)) return map_backward(*hit);
    if (identity_outside_ || is_fixed_endpoint(p)) return p0;
    escape(p, "eval_inverse");
  }

  /// Global-coordinate derivative dy/dx; exactly 1 at every knot.
  Real derivative(const LocalPoint<Real>& p0) const {
    const LocalPoint<Real> p = canonical(p0);
    if (auto hit = locate(by_src_, p, false)) {
      const Real t = hit->dist / hit->piece->src_width();
      return transfer_slope(t, hit->piece->ratio);
    }
    if (identity_outside_) return Real(1);
    if (is_fixed_endpoint(p)) return Real(1);
    escape(p, "derivative");
  }

  /// Derivative of the inverse map at a point of the image.
  Real derivative_inverse(const LocalPoint<Real>& p0) const {
    const LocalPoint<Real> p = canonical(p0);
    if (auto hit = locate(by_dst_, p, true)) {
      const Real t = hit->dist / hit->piece->dst_width();
      return transfer_slope(t, Real(1) / hit->piece->ratio);
    }
    if (identity_outside_) return Real(1);
    if (is_fixed_endpoint(p)) return Real(1);
    escape(p, "derivative_inverse");
  }

  // -- construction ----------------------------------------------------------

  /// f: maps cell n onto cell n-1 for every source cell; on cells carrying a
  /// level-k chain interval the map splits into left gap, marked interval and
  /// right gap so that chain i lands exactly on chain i+1.
  static PiecewiseDiffeo build_f(const PartitionModel<Real>& m) {
    PiecewiseDiffeo d(Kind::F, /*identity_outside=*/false, m);
    for (Index n = m.n_top(); n >= m.source_low(); --n) {
      const auto slot = m.chain_slot_of_cell(n);
      if (slot) {
        const auto [k, i] = *slot;
        const Real su = Real(0.5) - m.chain_half_width_local(k, i);
        const Real sv = Real(0.5) + m.chain_half_width_local(k, i);
        const Real du = Real(0.5) - m.chain_half_width_local(k, i + 1);
        const Real dv = Real(0.5) + m.chain_half_width_local(k, i + 1);
        d.add_piece(m, n, Real(0), su, Real(0), du);
        d.add_piece(m, n, su, sv, du, dv);
        d.add_piece(m, n, sv, Real(1), dv, Real(1));
      } else {
        d.add_piece(m, n, Real(0), Real(1), Real(0), Real(1));
      }
    }
    d.finalize();
    return d;
  }

  /// g: identity outside the marked supports; on each [b_k, c_k] two bridges
  /// send [b_k, u_k] onto [b_k, v_k] and [u_k, c_k] onto [v_k, c_k].
  static PiecewiseDiffeo build_g(const PartitionModel<Real>& m) {
    PiecewiseDiffeo d(Kind::G, /*identity_outside=*/true, m);
    for (int k = m.k_max(); k >= 1; --k) {
      const Index n = m.params().level_position(k);
      const Real u = m.u_local(k);
      const Real v = m.v_local(k);
      d.add_piece(m, n, Real(0.25), u, Real(0.25), v, n);
      d.add_piece(m, n, u, Real(0.75), v, Real(0.75), n);
    }
    d.finalize();
    return d;
  }

 private:
  struct Hit {
    const Piece<Real>* piece;
    bool from_hi;  // measured from the upper endpoint
    Real dist;     // local distance to the chosen endpoint
  };

  using CellIndex = std::unordered_map<Index, std::pair<std::uint32_t, std::uint32_t>>;

  PiecewiseDiffeo(Kind kind, bool identity_outside, const PartitionModel<Real>& m)
      : kind_(kind),
        identity_outside_(identity_outside),
        n_low_(m.n_low()),
        n_top_(m.n_top()),
        k_max_(m.k_max()),
        n_neg_(m.params().n_neg) {}

  void add_piece(const PartitionModel<Real>& m, Index n, Real slo, Real shi, Real dlo, Real dhi,
                 std::optional<Index> dst = std::nullopt) {
    if (!(slo < shi) || !(dlo < dhi))
      throw ModelError("piecewise map: piece endpoints not strictly ordered");
    Piece<Real> p;
    p.src_cell = n;
    p.src_lo = slo;
    p.src_hi = shi;
    p.dst_cell = dst.value_or(n - 1);
    p.dst_lo = dlo;
    p.dst_hi = dhi;
    p.src_len = (shi - slo) * m.cell_length(p.src_cell);
    p.dst_len = (dhi - dlo) * m.cell_length(p.dst_cell);
    p.ratio = p.dst_len / p.src_len;
    pieces_.push_back(p);
  }

  void finalize() {
    by_src_.reserve(pieces_.size());
    by_dst_.reserve(pieces_.size());
    for (std::uint32_t i = 0; i < pieces_.size(); ++i) {
      auto grow = [i](CellIndex& idx, Index cell) {
        auto [it, fresh] = idx.try_emplace(cell, std::make_pair(i, std::uint32_t(1)));
        if (!fresh) ++it->second.second;
      };
      grow(by_src_, pieces_[i].src_cell);
      grow(by_dst_, pieces_[i].dst_cell);
    }
  }

  LocalPoint<Real> canonical(LocalPoint<Real> p) const {
    if (p.cell == kLeftTailCell && p.s == Real(1)) return {n_top_, Real(0)};
    if (p.is_interval() && p.s == Real(1)) {
      if (p.cell - 1 >= n_low_) return {p.cell - 1, Real(0)};
      return {kRightTailCell, Real(0)};
    }
    return p;
  }

  bool is_fixed_endpoint(const LocalPoint<Real>& p) const {
    return (p.cell == kLeftTailCell && p.s == Real(0)) ||
           (p.cell == kRightTailCell && p.s == Real(1));
  }

  std::optional<Hit> scan_cell(const CellIndex& index, Index cell, Real s, bool dst_space) const {
    const auto it = index.find(cell);
    if (it == index.end()) return std::nullopt;
    for (std::uint32_t j = 0; j < it->second.second; ++j) {
      const Piece<Real>& pc = pieces_[it->second.first + j];
      const Real lo = dst_space ? pc.dst_lo : pc.src_lo;
      const Real hi = dst_space ? pc.dst_hi : pc.src_hi;
      if (s < lo || s > hi) continue;
      const Real dlo = s - lo;
      const Real dhi = hi - s;
      if (dlo <= dhi) return Hit{&pc, false, dlo};
      return Hit{&pc, true, dhi};
    }
    return std::nullopt;
  }

  std::optional<Hit> locate(const CellIndex& index, const LocalPoint<Real>& p,
                            bool dst_space) const {
    if (p.is_interval()) {
      if (auto h = scan_cell(index, p.cell, p.s, dst_space)) return h;
      // A cell's left endpoint is also the neighbour cell's upper endpoint.
      if (p.s == Real(0)) return scan_cell(index, p.cell + 1, Real(1), dst_space);
      return std::nullopt;
    }
    if (p.cell == kRightTailCell && p.s == Real(0))
      return scan_cell(index, n_low_, Real(1), dst_space);
    return std::nullopt;
  }

  // A Hit always measures from the nearer endpoint, so t <= 1/2 up to one
  // rounding; T_r(1 - t) = 1 - T_r(t) turns that into the full map.
  LocalPoint<Real> map_forward(const Hit& h) const {
    const Piece<Real>& pc = *h.piece;
    if (h.dist == Real(0))
      return canonical({pc.dst_cell, h.from_hi ? pc.dst_hi : pc.dst_lo});
    const Real t = h.dist / pc.src_width();
    const Real off = detail::transfer_lower(t, pc.ratio) * pc.dst_width();
    const Real s = h.from_hi ? pc.dst_hi - off : pc.dst_lo + off;
    return canonical({pc.dst_cell, s});
  }

  LocalPoint<Real> map_backward(const Hit& h) const {
    const Piece<Real>& pc = *h.piece;
    if (h.dist == Real(0))
      return canonical({pc.src_cell, h.from_hi ? pc.src_hi : pc.src_lo});
    const Real t = h.dist / pc.dst_width();
    const Real off = detail::transfer_lower(t, Real(1) / pc.ratio) * pc.src_width();
    const Real s = h.from_hi ? pc.src_hi - off : pc.src_lo + off;
    return canonical({pc.src_cell, s});
  }

  [[noreturn]] void escape(const LocalPoint<Real>& p, const char* op) const {
    if (p.cell == kLeftTailCell || (p.is_interval() && p.cell >= n_top_)) {
      throw RangeEscape(std::string(op) +
                            ": point lies beyond the deep end of the materialized range; "
                            "rebuild with k_max >= " +
                            std::to_string(k_max_ + 1),
                        k_max_ + 1, 0);
    }
    throw RangeEscape(std::string(op) +
                          ": point lies beyond the n < 0 end of the materialized range; "
                          "rebuild with n_neg >= " +
                          std::to_string(n_neg_ + 1),
                      0, n_neg_ + 1);
  }

  Kind kind_;
  bool identity_outside_;
  Index n_low_, n_top_;
  int k_max_;
  Index n_neg_;
  std::vector<Piece<Real>> pieces_;
  CellIndex by_src_, by_dst_;
};

template <class Real>
PiecewiseDiffeo<Real> build_f(const PartitionModel<Real>& m) {
  return PiecewiseDiffeo<Real>::build_f(m);
}

template <class Real>
PiecewiseDiffeo<Real> build_g(const PartitionModel<Real>& m) {
  return PiecewiseDiffeo<Real>::build_g(m);
}

// ---------------------------------------------------------------------------
// Words over the generators.

enum class Letter : std::uint8_t { F, Fi, G, Gi };

inline Letter inverse_letter(Letter l) {
  switch (l) {
    case Letter::F: return Letter::Fi;
    case Letter::Fi: return Letter::F;
    case Letter::G: return Letter::Gi;
    default: return Letter::G;
  }
}

struct Word {
  std::vector<Letter> letters;

  static Word empty() { return {}; }

  Word& append(Letter l, Index count = 1) {
    for (Index i = 0; i < count; ++i) letters.push_back(l);
    return *this;
  }

  Word& append(const Word& w) {
    letters.insert(letters.end(), w.letters.begin(), w.letters.end());
    return *this;
  }

  std::size_t size() const { return letters.size(); }

  /// Free reduction: cancels adjacent inverse pairs.
  Word reduced() const {
    Word out;
    for (Letter l : letters) {
      if (!out.letters.empty() && out.letters.back() == inverse_letter(l)) {
        out.letters.pop_back();
      } else {
        out.letters.push_back(l);
      }
    }
    return out;
  }

  std::vector<std::pair<Letter, Index>> run_length() const {
    std::vector<std::pair<Letter, Index>> runs;
    for (Letter l : letters) {
      if (!runs.empty() && runs.back().first == l) {
        ++runs.back().second;
      } else {
        runs.emplace_back(l, 1);
      }
    }
    return runs;
  }

  /// Canonical text form, e.g. "G^-3 F^2"; inverse of parse().
  std::string to_string() const {
    std::string out;
    for (const auto& [l, count] : run_length()) {
      if (!out.empty()) out += ' ';
      const bool inv = (l == Letter::Fi || l == Letter::Gi);
      out += (l == Letter::F || l == Letter::Fi) ? 'F' : 'G';
      const Index power = inv ? -count : count;
      if (power != 1) {
        out += '^';
        out += std::to_string(power);
      }
    }
    return out;
  }

  /// Parses words like "F^-2 G^3", "F G G", "" (identity).
  static Word parse(std::string_view text) {
    Word w;
    std::size_t pos = 0;
    while (pos < text.size()) {
      if (std::isspace(static_cast<unsigned char>(text[pos]))) {
        ++pos;
        continue;
      }
      const char c = text[pos];
      if (c != 'F' && c != 'f' && c != 'G' && c != 'g')
        throw ParameterError("word: expected letter F or G near '" + std::string(text.substr(pos)) + "'");
      ++pos;
      long long power = 1;
      if (pos < text.size() && text[pos] == '^') {
        ++pos;
        const char* first = text.data() + pos;
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, power);
        if (ec != std::errc() || ptr == first)
          throw ParameterError("word: malformed exponent");
        pos = static_cast<std::size_t>(ptr - text.data());
      }
      const bool is_f = (c == 'F' || c == 'f');
      const Letter l = power >= 0 ? (is_f ? Letter::F : Letter::G)
                                  : (is_f ? Letter::Fi : Letter::Gi);
      w.append(l, std::llabs(power));
    }
    return w;
  }
};

/// Left-to-right application: the first letter acts first.
template <class Real>
LocalPoint<Real> apply_word(const PiecewiseDiffeo<Real>& f, const PiecewiseDiffeo<Real>& g,
                            const Word& w, LocalPoint<Real> p) {
  for (std::size_t i = 0; i < w.letters.size(); ++i) {
    try {
      switch (w.letters[i]) {
        case Letter::F: p = f.eval(p); break;
        case Letter::Fi: p = f.eval_inverse(p); break;
        case Letter::G: p = g.eval(p); break;
        case Letter::Gi: p = g.eval_inverse(p); break;
      }
    } catch (const RangeEscape& e) {
      throw RangeEscape(std::string(e.what()) + " (after " + std::to_string(i) +
                            " of " + std::to_string(w.letters.size()) + " letters)",
                        e.needed_k_max, e.needed_n_neg, i);
    }
  }
  return p;
}

/// Word application together with the chain-rule derivative along the orbit.
template <class Real>
std::pair<LocalPoint<Real>, Real> apply_word_with_derivative(const PiecewiseDiffeo<Real>& f,
                                                             const PiecewiseDiffeo<Real>& g,
                                                             const Word& w, LocalPoint<Real> p) {
  Real deriv = 1;
  for (std::size_t i = 0; i < w.letters.size(); ++i) {
    try {
      switch (w.letters[i]) {
        case Letter::F:
          deriv *= f.derivative(p);
          p = f.eval(p);
          break;
        case Letter::Fi:
          deriv *= f.derivative_inverse(p);
          p = f.eval_inverse(p);
          break;
        case Letter::G:
          deriv *= g.derivative(p);
          p = g.eval(p);
          break;
        case Letter::Gi:
          deriv *= g.derivative_inverse(p);
          p = g.eval_inverse(p);
          break;
      }
    } catch (const RangeEscape& e) {
      throw RangeEscape(std::string(e.what()), e.needed_k_max, e.needed_n_neg, i);
    }
  }
  return {p, deriv};
}

}  // namespace levels
