#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "levels/generators.hpp"
#include "levels/partition.hpp"
#include "support/oracles.hpp"

using namespace levels;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Setup {
  PartitionModel<double> model;
  PiecewiseDiffeo<double> f;
  PiecewiseDiffeo<double> g;

  explicit Setup(int k_max = 8, Schedule schedule = Schedule::PowersOfTwo)
      : model(build_model(k_max, schedule)), f(build_f(model)), g(build_g(model)) {}

  static PartitionModel<double> build_model(int k_max, Schedule schedule) {
    Params<double> p;
    p.k_max = k_max;
    p.schedule = schedule;
    return PartitionModel<double>::build(p);
  }
};

/// Uniformly random point in the interior of f's domain.
LocalPoint<double> random_point(const PartitionModel<double>& m, oracles::Rng& rng) {
  const double lo = m.a_position(m.n_top() + 1);
  const double hi = m.a_position(m.source_low());
  return m.from_global(rng.uniform(lo + 1e-9, hi - 1e-9));
}

}  // namespace

TEST_CASE("f shifts every endpoint exactly", "[generators]") {
  const Setup s(8);
  for (Index n = s.model.source_low(); n <= s.model.n_top(); ++n) {
    const auto image = s.f.eval({n, 0.0});
    CHECK(image.cell == n - 1);
    CHECK(image.s == 0.0);
    // and the inverse undoes it exactly
    const auto back = s.f.eval_inverse(image);
    CHECK(back.cell == n);
    CHECK(back.s == 0.0);
  }
  // the lowest materialized endpoint maps onto the right-tail boundary
  const auto last = s.f.eval({s.model.n_low(), 0.0});
  CHECK(last.cell == kRightTailCell);
  CHECK(last.s == 0.0);
  const auto back = s.f.eval_inverse(last);
  CHECK(back.cell == s.model.n_low());
  CHECK(back.s == 0.0);

  CHECK(s.f.eval(LocalPoint<double>::zero()) == LocalPoint<double>::zero());
  CHECK(s.f.eval(LocalPoint<double>::one()) == LocalPoint<double>::one());
}

TEST_CASE("f carries chain intervals endpoint-exactly", "[generators]") {
  const Setup s(8);
  const auto& m = s.model;
  for (int k = 1; k <= m.k_max() - 1; ++k) {
    for (Index i = 0; i < m.params().chain_steps(k); ++i) {
      const auto [lo, hi] = m.chain_interval(k, i);
      const auto [next_lo, next_hi] = m.chain_interval(k, i + 1);
      CHECK(s.f.eval(lo) == next_lo);
      CHECK(s.f.eval(hi) == next_hi);
    }
  }
}

TEST_CASE("main assumption as dynamics", "[generators]") {
  const Setup s(10);
  const auto& m = s.model;
  for (int k = 1; k <= m.k_max() - 1; ++k) {
    LocalPoint<double> u{m.params().level_position(k + 1), m.u_local(k + 1)};
    LocalPoint<double> v{m.params().level_position(k + 1), m.v_local(k + 1)};
    for (Index j = 0; j < m.params().chain_steps(k); ++j) {
      u = s.f.eval(u);
      v = s.f.eval(v);
    }
    REQUIRE(u.cell == m.params().level_position(k));
    REQUIRE(v.cell == m.params().level_position(k));
    const double tol = 1e-10 * m.bc_length(k);
    CHECK(std::abs(u.s - m.b_local()) * m.cell_length(u.cell) <= tol);
    CHECK(std::abs(v.s - m.c_local()) * m.cell_length(v.cell) <= tol);
  }
}

TEST_CASE("f moves points toward 1 and has no interior fixed point", "[generators]") {
  const Setup s(7);
  oracles::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_point(s.model, rng);
    const auto q = s.f.eval(p);
    CHECK(s.model.to_global(q) > s.model.to_global(p));
  }
}

TEST_CASE("g is the identity off the supports, bitwise", "[generators]") {
  const Setup s(7);
  const auto& m = s.model;
  // gap cell (no marked support)
  for (double t : {0.1, 0.3, 0.99}) {
    const LocalPoint<double> p{3, t};
    CHECK(s.g.eval(p) == p);
    CHECK(s.g.eval_inverse(p) == p);
    CHECK(s.g.derivative(p) == 1.0);
  }
  // inside a level cell but outside [b_k, c_k]
  for (double t : {0.01, 0.2, 0.8, 0.95}) {
    const LocalPoint<double> p{m.params().level_position(3), t};
    CHECK(s.g.eval(p) == p);
  }
  // tails
  const LocalPoint<double> tail{kLeftTailCell, 0.5};
  CHECK(s.g.eval(tail) == tail);
  CHECK(s.g.eval(LocalPoint<double>::zero()) == LocalPoint<double>::zero());
  CHECK(s.g.eval(LocalPoint<double>::one()) == LocalPoint<double>::one());
}

TEST_CASE("g maps u_k to v_k exactly and fixes b_k, c_k", "[generators]") {
  const Setup s(8);
  const auto& m = s.model;
  for (int k = 1; k <= m.k_max(); ++k) {
    const Index n = m.params().level_position(k);
    const LocalPoint<double> u{n, m.u_local(k)};
    const LocalPoint<double> v{n, m.v_local(k)};
    CHECK(s.g.eval(u) == v);
    CHECK(s.g.eval_inverse(v) == u);
    const LocalPoint<double> b{n, m.b_local()};
    const LocalPoint<double> c{n, m.c_local()};
    CHECK(s.g.eval(b) == b);
    CHECK(s.g.eval(c) == c);
    CHECK(s.g.derivative(b) == 1.0);
    CHECK(s.g.derivative(c) == 1.0);
  }
}

TEST_CASE("g moves support interiors strictly right", "[generators]") {
  const Setup s(8);
  const auto& m = s.model;
  for (int k = 1; k <= m.k_max(); ++k) {
    const Index n = m.params().level_position(k);
    for (int i = 1; i <= 100; ++i) {
      const double t = 0.25 + 0.5 * i / 101.0;
      const LocalPoint<double> p{n, t};
      CHECK(s.g.eval(p).s > t);
      CHECK(s.g.eval_inverse(p).s < t);
    }
  }
}

TEST_CASE("strict monotonicity on a dense grid", "[generators]") {
  const Setup s(7);
  const auto& m = s.model;
  const double lo = m.a_position(m.n_top() + 1);
  const double hi = m.a_position(m.source_low());
  double prev_f = -1.0, prev_g = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = lo + (hi - lo) * i / 10000.0;
    const double fx = m.to_global(s.f.eval(m.from_global(x)));
    const double gx = m.to_global(s.g.eval(m.from_global(x)));
    CHECK(fx > prev_f);
    CHECK(gx > prev_g);
    prev_f = fx;
    prev_g = gx;
  }
}

TEST_CASE("knots are C1 with derivative 1 on both sides", "[generators]") {
  const Setup s(8);
  for (const auto* map : {&s.f, &s.g}) {
    for (const auto& pc : map->pieces()) {
      CHECK(map->derivative({pc.src_cell, pc.src_lo}) == 1.0);
      CHECK(map->derivative({pc.src_cell, pc.src_hi}) == 1.0);
    }
  }
}

TEST_CASE("derivative matches finite differences in local coordinates", "[generators]") {
  const Setup s(8);
  oracles::Rng rng(5);
  for (const auto* map : {&s.f, &s.g}) {
    const auto& pieces = map->pieces();
    int done = 0;
    while (done < 1000) {
      const auto& pc = pieces[static_cast<std::size_t>(rng.uniform() * pieces.size())];
      const double w = pc.src_hi - pc.src_lo;
      const double h = w * 1e-7;
      const double t = rng.uniform(0.05, 0.95);
      const double sm = pc.src_lo + t * w;
      const auto up = map->eval({pc.src_cell, sm + h});
      const auto dn = map->eval({pc.src_cell, sm - h});
      REQUIRE(up.cell == dn.cell);
      const double fd = (up.s - dn.s) * s.model.cell_length(up.cell) /
                        (2 * h * s.model.cell_length(pc.src_cell));
      const double exact = map->derivative({pc.src_cell, sm});
      CHECK_THAT(exact, WithinRel(fd, 1e-5));
      ++done;
    }
  }
}

TEST_CASE("eval round trips", "[generators]") {
  const Setup s(8);
  oracles::Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_point(s.model, rng);
    const auto fwd = s.f.eval_inverse(s.f.eval(p));
    CHECK(fwd.cell == p.cell);
    CHECK_THAT(fwd.s, WithinAbs(p.s, 1e-11));
    const auto gwd = s.g.eval_inverse(s.g.eval(p));
    CHECK(gwd.cell == p.cell);
    CHECK_THAT(gwd.s, WithinAbs(p.s, 1e-11));
  }
}

TEST_CASE("word parsing and canonical form", "[generators]") {
  const auto w = Word::parse("F^-2 G^3");
  REQUIRE(w.size() == 5);
  CHECK(w.letters[0] == Letter::Fi);
  CHECK(w.letters[1] == Letter::Fi);
  CHECK(w.letters[2] == Letter::G);
  CHECK(w.to_string() == "F^-2 G^3");
  CHECK(Word::parse("").size() == 0);
  CHECK(Word::parse("F^0").size() == 0);
  CHECK(Word::parse("f g").to_string() == "F G");
  CHECK_THROWS_AS(Word::parse("X"), ParameterError);
  CHECK_THROWS_AS(Word::parse("F^"), ParameterError);

  const auto r = Word::parse("F F^-1 G").reduced();
  REQUIRE(r.size() == 1);
  CHECK(r.letters[0] == Letter::G);
}

TEST_CASE("apply_word basics", "[generators]") {
  const Setup s(8);
  oracles::Rng rng(15);
  const auto p = random_point(s.model, rng);

  CHECK(apply_word(s.f, s.g, Word{}, p) == p);

  const auto q = apply_word(s.f, s.g, Word::parse("F F^-1"), p);
  CHECK(q.cell == p.cell);
  CHECK_THAT(q.s, WithinAbs(p.s, 1e-11));

  // inserting cancelling pairs moves the result by at most 1e-9 per letter
  const Word base = Word::parse("G F G^-1 F^-1 G");
  Word padded;
  for (Letter l : base.letters) {
    padded.append(Letter::F).append(Letter::Fi);
    padded.append(l);
  }
  const LocalPoint<double> start{s.model.params().level_position(2), 0.5};
  const auto direct = apply_word(s.f, s.g, base, start);
  const auto padded_res = apply_word(s.f, s.g, padded, start);
  CHECK(direct.cell == padded_res.cell);
  CHECK_THAT(padded_res.s, WithinAbs(direct.s, 1e-9 * static_cast<double>(padded.size())));
}

TEST_CASE("range escapes carry the needed extension", "[generators]") {
  const Setup s(6);
  const auto& m = s.model;

  // interior of the left tail: needs a deeper model
  try {
    s.f.eval({kLeftTailCell, 0.5});
    FAIL("expected RangeEscape");
  } catch (const RangeEscape& e) {
    CHECK(e.needed_k_max == m.k_max() + 1);
  }

  // beyond the n < 0 side: needs more negative cells
  try {
    s.f.eval({m.n_low(), 0.5});
    FAIL("expected RangeEscape");
  } catch (const RangeEscape& e) {
    CHECK(e.needed_n_neg == m.params().n_neg + 1);
  }

  // f^-1 at the deep end needs k_max + 1
  CHECK_THROWS_AS(s.f.eval_inverse({m.n_top(), 0.5}), RangeEscape);

  // a word that walks off the deep end reports the prefix that failed
  const LocalPoint<double> start{m.params().level_position(2), 0.4};
  Word w;
  w.append(Letter::Fi, 200);
  try {
    apply_word(s.f, s.g, w, start);
    FAIL("expected RangeEscape");
  } catch (const RangeEscape& e) {
    // f^-1 walks one cell per letter; it fails on the letter applied at the
    // deepest materialized cell
    CHECK(e.word_prefix ==
          static_cast<std::size_t>(m.n_top() - m.params().level_position(2)));
  }
}

TEST_CASE("word derivatives follow the chain rule", "[generators]") {
  const Setup s(7);
  const auto& m = s.model;
  const LocalPoint<double> u2{m.params().level_position(2), m.u_local(2)};

  // a cancelling pair has derivative 1
  const auto [rt, d_rt] = apply_word_with_derivative(s.f, s.g, Word::parse("F F^-1"), u2);
  CHECK(rt.cell == u2.cell);
  CHECK_THAT(d_rt, WithinRel(1.0, 1e-10));

  // a single letter matches the map's own derivative
  const LocalPoint<double> mid{m.params().level_position(2), 0.4};
  const auto [img, d_g] = apply_word_with_derivative(s.f, s.g, Word::parse("G"), mid);
  CHECK(img == s.g.eval(mid));
  CHECK(d_g == s.g.derivative(mid));
}

TEST_CASE("extended-precision instantiation evaluates consistently", "[generators]") {
  Params<long double> p;
  p.k_max = 5;
  p.precision_bits = 64;
  const auto m = PartitionModel<long double>::build(p);
  const auto f = build_f(m);
  const auto g = build_g(m);
  const LocalPoint<long double> u2{m.params().level_position(2), m.u_local(2)};
  CHECK(g.eval(u2).s == m.v_local(2));
  auto z = u2;
  for (int j = 0; j < 2; ++j) z = f.eval(z);
  CHECK(z.cell == m.params().level_position(1));
  CHECK(z.s == m.b_local());
  const auto back = f.eval_inverse(f.eval(u2));
  CHECK(std::abs(back.s - u2.s) <= 1e-15L);
}

TEST_CASE("linear schedule builds a valid pair", "[generators]") {
  const Setup s(12, Schedule::Linear);
  const auto& m = s.model;
  // chains have a single step: f maps [u_{k+1}, v_{k+1}] straight onto [b_k, c_k]
  for (int k = 1; k <= m.k_max() - 1; ++k) {
    const auto [lo, hi] = m.chain_interval(k, 0);
    const auto img_lo = s.f.eval(lo);
    const auto img_hi = s.f.eval(hi);
    CHECK(img_lo.cell == m.params().level_position(k));
    CHECK(img_lo.s == m.b_local());
    CHECK(img_hi.s == m.c_local());
  }
  oracles::Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_point(m, rng);
    CHECK(m.to_global(s.f.eval(p)) > m.to_global(p));
  }
}
