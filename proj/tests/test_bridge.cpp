#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "levels/bridge.hpp"
#include "support/oracles.hpp"

using namespace levels;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("phi chart values", "[bridge]") {
  CHECK_THAT(phi(0.0, 1.0, 0.5), WithinAbs(0.0, 1e-15));
  CHECK_THAT(phi(0.0, 1.0, 0.25), WithinRel(-1.0, 1e-14));
  CHECK_THAT(phi(0.0, 2.0, 0.5), WithinRel(-0.5, 1e-14));
  // strictly increasing in x
  double prev = -1e300;
  for (double x = 0.05; x < 1.0; x += 0.05) {
    const double v = phi(0.0, 1.0, x);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(phi(0.0, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(phi(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(phi(0.0, 1.0, -0.5), DomainError);
}

TEST_CASE("phi_inv values and round trip", "[bridge]") {
  CHECK_THAT(phi_inv(0.0, 1.0, 0.0), WithinAbs(0.5, 1e-16));
  CHECK_THAT(phi_inv(0.0, 1.0, -1.0), WithinRel(0.25, 1e-14));
  CHECK(phi_inv(3.0, 5.0, 0.0) == 4.0);

  // In the pole regime of a chart anchored at 0 (|y| well above 1/len) the
  // returned x carries full relative precision, so the round trip holds to a
  // few ulps out to |y| = 1e12.
  oracles::Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const double b = rng.log_uniform(1e-3, 2.0);
    const double y = -rng.log_uniform(100.0 / b, 1e12);
    const double x = phi_inv(0.0, b, y);
    REQUIRE(x > 0.0);
    REQUIRE(x < b);
    CHECK_THAT(phi(0.0, b, x), WithinRel(y, 1e-14));
  }

  // In general the returned x is quantized at its own ulp, which feeds back
  // through phi'(x) = pi (1 + len^2 y^2) / len^2; the round trip is exact up
  // to that floor plus a few ulps.
  for (int i = 0; i < 300; ++i) {
    const double mag = rng.log_uniform(1e-6, 1e12);
    const double y = (rng.uniform() < 0.5 ? -1 : 1) * mag;
    const double a = rng.uniform(-2.0, 2.0);
    const double len = rng.log_uniform(1e-3, 2.0);
    const double b = a + len;
    const double x = phi_inv(a, b, y);
    REQUIRE(x > a);
    REQUIRE(x < b);
    const double back = phi(a, b, x);
    const double quantization = oracles::ulp_at(std::max({std::abs(a), std::abs(b), std::abs(x)})) *
                                kPi * (1.0 + len * len * y * y) / (len * len);
    CHECK_THAT(back, WithinAbs(y, 8e-16 * std::abs(y) + 2.0 * quantization));
  }
  CHECK_THROWS_AS(phi_inv(0.0, 1.0, std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("cot_pi series agrees with the quotient at the crossover", "[bridge]") {
  for (double t : {0.99e-4, 1.01e-4, 0.5e-4, 1e-5}) {
    const double series = cot_pi(t);
    const double direct = std::cos(kPi * t) / std::sin(kPi * t);
    CHECK_THAT(series, WithinRel(direct, 1e-12));
  }
  CHECK_THAT(cot_pi(0.25), WithinRel(1.0, 1e-14));
}

TEST_CASE("identity bridge is the identity", "[bridge]") {
  const Bridge<double> br({0.3, 0.7}, {0.3, 0.7});
  CHECK(br(0.3) == 0.3);
  CHECK(br(0.7) == 0.7);
  for (double x = 0.31; x < 0.7; x += 0.017) CHECK_THAT(br(x), WithinAbs(x, 1e-15));
  for (double x = 0.31; x < 0.7; x += 0.017) CHECK_THAT(br.derivative(x), WithinRel(1.0, 1e-13));
}

TEST_CASE("bridge midpoint and chart composition", "[bridge]") {
  const Bridge<double> br({0.0, 1.0}, {0.0, 2.0});
  CHECK(br(0.0) == 0.0);
  CHECK(br(1.0) == 2.0);
  CHECK_THAT(br(0.5), WithinRel(1.0, 1e-14));
  // same value as composing the two charts explicitly
  const double expected = phi_inv(0.0, 2.0, phi(0.0, 1.0, 0.25));
  CHECK_THAT(br(0.25), WithinRel(expected, 1e-12));
  CHECK_THROWS_AS(br(1.5), DomainError);
}

TEST_CASE("bridge monotonicity", "[bridge][property]") {
  oracles::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-1.0, 1.0);
    const double li = rng.log_uniform(1e-4, 1.0);
    const double lj = li * rng.uniform(0.2, 5.0);
    const Bridge<double> br({a, a + li}, {0.0, lj});
    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
      const double x = (i == 200) ? a + li : a + li * i / 200.0;
      const double y = br(x);
      REQUIRE(y >= prev);
      if (i > 0) REQUIRE(y > prev);
      prev = y;
    }
  }
}

TEST_CASE("bridge derivative is exactly 1 at the endpoints", "[bridge]") {
  oracles::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-1.0, 1.0);
    const double li = rng.log_uniform(1e-4, 1.0);
    const double lj = li * rng.uniform(0.3, 3.0);
    const Bridge<double> br({a, a + li}, {1.0, 1.0 + lj});
    CHECK(br.derivative(a) == 1.0);
    CHECK(br.derivative(a + li) == 1.0);
    CHECK(br.derivative(a + li / 3) > 0.0);
  }
}

TEST_CASE("one-sided differences at the endpoints approach 1", "[bridge]") {
  const Bridge<double> br({0.0, 1.0}, {0.0, 1.7});
  double prev_err = 1e300;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    const double fd = (br(h) - br(0.0)) / h;
    const double err = std::abs(fd - 1.0);
    CHECK(err < prev_err);
    CHECK(err <= 10.0 * h);  // O(h) or better
    prev_err = err;
  }
}

TEST_CASE("bridge derivative matches central finite differences", "[bridge]") {
  oracles::Rng rng(17);
  int points = 0;
  while (points < 1000) {
    const double li = rng.log_uniform(1e-2, 1.0);
    const double lj = li * rng.uniform(0.4, 2.5);
    const Bridge<double> br({0.0, li}, {0.0, lj});
    const double h = li * 1e-7;
    for (int i = 0; i < 20 && points < 1000; ++i, ++points) {
      const double x = rng.uniform(2 * h, li - 2 * h);
      const double fd = oracles::central_difference([&](double t) { return br(t); }, x, h);
      CHECK_THAT(br.derivative(x), WithinRel(fd, 1e-5));
    }
  }
}

TEST_CASE("bridge inverse composes to the identity", "[bridge]") {
  oracles::Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const double li = rng.log_uniform(1e-3, 1.0);
    const double lj = li * rng.uniform(0.4, 2.5);
    const Bridge<double> br({0.2, 0.2 + li}, {-1.0, -1.0 + lj});
    const Bridge<double> inv = br.inverse();
    for (int i = 0; i < 20; ++i) {
      const double x = 0.2 + rng.uniform() * li;
      CHECK_THAT(inv(br(x)), WithinAbs(x, 1e-10 * li));
    }
  }
}

TEST_CASE("check_lemma_hypothesis", "[bridge]") {
  const auto omega = Modulus<double>::power(0.5);

  const auto same = check_lemma_hypothesis<double>({0.25, 0.65}, {0.25, 0.65}, omega, 0.0);
  CHECK(same.ratio_ok);
  CHECK(same.bound_ok);
  CHECK(same.quantity == 0.0);
  CHECK(same.norm_bound == 0.0);

  const auto wide = check_lemma_hypothesis<double>({0.0, 0.1}, {0.0, 0.3}, omega, 100.0);
  CHECK_FALSE(wide.ratio_ok);

  // boundary case passes at equality: quantity = 0.1 / sqrt(0.01) = 1
  const auto edge = check_lemma_hypothesis<double>({0.0, 0.01}, {0.0, 0.011}, omega, 1.0);
  CHECK(edge.ratio_ok);
  CHECK(edge.bound_ok);
  CHECK_THAT(edge.quantity, WithinRel(1.0, 1e-12));
  CHECK_THAT(edge.norm_bound, WithinRel(6.0 * kPi, 1e-15));
}

TEST_CASE("empirical omega norm basics", "[bridge]") {
  const auto omega = Modulus<double>::power(0.5);
  OmegaGrid grid;
  grid.j_min = 0;
  grid.j_max = 20;

  const double flat = empirical_omega_norm([](double) { return 3.0; },
                                           Interval<double>{0.0, 1.0}, omega, grid);
  CHECK(flat == 0.0);

  // D(x) = x with omega = sqrt: the ratio s/sqrt(s) peaks at the full scale 1
  const double linear = empirical_omega_norm([](double x) { return x; },
                                             Interval<double>{0.0, 1.0}, omega, grid);
  CHECK_THAT(linear, WithinRel(1.0, 1e-12));

  OmegaGrid bad = grid;
  bad.samples_per_scale = 0;
  CHECK_THROWS_AS(empirical_omega_norm([](double) { return 0.0; },
                                       Interval<double>{0.0, 1.0}, omega, bad),
                  ParameterError);
}

TEST_CASE("empirical omega norm grows under refinement", "[bridge][property]") {
  const auto omega = Modulus<double>::power(0.4);
  const Bridge<double> br({0.0, 1.0}, {0.0, 1.9});
  auto deriv = [&](double x) { return br.derivative(x); };
  OmegaGrid coarse{0, 10, 16, 99};
  OmegaGrid fine_scales{0, 24, 16, 99};
  OmegaGrid fine_samples{0, 10, 64, 99};
  const double base = empirical_omega_norm(deriv, Interval<double>{0.0, 1.0}, omega, coarse);
  CHECK(empirical_omega_norm(deriv, Interval<double>{0.0, 1.0}, omega, fine_scales) >= base);
  CHECK(empirical_omega_norm(deriv, Interval<double>{0.0, 1.0}, omega, fine_samples) >= base);
}

TEST_CASE("lemma bound holds empirically", "[bridge][property]") {
  oracles::Rng rng(23);
  int tested = 0;
  while (tested < 200) {
    const double alpha = rng.uniform(0.1, 0.9);
    const auto omega = Modulus<double>::power(alpha);
    const double li = rng.log_uniform(1e-4, 1.0);
    const double rho = rng.uniform(0.5, 2.0);
    if (std::abs(rho - 1.0) < 1e-6) continue;
    const double lj = li * rho;
    const Interval<double> src{0.0, li};
    const Interval<double> dst{0.0, lj};
    const double m = std::abs(lj / li - 1.0) / omega(li);
    const auto cert = check_lemma_hypothesis(src, dst, omega, m);
    REQUIRE(cert.ok());
    const Bridge<double> br(src, dst);
    OmegaGrid grid;
    grid.j_min = std::max(0, static_cast<int>(std::ceil(std::log2(1.0 / li))));
    grid.j_max = grid.j_min + 26;
    grid.samples_per_scale = 32;
    grid.seed = 1000 + static_cast<std::uint64_t>(tested);
    const double norm =
        empirical_omega_norm([&](double x) { return br.derivative(x); }, src, omega, grid);
    REQUIRE(norm <= cert.norm_bound * (1.0 + 1e-9));
    ++tested;
  }
}

TEST_CASE("glued chains stay within twice the lemma bound", "[bridge][property]") {
  oracles::Rng rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const double alpha = rng.uniform(0.2, 0.8);
    const auto omega = Modulus<double>::power(alpha);
    const int count = 3 + static_cast<int>(rng.uniform() * 5);
    std::vector<double> knots{0.0};
    std::vector<Bridge<double>> bridges;
    double m = 0.0;
    double y = 0.0;
    for (int i = 0; i < count; ++i) {
      const double li = rng.log_uniform(1e-3, 1e-1);
      const double rho = rng.uniform(0.8, 1.25);
      const double lj = li * rho;
      bridges.emplace_back(Interval<double>{knots.back(), knots.back() + li},
                           Interval<double>{y, y + lj});
      m = std::max(m, std::abs(rho - 1.0) / omega(li));
      knots.push_back(knots.back() + li);
      y += lj;
    }
    auto deriv = [&](double x) {
      for (const auto& br : bridges)
        if (x <= br.source().hi) return br.derivative(std::max(x, br.source().lo));
      return bridges.back().derivative(bridges.back().source().hi);
    };
    const double total = knots.back();
    OmegaGrid grid;
    grid.j_min = std::max(0, static_cast<int>(std::ceil(std::log2(1.0 / total))));
    grid.j_max = grid.j_min + 24;
    grid.samples_per_scale = 32;
    grid.seed = 5000 + static_cast<std::uint64_t>(trial);
    const double norm =
        empirical_omega_norm(deriv, Interval<double>{0.0, total}, omega, grid);
    REQUIRE(norm <= 12.0 * kPi * m * (1.0 + 1e-9));
  }
}

TEST_CASE("transfer slope inverts", "[bridge]") {
  oracles::Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const double r = rng.log_uniform(0.3, 3.0);
    const double t = rng.uniform(1e-6, 1.0 - 1e-6);
    const double image = transfer(t, r);
    CHECK_THAT(transfer_inverse(image, r), WithinAbs(t, 1e-11));
    const double forward = transfer_slope(t, r);
    const double backward = transfer_slope(image, 1.0 / r);
    CHECK_THAT(forward * backward, WithinRel(1.0, 1e-10));
  }
}
