#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "potts_ees/error.hpp"
#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/potts_model.hpp"
#include "potts_ees/spectral.hpp"

using namespace potts;

namespace {

std::vector<std::vector<double>> maxima_centers(double beta) {
  std::vector<std::vector<double>> out;
  for (const auto& m : find_local_maxima(beta).maxima) out.push_back(m.point);
  out.push_back(symmetric_point(3));
  return out;
}

// Cheeger quantities for one (N, beta) Metropolis chain.
struct Sandwich {
  double gap = 0.0;
  double phi_family = 0.0;
};

Sandwich sandwich(int n, double beta) {
  auto lat = enumerate_lattice(n, 3);
  const auto k = metropolis_kernel(lat, beta);
  const auto pi = stationary_distribution(lat, beta);
  GapOptions opt;
  opt.want_eigenvector = true;
  const auto g = spectral_gap(k, pi, opt);
  const auto fam = family_conductance(k, pi, maxima_centers(beta), g.eigenfunction);
  return {g.gap, fam.phi};
}

std::vector<double> ball_ratios(double beta, const std::vector<int>& sizes) {
  std::vector<double> out;
  for (int n : sizes) {
    const auto pi = stationary_distribution(enumerate_lattice(n, 3), beta);
    out.push_back(ball_cut_ratio(pi, symmetric_point(3), 0.30, 0.15));
  }
  return out;
}

const std::vector<int> kRatioSizes = {30, 45, 60, 75, 90, 105, 120, 135, 150};

}  // namespace

TEST_CASE("conductance of explicit sets") {
  const auto two = LumpedKernel::from_rows({{{0, 0.7}, {1, 0.3}}, {{0, 0.6}, {1, 0.4}}});
  LumpedDistribution pi2(nullptr, {std::log(2.0), std::log(1.0)});
  CHECK(detailed_balance_error(two, pi2) < 1e-15);
  auto s = conductance_of_set(two, pi2, {true, false});
  CHECK(s.phi == doctest::Approx(0.3));
  CHECK(s.pi_s == doctest::Approx(2.0 / 3));
  CHECK(s.exceeds_half);
  s = conductance_of_set(two, pi2, {false, true});
  CHECK(s.phi == doctest::Approx(0.6));
  CHECK_FALSE(s.exceeds_half);

  // Two closed components: zero outflow.
  const auto blocks = LumpedKernel::from_rows(
      {{{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}, {{2, 1.0}}});
  LumpedDistribution pi3(nullptr, {0.0, 0.0, 0.0});
  CHECK(conductance_of_set(blocks, pi3, {false, false, true}).phi == 0.0);
  CHECK_THROWS_AS(conductance_of_set(blocks, pi3, {false, false, false}), Error);
  CHECK_THROWS_AS(conductance_of_set(blocks, pi3, {true, false}), Error);

  // Ball of radius 0.3 around the uniform point against a dense evaluation.
  for (int n : {6, 9, 12}) {
    auto lat = enumerate_lattice(n, 3);
    const auto k = metropolis_kernel(lat, 2.9);
    const auto pi = stationary_distribution(lat, 2.9);
    const auto mask = lattice_ball(*lat, symmetric_point(3), 0.3);
    const std::size_t size = lat->size();
    long double flow = 0, mass = 0;
    for (std::size_t x = 0; x < size; ++x) {
      const bool in = lat->l1_distance(x, symmetric_point(3)) <= 0.3 + 1e-12;
      CHECK(in == mask[x]);
      if (!in) continue;
      mass += pi.probability(x);
      for (std::size_t y = 0; y < size; ++y)
        if (!(lat->l1_distance(y, symmetric_point(3)) <= 0.3 + 1e-12))
          flow += static_cast<long double>(pi.probability(x)) * k.at(x, y);
    }
    const auto got = conductance_of_set(k, pi, mask);
    CHECK(std::abs(got.phi - static_cast<double>(flow / mass)) < 1e-12);
    CHECK(std::abs(got.pi_s - static_cast<double>(mass)) < 1e-12);
  }
}

TEST_CASE("spectral gap") {
  SUBCASE("identity and two-state chains") {
    const auto id = LumpedKernel::from_rows({{{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}});
    LumpedDistribution u(nullptr, {0.0, 0.0, 0.0});
    CHECK(spectral_gap(id, u).gap == doctest::Approx(0.0).epsilon(1e-14));
    const auto half = LumpedKernel::from_rows({{{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}});
    LumpedDistribution u2(nullptr, {0.0, 0.0});
    const auto g = spectral_gap(half, u2);
    CHECK(g.gap == doctest::Approx(1.0));
    CHECK(g.lambda_min == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(g.method == GapMethod::dense);
    // Two-state chain with p, q: lambda_2 = 1 - p - q.
    const auto pq = LumpedKernel::from_rows({{{0, 0.8}, {1, 0.2}}, {{0, 0.1}, {1, 0.9}}});
    LumpedDistribution pi(nullptr, {std::log(0.1), std::log(0.2)});
    CHECK(spectral_gap(pq, pi).gap == doctest::Approx(0.3));
  }
  SUBCASE("non-reversible kernels are rejected") {
    const auto cyc = LumpedKernel::from_rows(
        {{{0, 0.5}, {1, 0.5}}, {{1, 0.5}, {2, 0.5}}, {{2, 0.5}, {0, 0.5}}});
    LumpedDistribution u(nullptr, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(spectral_gap(cyc, u), Error);
    try {
      assert_reversible(cyc, u);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::not_reversible);
    }
  }
  SUBCASE("power iteration agrees with the dense solver") {
    for (double beta : {1.0, 2.0, 2.5}) {
      auto lat = enumerate_lattice(24, 3);
      const auto k = metropolis_kernel(lat, beta);
      const auto pi = stationary_distribution(lat, beta);
      const auto dense = spectral_gap(k, pi);
      GapOptions opt;
      opt.dense_limit = 10;
      const auto power = spectral_gap(k, pi, opt);
      CHECK(power.method == GapMethod::power_iteration);
      CHECK(std::isnan(power.lambda_min));
      CHECK(power.gap == doctest::Approx(dense.gap).epsilon(1e-6));
    }
  }
  SUBCASE("Metropolis spectrum is nonnegative (laziness)") {
    for (double beta : {0.0, 2.9, 4.0}) {
      auto lat = enumerate_lattice(15, 3);
      const auto g = spectral_gap(metropolis_kernel(lat, beta), stationary_distribution(lat, beta));
      CHECK(g.lambda_min >= -1e-12);
      CHECK(g.gap > 0.0);
      CHECK(g.gap <= 1.0);
    }
  }
  SUBCASE("beta = 0 Metropolis is lumped K_gen: gap = 3 / (4N)") {
    // K_gen on spins is a lazy product walk; its slowest nontrivial mode
    // (one site's color indicator) has eigenvalue 1 - q / (2N (q - 1)).
    for (int n : {3, 10, 30}) {
      auto lat = enumerate_lattice(n, 3);
      const auto g = spectral_gap(metropolis_kernel(lat, 0.0), stationary_distribution(lat, 0.0));
      CHECK(g.gap == doctest::Approx(3.0 / (4.0 * n)).epsilon(1e-10));
    }
  }
}

TEST_CASE("Cheeger sandwich for the Metropolis chain") {
  for (int n : {6, 12, 21, 30, 40}) {
    for (double beta : {1.0, 2.0, 2.77, 2.9}) {
      CAPTURE(n);
      CAPTURE(beta);
      const auto s = sandwich(n, beta);
      CHECK(s.gap <= 2 * s.phi_family + 1e-12);
      CHECK(s.phi_family >= 0.0);
      CHECK(s.phi_family <= 1.0);
    }
  }
  // Where the exact minimum is available, the family either attains it or
  // the lower bound is checked against the exact value.
  for (int n : {2, 3, 4, 5}) {
    for (double beta : {1.0, 2.0, 2.77, 2.9}) {
      auto lat = enumerate_lattice(n, 3);
      REQUIRE(lat->size() <= 30);
      const auto k = metropolis_kernel(lat, beta);
      const auto pi = stationary_distribution(lat, beta);
      GapOptions opt;
      opt.want_eigenvector = true;
      const auto g = spectral_gap(k, pi, opt);
      const auto fam = family_conductance(k, pi, maxima_centers(beta), g.eigenfunction);
      const auto ex = exhaustive_conductance(k, pi);
      CHECK(ex.phi <= fam.phi + 1e-12);
      CHECK(ex.pi_s <= 0.5 + 1e-12);
      CHECK(ex.phi * ex.phi / 2 <= g.gap + 1e-12);
      CHECK(g.gap <= 2 * ex.phi + 1e-12);
    }
  }
}

TEST_CASE("exhaustive conductance") {
  // Path 0 - 1 - 2 - 3 with uniform law: the best cut splits it in half.
  const auto path = LumpedKernel::from_rows({{{0, 0.75}, {1, 0.25}},
                                             {{0, 0.25}, {1, 0.5}, {2, 0.25}},
                                             {{1, 0.25}, {2, 0.5}, {3, 0.25}},
                                             {{2, 0.25}, {3, 0.75}}});
  LumpedDistribution u(nullptr, {0.0, 0.0, 0.0, 0.0});
  const auto ex = exhaustive_conductance(path, u);
  CHECK(ex.phi == doctest::Approx(0.25 * 0.25 / 0.5));
  CHECK((ex.best_mask == 0b0011 || ex.best_mask == 0b1100));
  auto big = enumerate_lattice(7, 3);  // 36 states
  CHECK_THROWS_AS(exhaustive_conductance(metropolis_kernel(big, 1.0), stationary_distribution(big, 1.0)),
                  Error);
}

TEST_CASE("Metropolis gap is bounded by the asymmetric-maximum ball cut at beta = 2.9") {
  const double beta = 2.9;
  const auto report = find_local_maxima(beta);
  REQUIRE(report.m_star.has_value());
  std::vector<double> sizes, gaps;
  for (int n : {12, 18, 24, 30, 36, 40}) {
    auto lat = enumerate_lattice(n, 3);
    const auto k = metropolis_kernel(lat, beta);
    const auto pi = stationary_distribution(lat, beta);
    const auto gap = spectral_gap(k, pi).gap;
    double best = 1.0;
    for (const auto& m : report.maxima) {
      if (m.kind == MaximumKind::symmetric) continue;
      for (double r = 0.05; r <= 1.0; r += 0.05) {
        const auto ball = lattice_ball(*lat, m.point, r);
        if (std::find(ball.begin(), ball.end(), true) == ball.end()) continue;
        const auto c = conductance_of_set(k, pi, ball);
        if (!c.exceeds_half && c.pi_s > 0) best = std::min(best, c.phi);
      }
    }
    CAPTURE(n);
    CHECK(gap <= 2 * best + 1e-12);
    sizes.push_back(n);
    gaps.push_back(gap);
  }
  const auto fit = fit_exponential_rate(sizes, gaps);
  CHECK(fit.rate > 0.0);
  for (std::size_t i = 1; i < gaps.size(); ++i) CHECK(gaps[i] < gaps[i - 1]);
}

TEST_CASE("ball cut ratio") {
  auto lat = enumerate_lattice(60, 3);
  const auto pi = stationary_distribution(lat, 2.9);
  const auto a0 = symmetric_point(3);
  double prev = 2.0;
  for (double delta = 0.02; delta < 0.3; delta += 0.02) {
    const double r = ball_cut_ratio(pi, a0, 0.3, delta);
    CHECK(r <= prev + 1e-15);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    prev = r;
  }
  CHECK_THROWS_AS(ball_cut_ratio(pi, a0, 0.3, 0.3), Error);
  CHECK_THROWS_AS(ball_cut_ratio(pi, a0, 0.3, 0.4), Error);
  // No class of the N = 60 lattice lies within 0.001 of this center.
  CHECK_THROWS_AS(ball_cut_ratio(pi, std::vector<double>{0.51, 0.25, 0.24}, 0.3, 0.001), Error);

  // Independent computation of the same ratio.
  long double inner = 0, outer = 0;
  for (std::size_t i = 0; i < lat->size(); ++i) {
    const double d = lat->l1_distance(i, a0);
    if (d <= 0.3 + 1e-12) outer += pi.probability(i);
    if (d <= 0.15 + 1e-12) inner += pi.probability(i);
  }
  CHECK(ball_cut_ratio(pi, a0, 0.3, 0.15) ==
        doctest::Approx(static_cast<double>((outer - inner) / outer)).epsilon(1e-12));
}

TEST_CASE("ball cut ratio at beta = 0 follows the entropy envelope") {
  // With beta = 0 the law is multinomial: log ratio ~ N (max f on the
  // annulus - max f on the ball) up to O(log N). The maximum of the entropy
  // over a closed annulus around the center is attained on its inner
  // boundary, and over the ball at the center itself.
  auto entropy_at_l1 = [](double r) {
    // Point (1/3 + r/2, 1/3 - r/2, 1/3) has l1 distance r from the center
    // and maximal entropy among points at that distance.
    const std::vector<double> c{1.0 / 3 + r / 2, 1.0 / 3 - r / 2, 1.0 / 3};
    return free_energy_f(c, 0.0);
  };
  for (int n : {60, 120, 240}) {
    const auto pi = stationary_distribution(enumerate_lattice(n, 3), 0.0);
    const double lr = std::log(ball_cut_ratio(pi, symmetric_point(3), 0.3, 0.15));
    const double env = n * (entropy_at_l1(0.15) - entropy_at_l1(0.0));
    CAPTURE(n);
    CHECK(std::abs(lr - env) <= 3 * std::log(static_cast<double>(n)) + 3);
  }
}

TEST_CASE("ball cut ratio at beta = 2.0 shows no exponential decay") {
  std::vector<double> sizes(kRatioSizes.begin(), kRatioSizes.end());
  const auto ratios = ball_ratios(2.0, kRatioSizes);
  const auto fit = fit_exponential_rate(sizes, ratios);
  CHECK(fit.rate < 10.0 / kRatioSizes.back());
}

TEST_CASE("ball cut ratio at beta = 2.9 decays exponentially") {
  std::vector<double> sizes(kRatioSizes.begin(), kRatioSizes.end());
  const auto ratios = ball_ratios(2.9, kRatioSizes);
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    CAPTURE(kRatioSizes[i]);
    CHECK(ratios[i] < ratios[i - 1]);
  }
  const auto fit = fit_exponential_rate(sizes, ratios);
  CAPTURE(fit.rate);
  CHECK(fit.rate > 0.0);
  CHECK(fit.r_squared > 0.99);
}

TEST_CASE("lifted cut bound") {
  const double beta = 2.9;
  const auto bands120 = EnergyBands::with_density(120, 3, 1.0);
  const auto pi120 = stationary_distribution(enumerate_lattice(120, 3), beta);
  const auto b = lifted_cut_conductance_bound(pi120, bands120, beta, 0.30, 0.10);
  CHECK(b.bound == ball_cut_ratio(pi120, symmetric_point(3), 0.30, 0.10));
  CHECK(b.max_reach_distance <= 0.30);
  CHECK(b.reachable_classes >= b.inner_classes);
  CHECK(b.inner_classes > 0);

  const auto bands12 = EnergyBands::with_density(12, 3, 1.0);
  const auto pi12 = stationary_distribution(enumerate_lattice(12, 3), beta);
  try {
    lifted_cut_conductance_bound(pi12, bands12, beta, 0.30, 0.25);
    FAIL("expected the reachability premise to fail");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::premise_failed);
  }

  // Default (eps, delta) = (0.30, 0.15) once N is large enough.
  for (int n : {60, 90, 120}) {
    const auto bands = EnergyBands::with_density(n, 3, 1.0);
    const auto pi = stationary_distribution(enumerate_lattice(n, 3), beta);
    const auto lb = lifted_cut_conductance_bound(pi, bands, beta, 0.30, 0.15);
    CHECK(lb.bound == ball_cut_ratio(pi, symmetric_point(3), 0.30, 0.15));
  }
}

TEST_CASE("exponential rate fit") {
  std::vector<double> n{10, 20, 30, 40, 50};
  std::vector<double> v;
  for (double x : n) v.push_back(3.0 * std::exp(-0.2 * x));
  auto fit = fit_exponential_rate(n, v);
  CHECK(fit.rate == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.rate_stderr < 1e-10);

  fit = fit_exponential_rate(n, std::vector<double>(5, 0.7));
  CHECK(std::abs(fit.rate) < 1e-10);

  CHECK_THROWS_AS(fit_exponential_rate(n, std::vector<double>{1, 2, 0, 4, 5}), Error);
  CHECK_THROWS_AS(fit_exponential_rate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}),
                  Error);
  CHECK_THROWS_AS(fit_exponential_rate(n, std::vector<double>{1, 2}), Error);
}
