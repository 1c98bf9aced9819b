#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "potts_ees/error.hpp"
#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/samplers.hpp"

using namespace potts;

namespace {

Eigen::MatrixXd dense(const LumpedKernel& k) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k.size()),
                                            static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i)
    for (const auto& e : k.row(i))
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.col)) += e.p;
  return m;
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

std::vector<double> normalized(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> out;
  for (double c : counts) out.push_back(c / total);
  return out;
}

Eigen::RowVectorXd stationary_of(const Eigen::MatrixXd& p) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(p.rows(), 1.0 / static_cast<double>(p.rows()));
  for (int it = 0; it < 200000; ++it) {
    Eigen::RowVectorXd next = v * p;
    next /= next.sum();
    const double change = (next - v).cwiseAbs().sum();
    v = next;
    if (change < 1e-15) break;
  }
  return v;
}

SpinConfiguration spins_of(std::span<const int> counts) {
  SpinConfiguration s;
  for (std::size_t c = 0; c < counts.size(); ++c)
    s.colors.insert(s.colors.end(), static_cast<std::size_t>(counts[c]), static_cast<int>(c));
  return s;
}

}  // namespace

TEST_CASE("random number streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xE220A8397B1DCDAFULL);  // reference SplitMix64 output for seed 0
  Rng a(5, 2), b(5, 2), c(5, 3);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  CHECK(a.next() != c.next());

  Rng r(11);
  std::vector<double> hist(7, 0.0);
  double mean = 0;
  const int draws = 700000;
  for (int i = 0; i < draws; ++i) {
    hist[r.below(7)] += 1;
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    mean += u;
  }
  for (double h : hist) CHECK(h / draws == doctest::Approx(1.0 / 7).epsilon(0.01));
  CHECK(mean / draws == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("spin-level proposal and Metropolis steps") {
  SUBCASE("K_gen hold and neighbor frequencies") {
    const int n = 5, q = 3, draws = 600000;
    Rng rng(3);
    SpinConfiguration base{{0, 1, 2, 0, 1}};
    int hold = 0;
    std::map<std::pair<int, int>, int> moves;
    for (int t = 0; t < draws; ++t) {
      auto s = base;
      kgen_step(s, q, rng);
      int diff = 0, site = -1;
      for (int i = 0; i < n; ++i)
        if (s.colors[i] != base.colors[i]) ++diff, site = i;
      REQUIRE(diff <= 1);
      if (diff == 0) ++hold;
      else ++moves[{site, s.colors[site]}];
    }
    CHECK(hold / double(draws) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(moves.size() == static_cast<std::size_t>(n * (q - 1)));
    for (const auto& [key, count] : moves)
      CHECK(count / double(draws) == doctest::Approx(1.0 / (2 * n * (q - 1))).epsilon(0.03));
  }
  SUBCASE("one-step laws match the lumped kernel row") {
    const int n = 6;
    const double beta = 2.9;
    auto lat = enumerate_lattice(n, 3);
    const auto k = metropolis_kernel(lat, beta);
    for (const auto& start : {std::vector<int>{3, 2, 1}, std::vector<int>{2, 2, 2},
                              std::vector<int>{5, 1, 0}}) {
      const std::size_t x = lat->index_of(start);
      std::vector<double> exact(lat->size(), 0.0), spin(lat->size(), 0.0), lumped(lat->size(), 0.0);
      for (const auto& e : k.row(x)) exact[e.col] = e.p;
      Rng rng(17, x);
      const int draws = 1000000;
      for (int t = 0; t < draws; ++t) {
        auto s = spins_of(start);
        metropolis_step(s, 3, beta, rng);
        const auto m = magnetization(s, 3);
        spin[lat->index_of(m.counts())] += 1;
        auto c = start;
        metropolis_step(std::span<int>(c), beta, rng);
        lumped[lat->index_of(c)] += 1;
      }
      CHECK(tv(normalized(spin), exact) < 0.005);
      CHECK(tv(normalized(lumped), exact) < 0.005);
    }
  }
}

TEST_CASE("replica system basics") {
  EesConfig cfg;
  cfg.n = 6;
  cfg.beta = 2.9;
  const auto setup = EesSetup::create(cfg);
  CHECK(setup->levels() == 7);
  CHECK(setup->m0->is_full());

  ReplicaSystem sys(setup, 99);
  for (int i = 0; i < sys.levels(); ++i) {
    const auto s = sys.state(i);
    CHECK(std::vector<int>(s.begin(), s.end()) == std::vector<int>{2, 2, 2});
  }
  CHECK_FALSE(sys.ee_step(0));

  SUBCASE("a sweep changes at most three coordinates, each by one local move or jump") {
    for (int t = 0; t < 20000; ++t) {
      std::vector<std::size_t> before;
      for (int i = 0; i < sys.levels(); ++i) before.push_back(sys.class_index(i));
      sys.sweep();
      int changed = 0;
      for (int i = 0; i < sys.levels(); ++i) changed += sys.class_index(i) != before[i];
      CHECK(changed <= 3);
    }
    CHECK(sys.sweeps() == 20000);
  }
  SUBCASE("jump one-step law matches the kernel row") {
    const auto& lat = *setup->lattice;
    for (int level : {1, 4, 6}) {
      const auto k = ee_jump_kernel_m0(setup->lattice, setup->bands, setup->ladder.beta(level),
                                       setup->ladder.beta(level - 1));
      for (const auto& start : {std::vector<int>{2, 2, 2}, std::vector<int>{4, 1, 1},
                                std::vector<int>{3, 3, 0}}) {
        const std::size_t x = lat.index_of(start);
        std::vector<double> exact(lat.size(), 0.0), hits(lat.size(), 0.0);
        for (const auto& e : k.row(x)) exact[e.col] = e.p;
        for (int t = 0; t < 300000; ++t) {
          sys.set_state(level, start);
          sys.ee_step(level);
          hits[sys.class_index(level)] += 1;
        }
        CHECK(tv(normalized(hits), exact) < 0.005);
      }
    }
  }
}

TEST_CASE("empty record cells never move") {
  EesConfig cfg;
  cfg.n = 6;
  cfg.beta = 2.9;
  cfg.record = RecordMode::live;
  const auto setup = EesSetup::create(cfg);
  ReplicaSystem sys(setup, 1);
  // Only the balanced class is recorded; a state in another band has an
  // empty cell.
  CHECK(sys.record().total_entries() == static_cast<std::size_t>(sys.levels()));
  const std::vector<int> far{6, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    sys.set_state(3, far);
    CHECK_FALSE(sys.ee_step(3));
    CHECK(sys.class_index(3) == setup->lattice->index_of(far));
  }
}

TEST_CASE("live record grows monotonically and records Metropolis moves") {
  EesConfig cfg;
  cfg.n = 12;
  cfg.beta = 2.9;
  cfg.record = RecordMode::live;
  const auto setup = EesSetup::create(cfg);
  ReplicaSystem sys(setup, 5);
  std::size_t last = sys.record().total_entries();
  for (int t = 0; t < 5000; ++t) {
    sys.sweep();
    const std::size_t now = sys.record().total_entries();
    CHECK(now >= last);
    last = now;
    // Without jumps the post-move class of coordinate k must be recorded.
    const int k = t % sys.levels();
    sys.sweep_with(0, k, 0);
    CHECK(sys.record().contains(k, sys.class_index(k)));
    CHECK(sys.record().energy_bands().band_of(setup->lattice->sum_of_squares(sys.class_index(k))) ==
          sys.record().band_of_class(sys.class_index(k)));
  }
  CHECK(last > static_cast<std::size_t>(sys.levels()));
}

TEST_CASE("top-coordinate law of the composed sweep") {
  // With the fully populated record the top coordinate is a Markov chain by
  // itself: each of the three sub-steps touches it with probability 1/(M+1).
  const int n = 6;
  const double beta = 2.0;
  EesConfig cfg;
  cfg.n = n;
  cfg.beta = beta;
  const auto setup = EesSetup::create(cfg);
  const int top = setup->levels() - 1;
  const double w = 1.0 / setup->levels();
  const auto lat = setup->lattice;
  const auto id = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(lat->size()),
                                            static_cast<Eigen::Index>(lat->size()));
  const Eigen::MatrixXd q =
      w * dense(ee_jump_kernel_m0(lat, setup->bands, beta, setup->ladder.beta(top - 1))) + (1 - w) * id;
  const Eigen::MatrixXd t = w * dense(metropolis_kernel(lat, beta)) + (1 - w) * id;
  const Eigen::RowVectorXd limit = stationary_of(q * t * q);
  const auto pi = stationary_distribution(lat, beta);

  std::vector<double> exact(limit.data(), limit.data() + limit.size());
  const double tv_to_gibbs = tv(exact, pi.probabilities());
  // The limit differs from the Gibbs law because the jump is not reversible
  // w.r.t. it; the discrepancy is pinned.
  CHECK(tv_to_gibbs == doctest::Approx(0.038).epsilon(0.05));

  ReplicaSystem sys(setup, 2024);
  for (int s = 0; s < 10000; ++s) sys.sweep();
  std::vector<double> hits(lat->size(), 0.0);
  for (int s = 0; s < 4000000; ++s) {
    sys.sweep();
    hits[sys.class_index(top)] += 1;
  }
  const auto emp = normalized(hits);
  CHECK(tv(emp, exact) < 0.01);
  CHECK(tv(emp, pi.probabilities()) > 0.02);
}

TEST_CASE("exact joint kernel for N = 2") {
  // N = 2, d = 1: three replicas on six classes, 216 joint states. Every
  // band is energy-pure, so each jump is reversible w.r.t. the Gibbs law at
  // its level and the averaged sweep is reversible w.r.t. the product law.
  EesConfig cfg;
  cfg.n = 2;
  cfg.beta = 2.9;
  const auto setup = EesSetup::create(cfg);
  const auto lat = setup->lattice;
  const int levels = setup->levels();
  REQUIRE(levels == 3);
  const auto s = static_cast<Eigen::Index>(lat->size());
  const Eigen::Index joint = s * s * s;

  std::vector<Eigen::MatrixXd> jumps, moves;
  for (int i = 0; i < levels; ++i) {
    moves.push_back(dense(metropolis_kernel(lat, setup->ladder.beta(i))));
    jumps.push_back(i == 0 ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(s, s))
                           : dense(ee_jump_kernel_m0(lat, setup->bands, setup->ladder.beta(i),
                                                     setup->ladder.beta(i - 1))));
  }
  auto encode = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) { return (a * s + b) * s + c; };
  auto lift = [&](const Eigen::MatrixXd& k, int level) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(joint, joint);
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b)
        for (Eigen::Index c = 0; c < s; ++c) {
          Eigen::Index x[3] = {a, b, c};
          const Eigen::Index from = encode(a, b, c);
          for (Eigen::Index y = 0; y < s; ++y) {
            Eigen::Index z[3] = {a, b, c};
            z[level] = y;
            out(from, encode(z[0], z[1], z[2])) += k(x[level], y);
          }
        }
    return out;
  };
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(joint, joint), m = e;
  for (int i = 0; i < levels; ++i) {
    e += lift(jumps[static_cast<std::size_t>(i)], i) / levels;
    m += lift(moves[static_cast<std::size_t>(i)], i) / levels;
  }
  const Eigen::MatrixXd r = e * m * e;
  CHECK((r.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

  std::vector<std::vector<double>> marg;
  for (int i = 0; i < levels; ++i) marg.push_back(stationary_distribution(lat, setup->ladder.beta(i)).probabilities());
  auto prod = [&](Eigen::Index x) {
    const Eigen::Index a = x / (s * s), b = (x / s) % s, c = x % s;
    return marg[0][static_cast<std::size_t>(a)] * marg[1][static_cast<std::size_t>(b)] *
           marg[2][static_cast<std::size_t>(c)];
  };
  double worst = 0;
  for (Eigen::Index x = 0; x < joint; ++x)
    for (Eigen::Index y = 0; y < joint; ++y)
      worst = std::max(worst, std::abs(prod(x) * r(x, y) - prod(y) * r(y, x)));
  CHECK(worst < 1e-15);

  ReplicaSystem sys(setup, 8);
  for (const Eigen::Index start : {Eigen::Index{0}, encode(1, 3, 5), encode(5, 0, 2)}) {
    const Eigen::Index a = start / (s * s), b = (start / s) % s, c = start % s;
    std::vector<double> hits(static_cast<std::size_t>(joint), 0.0), exact(static_cast<std::size_t>(joint));
    for (Eigen::Index y = 0; y < joint; ++y) exact[static_cast<std::size_t>(y)] = r(start, y);
    for (int t = 0; t < 1000000; ++t) {
      sys.set_state(0, lat->counts(static_cast<std::size_t>(a)));
      sys.set_state(1, lat->counts(static_cast<std::size_t>(b)));
      sys.set_state(2, lat->counts(static_cast<std::size_t>(c)));
      sys.sweep();
      hits[static_cast<std::size_t>(encode(static_cast<Eigen::Index>(sys.class_index(0)),
                                           static_cast<Eigen::Index>(sys.class_index(1)),
                                           static_cast<Eigen::Index>(sys.class_index(2))))] += 1;
    }
    CHECK(tv(normalized(hits), exact) < 0.01);
  }
}

TEST_CASE("escape time") {
  EesConfig cfg;
  cfg.n = 12;
  cfg.beta = 2.9;
  const auto setup = EesSetup::create(cfg);
  {
    ReplicaSystem sys(setup, 1);
    const auto r = escape_time(sys, 0.0, 100000);
    CHECK_FALSE(r.timed_out);
    CHECK(r.sweeps >= 1);
    CHECK(sys.class_index(sys.top()) != setup->lattice->balanced_index());
  }
  {
    ReplicaSystem sys(setup, 1);
    const auto r = escape_time(sys, 0.0, 0);
    CHECK(r.timed_out);
    CHECK(r.sweeps == 0);
  }
  {
    ReplicaSystem sys(setup, 1);
    const auto r = escape_time(sys, 2.0, 50);  // the ball covers the simplex
    CHECK(r.timed_out);
    CHECK(r.sweeps == 50);
  }
  {
    // N not divisible by 3: the start is already off the center.
    cfg.n = 7;
    ReplicaSystem sys(EesSetup::create(cfg), 1);
    const auto r = escape_time(sys, 0.0, 10);
    CHECK_FALSE(r.timed_out);
    CHECK(r.sweeps == 0);
  }
  ReplicaSystem a(setup, 42, 3), b(setup, 42, 3);
  CHECK(escape_time(a, 0.3, 1000000).sweeps == escape_time(b, 0.3, 1000000).sweeps);
  CHECK_THROWS_AS(escape_time(a, -1.0, 10), Error);
}

TEST_CASE("trajectory simulation") {
  EesConfig cfg;
  cfg.n = 30;
  cfg.beta = 2.9;
  cfg.record = RecordMode::live;
  const auto setup = EesSetup::create(cfg);
  const auto t1 = simulate(setup, 1000, 10, 77);
  const auto t2 = simulate(setup, 1000, 10, 77);
  const auto t3 = simulate(setup, 1000, 10, 78);
  REQUIRE(t1.records.size() == 101);
  CHECK(t1.records.front().sweep == 0);
  CHECK(t1.records.back().sweep == 1000);
  CHECK(t1.records.front().dist_a0 == 0.0);
  bool differs = false;
  for (std::size_t i = 0; i < t1.records.size(); ++i) {
    const auto& r = t1.records[i];
    CHECK(r.counts == t2.records[i].counts);
    differs = differs || r.counts != t3.records[i].counts;
    CHECK(std::accumulate(r.counts.begin(), r.counts.end(), 0) == 30);
    CHECK(r.energy >= 30.0 / 6 - 1e-12);
    CHECK(r.energy <= 30.0 / 2 + 1e-12);
    CHECK(r.dist_a0 >= 0.0);
    CHECK(r.dist_a0 <= 4.0 / 3 + 1e-12);
  }
  CHECK(differs);
  CHECK_THROWS_AS(simulate(setup, 10, 0, 1), Error);
}

TEST_CASE("integrated autocorrelation time") {
  // AR(1) with coefficient 1/2: tau = (1 + 1/2) / (1 - 1/2) = 3.
  Rng rng(123);
  std::vector<double> x(1 << 20);
  double v = 0;
  for (auto& xi : x) {
    // Box-Muller from the library generator.
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    v = 0.5 * v + std::sqrt(-2 * std::log(u1)) * std::cos(2 * M_PI * u2);
    xi = v;
  }
  CHECK(integrated_autocorrelation_time(x) == doctest::Approx(3.0).epsilon(0.05));

  std::vector<double> iid(100000);
  for (auto& xi : iid) xi = rng.uniform();
  CHECK(integrated_autocorrelation_time(iid) == doctest::Approx(1.0).epsilon(0.05));

  CHECK_THROWS_AS(integrated_autocorrelation_time(std::vector<double>(100, 1.0)), Error);
  CHECK_THROWS_AS(integrated_autocorrelation_time(std::vector<double>(5, 1.0)), Error);

  const auto series = metropolis_distance_series(30, 3, 2.0, 20000, 1000, 4);
  CHECK(series.size() == 20000);
  for (double d : series) {
    CHECK(d >= 0.0);
    CHECK(d <= 4.0 / 3 + 1e-12);
  }
}
