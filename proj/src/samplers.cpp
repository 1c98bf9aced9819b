#include "potts_ees/samplers.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "potts_ees/error.hpp"

namespace potts {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  const std::uint64_t a = splitmix64(s);
  std::uint64_t t = a ^ (stream * 0xD1B54A32D192ED03ULL);
  splitmix64(t);
  return splitmix64(t);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire's multiply-and-reject.
  std::uint64_t x = next();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void kgen_step(SpinConfiguration& sigma, int q, Rng& rng) {
  if (rng.coin()) return;
  const auto site = static_cast<std::size_t>(rng.below(sigma.colors.size()));
  auto color = static_cast<int>(rng.below(static_cast<std::uint64_t>(q - 1)));
  if (color >= sigma.colors[site]) ++color;
  sigma.colors[site] = color;
}

void metropolis_step(SpinConfiguration& sigma, int q, double beta, Rng& rng) {
  if (rng.coin()) return;
  const auto n = sigma.colors.size();
  const auto site = static_cast<std::size_t>(rng.below(n));
  const int from = sigma.colors[site];
  auto to = static_cast<int>(rng.below(static_cast<std::uint64_t>(q - 1)));
  if (to >= from) ++to;
  const auto nf = std::count(sigma.colors.begin(), sigma.colors.end(), from);
  const auto nt = std::count(sigma.colors.begin(), sigma.colors.end(), to);
  const double dh = static_cast<double>(nt - nf + 1) / static_cast<double>(n);
  if (dh >= 0.0 || rng.uniform() < std::exp(beta * dh)) sigma.colors[site] = to;
}

bool metropolis_step(std::span<int> counts, double beta, Rng& rng) {
  if (rng.coin()) return false;
  const int q = static_cast<int>(counts.size());
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  // The recolored site's current color is c with probability n_c / N.
  auto site = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  int from = 0;
  while (site >= counts[static_cast<std::size_t>(from)]) {
    site -= counts[static_cast<std::size_t>(from)];
    ++from;
  }
  auto to = static_cast<int>(rng.below(static_cast<std::uint64_t>(q - 1)));
  if (to >= from) ++to;
  const double dh =
      static_cast<double>(counts[static_cast<std::size_t>(to)] -
                          counts[static_cast<std::size_t>(from)] + 1) / n;
  if (dh >= 0.0 || rng.uniform() < std::exp(beta * dh)) {
    --counts[static_cast<std::size_t>(from)];
    ++counts[static_cast<std::size_t>(to)];
    return true;
  }
  return false;
}

std::shared_ptr<const EesSetup> EesSetup::create(const EesConfig& config) {
  require(config.n >= 1 && config.q >= 2, "invalid model size");
  auto lattice = enumerate_lattice(config.n, config.q);
  auto bands = EnergyBands::with_density(config.n, config.q, config.d);
  TemperatureLadder ladder(config.beta, bands.m());
  std::shared_ptr<const BandRecord> m0;
  if (config.record == RecordMode::best_case) {
    m0 = std::make_shared<const BandRecord>(populate_m0(lattice, bands, bands.m() + 1));
  }
  return std::make_shared<const EesSetup>(
      EesSetup{config, std::move(lattice), bands, std::move(ladder), std::move(m0)});
}

ReplicaSystem::ReplicaSystem(std::shared_ptr<const EesSetup> setup, std::uint64_t seed,
                             std::uint64_t stream)
    : setup_(std::move(setup)), rng_(seed, stream) {
  require(setup_ != nullptr, "setup is null");
  const auto& lattice = *setup_->lattice;
  const int q = lattice.q();
  const std::size_t start = lattice.balanced_index();
  const auto c = lattice.counts(start);
  counts_.reserve(static_cast<std::size_t>(levels() * q));
  for (int i = 0; i < levels(); ++i) counts_.insert(counts_.end(), c.begin(), c.end());
  class_.assign(static_cast<std::size_t>(levels()), start);
  if (setup_->config.record == RecordMode::live) {
    live_ = std::make_unique<BandRecord>(setup_->lattice, setup_->bands, levels());
    for (int i = 0; i < levels(); ++i) record_state(i);
  }
}

std::span<const int> ReplicaSystem::state(int level) const {
  const auto q = static_cast<std::size_t>(setup_->lattice->q());
  return {counts_.data() + static_cast<std::size_t>(level) * q, q};
}

double ReplicaSystem::energy(int level) const {
  return setup_->lattice->energy(class_index(level));
}

void ReplicaSystem::set_state(int level, std::span<const int> counts) {
  require(level >= 0 && level < levels(), "level out of range");
  const std::size_t idx = setup_->lattice->index_of(counts);
  const auto q = static_cast<std::size_t>(setup_->lattice->q());
  std::copy(counts.begin(), counts.end(), counts_.begin() + static_cast<std::ptrdiff_t>(level * q));
  class_[static_cast<std::size_t>(level)] = idx;
}

void ReplicaSystem::record_state(int level) {
  if (live_) live_->insert(level, class_[static_cast<std::size_t>(level)]);
}

bool ReplicaSystem::ee_step(int level) {
  if (level == 0) return false;
  const auto& lattice = *setup_->lattice;
  const BandRecord& rec = record();
  const std::size_t current = class_[static_cast<std::size_t>(level)];
  const int band = rec.band_of_class(current);
  if (rec.cell(level - 1, band).empty()) return false;
  const std::uint32_t target = rec.sample(level - 1, band, rng_.uniform());
  if (target == current) return false;
  const double dh =
      static_cast<double>(lattice.sum_of_squares(target) - lattice.sum_of_squares(current)) /
      (2.0 * lattice.n());
  const double dbeta = setup_->ladder.beta(level) - setup_->ladder.beta(level - 1);
  if (dh < 0.0 && !(rng_.uniform() < std::exp(dbeta * dh))) return false;
  set_state(level, lattice.counts(target));
  return true;
}

bool ReplicaSystem::metropolis_step(int level) {
  const auto q = static_cast<std::size_t>(setup_->lattice->q());
  std::span<int> s(counts_.data() + static_cast<std::size_t>(level) * q, q);
  const bool moved = potts::metropolis_step(s, setup_->ladder.beta(level), rng_);
  if (moved) class_[static_cast<std::size_t>(level)] = setup_->lattice->index_of(s);
  record_state(level);
  return moved;
}

void ReplicaSystem::sweep_with(int j, int k, int l) {
  ee_step(j);
  metropolis_step(k);
  ee_step(l);
  ++sweeps_;
}

void ReplicaSystem::sweep() {
  const auto m1 = static_cast<std::uint64_t>(levels());
  const auto j = static_cast<int>(rng_.below(m1));
  const auto k = static_cast<int>(rng_.below(m1));
  const auto l = static_cast<int>(rng_.below(m1));
  sweep_with(j, k, l);
}

EscapeResult escape_time(ReplicaSystem& system, double epsilon, std::uint64_t max_sweeps) {
  require(epsilon >= 0.0, "epsilon must be >= 0");
  const auto& lattice = *system.setup().lattice;
  const auto center = symmetric_point(lattice.q());
  const int top = system.top();
  auto outside = [&] { return lattice.l1_distance(system.class_index(top), center) > epsilon + 1e-12; };
  EscapeResult res;
  if (outside()) return res;
  std::size_t last = system.class_index(top);
  for (std::uint64_t s = 1; s <= max_sweeps; ++s) {
    system.sweep();
    const std::size_t now = system.class_index(top);
    if (now != last) {
      last = now;
      if (outside()) {
        res.sweeps = s;
        return res;
      }
    }
  }
  res.sweeps = max_sweeps;
  res.timed_out = true;
  return res;
}

Trajectory simulate(const std::shared_ptr<const EesSetup>& setup, std::uint64_t sweeps,
                    std::uint64_t stride, std::uint64_t seed) {
  require(stride >= 1, "stride must be >= 1");
  ReplicaSystem system(setup, seed);
  const auto& lattice = *setup->lattice;
  const auto center = symmetric_point(lattice.q());
  Trajectory traj;
  traj.n = lattice.n();
  traj.q = lattice.q();
  traj.stride = stride;
  traj.records.reserve(static_cast<std::size_t>(sweeps / stride + 1));
  const int top = system.top();
  auto snapshot = [&](std::uint64_t step) {
    const auto c = system.state(top);
    traj.records.push_back({step, std::vector<int>(c.begin(), c.end()), system.energy(top),
                            lattice.l1_distance(system.class_index(top), center)});
  };
  snapshot(0);
  for (std::uint64_t s = 1; s <= sweeps; ++s) {
    system.sweep();
    if (s % stride == 0) snapshot(s);
  }
  return traj;
}

double integrated_autocorrelation_time(std::span<const double> series, double c) {
  const std::size_t n = series.size();
  require(n >= 16, "series too short for an autocorrelation estimate");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> x(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) x[i] = series[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> acov;
  fft.inv(acov, spec);
  const double c0 = acov[0];
  require(c0 > 0.0, "series is constant");
  double tau = 1.0;
  for (std::size_t w = 1; w < n; ++w) {
    tau += 2.0 * acov[w] / c0;
    if (static_cast<double>(w) >= c * tau) return tau;
  }
  fail(ErrorKind::no_convergence, "autocorrelation window did not close; series too short");
}

std::vector<double> metropolis_distance_series(int n, int q, double beta,
                                               std::uint64_t steps, std::uint64_t burn_in,
                                               std::uint64_t seed) {
  require(n >= 1 && q >= 2, "invalid model size");
  auto lattice = enumerate_lattice(n, q);
  const auto start = lattice->counts(lattice->balanced_index());
  std::vector<int> counts(start.begin(), start.end());
  const double inv_n = 1.0 / n;
  const double sym = 1.0 / q;
  Rng rng(seed);
  for (std::uint64_t s = 0; s < burn_in; ++s) metropolis_step(counts, beta, rng);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (std::uint64_t s = 0; s < steps; ++s) {
    metropolis_step(counts, beta, rng);
    double d = 0.0;
    for (int v : counts) d += std::abs(v * inv_n - sym);
    out.push_back(d);
  }
  return out;
}

}  // namespace potts
