#pragma once

// Trajectory simulation: spin-level K_gen / Metropolis steps (for
// cross-validation) and the multi-replica equi-energy sampler on the lumped
// representation.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/potts_model.hpp"

namespace potts {

// One step of the SplitMix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed of stream `stream` derived from a master seed. Distinct streams of
// the same master seed are decorrelated by two SplitMix64 rounds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// mt19937_64 keyed by (master seed, stream id). Uniform variates are built
// from raw 64-bit output so sequences are identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, bound), bound > 0, without modulo bias.
  std::uint64_t below(std::uint64_t bound);
  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// K_gen: hold with probability 1/2, otherwise recolor one uniform site to a
// uniformly chosen different color.
void kgen_step(SpinConfiguration& sigma, int q, Rng& rng);

// Spin-level Metropolis step at inverse temperature beta. O(N) per call.
void metropolis_step(SpinConfiguration& sigma, int q, double beta, Rng& rng);

// Lumped Metropolis step on a count vector (sum N). Returns true if the
// state changed.
bool metropolis_step(std::span<int> counts, double beta, Rng& rng);

enum class RecordMode { best_case, live };

struct EesConfig {
  int n = 0;
  int q = 3;
  double beta = 0.0;
  double d = 1.0;
  RecordMode record = RecordMode::best_case;
};

// Shared immutable pieces of a sampler run: lattice, bands, ladder and, in
// best-case mode, the fully populated record. Reusable across seeds.
struct EesSetup {
  EesConfig config;
  LatticePtr lattice;
  EnergyBands bands;
  TemperatureLadder ladder;
  std::shared_ptr<const BandRecord> m0;

  static std::shared_ptr<const EesSetup> create(const EesConfig& config);
  int levels() const { return ladder.m() + 1; }
};

// Joint state of the M+1 replicas plus the band record.
class ReplicaSystem {
 public:
  ReplicaSystem(std::shared_ptr<const EesSetup> setup, std::uint64_t seed,
                std::uint64_t stream = 0);

  const EesSetup& setup() const { return *setup_; }
  int levels() const { return setup_->levels(); }
  int top() const { return levels() - 1; }

  std::span<const int> state(int level) const;
  std::size_t class_index(int level) const { return class_[static_cast<std::size_t>(level)]; }
  double energy(int level) const;
  void set_state(int level, std::span<const int> counts);

  // Equi-energy jump of coordinate `level` using record row level-1.
  // Level 0 is the identity. Returns true if the state changed.
  bool ee_step(int level);
  bool metropolis_step(int level);
  // One draw of the randomized composition Q_j T_k Q_l.
  void sweep();
  void sweep_with(int j, int k, int l);

  const BandRecord& record() const { return live_ ? *live_ : *setup_->m0; }
  std::uint64_t sweeps() const { return sweeps_; }
  Rng& rng() { return rng_; }

 private:
  void record_state(int level);

  std::shared_ptr<const EesSetup> setup_;
  std::unique_ptr<BandRecord> live_;
  std::vector<int> counts_;
  std::vector<std::size_t> class_;
  std::uint64_t sweeps_ = 0;
  Rng rng_;
};

struct EscapeResult {
  std::uint64_t sweeps = 0;
  bool timed_out = false;
};

// Sweeps until the top coordinate leaves the closed l1 ball of radius
// epsilon around the uniform point. All replicas start in the balanced
// class. The check runs after every sweep.
EscapeResult escape_time(ReplicaSystem& system, double epsilon, std::uint64_t max_sweeps);

struct TrajectoryRecord {
  std::uint64_t sweep = 0;
  std::vector<int> counts;
  double energy = 0.0;
  double dist_a0 = 0.0;
};

struct Trajectory {
  int n = 0;
  int q = 3;
  std::uint64_t stride = 1;
  std::vector<TrajectoryRecord> records;
};

// Runs a fresh system for `sweeps` sweeps from the balanced start and
// records the top coordinate at sweep 0, stride, 2*stride, ...
Trajectory simulate(const std::shared_ptr<const EesSetup>& setup, std::uint64_t sweeps,
                    std::uint64_t stride, std::uint64_t seed);

// Integrated autocorrelation time with Sokal's self-consistent window
// (window = smallest W with W >= c * tau(W)).
double integrated_autocorrelation_time(std::span<const double> series, double c = 6.0);

// l1 distance to the uniform point along a lumped Metropolis run, one value
// per step, after `burn_in` discarded steps.
std::vector<double> metropolis_distance_series(int n, int q, double beta,
                                               std::uint64_t steps, std::uint64_t burn_in,
                                               std::uint64_t seed);

}  // namespace potts
