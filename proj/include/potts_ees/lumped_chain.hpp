#pragma once

// Exact dynamics on the order-parameter lattice. Energies, proposal and
// acceptance probabilities of both the Metropolis chain and the equi-energy
// jump depend on a configuration only through its color counts, so both
// chains lump exactly onto the simplex lattice {n : sum n_c = N}.

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "potts_ees/potts_model.hpp"

namespace potts {

// All color counts with sum N, in ascending lexicographic order:
// (0,..,0,N) has index 0 and (N,0,..,0) the last index.
class SimplexLattice {
 public:
  SimplexLattice(int n, int q);

  int n() const { return n_; }
  int q() const { return q_; }
  std::size_t size() const { return size_; }

  std::span<const int> counts(std::size_t index) const {
    return {counts_.data() + index * static_cast<std::size_t>(q_),
            static_cast<std::size_t>(q_)};
  }
  ColorCount color_count(std::size_t index) const;

  // Rank of a count vector; throws on invalid input.
  std::size_t index_of(std::span<const int> counts) const;

  std::int64_t sum_of_squares(std::size_t index) const { return sum_sq_[index]; }
  double energy(std::size_t index) const {
    return static_cast<double>(sum_sq_[index]) / (2.0 * n_);
  }
  double log_class_size(std::size_t index) const { return log_size_[index]; }

  // l1 distance between n/N and a point of the simplex.
  double l1_distance(std::size_t index, std::span<const double> center) const;

  // Class nearest (l1) to the uniform point; ties resolved by lowest index.
  std::size_t balanced_index() const { return balanced_; }

 private:
  int n_;
  int q_;
  std::size_t size_ = 0;
  std::vector<int> counts_;
  std::vector<std::int64_t> sum_sq_;
  std::vector<double> log_size_;
  // binom_[r * (q_+1) + k] = C(r, k)
  std::vector<std::uint64_t> binom_;
  std::size_t balanced_ = 0;

  std::uint64_t binom(int r, int k) const;
};

using LatticePtr = std::shared_ptr<const SimplexLattice>;

LatticePtr enumerate_lattice(int n, int q);

// log of the multinomial coefficient N! / prod n_c!.
double log_class_size(const ColorCount& n);

double log_sum_exp(std::span<const double> values);

// Probability law on lattice classes (or on an arbitrary finite state space
// when constructed without a lattice), stored in log space.
class LumpedDistribution {
 public:
  LumpedDistribution(LatticePtr lattice, std::vector<double> log_weights);

  const LatticePtr& lattice() const { return lattice_; }
  std::size_t size() const { return log_weights_.size(); }
  std::span<const double> log_weights() const { return log_weights_; }
  double log_normalizer() const { return log_normalizer_; }
  double log_probability(std::size_t i) const { return log_weights_[i] - log_normalizer_; }
  double probability(std::size_t i) const;
  std::vector<double> probabilities() const;

 private:
  LatticePtr lattice_;
  std::vector<double> log_weights_;
  double log_normalizer_ = 0.0;
};

LumpedDistribution stationary_distribution(const LatticePtr& lattice, double beta);

// Equidistant energy levels h_0 = N/(2q) < ... < h_M = N/2.
class EnergyBands {
 public:
  EnergyBands(int n, int q, int m);
  // M = d * N; d * N must be a positive integer.
  static EnergyBands with_density(int n, int q, double d);

  int n() const { return n_; }
  int q() const { return q_; }
  int m() const { return m_; }
  double h(int k) const;
  double width() const;

  // Exact band of a class from its integer sum of squares; h_0 is closed
  // into band 1.
  int band_of(std::int64_t sum_of_squares) const;
  // Band of a real energy; values within 1e-9 band widths of a level snap
  // onto it. Throws Error(out_of_range) outside [h_0, h_M].
  int band_index(double energy) const;

 private:
  int n_;
  int q_;
  int m_;
};

class TemperatureLadder {
 public:
  TemperatureLadder(double beta, int m);

  int m() const { return static_cast<int>(betas_.size()) - 1; }
  double beta(int i) const { return betas_[static_cast<std::size_t>(i)]; }
  std::span<const double> betas() const { return betas_; }

 private:
  std::vector<double> betas_;
};

// Per-(temperature level, energy band) sets of lattice classes seen so far.
// An empty cell plays the role of a row of dummy entries. Cells are
// append-only.
class BandRecord {
 public:
  BandRecord(LatticePtr lattice, EnergyBands bands, int levels);

  int levels() const { return levels_; }
  int bands() const { return bands_.m(); }
  const EnergyBands& energy_bands() const { return bands_; }
  const LatticePtr& lattice() const { return lattice_; }

  // Returns true when the class was not yet present at this level.
  bool insert(int level, std::size_t class_index);
  bool contains(int level, std::size_t class_index) const;

  // band in 1..M
  std::span<const std::uint32_t> cell(int level, int band) const {
    return cells_[cell_id(level, band)].classes;
  }
  std::size_t total_entries() const { return entries_; }
  bool is_full() const { return entries_ == lattice_->size() * static_cast<std::size_t>(levels_); }

  // Draws a class from the cell with probability proportional to its class
  // size, using u in [0,1). The cell must be nonempty.
  std::uint32_t sample(int level, int band, double u) const;

  int band_of_class(std::size_t class_index) const { return class_band_[class_index]; }

 private:
  struct Cell {
    std::vector<std::uint32_t> classes;
    std::vector<double> cumulative;  // class sizes relative to band maximum
  };

  std::size_t cell_id(int level, int band) const {
    return static_cast<std::size_t>(level) * static_cast<std::size_t>(bands_.m()) +
           static_cast<std::size_t>(band - 1);
  }

  LatticePtr lattice_;
  EnergyBands bands_;
  int levels_;
  std::vector<Cell> cells_;
  std::vector<std::uint8_t> present_;
  std::vector<int> class_band_;
  std::vector<double> relative_size_;
  std::size_t entries_ = 0;
};

// Fully populated record (every class at every level): the best case M0.
BandRecord populate_m0(const LatticePtr& lattice, const EnergyBands& bands, int levels);

enum class KernelKind { metropolis, ee_jump, generic };

struct KernelEntry {
  std::uint32_t col;
  double p;
};

// Row-stochastic sparse matrix in CSR layout; every row stores its diagonal.
class LumpedKernel {
 public:
  LumpedKernel(LatticePtr lattice, KernelKind kind, double beta_hi, double beta_lo,
               std::vector<std::size_t> row_ptr, std::vector<KernelEntry> entries);

  // Kernel on an abstract state space, rows given as (col, p) lists.
  static LumpedKernel from_rows(const std::vector<std::vector<KernelEntry>>& rows);

  const LatticePtr& lattice() const { return lattice_; }
  KernelKind kind() const { return kind_; }
  double beta_hi() const { return beta_hi_; }
  double beta_lo() const { return beta_lo_; }
  std::size_t size() const { return row_ptr_.size() - 1; }
  std::size_t nonzeros() const { return entries_.size(); }

  std::span<const KernelEntry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  double at(std::size_t i, std::size_t j) const;

  // Test-fixture hook: overwrite one stored probability.
  void corrupt_entry(std::size_t row, std::size_t slot, double p);

 private:
  LatticePtr lattice_;
  KernelKind kind_;
  double beta_hi_;
  double beta_lo_;
  std::vector<std::size_t> row_ptr_;
  std::vector<KernelEntry> entries_;
};

LumpedKernel metropolis_kernel(const LatticePtr& lattice, double beta);

// Equi-energy jump at `level` >= 1, drawing targets from record cells of
// level - 1. Rows whose cell is empty are identity rows.
LumpedKernel ee_jump_kernel(const LatticePtr& lattice, const EnergyBands& bands,
                            double beta_hi, double beta_lo, const BandRecord& record,
                            int level);

// Jump kernel with the fully populated record.
LumpedKernel ee_jump_kernel_m0(const LatticePtr& lattice, const EnergyBands& bands,
                               double beta_hi, double beta_lo);

// Largest |row sum - 1| and smallest entry; used by validation code.
struct StochasticityReport {
  double max_row_error = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;
  std::size_t worst_row = 0;
};
StochasticityReport check_stochastic(const LumpedKernel& kernel);

// Largest |pi(x)P(x,y) - pi(y)P(y,x)| over stored entries.
double detailed_balance_error(const LumpedKernel& kernel, const LumpedDistribution& pi);

}  // namespace potts
