#pragma once

// Brute-force spin-level reference computations over all q^N
// configurations. Used as independent oracles for the lumped chain; only
// feasible for small N.

#include <cstdint>
#include <vector>

#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/potts_model.hpp"

namespace potts::reference {

// Row-major dense square matrix.
struct DenseMatrix {
  std::size_t dim = 0;
  std::vector<double> data;

  double& operator()(std::size_t i, std::size_t j) { return data[i * dim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
};

std::uint64_t configuration_count(int n, int q);

// Configuration with base-q digits of `code` (site 0 least significant).
SpinConfiguration decode(std::uint64_t code, int n, int q);

// sum_{i,j} [sigma_i == sigma_j], the integer 2N * H(sigma).
std::int64_t pair_count(const SpinConfiguration& sigma);

// H(sigma) from the double sum over all site pairs.
double pair_sum_energy(const SpinConfiguration& sigma);

// Class probabilities obtained by summing exp(beta H(sigma)) over all
// configurations, indexed like the lattice.
std::vector<double> class_probabilities(const SimplexLattice& lattice, double beta);

// Spin-level Metropolis matrix: K_gen proposal (hold 1/2, each of the
// N(q-1) single-site recolorings 1/(2N(q-1))) with acceptance from
// pair-sum energies.
DenseMatrix spin_metropolis_matrix(int n, int q, double beta);

// Spin-level equi-energy jump with every configuration recorded: uniform
// proposal over all configurations in the current band (itself included),
// two-temperature acceptance.
DenseMatrix spin_ee_jump_matrix_m0(int n, int q, const EnergyBands& bands, double beta_hi,
                                   double beta_lo);

struct Projection {
  DenseMatrix lumped;       // lattice x lattice
  double lumpability_error = 0.0;  // max spread of class-to-class mass within a class
};

// Lumps a spin-level matrix onto lattice classes via magnetization.
Projection project(const DenseMatrix& spin, const SimplexLattice& lattice);

}  // namespace potts::reference
