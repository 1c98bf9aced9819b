#pragma once

// CSV writers. Column orders are fixed and rows follow lattice / kernel
// order, so files from identical inputs are byte-identical.

#include <ostream>
#include <string>

#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/samplers.hpp"

namespace potts {

// Shortest round-trip-safe rendering: 17 significant digits.
std::string format_double(double v);

// row_index,col_index,probability
void write_kernel_csv(std::ostream& os, const LumpedKernel& kernel);

// n1,...,nq,log_weight
void write_distribution_csv(std::ostream& os, const LumpedDistribution& dist);

// sweep,m1,...,mq,energy,dist_a0
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

// c1,c2,c3,f on the grid c = (i, j, steps-i-j) / steps.
void write_landscape_csv(std::ostream& os, double beta, int steps);

}  // namespace potts
