#include "potts_ees/export.hpp"

#include <cstdio>

#include "potts_ees/error.hpp"

namespace potts {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_kernel_csv(std::ostream& os, const LumpedKernel& kernel) {
  os << "row_index,col_index,probability\n";
  for (std::size_t i = 0; i < kernel.size(); ++i)
    for (const auto& e : kernel.row(i)) os << i << ',' << e.col << ',' << format_double(e.p) << '\n';
}

void write_distribution_csv(std::ostream& os, const LumpedDistribution& dist) {
  require(dist.lattice() != nullptr, "distribution has no lattice");
  const auto& lattice = *dist.lattice();
  for (int c = 1; c <= lattice.q(); ++c) os << 'n' << c << ',';
  os << "log_weight\n";
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    for (int v : lattice.counts(i)) os << v << ',';
    os << format_double(dist.log_weights()[i]) << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "sweep,";
  for (int c = 1; c <= traj.q; ++c) os << 'm' << c << ',';
  os << "energy,dist_a0\n";
  for (const auto& r : traj.records) {
    os << r.sweep << ',';
    for (int v : r.counts) os << format_double(static_cast<double>(v) / traj.n) << ',';
    os << format_double(r.energy) << ',' << format_double(r.dist_a0) << '\n';
  }
}

void write_landscape_csv(std::ostream& os, double beta, int steps) {
  require(steps >= 1, "grid needs at least one step");
  os << "c1,c2,c3,f\n";
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const double c[3] = {double(i) / steps, double(j) / steps, double(steps - i - j) / steps};
      os << format_double(c[0]) << ',' << format_double(c[1]) << ',' << format_double(c[2])
         << ',' << format_double(free_energy_f(c, beta)) << '\n';
    }
  }
}

}  // namespace potts
