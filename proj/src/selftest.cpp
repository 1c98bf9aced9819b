#include "potts_ees/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "potts_ees/error.hpp"
#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/potts_model.hpp"
#include "potts_ees/spectral.hpp"
#include "potts_ees/spin_reference.hpp"

namespace potts {

namespace {

struct NamedKernel {
  std::string label;
  LumpedKernel kernel;
  LumpedDistribution pi;
};

double max_entry_diff(const reference::DenseMatrix& dense, const LumpedKernel& kernel) {
  double worst = 0.0;
  for (std::size_t i = 0; i < dense.dim; ++i)
    for (std::size_t j = 0; j < dense.dim; ++j)
      worst = std::max(worst, std::abs(dense(i, j) - kernel.at(i, j)));
  return worst;
}

template <typename Fn>
SelftestCheck run_check(const std::string& name, Fn&& body) {
  SelftestCheck check{name, false, {}};
  try {
    std::ostringstream detail;
    check.passed = body(detail);
    check.detail = detail.str();
  } catch (const std::exception& e) {
    check.passed = false;
    check.detail = std::string("exception: ") + e.what();
  }
  return check;
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestOptions& options) {
  std::vector<SelftestCheck> checks;

  std::vector<NamedKernel> kernels;
  for (int n : {4, 6}) {
    auto lattice = enumerate_lattice(n, 3);
    for (double beta : {0.0, 2.0, 2.9}) {
      kernels.push_back({"metropolis N=" + std::to_string(n) + " beta=" + std::to_string(beta),
                         metropolis_kernel(lattice, beta), stationary_distribution(lattice, beta)});
    }
    const auto bands = EnergyBands::with_density(n, 3, 1.0);
    const TemperatureLadder ladder(2.9, bands.m());
    for (int level = 1; level <= bands.m(); ++level) {
      kernels.push_back({"ee_jump N=" + std::to_string(n) + " level=" + std::to_string(level),
                         ee_jump_kernel_m0(lattice, bands, ladder.beta(level), ladder.beta(level - 1)),
                         // Uniform-over-band proposals make the jump reversible w.r.t. the
                         // Gibbs law at beta_hi - beta_lo, not at beta_hi.
                         stationary_distribution(lattice, ladder.beta(level) - ladder.beta(level - 1))});
    }
  }
  if (options.inject_row_fault) {
    kernels.front().kernel.corrupt_entry(1, 0, kernels.front().kernel.row(1)[0].p + 0.25);
  }

  checks.push_back(run_check("row-stochasticity", [&](std::ostream& out) {
    for (const auto& k : kernels) {
      const auto rep = check_stochastic(k.kernel);
      if (rep.max_row_error > 1e-12 || rep.min_entry < 0.0 || rep.max_entry > 1.0) {
        out << k.label << ": row " << rep.worst_row << " off by " << rep.max_row_error;
        return false;
      }
    }
    out << kernels.size() << " kernels";
    return true;
  }));

  checks.push_back(run_check("stationary-oracle", [&](std::ostream& out) {
    double worst = 0.0;
    for (double beta : {0.0, 2.9}) {
      auto lattice = enumerate_lattice(6, 3);
      const auto pi = stationary_distribution(lattice, beta);
      const auto brute = reference::class_probabilities(*lattice, beta);
      double tv = 0.0;
      for (std::size_t i = 0; i < brute.size(); ++i) tv += std::abs(brute[i] - pi.probability(i));
      worst = std::max(worst, 0.5 * tv);
    }
    out << "max TV " << worst;
    return worst < 1e-12;
  }));

  checks.push_back(run_check("lumpability-metropolis", [&](std::ostream& out) {
    auto lattice = enumerate_lattice(4, 3);
    const auto proj = reference::project(reference::spin_metropolis_matrix(4, 3, 2.9), *lattice);
    const double diff = max_entry_diff(proj.lumped, metropolis_kernel(lattice, 2.9));
    out << "entry diff " << diff << ", class spread " << proj.lumpability_error;
    return diff < 1e-12 && proj.lumpability_error < 1e-12;
  }));

  checks.push_back(run_check("lumpability-ee-jump", [&](std::ostream& out) {
    auto lattice = enumerate_lattice(4, 3);
    const auto bands = EnergyBands::with_density(4, 3, 1.0);
    const double hi = 2.9;
    const double lo = 2.9 * 3.0 / 4.0;
    const auto proj =
        reference::project(reference::spin_ee_jump_matrix_m0(4, 3, bands, hi, lo), *lattice);
    const double diff = max_entry_diff(proj.lumped, ee_jump_kernel_m0(lattice, bands, hi, lo));
    out << "entry diff " << diff << ", class spread " << proj.lumpability_error;
    return diff < 1e-12 && proj.lumpability_error < 1e-12;
  }));

  checks.push_back(run_check("detailed-balance", [&](std::ostream& out) {
    double worst = 0.0;
    for (const auto& k : kernels) worst = std::max(worst, detailed_balance_error(k.kernel, k.pi));
    out << "max violation " << worst;
    return worst <= 1e-12;
  }));

  checks.push_back(run_check("band-locality", [&](std::ostream& out) {
    const int n = 30;
    auto lattice = enumerate_lattice(n, 3);
    const auto bands = EnergyBands::with_density(n, 3, 1.0);
    const TemperatureLadder ladder(2.9, bands.m());
    const double bound = 2.0 / (3.0 * 1.0 * n);
    double worst = 0.0;
    for (int level = 1; level <= bands.m(); ++level)
      worst = std::max(worst, max_square_norm_jump(
                                  ee_jump_kernel_m0(lattice, bands, ladder.beta(level),
                                                    ladder.beta(level - 1))));
    out << "max |dm^2| " << worst << " vs bound " << bound;
    return worst <= bound + 1e-15;
  }));

  checks.push_back(run_check("cheeger", [&](std::ostream& out) {
    bool ok = true;
    for (int n : {4, 6}) {
      auto lattice = enumerate_lattice(n, 3);
      for (double beta : {2.0, 2.9}) {
        const auto k = metropolis_kernel(lattice, beta);
        const auto pi = stationary_distribution(lattice, beta);
        const double gap = spectral_gap(k, pi).gap;
        const double phi = exhaustive_conductance(k, pi).phi;
        const bool row_ok = phi * phi / 2.0 <= gap && gap <= 2.0 * phi;
        out << "N=" << n << " beta=" << beta << " gap=" << gap << " phi=" << phi << "; ";
        ok = ok && row_ok;
      }
    }
    return ok;
  }));

  checks.push_back(run_check("free-energy-structure", [&](std::ostream& out) {
    const auto hot = find_local_maxima(2.0);
    const auto warm = find_local_maxima(2.9);
    const double bc = critical_beta(3);
    const auto at_c = asymmetric_maximum_coordinate(bc, 3);
    const double tie =
        at_c ? std::abs(free_energy_f(symmetric_point(3), bc) -
                        free_energy_f(asymmetric_point(*at_c, 0, 3), bc))
             : 1.0;
    out << "maxima(2.0)=" << hot.maxima.size() << " maxima(2.9)=" << warm.maxima.size()
        << " tie=" << tie;
    return hot.maxima.size() == 1 && warm.maxima.size() == 4 && tie < 1e-10 &&
           std::abs(*at_c - 2.0 / 3.0) < 1e-8;
  }));

  return checks;
}

}  // namespace potts
