#pragma once

// Conductance and spectral-gap computations for reversible lumped kernels.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "potts_ees/lumped_chain.hpp"

namespace potts {

struct SetConductance {
  double phi = 0.0;    // boundary flow / pi(S)
  double pi_s = 0.0;   // pi(S)
  double flow = 0.0;   // sum_{x in S, y not in S} pi(x) P(x,y)
  bool exceeds_half = false;  // pi(S) > 1/2: outside the range of the minimum
};

// S is given as a membership mask of length kernel.size().
SetConductance conductance_of_set(const LumpedKernel& kernel, const LumpedDistribution& pi,
                                  const std::vector<bool>& in_set);

// Throws Error(not_reversible) when some stored entry violates detailed
// balance by more than `tol`.
void assert_reversible(const LumpedKernel& kernel, const LumpedDistribution& pi,
                       double tol = 1e-12);

enum class GapMethod { dense, power_iteration };

struct GapOptions {
  std::size_t dense_limit = 5000;
  double tolerance = 1e-13;
  std::uint64_t max_iterations = 2'000'000;
  bool want_eigenvector = false;
};

struct SpectralResult {
  double gap = 0.0;       // 1 - lambda_2
  double lambda2 = 1.0;
  double lambda_min = 0.0;  // dense method only; NaN otherwise
  GapMethod method = GapMethod::dense;
  std::uint64_t iterations = 0;
  // Second eigenvector divided by sqrt(pi) (a function on states), if requested.
  std::vector<double> eigenfunction;
};

// Spectral gap of the pi-symmetrized kernel, whose entries are
// sqrt(P(x,y) P(y,x)). Dense symmetric eigensolve up to dense_limit states,
// deflated power iteration above.
SpectralResult spectral_gap(const LumpedKernel& kernel, const LumpedDistribution& pi,
                            const GapOptions& options = {});

// Closed l1 ball {n : ||n/N - center||_1 <= radius} as a membership mask.
std::vector<bool> lattice_ball(const SimplexLattice& lattice, std::span<const double> center,
                               double radius);

// pi(B_eps \ B_delta) / pi(B_eps) for closed l1 balls around `center`.
double ball_cut_ratio(const LumpedDistribution& pi, std::span<const double> center,
                      double epsilon, double delta);

struct LiftedCutBound {
  double bound = 0.0;
  std::size_t inner_classes = 0;
  std::size_t reachable_classes = 0;
  double max_reach_distance = 0.0;
};

// Conductance bound for the lifted cut {x : x_M in B_eps(a0)} of the joint
// chain with the best-case record. Verifies that jump, Metropolis move, jump
// (along the supports of the top-level kernels) cannot leave B_eps from
// B_delta, then returns ball_cut_ratio of the top-temperature law. Throws
// Error(premise_failed) when the reachability premise fails.
LiftedCutBound lifted_cut_conductance_bound(const LumpedDistribution& pi_top,
                                            const EnergyBands& bands, double beta,
                                            double epsilon, double delta);

// Largest | ||m||_2^2 - ||m'||_2^2 | over off-diagonal kernel entries.
double max_square_norm_jump(const LumpedKernel& kernel);

struct ExponentialFit {
  double rate = 0.0;       // log(value) = intercept - rate * N
  double intercept = 0.0;
  double r_squared = 0.0;
  double rate_stderr = 0.0;
};

ExponentialFit fit_exponential_rate(std::span<const double> sizes,
                                    std::span<const double> values);

struct CutCandidate {
  std::string family;
  double parameter = 0.0;  // radius, threshold rank, etc.
  double phi = 0.0;
  double pi_s = 0.0;       // mass of the side with pi <= 1/2
};

struct FamilyConductance {
  double phi = 0.0;
  CutCandidate best;
  std::size_t cuts_examined = 0;
  std::vector<bool> best_set;  // side with mass <= 1/2
};

// Minimum of Phi over nested l1 balls around every center, superlevel and
// sublevel sets of pi, and (when given) sweep sets of an eigenfunction.
// Each prefix set S contributes flow / min(pi(S), 1 - pi(S)), evaluated on
// the side whose mass is at most 1/2.
FamilyConductance family_conductance(const LumpedKernel& kernel, const LumpedDistribution& pi,
                                     const std::vector<std::vector<double>>& centers,
                                     std::span<const double> eigenfunction = {});

// Exact conductance over all nonempty subsets with pi(S) <= 1/2, by Gray-code
// enumeration. Limited to 30 states.
struct ExhaustiveConductance {
  double phi = 0.0;
  std::uint64_t best_mask = 0;
  double pi_s = 0.0;
};
ExhaustiveConductance exhaustive_conductance(const LumpedKernel& kernel,
                                             const LumpedDistribution& pi);

const char* to_string(GapMethod m);

}  // namespace potts
