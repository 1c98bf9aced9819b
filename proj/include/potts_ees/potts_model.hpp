#pragma once

// Mean-field Potts model: configurations, order parameter, energy, Gibbs
// log-weights and the large-N free-energy landscape f on the simplex.
//
// Colors are stored 0-based (0..q-1). Energies follow the "no minus sign"
// convention: the Gibbs weight of a configuration is exp(+beta * H).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace potts {

struct ModelParams {
  int n = 0;
  int q = 3;
  double beta = 0.0;

  void validate() const;
};

// Microscopic state sigma: one color per spin.
struct SpinConfiguration {
  std::vector<int> colors;

  int size() const { return static_cast<int>(colors.size()); }
};

// Occupation numbers (n_1, ..., n_q) of a configuration; the lumped state.
class ColorCount {
 public:
  ColorCount() = default;
  explicit ColorCount(std::vector<int> counts);

  int q() const { return static_cast<int>(counts_.size()); }
  int total() const { return total_; }
  int operator[](int c) const { return counts_[static_cast<std::size_t>(c)]; }
  std::span<const int> counts() const { return counts_; }

  // Integer sum of n_c^2; H = sum_sq / (2N).
  std::int64_t sum_of_squares() const;

  // Order parameter m = n / N.
  std::vector<double> fractions() const;

  friend bool operator==(const ColorCount&, const ColorCount&) = default;

 private:
  std::vector<int> counts_;
  int total_ = 0;
};

ColorCount magnetization(const SpinConfiguration& sigma, int q);

double hamiltonian(const ColorCount& n);

double log_gibbs_weight(const ColorCount& n, double beta);

// f(c) = sum_i (beta/2 c_i^2 - c_i log c_i), with 0 log 0 = 0.
double free_energy_f(std::span<const double> c, double beta);

// Gradient of f projected onto the tangent space of the simplex.
std::vector<double> simplex_gradient(std::span<const double> c, double beta);

// Eigenvalues of the Hessian of f in the chart (c_1..c_{q-1}), ascending.
std::vector<double> reduced_hessian_eigenvalues(std::span<const double> c,
                                                double beta);

// Second derivative at t=0 of t -> f(1/3+t, 1/3-a t, 1/3-(1-a) t) (q = 3):
// -(6 - 2 beta)(a^2 - a + 1).
double directional_second_derivative(double a, double beta);

// Closed form 2(q-1)log(q-1)/(q-2) for q >= 3; q = 2 returns its limit 2,
// the point where the balanced state of the Curie-Weiss model loses
// stability.
double critical_beta(int q);

// beta at which the symmetric point and the asymmetric maximum of f tie,
// located by bisection to 1e-12 in beta. Independent of critical_beta.
double critical_beta_numeric(int q);

// Largest coordinate of the asymmetric local maximum of f, if one exists.
std::optional<double> asymmetric_maximum_coordinate(double beta, int q);

std::vector<double> symmetric_point(int q);

// Point with `major` on coordinate `axis` and the remaining mass spread evenly.
std::vector<double> asymmetric_point(double major, int axis, int q);

enum class MaximumKind { symmetric, asymmetric };

enum class SymmetricStatus {
  local_max,   // reduced Hessian negative definite
  degenerate,  // some Hessian eigenvalue within tolerance of zero
  not_max,
};

struct LocalMaximum {
  std::vector<double> point;
  double f = 0.0;
  MaximumKind kind = MaximumKind::symmetric;
};

struct MaximaReport {
  double beta = 0.0;
  int q = 3;
  std::vector<LocalMaximum> maxima;
  std::optional<double> m_star;
  SymmetricStatus symmetric_status = SymmetricStatus::local_max;
  // Interior stationary points of the form (a', a, ..., a) that are not maxima.
  std::vector<std::vector<double>> saddles;
  int grid_maxima_checked = 0;
};

// All interior local maxima of f. Candidates are the symmetric point and the
// one-major-coordinate family; a 1/200 grid scan (q = 3) must not reveal any
// other maximum. Throws Error(no_convergence) on a root-finding or
// cross-check failure.
MaximaReport find_local_maxima(double beta, int q = 3);

// Largest l1 radius around the symmetric point inside which f decreases
// strictly along every sampled ray (q = 3, 720 directions). Returns 0 when
// the symmetric point is not a strict local maximum.
double symmetric_basin_radius_l1(double beta);

const char* to_string(MaximumKind kind);
const char* to_string(SymmetricStatus status);

}  // namespace potts
