#include "potts_ees/potts_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "potts_ees/error.hpp"

namespace potts {

namespace {

constexpr double kHessianTol = 1e-9;
constexpr int kMaxBisectionSteps = 200;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Stationarity residual along the family (s, a, ..., a), a = (1-s)/(q-1).
// Equals d/ds f on that family; zero at stationary points of f.
double one_major_residual(double s, double beta, int q) {
  const double a = (1.0 - s) / (q - 1);
  return beta * (s - a) - std::log(s / a);
}

double one_major_f(double s, double beta, int q) {
  return free_energy_f(asymmetric_point(s, 0, q), beta);
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

SymmetricStatus classify(std::span<const double> eigenvalues) {
  const double top = eigenvalues.back();
  if (top > kHessianTol) return SymmetricStatus::not_max;
  if (top >= -kHessianTol) return SymmetricStatus::degenerate;
  return SymmetricStatus::local_max;
}

// Bisection for a sign change of the one-major residual on [lo, hi].
double bisect_residual(double lo, double hi, double beta, int q) {
  double flo = one_major_residual(lo, beta, q);
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return mid;
    const double fmid = one_major_residual(mid, beta, q);
    if (fmid == 0.0) return mid;
    if ((fmid > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  if (hi - lo > 1e-13) {
    fail(ErrorKind::no_convergence,
         "stationary-point bisection did not converge after 200 steps");
  }
  return 0.5 * (lo + hi);
}

// Roots of the one-major residual on (0, 1), excluding s = 1/q.
std::vector<double> one_major_roots(double beta, int q) {
  constexpr int kGrid = 20000;
  const double sym = 1.0 / q;
  const double guard = 1e-7;
  std::vector<double> roots;
  auto scan = [&](double lo, double hi) {
    double prev_s = lo;
    double prev_r = one_major_residual(lo, beta, q);
    for (int i = 1; i <= kGrid; ++i) {
      const double s = lo + (hi - lo) * i / kGrid;
      const double r = one_major_residual(s, beta, q);
      if ((r > 0.0) != (prev_r > 0.0)) roots.push_back(bisect_residual(prev_s, s, beta, q));
      prev_s = s;
      prev_r = r;
    }
  };
  scan(1e-12, sym - guard);
  scan(sym + guard, std::nextafter(1.0, 0.0));
  return roots;
}

}  // namespace

void ModelParams::validate() const {
  require(n >= 1, "N must be >= 1");
  require(q >= 2, "q must be >= 2");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
}

ColorCount::ColorCount(std::vector<int> counts) : counts_(std::move(counts)) {
  require(counts_.size() >= 2, "ColorCount needs at least two colors");
  for (int c : counts_) {
    require(c >= 0, "ColorCount entries must be nonnegative");
    total_ += c;
  }
  require(total_ >= 1, "ColorCount must describe at least one spin");
}

std::int64_t ColorCount::sum_of_squares() const {
  std::int64_t s = 0;
  for (int c : counts_) s += static_cast<std::int64_t>(c) * c;
  return s;
}

std::vector<double> ColorCount::fractions() const {
  std::vector<double> m(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i)
    m[i] = static_cast<double>(counts_[i]) / total_;
  return m;
}

ColorCount magnetization(const SpinConfiguration& sigma, int q) {
  require(q >= 2, "q must be >= 2");
  require(!sigma.colors.empty(), "configuration must be nonempty");
  std::vector<int> counts(static_cast<std::size_t>(q), 0);
  for (int c : sigma.colors) {
    require(c >= 0 && c < q, "spin color out of range");
    ++counts[static_cast<std::size_t>(c)];
  }
  return ColorCount(std::move(counts));
}

double hamiltonian(const ColorCount& n) {
  return static_cast<double>(n.sum_of_squares()) / (2.0 * n.total());
}

double log_gibbs_weight(const ColorCount& n, double beta) {
  return beta * hamiltonian(n);
}

double free_energy_f(std::span<const double> c, double beta) {
  double f = 0.0;
  for (double ci : c) f += 0.5 * beta * ci * ci - xlogx(ci);
  return f;
}

std::vector<double> simplex_gradient(std::span<const double> c, double beta) {
  std::vector<double> g(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    g[i] = beta * c[i] - std::log(c[i]) - 1.0;
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
  for (double& gi : g) gi -= mean;
  return g;
}

std::vector<double> reduced_hessian_eigenvalues(std::span<const double> c,
                                                double beta) {
  const int k = static_cast<int>(c.size()) - 1;
  const double last = beta - 1.0 / c.back();
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(k, k, last);
  for (int i = 0; i < k; ++i) h(i, i) += beta - 1.0 / c[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double directional_second_derivative(double a, double beta) {
  require(a >= 0.0 && a <= 1.0, "direction parameter a must lie in [0,1]");
  // sum_i (beta - 1/c_i) (dc_i/dt)^2 at c = a0, with dc = (1, -a, -(1-a)).
  return -(6.0 - 2.0 * beta) * (a * a - a + 1.0);
}

double critical_beta(int q) {
  require(q >= 2, "q must be >= 2");
  if (q == 2) return 2.0;
  return 2.0 * (q - 1) * std::log(static_cast<double>(q - 1)) / (q - 2);
}

std::vector<double> symmetric_point(int q) {
  require(q >= 2, "q must be >= 2");
  return std::vector<double>(static_cast<std::size_t>(q), 1.0 / q);
}

std::vector<double> asymmetric_point(double major, int axis, int q) {
  std::vector<double> c(static_cast<std::size_t>(q), (1.0 - major) / (q - 1));
  c[static_cast<std::size_t>(axis)] = major;
  return c;
}

std::optional<double> asymmetric_maximum_coordinate(double beta, int q) {
  require(q >= 2, "q must be >= 2");
  constexpr int kGrid = 6000;
  const double lo = 1.0 / q;
  double best_s = 0.0;
  double best_r = 0.0;
  for (int i = 1; i < kGrid; ++i) {
    const double s = lo + (1.0 - lo) * i / kGrid;
    const double r = one_major_residual(s, beta, q);
    if (r > best_r) {
      best_r = r;
      best_s = s;
    }
  }
  if (best_r <= 0.0) return std::nullopt;
  const double hi = std::nextafter(1.0, 0.0);
  if (one_major_residual(hi, beta, q) >= 0.0) {
    fail(ErrorKind::no_convergence, "asymmetric maximum too close to a vertex");
  }
  return bisect_residual(best_s, hi, beta, q);
}

double critical_beta_numeric(int q) {
  require(q >= 3, "a first-order tie exists only for q >= 3");
  auto asymmetric_wins = [q](double beta) {
    const auto s = asymmetric_maximum_coordinate(beta, q);
    if (!s) return false;
    return one_major_f(*s, beta, q) > free_energy_f(symmetric_point(q), beta);
  };
  double lo = 1.0;
  double hi = static_cast<double>(q);
  if (asymmetric_wins(lo) || !asymmetric_wins(hi)) {
    fail(ErrorKind::no_convergence, "critical beta bracket is invalid");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (asymmetric_wins(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

// Projected gradient ascent from a grid point. Near a flat saddle ridge a
// coarse grid shows spurious discrete maxima, so a grid maximum only counts
// as missed if ascent from it settles away from every known stationary point.
bool ascends_to_known_point(const double (&start)[3], double beta, const MaximaReport& report) {
  const auto sym = symmetric_point(3);
  std::vector<double> c(start, start + 3);
  auto near_known = [&] {
    if (l1_distance(c, sym) <= 0.03) return true;
    for (const auto& m : report.maxima)
      if (l1_distance(c, m.point) <= 1e-3) return true;
    for (const auto& p : report.saddles)
      for (int axis = 0; axis < 3; ++axis)
        if (l1_distance(c, asymmetric_point(p[0], axis, 3)) <= 1e-3) return true;
    return false;
  };
  constexpr double kStep = 0.05;
  for (int it = 0; it < 200000; ++it) {
    if (near_known()) return true;
    double g[3];
    double mean = 0.0;
    for (int i = 0; i < 3; ++i) {
      g[i] = beta * c[i] - std::log(c[i]);
      mean += g[i] / 3.0;
    }
    double norm = 0.0;
    double scale = kStep;
    for (int i = 0; i < 3; ++i) {
      g[i] -= mean;
      norm += g[i] * g[i];
      if (g[i] < 0.0) scale = std::min(scale, 0.5 * c[i] / -g[i]);
    }
    if (std::sqrt(norm) < 1e-12) return near_known();
    // Backtracking keeps the ascent monotone where curvature is large.
    const double f0 = free_energy_f(c, beta);
    std::vector<double> next(3);
    for (int halvings = 0; halvings < 60; ++halvings, scale *= 0.5) {
      for (int i = 0; i < 3; ++i) next[i] = c[i] + scale * g[i];
      if (free_energy_f(next, beta) >= f0) break;
    }
    c = next;
  }
  return near_known();
}

}  // namespace

MaximaReport find_local_maxima(double beta, int q) {
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
  require(q >= 2, "q must be >= 2");

  MaximaReport report;
  report.beta = beta;
  report.q = q;

  const auto sym = symmetric_point(q);
  report.symmetric_status = classify(reduced_hessian_eigenvalues(sym, beta));
  if (report.symmetric_status == SymmetricStatus::local_max) {
    report.maxima.push_back({sym, free_energy_f(sym, beta), MaximumKind::symmetric});
  }

  for (double s : one_major_roots(beta, q)) {
    auto point = asymmetric_point(s, 0, q);
    const auto grad = simplex_gradient(point, beta);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    if (std::sqrt(norm) >= 1e-10) {
      fail(ErrorKind::no_convergence, "stationary point residual exceeds 1e-10");
    }
    const auto eig = reduced_hessian_eigenvalues(point, beta);
    if (classify(eig) != SymmetricStatus::local_max) {
      report.saddles.push_back(std::move(point));
      continue;
    }
    const double alpha = (1.0 - s) / (q - 1);
    if (!(s > 1.0 / beta && alpha < 1.0 / beta)) {
      fail(ErrorKind::no_convergence,
           "asymmetric maximum violates the alpha < 1/beta < alpha' structure");
    }
    if (!report.m_star || s > *report.m_star) report.m_star = s;
    for (int axis = 0; axis < q; ++axis) {
      auto p = asymmetric_point(s, axis, q);
      const double f = free_energy_f(p, beta);
      report.maxima.push_back({std::move(p), f, MaximumKind::asymmetric});
    }
  }

  if (q == 3) {
    // Grid cross-check: every discrete local maximum must sit next to a
    // stationary point found above.
    constexpr int kSteps = 200;
    auto f_at = [&](int i, int j) {
      const double c[3] = {double(i) / kSteps, double(j) / kSteps,
                           double(kSteps - i - j) / kSteps};
      return free_energy_f(c, beta);
    };
    static constexpr int kNeighbors[6][2] = {{1, -1}, {-1, 1}, {1, 0},
                                             {-1, 0}, {0, 1},  {0, -1}};
    for (int i = 1; i < kSteps; ++i) {
      for (int j = 1; i + j < kSteps; ++j) {
        const double here = f_at(i, j);
        bool is_max = true;
        for (const auto& d : kNeighbors) {
          const int ni = i + d[0];
          const int nj = j + d[1];
          if (ni < 0 || nj < 0 || ni + nj > kSteps) continue;
          if (f_at(ni, nj) > here) {
            is_max = false;
            break;
          }
        }
        if (!is_max) continue;
        ++report.grid_maxima_checked;
        const double c[3] = {double(i) / kSteps, double(j) / kSteps,
                             double(kSteps - i - j) / kSteps};
        if (!ascends_to_known_point(c, beta, report)) {
          fail(ErrorKind::no_convergence,
               "grid scan found a local maximum missed by the candidate search");
        }
      }
    }
  }
  return report;
}

double symmetric_basin_radius_l1(double beta) {
  constexpr int q = 3;
  const auto sym = symmetric_point(q);
  if (classify(reduced_hessian_eigenvalues(sym, beta)) != SymmetricStatus::local_max) return 0.0;
  constexpr int kAngles = 720;
  constexpr double kStep = 1e-4;
  double radius = 1.0;
  for (int a = 0; a < kAngles; ++a) {
    const double theta = 2.0 * std::numbers::pi * a / kAngles;
    double v[3] = {std::cos(theta) / std::sqrt(2.0) + std::sin(theta) / std::sqrt(6.0),
                   -std::cos(theta) / std::sqrt(2.0) + std::sin(theta) / std::sqrt(6.0),
                   -2.0 * std::sin(theta) / std::sqrt(6.0)};
    const double l1 = std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]);
    for (double& x : v) x /= l1;
    double t = kStep;
    for (; t < radius; t += kStep) {
      double slope = 0.0;
      bool inside = true;
      for (int i = 0; i < q; ++i) {
        const double c = sym[i] + t * v[i];
        if (c <= 0.0) inside = false;
        else slope += (beta * c - std::log(c)) * v[i];
      }
      if (!inside) break;
      if (slope >= 0.0) break;
    }
    radius = std::min(radius, t - kStep);
  }
  return radius;
}

const char* to_string(MaximumKind kind) {
  return kind == MaximumKind::symmetric ? "symmetric" : "asymmetric";
}

const char* to_string(SymmetricStatus status) {
  switch (status) {
    case SymmetricStatus::local_max: return "local_max";
    case SymmetricStatus::degenerate: return "degenerate";
    case SymmetricStatus::not_max: return "not_max";
  }
  return "unknown";
}

}  // namespace potts
