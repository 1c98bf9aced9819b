#include "potts_ees/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "potts_ees/error.hpp"
#include "potts_ees/samplers.hpp"

namespace potts {

namespace {

void require_matching(const LumpedKernel& kernel, const LumpedDistribution& pi) {
  require(kernel.size() == pi.size(), "kernel and distribution sizes differ");
}

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Off-diagonal neighbor lists with stationary edge weights pi(x) P(x,y).
struct EdgeWeights {
  std::vector<std::size_t> ptr;
  std::vector<std::uint32_t> to;
  std::vector<double> w;
};

EdgeWeights edge_weights(const LumpedKernel& kernel, std::span<const double> p) {
  EdgeWeights ew;
  ew.ptr.reserve(kernel.size() + 1);
  ew.ptr.push_back(0);
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    for (const auto& e : kernel.row(x)) {
      if (e.col == x || e.p == 0.0) continue;
      ew.to.push_back(e.col);
      ew.w.push_back(p[x] * e.p);
    }
    ew.ptr.push_back(ew.to.size());
  }
  return ew;
}

}  // namespace

SetConductance conductance_of_set(const LumpedKernel& kernel, const LumpedDistribution& pi,
                                  const std::vector<bool>& in_set) {
  require_matching(kernel, pi);
  require(in_set.size() == kernel.size(), "set mask has wrong length");
  SetConductance out;
  bool any = false;
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    if (!in_set[x]) continue;
    any = true;
    const double px = pi.probability(x);
    out.pi_s += px;
    for (const auto& e : kernel.row(x))
      if (!in_set[e.col]) out.flow += px * e.p;
  }
  require(any, "conductance needs a nonempty set");
  require(out.pi_s > 0.0, "set has zero stationary mass");
  out.phi = out.flow / out.pi_s;
  out.exceeds_half = out.pi_s > 0.5;
  return out;
}

void assert_reversible(const LumpedKernel& kernel, const LumpedDistribution& pi, double tol) {
  const double err = detailed_balance_error(kernel, pi);
  if (err > tol) {
    fail(ErrorKind::not_reversible,
         "kernel violates detailed balance (max error " + std::to_string(err) + ")");
  }
}

SpectralResult spectral_gap(const LumpedKernel& kernel, const LumpedDistribution& pi,
                            const GapOptions& options) {
  require_matching(kernel, pi);
  require(kernel.size() >= 2, "spectral gap needs at least two states");
  assert_reversible(kernel, pi);
  const std::size_t n = kernel.size();
  SpectralResult res;

  auto sym_entry = [&](std::size_t x, const KernelEntry& e) {
    return e.col == x ? e.p : std::sqrt(e.p * kernel.at(e.col, x));
  };

  if (n <= options.dense_limit) {
    res.method = GapMethod::dense;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x)
      for (const auto& e : kernel.row(x))
        s(static_cast<Eigen::Index>(x), e.col) = sym_entry(x, e);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        s, options.want_eigenvector ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) fail(ErrorKind::no_convergence, "dense eigensolver failed");
    const auto& ev = solver.eigenvalues();
    const auto last = static_cast<Eigen::Index>(n) - 1;
    if (std::abs(ev(last) - 1.0) > 1e-9) {
      fail(ErrorKind::no_convergence, "top eigenvalue of a stochastic kernel is not 1");
    }
    res.lambda2 = ev(last - 1);
    res.lambda_min = ev(0);
    res.gap = 1.0 - res.lambda2;
    if (options.want_eigenvector) {
      res.eigenfunction.resize(n);
      for (std::size_t x = 0; x < n; ++x)
        res.eigenfunction[x] = solver.eigenvectors()(static_cast<Eigen::Index>(x), last - 1) *
                               std::exp(-0.5 * pi.log_probability(x));
    }
    return res;
  }

  // Deflated power iteration. The kernels built here are lazy or
  // independence-type within bands, so their spectra are nonnegative and the
  // dominant eigenvalue of the deflated operator is lambda_2.
  res.method = GapMethod::power_iteration;
  res.lambda_min = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sval(kernel.nonzeros());
  std::vector<std::size_t> ptr(n + 1, 0);
  std::vector<std::uint32_t> col(kernel.nonzeros());
  {
    std::size_t k = 0;
    for (std::size_t x = 0; x < n; ++x) {
      for (const auto& e : kernel.row(x)) {
        sval[k] = sym_entry(x, e);
        col[k] = e.col;
        ++k;
      }
      ptr[x + 1] = k;
    }
  }
  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) u(static_cast<Eigen::Index>(x)) = std::exp(0.5 * pi.log_probability(x));
  u.normalize();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  Rng rng(0x5eed);
  for (auto& c : v) c = rng.uniform() - 0.5;
  v -= u.dot(v) * u;
  v.normalize();
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  double lambda = 0.0;
  int stable = 0;
  for (std::uint64_t it = 1; it <= options.max_iterations; ++it) {
    for (std::size_t x = 0; x < n; ++x) {
      double acc = 0.0;
      for (std::size_t k = ptr[x]; k < ptr[x + 1]; ++k) acc += sval[k] * v(col[k]);
      w(static_cast<Eigen::Index>(x)) = acc;
    }
    w -= u.dot(w) * u;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) {
      lambda = 0.0;
      res.iterations = it;
      break;
    }
    v = w / norm;
    stable = std::abs(next - lambda) < options.tolerance ? stable + 1 : 0;
    lambda = next;
    res.iterations = it;
    if (stable >= 20) break;
    if (it == options.max_iterations) {
      fail(ErrorKind::no_convergence, "power iteration for lambda_2 did not converge");
    }
  }
  res.lambda2 = lambda;
  res.gap = 1.0 - lambda;
  if (options.want_eigenvector) {
    res.eigenfunction.resize(n);
    for (std::size_t x = 0; x < n; ++x)
      res.eigenfunction[x] = v(static_cast<Eigen::Index>(x)) * std::exp(-0.5 * pi.log_probability(x));
  }
  return res;
}

std::vector<bool> lattice_ball(const SimplexLattice& lattice, std::span<const double> center,
                               double radius) {
  std::vector<bool> mask(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i)
    mask[i] = lattice.l1_distance(i, center) <= radius + 1e-12;
  return mask;
}

double ball_cut_ratio(const LumpedDistribution& pi, std::span<const double> center,
                      double epsilon, double delta) {
  require(pi.lattice() != nullptr, "ball_cut_ratio needs a lattice distribution");
  require(delta > 0.0 && delta < epsilon, "need 0 < delta < epsilon");
  const auto& lattice = *pi.lattice();
  std::vector<double> ball;
  std::vector<double> annulus;
  std::size_t inner = 0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const double d = lattice.l1_distance(i, center);
    if (d > epsilon + 1e-12) continue;
    ball.push_back(pi.log_weights()[i]);
    if (d > delta + 1e-12) annulus.push_back(pi.log_weights()[i]);
    else ++inner;
  }
  if (inner == 0) {
    fail(ErrorKind::out_of_range, "inner ball is empty; N is too small for this delta");
  }
  if (annulus.empty()) return 0.0;
  return std::exp(log_sum_exp(annulus) - log_sum_exp(ball));
}

double max_square_norm_jump(const LumpedKernel& kernel) {
  require(kernel.lattice() != nullptr, "kernel has no lattice");
  const auto& lattice = *kernel.lattice();
  const double n2 = static_cast<double>(lattice.n()) * lattice.n();
  double worst = 0.0;
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    for (const auto& e : kernel.row(x)) {
      if (e.col == x || e.p <= 0.0) continue;
      const auto diff = std::llabs(lattice.sum_of_squares(x) - lattice.sum_of_squares(e.col));
      worst = std::max(worst, static_cast<double>(diff) / n2);
    }
  }
  return worst;
}

LiftedCutBound lifted_cut_conductance_bound(const LumpedDistribution& pi_top,
                                            const EnergyBands& bands, double beta,
                                            double epsilon, double delta) {
  require(pi_top.lattice() != nullptr, "distribution has no lattice");
  require(delta > 0.0 && delta < epsilon, "need 0 < delta < epsilon");
  const auto& lattice_ptr = pi_top.lattice();
  const auto& lattice = *lattice_ptr;
  const auto center = symmetric_point(lattice.q());
  const double beta_below = beta * (bands.m() - 1) / bands.m();
  const auto jump = ee_jump_kernel_m0(lattice_ptr, bands, beta, beta_below);
  const auto move = metropolis_kernel(lattice_ptr, beta);

  std::vector<bool> reach = lattice_ball(lattice, center, delta);
  LiftedCutBound out;
  out.inner_classes = static_cast<std::size_t>(std::count(reach.begin(), reach.end(), true));
  auto expand = [&](const LumpedKernel& k) {
    std::vector<bool> next = reach;
    for (std::size_t x = 0; x < k.size(); ++x) {
      if (!reach[x]) continue;
      for (const auto& e : k.row(x))
        if (e.p > 0.0) next[e.col] = true;
    }
    reach = std::move(next);
  };
  expand(jump);
  expand(move);
  expand(jump);
  for (std::size_t x = 0; x < lattice.size(); ++x) {
    if (!reach[x]) continue;
    ++out.reachable_classes;
    out.max_reach_distance = std::max(out.max_reach_distance, lattice.l1_distance(x, center));
  }
  if (out.max_reach_distance > epsilon + 1e-12) {
    fail(ErrorKind::premise_failed,
         "jump-move-jump from B_delta reaches l1 distance " +
             std::to_string(out.max_reach_distance) + " > epsilon at N=" +
             std::to_string(lattice.n()) + "; increase N");
  }
  out.bound = ball_cut_ratio(pi_top, center, epsilon, delta);
  return out;
}

ExponentialFit fit_exponential_rate(std::span<const double> sizes,
                                    std::span<const double> values) {
  require(sizes.size() == values.size(), "sizes and values differ in length");
  require(sizes.size() >= 4, "exponential fit needs at least four points");
  const auto n = static_cast<double>(sizes.size());
  std::vector<double> y(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i] > 0.0 && std::isfinite(values[i]), "fit values must be positive");
    y[i] = std::log(values[i]);
  }
  const double xm = std::accumulate(sizes.begin(), sizes.end(), 0.0) / n;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (sizes[i] - xm) * (sizes[i] - xm);
    sxy += (sizes[i] - xm) * (y[i] - ym);
    syy += (y[i] - ym) * (y[i] - ym);
  }
  require(sxx > 0.0, "fit needs at least two distinct sizes");
  const double slope = sxy / sxx;
  ExponentialFit fit;
  fit.rate = -slope;
  fit.intercept = ym - slope * xm;
  double ssres = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - (fit.intercept + slope * sizes[i]);
    ssres += r * r;
  }
  fit.r_squared = syy > 1e-300 ? 1.0 - ssres / syy : 1.0;
  fit.rate_stderr = std::sqrt(ssres / (n - 2.0) / sxx);
  return fit;
}

FamilyConductance family_conductance(const LumpedKernel& kernel, const LumpedDistribution& pi,
                                     const std::vector<std::vector<double>>& centers,
                                     std::span<const double> eigenfunction) {
  require_matching(kernel, pi);
  assert_reversible(kernel, pi);
  const std::size_t n = kernel.size();
  const auto p = pi.probabilities();
  const auto ew = edge_weights(kernel, p);

  FamilyConductance out;
  out.phi = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> best_order;
  std::size_t best_prefix = 0;

  auto sweep = [&](std::vector<std::uint32_t> order, std::span<const double> key,
                   const std::string& family) {
    std::vector<bool> in(n, false);
    long double flow = 0.0L;
    long double mass = 0.0L;
    for (std::size_t idx = 0; idx + 1 < n; ++idx) {
      const std::uint32_t x = order[idx];
      for (std::size_t k = ew.ptr[x]; k < ew.ptr[x + 1]; ++k)
        flow += in[ew.to[k]] ? -static_cast<long double>(ew.w[k]) : ew.w[k];
      mass += p[x];
      in[x] = true;
      if (nearly_equal(key[order[idx + 1]], key[x])) continue;
      const long double side = mass <= 0.5L ? mass : 1.0L - mass;
      if (side <= 0.0L) continue;
      ++out.cuts_examined;
      const double phi = static_cast<double>(std::max(flow, 0.0L) / side);
      if (phi < out.phi) {
        out.phi = phi;
        out.best = {family, key[x], phi, static_cast<double>(side)};
        best_order = order;
        best_prefix = idx + 1;
      }
    }
  };

  auto sorted_by = [&](std::span<const double> key, bool ascending) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return ascending ? key[a] < key[b] : key[a] > key[b];
    });
    return order;
  };

  if (pi.lattice()) {
    for (std::size_t c = 0; c < centers.size(); ++c) {
      std::vector<double> dist(n);
      for (std::size_t i = 0; i < n; ++i) dist[i] = pi.lattice()->l1_distance(i, centers[c]);
      sweep(sorted_by(dist, true), dist, "ball" + std::to_string(c));
    }
  }
  std::vector<double> logp(pi.log_weights().begin(), pi.log_weights().end());
  sweep(sorted_by(logp, false), logp, "pi_superlevel");
  sweep(sorted_by(logp, true), logp, "pi_sublevel");
  if (!eigenfunction.empty()) {
    require(eigenfunction.size() == n, "eigenfunction has wrong length");
    sweep(sorted_by(eigenfunction, true), eigenfunction, "eigen_ascending");
    sweep(sorted_by(eigenfunction, false), eigenfunction, "eigen_descending");
  }
  require(out.cuts_examined > 0, "no admissible cut in the family");

  std::vector<bool> set(n, false);
  for (std::size_t i = 0; i < best_prefix; ++i) set[best_order[i]] = true;
  auto exact = conductance_of_set(kernel, pi, set);
  if (exact.pi_s > 0.5) {
    set.flip();
    exact = conductance_of_set(kernel, pi, set);
  }
  out.phi = exact.phi;
  out.best.phi = exact.phi;
  out.best.pi_s = exact.pi_s;
  out.best_set = std::move(set);
  return out;
}

ExhaustiveConductance exhaustive_conductance(const LumpedKernel& kernel,
                                             const LumpedDistribution& pi) {
  require_matching(kernel, pi);
  const std::size_t n = kernel.size();
  require(n >= 2 && n <= 30, "exhaustive conductance supports 2..30 states");
  assert_reversible(kernel, pi);
  const auto p = pi.probabilities();
  const auto ew = edge_weights(kernel, p);

  ExhaustiveConductance out;
  out.phi = std::numeric_limits<double>::infinity();
  std::uint64_t mask = 0;
  long double flow = 0.0L;
  long double mass = 0.0L;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t i = 1; i < total; ++i) {
    const int x = std::countr_zero(i);
    const std::uint64_t bit = std::uint64_t{1} << x;
    long double delta = 0.0L;
    for (std::size_t k = ew.ptr[static_cast<std::size_t>(x)]; k < ew.ptr[static_cast<std::size_t>(x) + 1]; ++k)
      delta += (mask >> ew.to[k] & 1u) ? -static_cast<long double>(ew.w[k]) : ew.w[k];
    if (mask & bit) {
      mask ^= bit;
      flow -= delta;
      mass -= p[static_cast<std::size_t>(x)];
    } else {
      mask |= bit;
      flow += delta;
      mass += p[static_cast<std::size_t>(x)];
    }
    if (mask == 0 || mass > 0.5L + 1e-12L || mass <= 0.0L) continue;
    const double phi = static_cast<double>(std::max(flow, 0.0L) / mass);
    if (phi < out.phi) {
      out.phi = phi;
      out.best_mask = mask;
    }
  }
  require(std::isfinite(out.phi), "no subset with pi(S) <= 1/2");
  std::vector<bool> set(n);
  for (std::size_t x = 0; x < n; ++x) set[x] = (out.best_mask >> x) & 1u;
  const auto exact = conductance_of_set(kernel, pi, set);
  out.phi = exact.phi;
  out.pi_s = exact.pi_s;
  return out;
}

const char* to_string(GapMethod m) {
  return m == GapMethod::dense ? "dense" : "power_iteration";
}

}  // namespace potts
