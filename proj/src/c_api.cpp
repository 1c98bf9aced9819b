#include "potts_ees/potts_ees.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>

#include "potts_ees/error.hpp"
#include "potts_ees/export.hpp"
#include "potts_ees/lumped_chain.hpp"
#include "potts_ees/potts_model.hpp"
#include "potts_ees/samplers.hpp"
#include "potts_ees/selftest.hpp"
#include "potts_ees/spectral.hpp"
#include "potts_ees/spin_reference.hpp"

#ifndef POTTS_EES_VERSION_STRING
#define POTTS_EES_VERSION_STRING "unknown"
#endif

struct potts_maxima {
  potts::MaximaReport report;
};

struct potts_lattice {
  potts::LatticePtr ptr;
};

struct potts_distribution {
  potts::LumpedDistribution dist;
};

struct potts_kernel {
  potts::LumpedKernel kernel;
};

struct potts_ees_setup {
  std::shared_ptr<const potts::EesSetup> ptr;
};

struct potts_system {
  potts::ReplicaSystem system;
};

namespace {

thread_local std::string g_last_error;

potts_status status_of(potts::ErrorKind kind) {
  switch (kind) {
    case potts::ErrorKind::invalid_argument: return POTTS_ERR_INVALID_ARGUMENT;
    case potts::ErrorKind::out_of_range: return POTTS_ERR_OUT_OF_RANGE;
    case potts::ErrorKind::not_reversible: return POTTS_ERR_NOT_REVERSIBLE;
    case potts::ErrorKind::no_convergence: return POTTS_ERR_NO_CONVERGENCE;
    case potts::ErrorKind::premise_failed: return POTTS_ERR_PREMISE;
    case potts::ErrorKind::io: return POTTS_ERR_IO;
  }
  return POTTS_ERR_INTERNAL;
}

// Runs body, translating exceptions into status codes.
template <typename Fn>
potts_status guard(Fn&& body) {
  try {
    g_last_error.clear();
    body();
    return POTTS_OK;
  } catch (const potts::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return POTTS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return POTTS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return POTTS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) potts::fail(potts::ErrorKind::invalid_argument, std::string(what) + " is null");
}

template <typename Writer>
void write_file(const char* path, Writer&& writer) {
  need(path, "path");
  std::ofstream os(path, std::ios::binary);
  if (!os) potts::fail(potts::ErrorKind::io, std::string("cannot open ") + path);
  writer(os);
  os.flush();
  if (!os) potts::fail(potts::ErrorKind::io, std::string("write failed: ") + path);
}

const potts::LatticePtr& lattice_of(const potts_distribution* d) {
  need(d, "distribution");
  const auto& l = d->dist.lattice();
  if (!l) potts::fail(potts::ErrorKind::invalid_argument, "distribution has no lattice");
  return l;
}

void check_pair(const potts_kernel* k, const potts_distribution* d) {
  need(k, "kernel");
  need(d, "distribution");
  potts::require(k->kernel.size() == d->dist.size(), "kernel and distribution sizes differ");
}

}  // namespace

extern "C" {

const char* potts_version(void) { return POTTS_EES_VERSION_STRING; }

const char* potts_last_error(void) { return g_last_error.c_str(); }

const char* potts_status_name(potts_status status) {
  switch (status) {
    case POTTS_OK: return "ok";
    case POTTS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case POTTS_ERR_OUT_OF_RANGE: return "out_of_range";
    case POTTS_ERR_NOT_REVERSIBLE: return "not_reversible";
    case POTTS_ERR_NO_CONVERGENCE: return "no_convergence";
    case POTTS_ERR_PREMISE: return "premise_failed";
    case POTTS_ERR_IO: return "io";
    case POTTS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

// ---- model

potts_status potts_hamiltonian(const int* counts, int q, double* energy) {
  return guard([&] {
    need(counts, "counts");
    need(energy, "energy");
    potts::require(q >= 2, "q must be >= 2");
    *energy = potts::hamiltonian(potts::ColorCount(std::vector<int>(counts, counts + q)));
  });
}

potts_status potts_free_energy(const double* c, int q, double beta, double* f) {
  return guard([&] {
    need(c, "c");
    need(f, "f");
    potts::require(q >= 2, "q must be >= 2");
    *f = potts::free_energy_f(std::span<const double>(c, static_cast<std::size_t>(q)), beta);
  });
}

potts_status potts_directional_second_derivative(double a, double beta, double* out) {
  return guard([&] {
    need(out, "out");
    *out = potts::directional_second_derivative(a, beta);
  });
}

potts_status potts_critical_beta(int q, double* out) {
  return guard([&] {
    need(out, "out");
    *out = potts::critical_beta(q);
  });
}

potts_status potts_critical_beta_numeric(int q, double* out) {
  return guard([&] {
    need(out, "out");
    *out = potts::critical_beta_numeric(q);
  });
}

potts_status potts_symmetric_basin_radius(double beta, double* out) {
  return guard([&] {
    need(out, "out");
    *out = potts::symmetric_basin_radius_l1(beta);
  });
}

potts_status potts_maxima_find(double beta, int q, potts_maxima** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    *out = new potts_maxima{potts::find_local_maxima(beta, q)};
  });
}

void potts_maxima_free(potts_maxima* report) { delete report; }

size_t potts_maxima_count(const potts_maxima* report) {
  return report ? report->report.maxima.size() : 0;
}

potts_status potts_maxima_get(const potts_maxima* report, size_t i, double* coords, double* f,
                              int* is_symmetric) {
  return guard([&] {
    need(report, "report");
    if (i >= report->report.maxima.size())
      potts::fail(potts::ErrorKind::out_of_range, "maximum index out of range");
    const auto& m = report->report.maxima[i];
    if (coords) std::copy(m.point.begin(), m.point.end(), coords);
    if (f) *f = m.f;
    if (is_symmetric) *is_symmetric = m.kind == potts::MaximumKind::symmetric ? 1 : 0;
  });
}

potts_symmetric_status potts_maxima_symmetric_status(const potts_maxima* report) {
  if (!report) return POTTS_SYMMETRIC_NOT_MAX;
  switch (report->report.symmetric_status) {
    case potts::SymmetricStatus::local_max: return POTTS_SYMMETRIC_LOCAL_MAX;
    case potts::SymmetricStatus::degenerate: return POTTS_SYMMETRIC_DEGENERATE;
    case potts::SymmetricStatus::not_max: return POTTS_SYMMETRIC_NOT_MAX;
  }
  return POTTS_SYMMETRIC_NOT_MAX;
}

int potts_maxima_m_star(const potts_maxima* report, double* m_star) {
  if (!report || !report->report.m_star) return 0;
  if (m_star) *m_star = *report->report.m_star;
  return 1;
}

potts_status potts_write_landscape_csv(const char* path, double beta, int steps) {
  return guard([&] {
    potts::require(steps >= 1, "steps must be >= 1");
    write_file(path, [&](std::ostream& os) { potts::write_landscape_csv(os, beta, steps); });
  });
}

// ---- lattice, distributions, kernels

potts_status potts_lattice_create(int n, int q, potts_lattice** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    *out = new potts_lattice{potts::enumerate_lattice(n, q)};
  });
}

void potts_lattice_free(potts_lattice* lattice) { delete lattice; }

size_t potts_lattice_size(const potts_lattice* lattice) {
  return lattice ? lattice->ptr->size() : 0;
}

int potts_lattice_n(const potts_lattice* lattice) { return lattice ? lattice->ptr->n() : 0; }

int potts_lattice_q(const potts_lattice* lattice) { return lattice ? lattice->ptr->q() : 0; }

potts_status potts_lattice_counts(const potts_lattice* lattice, size_t index, int* counts) {
  return guard([&] {
    need(lattice, "lattice");
    need(counts, "counts");
    if (index >= lattice->ptr->size())
      potts::fail(potts::ErrorKind::out_of_range, "class index out of range");
    const auto c = lattice->ptr->counts(index);
    std::copy(c.begin(), c.end(), counts);
  });
}

potts_status potts_lattice_index(const potts_lattice* lattice, const int* counts, size_t* index) {
  return guard([&] {
    need(lattice, "lattice");
    need(counts, "counts");
    need(index, "index");
    *index = lattice->ptr->index_of(
        std::span<const int>(counts, static_cast<std::size_t>(lattice->ptr->q())));
  });
}

size_t potts_lattice_balanced_index(const potts_lattice* lattice) {
  return lattice ? lattice->ptr->balanced_index() : 0;
}

potts_status potts_stationary_create(const potts_lattice* lattice, double beta,
                                     potts_distribution** out) {
  return guard([&] {
    need(lattice, "lattice");
    need(out, "out");
    *out = nullptr;
    *out = new potts_distribution{potts::stationary_distribution(lattice->ptr, beta)};
  });
}

void potts_distribution_free(potts_distribution* dist) { delete dist; }

size_t potts_distribution_size(const potts_distribution* dist) {
  return dist ? dist->dist.size() : 0;
}

potts_status potts_distribution_log_weight(const potts_distribution* dist, size_t i, double* out) {
  return guard([&] {
    need(dist, "distribution");
    need(out, "out");
    if (i >= dist->dist.size()) potts::fail(potts::ErrorKind::out_of_range, "index out of range");
    *out = dist->dist.log_weights()[i];
  });
}

double potts_distribution_log_normalizer(const potts_distribution* dist) {
  return dist ? dist->dist.log_normalizer() : std::numeric_limits<double>::quiet_NaN();
}

potts_status potts_distribution_probability(const potts_distribution* dist, size_t i,
                                            double* out) {
  return guard([&] {
    need(dist, "distribution");
    need(out, "out");
    if (i >= dist->dist.size()) potts::fail(potts::ErrorKind::out_of_range, "index out of range");
    *out = dist->dist.probability(i);
  });
}

potts_status potts_distribution_write_csv(const potts_distribution* dist, const char* path) {
  return guard([&] {
    need(dist, "distribution");
    write_file(path, [&](std::ostream& os) { potts::write_distribution_csv(os, dist->dist); });
  });
}

potts_status potts_stationary_oracle_tv(const potts_lattice* lattice, double beta, double* tv) {
  return guard([&] {
    need(lattice, "lattice");
    need(tv, "tv");
    const auto pi = potts::stationary_distribution(lattice->ptr, beta);
    const auto brute = potts::reference::class_probabilities(*lattice->ptr, beta);
    double sum = 0.0;
    for (std::size_t i = 0; i < brute.size(); ++i) sum += std::abs(brute[i] - pi.probability(i));
    *tv = 0.5 * sum;
  });
}

potts_status potts_kernel_metropolis_create(const potts_lattice* lattice, double beta,
                                            potts_kernel** out) {
  return guard([&] {
    need(lattice, "lattice");
    need(out, "out");
    *out = nullptr;
    *out = new potts_kernel{potts::metropolis_kernel(lattice->ptr, beta)};
  });
}

potts_status potts_kernel_ee_jump_m0_create(const potts_lattice* lattice, double d,
                                            double beta_hi, double beta_lo, potts_kernel** out) {
  return guard([&] {
    need(lattice, "lattice");
    need(out, "out");
    *out = nullptr;
    const auto bands = potts::EnergyBands::with_density(lattice->ptr->n(), lattice->ptr->q(), d);
    *out = new potts_kernel{potts::ee_jump_kernel_m0(lattice->ptr, bands, beta_hi, beta_lo)};
  });
}

void potts_kernel_free(potts_kernel* kernel) { delete kernel; }

size_t potts_kernel_size(const potts_kernel* kernel) { return kernel ? kernel->kernel.size() : 0; }

size_t potts_kernel_nonzeros(const potts_kernel* kernel) {
  return kernel ? kernel->kernel.nonzeros() : 0;
}

potts_status potts_kernel_entry(const potts_kernel* kernel, size_t i, size_t j, double* p) {
  return guard([&] {
    need(kernel, "kernel");
    need(p, "p");
    if (i >= kernel->kernel.size() || j >= kernel->kernel.size())
      potts::fail(potts::ErrorKind::out_of_range, "kernel index out of range");
    *p = kernel->kernel.at(i, j);
  });
}

double potts_kernel_max_row_error(const potts_kernel* kernel) {
  if (!kernel) return std::numeric_limits<double>::quiet_NaN();
  return potts::check_stochastic(kernel->kernel).max_row_error;
}

potts_status potts_kernel_write_csv(const potts_kernel* kernel, const char* path) {
  return guard([&] {
    need(kernel, "kernel");
    write_file(path, [&](std::ostream& os) { potts::write_kernel_csv(os, kernel->kernel); });
  });
}

// ---- spectral

potts_status potts_spectral_gap(const potts_kernel* kernel, const potts_distribution* dist,
                                size_t dense_limit, potts_gap_result* out) {
  return guard([&] {
    check_pair(kernel, dist);
    need(out, "out");
    potts::GapOptions opt;
    if (dense_limit > 0) opt.dense_limit = dense_limit;
    const auto r = potts::spectral_gap(kernel->kernel, dist->dist, opt);
    out->gap = r.gap;
    out->lambda2 = r.lambda2;
    out->lambda_min = r.lambda_min;
    out->method = r.method == potts::GapMethod::dense ? POTTS_GAP_DENSE : POTTS_GAP_POWER_ITERATION;
    out->iterations = r.iterations;
  });
}

potts_status potts_conductance_of_set(const potts_kernel* kernel, const potts_distribution* dist,
                                      const unsigned char* mask, double* phi, double* pi_s) {
  return guard([&] {
    check_pair(kernel, dist);
    need(mask, "mask");
    std::vector<bool> in(kernel->kernel.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = mask[i] != 0;
    const auto r = potts::conductance_of_set(kernel->kernel, dist->dist, in);
    if (phi) *phi = r.phi;
    if (pi_s) *pi_s = r.pi_s;
  });
}

potts_status potts_family_conductance(const potts_kernel* kernel, const potts_distribution* dist,
                                      double beta, int use_eigenfunction, potts_cut_result* out) {
  return guard([&] {
    check_pair(kernel, dist);
    need(out, "out");
    const int q = lattice_of(dist)->q();
    std::vector<std::vector<double>> centers;
    for (const auto& m : potts::find_local_maxima(beta, q).maxima) centers.push_back(m.point);
    std::vector<double> eig;
    if (use_eigenfunction) {
      potts::GapOptions opt;
      opt.want_eigenvector = true;
      eig = potts::spectral_gap(kernel->kernel, dist->dist, opt).eigenfunction;
    }
    const auto r = potts::family_conductance(kernel->kernel, dist->dist, centers, eig);
    out->phi = r.phi;
    out->pi_s = r.best.pi_s;
    out->parameter = r.best.parameter;
    out->cuts_examined = r.cuts_examined;
    std::memset(out->family, 0, sizeof(out->family));
    std::strncpy(out->family, r.best.family.c_str(), sizeof(out->family) - 1);
  });
}

potts_status potts_exhaustive_conductance(const potts_kernel* kernel,
                                          const potts_distribution* dist, double* phi,
                                          double* pi_s) {
  return guard([&] {
    check_pair(kernel, dist);
    const auto r = potts::exhaustive_conductance(kernel->kernel, dist->dist);
    if (phi) *phi = r.phi;
    if (pi_s) *pi_s = r.pi_s;
  });
}

potts_status potts_ball_cut_ratio(const potts_distribution* dist, const double* center,
                                  double epsilon, double delta, double* ratio) {
  return guard([&] {
    need(ratio, "ratio");
    const int q = lattice_of(dist)->q();
    std::vector<double> c =
        center ? std::vector<double>(center, center + q) : potts::symmetric_point(q);
    *ratio = potts::ball_cut_ratio(dist->dist, c, epsilon, delta);
  });
}

potts_status potts_lifted_cut_bound(const potts_distribution* dist_top, double d, double beta,
                                    double epsilon, double delta, double* bound,
                                    double* max_reach_distance) {
  return guard([&] {
    const auto& lattice = lattice_of(dist_top);
    const auto bands = potts::EnergyBands::with_density(lattice->n(), lattice->q(), d);
    const auto r = potts::lifted_cut_conductance_bound(dist_top->dist, bands, beta, epsilon, delta);
    if (bound) *bound = r.bound;
    if (max_reach_distance) *max_reach_distance = r.max_reach_distance;
  });
}

potts_status potts_fit_exponential_rate(const double* sizes, const double* values, size_t count,
                                        potts_fit* out) {
  return guard([&] {
    need(sizes, "sizes");
    need(values, "values");
    need(out, "out");
    const auto f = potts::fit_exponential_rate(std::span<const double>(sizes, count),
                                               std::span<const double>(values, count));
    *out = potts_fit{f.rate, f.intercept, f.r_squared, f.rate_stderr};
  });
}

// ---- samplers

uint64_t potts_derive_seed(uint64_t master, uint64_t stream) {
  return potts::derive_seed(master, stream);
}

potts_status potts_ees_setup_create(const potts_ees_config* config, potts_ees_setup** out) {
  return guard([&] {
    need(config, "config");
    need(out, "out");
    *out = nullptr;
    potts::EesConfig c;
    c.n = config->n;
    c.q = config->q;
    c.beta = config->beta;
    c.d = config->d;
    c.record = config->live_record ? potts::RecordMode::live : potts::RecordMode::best_case;
    *out = new potts_ees_setup{potts::EesSetup::create(c)};
  });
}

void potts_ees_setup_free(potts_ees_setup* setup) { delete setup; }

potts_status potts_system_create(const potts_ees_setup* setup, uint64_t seed, uint64_t stream,
                                 potts_system** out) {
  return guard([&] {
    need(setup, "setup");
    need(out, "out");
    *out = nullptr;
    *out = new potts_system{potts::ReplicaSystem(setup->ptr, seed, stream)};
  });
}

void potts_system_free(potts_system* system) { delete system; }

int potts_system_levels(const potts_system* system) {
  return system ? system->system.levels() : 0;
}

potts_status potts_system_sweep(potts_system* system, uint64_t count) {
  return guard([&] {
    need(system, "system");
    for (uint64_t i = 0; i < count; ++i) system->system.sweep();
  });
}

potts_status potts_system_state(const potts_system* system, int level, int* counts) {
  return guard([&] {
    need(system, "system");
    need(counts, "counts");
    if (level < 0 || level >= system->system.levels())
      potts::fail(potts::ErrorKind::out_of_range, "level out of range");
    const auto s = system->system.state(level);
    std::copy(s.begin(), s.end(), counts);
  });
}

size_t potts_system_record_entries(const potts_system* system) {
  return system ? system->system.record().total_entries() : 0;
}

potts_status potts_escape_time(potts_system* system, double epsilon, uint64_t max_sweeps,
                               uint64_t* sweeps, int* timed_out) {
  return guard([&] {
    need(system, "system");
    const auto r = potts::escape_time(system->system, epsilon, max_sweeps);
    if (sweeps) *sweeps = r.sweeps;
    if (timed_out) *timed_out = r.timed_out ? 1 : 0;
  });
}

potts_status potts_simulate_csv(const potts_ees_setup* setup, uint64_t sweeps, uint64_t stride,
                                uint64_t seed, const char* path) {
  return guard([&] {
    need(setup, "setup");
    const auto traj = potts::simulate(setup->ptr, sweeps, stride, seed);
    write_file(path, [&](std::ostream& os) { potts::write_trajectory_csv(os, traj); });
  });
}

potts_status potts_metropolis_autocorrelation(int n, int q, double beta, uint64_t steps,
                                              uint64_t burn_in, uint64_t seed, double* tau) {
  return guard([&] {
    need(tau, "tau");
    const auto series = potts::metropolis_distance_series(n, q, beta, steps, burn_in, seed);
    *tau = potts::integrated_autocorrelation_time(series);
  });
}

// ---- self test

potts_status potts_selftest(int inject_row_fault, potts_check_callback callback, void* user,
                            int* failures) {
  return guard([&] {
    potts::SelftestOptions opt;
    opt.inject_row_fault = inject_row_fault != 0;
    int bad = 0;
    for (const auto& c : potts::run_selftest(opt)) {
      if (!c.passed) ++bad;
      if (callback) callback(c.name.c_str(), c.passed ? 1 : 0, c.detail.c_str(), user);
    }
    if (failures) *failures = bad;
  });
}

}  // extern "C"
