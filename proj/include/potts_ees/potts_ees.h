/*
 * C interface to the potts_ees library: mean-field Potts model landscape,
 * exact lumped Metropolis / equi-energy kernels, conductance and spectral-gap
 * analysis, and the multi-replica equi-energy sampler.
 *
 * Conventions
 *  - Every fallible function returns potts_status; POTTS_OK is 0. On error
 *    potts_last_error() returns a message for the calling thread.
 *  - Objects are opaque handles created by *_create / *_find and released
 *    with the matching *_free. Passing NULL to *_free is a no-op.
 *  - Handles are immutable after creation except potts_system, which must not
 *    be used from two threads at once. Distinct handles are independent.
 *  - Colors are 0-based; count vectors have q entries in color order.
 */
#ifndef POTTS_EES_H
#define POTTS_EES_H

#include <stddef.h>
#include <stdint.h>

#if defined(POTTS_EES_BUILDING)
#define POTTS_API __attribute__((visibility("default")))
#else
#define POTTS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum potts_status {
  POTTS_OK = 0,
  POTTS_ERR_INVALID_ARGUMENT = 1,
  POTTS_ERR_OUT_OF_RANGE = 2,
  POTTS_ERR_NOT_REVERSIBLE = 3,
  POTTS_ERR_NO_CONVERGENCE = 4,
  POTTS_ERR_PREMISE = 5,
  POTTS_ERR_IO = 6,
  POTTS_ERR_INTERNAL = 99
} potts_status;

POTTS_API const char* potts_version(void);
POTTS_API const char* potts_last_error(void);
POTTS_API const char* potts_status_name(potts_status status);

/* ---- model ------------------------------------------------------------ */

POTTS_API potts_status potts_hamiltonian(const int* counts, int q, double* energy);
POTTS_API potts_status potts_free_energy(const double* c, int q, double beta, double* f);
POTTS_API potts_status potts_directional_second_derivative(double a, double beta, double* out);
POTTS_API potts_status potts_critical_beta(int q, double* out);
POTTS_API potts_status potts_critical_beta_numeric(int q, double* out);
/* Largest l1 radius around the uniform point where f decreases radially (q=3). */
POTTS_API potts_status potts_symmetric_basin_radius(double beta, double* out);

typedef enum potts_symmetric_status {
  POTTS_SYMMETRIC_LOCAL_MAX = 0,
  POTTS_SYMMETRIC_DEGENERATE = 1,
  POTTS_SYMMETRIC_NOT_MAX = 2
} potts_symmetric_status;

typedef struct potts_maxima potts_maxima;

POTTS_API potts_status potts_maxima_find(double beta, int q, potts_maxima** out);
POTTS_API void potts_maxima_free(potts_maxima* report);
POTTS_API size_t potts_maxima_count(const potts_maxima* report);
/* coords receives q values. */
POTTS_API potts_status potts_maxima_get(const potts_maxima* report, size_t i, double* coords,
                                        double* f, int* is_symmetric);
POTTS_API potts_symmetric_status potts_maxima_symmetric_status(const potts_maxima* report);
/* Returns 1 and writes m* when an asymmetric maximum exists, else 0. */
POTTS_API int potts_maxima_m_star(const potts_maxima* report, double* m_star);

POTTS_API potts_status potts_write_landscape_csv(const char* path, double beta, int steps);

/* ---- lattice, stationary law, kernels ---------------------------------- */

typedef struct potts_lattice potts_lattice;
typedef struct potts_distribution potts_distribution;
typedef struct potts_kernel potts_kernel;

POTTS_API potts_status potts_lattice_create(int n, int q, potts_lattice** out);
POTTS_API void potts_lattice_free(potts_lattice* lattice);
POTTS_API size_t potts_lattice_size(const potts_lattice* lattice);
POTTS_API int potts_lattice_n(const potts_lattice* lattice);
POTTS_API int potts_lattice_q(const potts_lattice* lattice);
POTTS_API potts_status potts_lattice_counts(const potts_lattice* lattice, size_t index, int* counts);
POTTS_API potts_status potts_lattice_index(const potts_lattice* lattice, const int* counts,
                                           size_t* index);
POTTS_API size_t potts_lattice_balanced_index(const potts_lattice* lattice);

POTTS_API potts_status potts_stationary_create(const potts_lattice* lattice, double beta,
                                               potts_distribution** out);
POTTS_API void potts_distribution_free(potts_distribution* dist);
POTTS_API size_t potts_distribution_size(const potts_distribution* dist);
/* Unnormalized log-weight log C(N; n) + beta H(n). */
POTTS_API potts_status potts_distribution_log_weight(const potts_distribution* dist, size_t i,
                                                     double* out);
POTTS_API double potts_distribution_log_normalizer(const potts_distribution* dist);
POTTS_API potts_status potts_distribution_probability(const potts_distribution* dist, size_t i,
                                                      double* out);
POTTS_API potts_status potts_distribution_write_csv(const potts_distribution* dist,
                                                    const char* path);
/* Total variation between the lumped law and brute-force spin enumeration. */
POTTS_API potts_status potts_stationary_oracle_tv(const potts_lattice* lattice, double beta,
                                                  double* tv);

POTTS_API potts_status potts_kernel_metropolis_create(const potts_lattice* lattice, double beta,
                                                      potts_kernel** out);
/* Jump kernel with the fully populated record; bands use M = d * N. */
POTTS_API potts_status potts_kernel_ee_jump_m0_create(const potts_lattice* lattice, double d,
                                                      double beta_hi, double beta_lo,
                                                      potts_kernel** out);
POTTS_API void potts_kernel_free(potts_kernel* kernel);
POTTS_API size_t potts_kernel_size(const potts_kernel* kernel);
POTTS_API size_t potts_kernel_nonzeros(const potts_kernel* kernel);
POTTS_API potts_status potts_kernel_entry(const potts_kernel* kernel, size_t i, size_t j,
                                          double* p);
POTTS_API double potts_kernel_max_row_error(const potts_kernel* kernel);
POTTS_API potts_status potts_kernel_write_csv(const potts_kernel* kernel, const char* path);

/* ---- spectral analysis ------------------------------------------------- */

typedef enum potts_gap_method { POTTS_GAP_DENSE = 0, POTTS_GAP_POWER_ITERATION = 1 } potts_gap_method;

typedef struct potts_gap_result {
  double gap;
  double lambda2;
  double lambda_min; /* NaN for power iteration */
  potts_gap_method method;
  uint64_t iterations;
} potts_gap_result;

/* dense_limit = 0 selects the default (5000 states). */
POTTS_API potts_status potts_spectral_gap(const potts_kernel* kernel,
                                          const potts_distribution* dist, size_t dense_limit,
                                          potts_gap_result* out);

/* mask has potts_kernel_size() bytes, nonzero = member. */
POTTS_API potts_status potts_conductance_of_set(const potts_kernel* kernel,
                                                const potts_distribution* dist,
                                                const unsigned char* mask, double* phi,
                                                double* pi_s);

typedef struct potts_cut_result {
  double phi;
  double pi_s;
  double parameter;
  size_t cuts_examined;
  char family[32];
} potts_cut_result;

/* Minimum over balls around the local maxima of f at `beta`, pi level sets
 * and (if use_eigenfunction) sweep sets of the second eigenvector. */
POTTS_API potts_status potts_family_conductance(const potts_kernel* kernel,
                                                const potts_distribution* dist, double beta,
                                                int use_eigenfunction, potts_cut_result* out);
/* Exact minimum over all subsets; at most 30 states. */
POTTS_API potts_status potts_exhaustive_conductance(const potts_kernel* kernel,
                                                    const potts_distribution* dist,
                                                    double* phi, double* pi_s);

/* center: q coordinates, or NULL for the uniform point. */
POTTS_API potts_status potts_ball_cut_ratio(const potts_distribution* dist, const double* center,
                                            double epsilon, double delta, double* ratio);
POTTS_API potts_status potts_lifted_cut_bound(const potts_distribution* dist_top, double d,
                                              double beta, double epsilon, double delta,
                                              double* bound, double* max_reach_distance);

typedef struct potts_fit {
  double rate;
  double intercept;
  double r_squared;
  double rate_stderr;
} potts_fit;

POTTS_API potts_status potts_fit_exponential_rate(const double* sizes, const double* values,
                                                  size_t count, potts_fit* out);

/* ---- samplers ---------------------------------------------------------- */

typedef struct potts_ees_config {
  int n;
  int q;
  double beta;
  double d;
  int live_record; /* 0 = fully populated record, 1 = record visited states */
} potts_ees_config;

typedef struct potts_ees_setup potts_ees_setup;
typedef struct potts_system potts_system;

POTTS_API uint64_t potts_derive_seed(uint64_t master, uint64_t stream);

POTTS_API potts_status potts_ees_setup_create(const potts_ees_config* config,
                                              potts_ees_setup** out);
POTTS_API void potts_ees_setup_free(potts_ees_setup* setup);

POTTS_API potts_status potts_system_create(const potts_ees_setup* setup, uint64_t seed,
                                           uint64_t stream, potts_system** out);
POTTS_API void potts_system_free(potts_system* system);
POTTS_API int potts_system_levels(const potts_system* system);
POTTS_API potts_status potts_system_sweep(potts_system* system, uint64_t count);
POTTS_API potts_status potts_system_state(const potts_system* system, int level, int* counts);
POTTS_API size_t potts_system_record_entries(const potts_system* system);
POTTS_API potts_status potts_escape_time(potts_system* system, double epsilon,
                                         uint64_t max_sweeps, uint64_t* sweeps, int* timed_out);

/* Trajectory CSV: sweep,m1..mq,energy,dist_a0. */
POTTS_API potts_status potts_simulate_csv(const potts_ees_setup* setup, uint64_t sweeps,
                                          uint64_t stride, uint64_t seed, const char* path);

/* Integrated autocorrelation time (in Metropolis steps) of ||m - a0||_1. */
POTTS_API potts_status potts_metropolis_autocorrelation(int n, int q, double beta,
                                                        uint64_t steps, uint64_t burn_in,
                                                        uint64_t seed, double* tau);

/* ---- self test --------------------------------------------------------- */

typedef void (*potts_check_callback)(const char* name, int passed, const char* detail,
                                     void* user);

POTTS_API potts_status potts_selftest(int inject_row_fault, potts_check_callback callback,
                                      void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* POTTS_EES_H */
