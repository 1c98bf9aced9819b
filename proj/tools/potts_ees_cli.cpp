// potts-ees: experiment driver over the potts_ees C API.
//
//   potts-ees <subcommand> [--config PATH] [--seed U64] [--out DIR] [--threads K]
//
// Each subcommand starts from built-in defaults, overlays the JSON config
// file, then the command-line flags. Every output file gets a
// <file>.manifest.json sidecar with the parameters, seed and build id.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "potts_ees/potts_ees.h"

#ifndef POTTS_EES_GIT_DESCRIBE
#define POTTS_EES_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A C API call failed.
struct ApiError : std::runtime_error {
  potts_status status;
  ApiError(potts_status s, const std::string& what)
      : std::runtime_error(what + ": " + potts_status_name(s) + ": " + potts_last_error()),
        status(s) {}
};

void check(potts_status s, const char* what) {
  if (s != POTTS_OK) throw ApiError(s, what);
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T* get() const { return p; }
  T** out() { return &p; }
};

using Lattice = Handle<potts_lattice, potts_lattice_free>;
using Dist = Handle<potts_distribution, potts_distribution_free>;
using Kernel = Handle<potts_kernel, potts_kernel_free>;
using Maxima = Handle<potts_maxima, potts_maxima_free>;
using Setup = Handle<potts_ees_setup, potts_ees_setup_free>;
using System = Handle<potts_system, potts_system_free>;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short label for file names: 2.9 -> "2.9".
std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Context {
  std::string command;
  json params;
  std::uint64_t seed = 0;
  fs::path out;
  unsigned threads = 1;
};

void write_manifest(const Context& ctx, const fs::path& file) {
  json m;
  m["file"] = file.filename().string();
  m["subcommand"] = ctx.command;
  m["params"] = ctx.params;
  m["seed"] = ctx.seed;
  m["git_describe"] = POTTS_EES_GIT_DESCRIBE;
  m["library_version"] = potts_version();
  std::ofstream os(file.string() + ".manifest.json");
  os << m.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write manifest for " + file.string());
}

void emit_text(const Context& ctx, const std::string& name, const std::string& body) {
  const fs::path p = ctx.out / name;
  std::ofstream os(p, std::ios::binary);
  os << body;
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os.close();
  write_manifest(ctx, p);
}

void emit_json(const Context& ctx, const std::string& name, const json& j) {
  emit_text(ctx, name, j.dump(2) + "\n");
}

// Files produced by the library itself.
void emit_api(const Context& ctx, const std::string& name,
              const std::function<potts_status(const char*)>& writer) {
  const fs::path p = ctx.out / name;
  check(writer(p.string().c_str()), name.c_str());
  write_manifest(ctx, p);
}

// Runs tasks 0..count-1 on the worker pool. Results are written by index,
// so output order never depends on scheduling.
void parallel_for(unsigned threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---- config handling

json defaults_for(const std::string& cmd) {
  if (cmd == "landscape") return {{"q", 3}, {"beta", {2.0, 2.9, 3.0}}, {"grid", 200}};
  if (cmd == "stationary")
    return {{"n", {4, 6, 8}}, {"q", 3}, {"beta", {0.0, 2.0, 2.9}}, {"oracle_max_n", 10},
            {"export_kernel", false}};
  if (cmd == "gap")
    return {{"n", {6, 12, 18, 24}}, {"q", 3}, {"beta", {2.0, 2.9}}, {"dense_limit", 5000},
            {"exhaustive_max_states", 30}};
  if (cmd == "conductance")
    return {{"n", {30, 60, 90, 120, 150}}, {"q", 3}, {"beta", {2.0, 2.9}}, {"d", 1.0},
            {"epsilon", 0.30}, {"delta", 0.15}, {"radii", {0.05, 0.10, 0.15, 0.20, 0.30}},
            {"gap_max_states", 2000}};
  if (cmd == "escape")
    return {{"n", {24, 48, 96}}, {"q", 3}, {"beta", {2.9}}, {"d", 1.0}, {"epsilon", 0.30},
            {"seeds", 20}, {"modes", {"m0", "live"}}, {"max_sweeps", 20'000'000},
            {"trajectory_sweeps", 0}, {"trajectory_stride", 100},
            {"autocorr_beta", 2.0}, {"autocorr_steps", 4'000'000}, {"autocorr_burn_in", 200'000},
            {"contrast_q", 2}, {"contrast_beta", 2.5}, {"contrast_n", {50, 100}}};
  if (cmd == "selftest") return {{"inject_fault", false}};
  throw UsageError("unknown subcommand " + cmd);
}

json load_config(const std::string& cmd, const std::string& path) {
  json params = defaults_for(cmd);
  if (path.empty()) return params;
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config " + path);
  json file;
  try {
    file = json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!file.is_object()) throw UsageError("config must be a JSON object");
  for (auto it = file.begin(); it != file.end(); ++it) {
    if (it.key() == "seed" || it.key() == "out" || it.key() == "threads") {
      params[it.key()] = it.value();
      continue;
    }
    if (!params.contains(it.key())) throw UsageError("unknown config key '" + it.key() + "' for " + cmd);
    params[it.key()] = it.value();
  }
  return params;
}

template <typename T>
std::vector<T> list_of(const json& params, const char* key) {
  const json& v = params.at(key);
  std::vector<T> out;
  try {
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(e.get<T>());
    } else {
      out.push_back(v.get<T>());
    }
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
  if (out.empty()) throw UsageError(std::string("config key '") + key + "' must be nonempty");
  return out;
}

template <typename T>
T scalar(const json& params, const char* key) {
  try {
    return params.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

void validate_common(const json& p) {
  if (p.contains("n"))
    for (int n : list_of<int>(p, "n"))
      if (n < 1) throw UsageError("N must be >= 1");
  if (p.contains("q") && scalar<int>(p, "q") < 2) throw UsageError("q must be >= 2");
  if (p.contains("beta"))
    for (double b : list_of<double>(p, "beta"))
      if (!(b >= 0.0) || !std::isfinite(b)) throw UsageError("beta must be finite and >= 0");
  if (p.contains("d") && !(scalar<double>(p, "d") > 0.0)) throw UsageError("d must be > 0");
  if (p.contains("epsilon") && p.contains("delta")) {
    const double e = scalar<double>(p, "epsilon");
    const double d = scalar<double>(p, "delta");
    if (!(e > d && d > 0.0)) throw UsageError("need epsilon > delta > 0");
  }
}

// ---- subcommands

int cmd_landscape(const Context& ctx) {
  const auto& p = ctx.params;
  const auto betas = list_of<double>(p, "beta");
  const int q = scalar<int>(p, "q");
  const int grid = scalar<int>(p, "grid");
  if (q != 3) throw UsageError("landscape supports q = 3 only");
  if (grid < 1) throw UsageError("grid must be >= 1");

  std::vector<json> reports(betas.size());
  parallel_for(ctx.threads, betas.size(), [&](std::size_t i) {
    const double beta = betas[i];
    Maxima m;
    check(potts_maxima_find(beta, q, m.out()), "find maxima");
    json r;
    r["beta"] = beta;
    r["q"] = q;
    static const char* status_names[] = {"local_max", "degenerate", "not_max"};
    r["symmetric_status"] = status_names[potts_maxima_symmetric_status(m.get())];
    double ms = 0.0;
    r["m_star"] = potts_maxima_m_star(m.get(), &ms) ? json(ms) : json(nullptr);
    double radius = 0.0;
    check(potts_symmetric_basin_radius(beta, &radius), "basin radius");
    r["symmetric_basin_radius_l1"] = radius;
    json list = json::array();
    for (std::size_t k = 0; k < potts_maxima_count(m.get()); ++k) {
      std::vector<double> c(static_cast<std::size_t>(q));
      double f = 0.0;
      int sym = 0;
      check(potts_maxima_get(m.get(), k, c.data(), &f, &sym), "maximum");
      list.push_back({{"point", c}, {"f", f}, {"kind", sym ? "symmetric" : "asymmetric"}});
    }
    r["maxima_count"] = list.size();
    r["maxima"] = list;
    reports[i] = r;
    emit_api(ctx, "landscape_beta" + tag(beta) + ".csv",
             [&](const char* path) { return potts_write_landscape_csv(path, beta, grid); });
    emit_json(ctx, "maxima_beta" + tag(beta) + ".json", r);
  });
  for (const auto& r : reports)
    std::cout << "beta=" << fmt(r["beta"].get<double>()) << " maxima=" << r["maxima_count"]
              << " symmetric=" << r["symmetric_status"].get<std::string>() << "\n";
  return 0;
}

int cmd_stationary(const Context& ctx) {
  const auto& p = ctx.params;
  const auto ns = list_of<int>(p, "n");
  const auto betas = list_of<double>(p, "beta");
  const int q = scalar<int>(p, "q");
  const int oracle_max = scalar<int>(p, "oracle_max_n");
  const bool export_kernel = scalar<bool>(p, "export_kernel");

  struct Row {
    int n;
    double beta;
    std::size_t classes;
    double log_z;
    double oracle_tv;  // NaN when skipped
  };
  std::vector<Row> rows(ns.size() * betas.size());
  parallel_for(ctx.threads, rows.size(), [&](std::size_t t) {
    const int n = ns[t / betas.size()];
    const double beta = betas[t % betas.size()];
    Lattice lat;
    check(potts_lattice_create(n, q, lat.out()), "lattice");
    Dist pi;
    check(potts_stationary_create(lat.get(), beta, pi.out()), "stationary");
    const std::string stem = "N" + std::to_string(n) + "_beta" + tag(beta);
    emit_api(ctx, "stationary_" + stem + ".csv",
             [&](const char* path) { return potts_distribution_write_csv(pi.get(), path); });
    if (export_kernel) {
      Kernel k;
      check(potts_kernel_metropolis_create(lat.get(), beta, k.out()), "kernel");
      emit_api(ctx, "kernel_metropolis_" + stem + ".csv",
               [&](const char* path) { return potts_kernel_write_csv(k.get(), path); });
    }
    double tv = std::nan("");
    if (n <= oracle_max) check(potts_stationary_oracle_tv(lat.get(), beta, &tv), "oracle");
    rows[t] = {n, beta, potts_lattice_size(lat.get()), potts_distribution_log_normalizer(pi.get()), tv};
  });

  std::ostringstream csv;
  csv << "N,beta,classes,log_normalizer,oracle_tv\n";
  int failures = 0;
  for (const auto& r : rows) {
    csv << r.n << "," << fmt(r.beta) << "," << r.classes << "," << fmt(r.log_z) << ","
        << fmt(r.oracle_tv) << "\n";
    if (!std::isnan(r.oracle_tv) && !(r.oracle_tv < 1e-12)) {
      std::cerr << "oracle mismatch: N=" << r.n << " beta=" << r.beta << " TV=" << r.oracle_tv << "\n";
      ++failures;
    }
  }
  emit_text(ctx, "stationary_summary.csv", csv.str());
  std::cout << rows.size() << " distributions written, oracle failures: " << failures << "\n";
  return failures ? 1 : 0;
}

int cmd_gap(const Context& ctx) {
  const auto& p = ctx.params;
  const auto ns = list_of<int>(p, "n");
  const auto betas = list_of<double>(p, "beta");
  const int q = scalar<int>(p, "q");
  const auto dense_limit = scalar<std::size_t>(p, "dense_limit");
  const auto exhaustive_max = scalar<std::size_t>(p, "exhaustive_max_states");
  if (exhaustive_max > 30) throw UsageError("exhaustive_max_states is limited to 30");

  struct Row {
    int n;
    double beta;
    std::size_t classes;
    potts_gap_result gap;
    potts_cut_result family;
    double phi_exhaustive;  // NaN when skipped
    bool family_is_minimum;
    bool upper_ok;
    bool lower_checked;
    bool lower_ok;
  };
  std::vector<Row> rows(ns.size() * betas.size());
  std::mutex log_mu;
  parallel_for(ctx.threads, rows.size(), [&](std::size_t t) {
    Row r{};
    r.n = ns[t / betas.size()];
    r.beta = betas[t % betas.size()];
    Lattice lat;
    check(potts_lattice_create(r.n, q, lat.out()), "lattice");
    Dist pi;
    check(potts_stationary_create(lat.get(), r.beta, pi.out()), "stationary");
    Kernel k;
    check(potts_kernel_metropolis_create(lat.get(), r.beta, k.out()), "kernel");
    r.classes = potts_lattice_size(lat.get());
    if (r.classes > dense_limit) {
      std::lock_guard<std::mutex> lock(log_mu);
      std::cerr << "notice: N=" << r.n << " has " << r.classes << " classes > dense limit "
                << dense_limit << "; using power iteration\n";
    }
    check(potts_spectral_gap(k.get(), pi.get(), dense_limit, &r.gap), "spectral gap");
    check(potts_family_conductance(k.get(), pi.get(), r.beta, 1, &r.family), "family conductance");
    r.phi_exhaustive = std::nan("");
    if (r.classes <= exhaustive_max) {
      check(potts_exhaustive_conductance(k.get(), pi.get(), &r.phi_exhaustive, nullptr),
            "exhaustive conductance");
      r.family_is_minimum = std::abs(r.family.phi - r.phi_exhaustive) <= 1e-12 * r.phi_exhaustive;
    }
    const double slack = 1e-12;
    r.upper_ok = r.gap.gap <= 2.0 * r.family.phi + slack;
    r.lower_checked = r.family_is_minimum;
    r.lower_ok = !r.lower_checked || r.family.phi * r.family.phi / 2.0 <= r.gap.gap + slack;
    rows[t] = r;
  });

  std::ostringstream csv;
  csv << "N,beta,classes,method,gap,lambda2,phi_family,cut_family,cut_parameter,pi_S,"
         "phi_exhaustive,family_is_minimum,cheeger_upper_ok,cheeger_lower_checked,cheeger_lower_ok\n";
  int failures = 0;
  for (const auto& r : rows) {
    csv << r.n << "," << fmt(r.beta) << "," << r.classes << ","
        << (r.gap.method == POTTS_GAP_DENSE ? "dense" : "power_iteration") << "," << fmt(r.gap.gap)
        << "," << fmt(r.gap.lambda2) << "," << fmt(r.family.phi) << "," << r.family.family << ","
        << fmt(r.family.parameter) << "," << fmt(r.family.pi_s) << "," << fmt(r.phi_exhaustive)
        << "," << r.family_is_minimum << "," << r.upper_ok << "," << r.lower_checked << ","
        << r.lower_ok << "\n";
    if (!r.upper_ok || !r.lower_ok) {
      std::cerr << "Cheeger sandwich violated: N=" << r.n << " beta=" << r.beta
                << " gap=" << fmt(r.gap.gap) << " phi=" << fmt(r.family.phi) << "\n";
      ++failures;
    }
  }
  emit_text(ctx, "gap.csv", csv.str());
  std::cout << rows.size() << " rows, Cheeger violations: " << failures << "\n";
  return failures ? 1 : 0;
}

int cmd_conductance(const Context& ctx) {
  const auto& p = ctx.params;
  const auto ns = list_of<int>(p, "n");
  const auto betas = list_of<double>(p, "beta");
  const auto radii = list_of<double>(p, "radii");
  const int q = scalar<int>(p, "q");
  const double d = scalar<double>(p, "d");
  const double eps = scalar<double>(p, "epsilon");
  const double delta = scalar<double>(p, "delta");
  const auto gap_max = scalar<std::size_t>(p, "gap_max_states");

  struct Cut {
    double r, phi, pi_s;
  };
  struct Row {
    int n;
    double beta;
    double gap;
    std::vector<Cut> cuts;
    double ratio;
    double lifted;
    double reach;
    std::string lifted_error;
  };
  std::vector<Row> rows(ns.size() * betas.size());
  parallel_for(ctx.threads, rows.size(), [&](std::size_t t) {
    Row r{};
    r.n = ns[t / betas.size()];
    r.beta = betas[t % betas.size()];
    Lattice lat;
    check(potts_lattice_create(r.n, q, lat.out()), "lattice");
    Dist pi;
    check(potts_stationary_create(lat.get(), r.beta, pi.out()), "stationary");
    Kernel k;
    check(potts_kernel_metropolis_create(lat.get(), r.beta, k.out()), "kernel");
    const std::size_t size = potts_lattice_size(lat.get());
    r.gap = std::nan("");
    if (size <= gap_max) {
      potts_gap_result g{};
      check(potts_spectral_gap(k.get(), pi.get(), 0, &g), "spectral gap");
      r.gap = g.gap;
    }
    // Balls around the uniform point; report the side with mass <= 1/2.
    const std::vector<double> center(static_cast<std::size_t>(q), 1.0 / q);
    std::vector<int> counts(static_cast<std::size_t>(q));
    for (double rad : radii) {
      std::vector<unsigned char> mask(size, 0);
      for (std::size_t i = 0; i < size; ++i) {
        check(potts_lattice_counts(lat.get(), i, counts.data()), "counts");
        double dist = 0.0;
        for (int c = 0; c < q; ++c) dist += std::abs(static_cast<double>(counts[c]) / r.n - center[c]);
        mask[i] = dist <= rad + 1e-12;
      }
      double phi = 0.0, mass = 0.0;
      check(potts_conductance_of_set(k.get(), pi.get(), mask.data(), &phi, &mass), "conductance");
      if (mass > 0.5) {
        const double flow = phi * mass;
        mass = 1.0 - mass;
        phi = mass > 0.0 ? flow / mass : std::nan("");
      }
      r.cuts.push_back({rad, phi, mass});
    }
    check(potts_ball_cut_ratio(pi.get(), nullptr, eps, delta, &r.ratio), "ball cut ratio");
    const potts_status s = potts_lifted_cut_bound(pi.get(), d, r.beta, eps, delta, &r.lifted, &r.reach);
    if (s != POTTS_OK) {
      r.lifted = std::nan("");
      r.reach = std::nan("");
      r.lifted_error = potts_status_name(s);
    }
    rows[t] = r;
  });

  std::ostringstream csv;
  csv << "N,beta,r,phi,pi_S,gap\n";
  std::ostringstream ratio_csv;
  ratio_csv << "N,beta,epsilon,delta,ratio,lifted_bound,max_reach_distance,premise\n";
  for (const auto& r : rows) {
    for (const auto& c : r.cuts)
      csv << r.n << "," << fmt(r.beta) << "," << fmt(c.r) << "," << fmt(c.phi) << ","
          << fmt(c.pi_s) << "," << fmt(r.gap) << "\n";
    ratio_csv << r.n << "," << fmt(r.beta) << "," << fmt(eps) << "," << fmt(delta) << ","
              << fmt(r.ratio) << "," << fmt(r.lifted) << "," << fmt(r.reach) << ","
              << (r.lifted_error.empty() ? "ok" : r.lifted_error) << "\n";
  }
  emit_text(ctx, "conductance.csv", csv.str());
  emit_text(ctx, "ball_ratio.csv", ratio_csv.str());

  json fits = json::array();
  for (double beta : betas) {
    std::vector<double> sizes, values;
    for (const auto& r : rows)
      if (r.beta == beta && r.ratio > 0.0) {
        sizes.push_back(r.n);
        values.push_back(r.ratio);
      }
    json f{{"beta", beta}, {"quantity", "ball_cut_ratio"}, {"points", sizes.size()}};
    potts_fit fit{};
    if (sizes.size() >= 4 &&
        potts_fit_exponential_rate(sizes.data(), values.data(), sizes.size(), &fit) == POTTS_OK) {
      f["rate"] = fit.rate;
      f["intercept"] = fit.intercept;
      f["r_squared"] = fit.r_squared;
      f["rate_stderr"] = fit.rate_stderr;
      f["rate_ci95"] = {fit.rate - 1.96 * fit.rate_stderr, fit.rate + 1.96 * fit.rate_stderr};
    } else {
      f["rate"] = nullptr;
      f["note"] = "fewer than 4 positive values";
    }
    fits.push_back(f);
    std::cout << "beta=" << fmt(beta) << " fitted rate " << (f["rate"].is_null() ? "n/a" : fmt(fit.rate))
              << " R^2 " << fmt(fit.r_squared) << "\n";
  }
  emit_json(ctx, "conductance_fit.json", json{{"epsilon", eps}, {"delta", delta}, {"fits", fits}});
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_escape(const Context& ctx) {
  const auto& p = ctx.params;
  const auto ns = list_of<int>(p, "n");
  const auto betas = list_of<double>(p, "beta");
  const auto modes = list_of<std::string>(p, "modes");
  const int q = scalar<int>(p, "q");
  const double d = scalar<double>(p, "d");
  const double eps = scalar<double>(p, "epsilon");
  const auto max_sweeps = scalar<std::uint64_t>(p, "max_sweeps");
  for (const auto& m : modes)
    if (m != "m0" && m != "live") throw UsageError("modes must be 'm0' or 'live'");
  if (!(eps > 0.0)) throw UsageError("epsilon must be > 0");

  // Either a seed count (streams of the master seed) or explicit seeds.
  std::vector<std::uint64_t> seeds;
  if (p.at("seeds").is_number_integer()) {
    const auto count = scalar<std::uint64_t>(p, "seeds");
    if (count == 0) throw UsageError("seeds must be >= 1");
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(potts_derive_seed(ctx.seed, i));
  } else {
    seeds = list_of<std::uint64_t>(p, "seeds");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw UsageError("seeds must be distinct");
  }

  struct Group {
    std::string mode;
    int n;
    double beta;
    std::shared_ptr<potts_ees_setup> setup;
  };
  std::vector<Group> groups;
  for (const auto& mode : modes)
    for (double beta : betas)
      for (int n : ns) groups.push_back({mode, n, beta, nullptr});
  parallel_for(ctx.threads, groups.size(), [&](std::size_t g) {
    potts_ees_config c{groups[g].n, q, groups[g].beta, d, groups[g].mode == "live"};
    potts_ees_setup* s = nullptr;
    check(potts_ees_setup_create(&c, &s), "sampler setup");
    groups[g].setup.reset(s, potts_ees_setup_free);
  });

  struct Run {
    std::uint64_t sweeps = 0;
    bool timed_out = false;
  };
  std::vector<Run> runs(groups.size() * seeds.size());
  parallel_for(ctx.threads, runs.size(), [&](std::size_t t) {
    const auto& g = groups[t / seeds.size()];
    System sys;
    check(potts_system_create(g.setup.get(), seeds[t % seeds.size()], 0, sys.out()), "system");
    int timed_out = 0;
    check(potts_escape_time(sys.get(), eps, max_sweeps, &runs[t].sweeps, &timed_out), "escape");
    runs[t].timed_out = timed_out != 0;
  });

  std::ostringstream csv;
  csv << "mode,N,beta,seed_index,seed,escape_sweeps,timed_out\n";
  json summary = json::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> times;
    int timeouts = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& r = runs[g * seeds.size() + s];
      csv << groups[g].mode << "," << groups[g].n << "," << fmt(groups[g].beta) << "," << s << ","
          << seeds[s] << "," << r.sweeps << "," << r.timed_out << "\n";
      times.push_back(static_cast<double>(r.sweeps));
      timeouts += r.timed_out;
    }
    summary.push_back({{"mode", groups[g].mode},
                       {"N", groups[g].n},
                       {"beta", groups[g].beta},
                       {"runs", seeds.size()},
                       {"median_escape_sweeps", median(times)},
                       {"timeouts", timeouts}});
  }
  // Doubling ratios of consecutive medians within each (mode, beta).
  for (std::size_t g = 1; g < groups.size(); ++g)
    if (groups[g].mode == groups[g - 1].mode && groups[g].beta == groups[g - 1].beta) {
      const double prev = summary[g - 1]["median_escape_sweeps"].get<double>();
      summary[g]["ratio_to_previous"] =
          prev > 0.0 ? json(summary[g]["median_escape_sweeps"].get<double>() / prev) : json(nullptr);
    }
  emit_text(ctx, "escape_runs.csv", csv.str());

  const auto traj_sweeps = scalar<std::uint64_t>(p, "trajectory_sweeps");
  if (traj_sweeps > 0) {
    const auto stride = scalar<std::uint64_t>(p, "trajectory_stride");
    parallel_for(ctx.threads, groups.size(), [&](std::size_t g) {
      emit_api(ctx,
               "trajectory_" + groups[g].mode + "_N" + std::to_string(groups[g].n) + "_beta" +
                   tag(groups[g].beta) + ".csv",
               [&](const char* path) {
                 return potts_simulate_csv(groups[g].setup.get(), traj_sweeps, stride, seeds[0], path);
               });
    });
  }

  // Metropolis autocorrelation contrast.
  const double ac_beta = scalar<double>(p, "autocorr_beta");
  const auto ac_steps = scalar<std::uint64_t>(p, "autocorr_steps");
  const auto ac_burn = scalar<std::uint64_t>(p, "autocorr_burn_in");
  std::vector<double> taus(ns.size());
  parallel_for(ctx.threads, ns.size(), [&](std::size_t i) {
    check(potts_metropolis_autocorrelation(ns[i], q, ac_beta, ac_steps, ac_burn,
                                           potts_derive_seed(ctx.seed, 1000 + i), &taus[i]),
          "autocorrelation");
  });
  std::ostringstream ac_csv;
  ac_csv << "N,beta,steps,tau_int\n";
  for (std::size_t i = 0; i < ns.size(); ++i)
    ac_csv << ns[i] << "," << fmt(ac_beta) << "," << ac_steps << "," << fmt(taus[i]) << "\n";
  emit_text(ctx, "autocorrelation.csv", ac_csv.str());
  json ac{{"beta", ac_beta}};
  if (ns.size() >= 2) {
    // Least-squares slope of log tau against log N.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const double x = std::log(ns[i]), y = std::log(taus[i]);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    ac["loglog_slope"] = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }

  // Curie-Weiss contrast: the balanced class against its two neighbors.
  const int cq = scalar<int>(p, "contrast_q");
  const double cbeta = scalar<double>(p, "contrast_beta");
  if (cq != 2) throw UsageError("contrast_q must be 2");
  std::ostringstream cw;
  cw << "N,beta,balanced_log_weight,left_log_weight,right_log_weight,strict_local_min\n";
  json contrast = json::array();
  for (int n : list_of<int>(p, "contrast_n")) {
    if (n < 2 || n % 2) throw UsageError("contrast_n entries must be even and >= 2");
    Lattice lat;
    check(potts_lattice_create(n, 2, lat.out()), "lattice");
    Dist pi;
    check(potts_stationary_create(lat.get(), cbeta, pi.out()), "stationary");
    auto weight = [&](int a) {
      const int c[2] = {a, n - a};
      std::size_t idx = 0;
      check(potts_lattice_index(lat.get(), c, &idx), "index");
      double w = 0.0;
      check(potts_distribution_log_weight(pi.get(), idx, &w), "log weight");
      return w;
    };
    const double mid = weight(n / 2), left = weight(n / 2 - 1), right = weight(n / 2 + 1);
    const bool strict = left > mid && right > mid;
    cw << n << "," << fmt(cbeta) << "," << fmt(mid) << "," << fmt(left) << "," << fmt(right) << ","
       << strict << "\n";
    contrast.push_back({{"N", n}, {"strict_local_min", strict}});
  }
  emit_text(ctx, "curie_weiss_contrast.csv", cw.str());
  double bc2 = 0.0;
  check(potts_critical_beta(2, &bc2), "critical beta");

  emit_json(ctx, "escape_summary.json",
            json{{"escape", summary},
                 {"autocorrelation", ac},
                 {"curie_weiss", {{"beta", cbeta}, {"critical_beta_q2", bc2}, {"rows", contrast}}}});
  for (const auto& s : summary)
    std::cout << s["mode"].get<std::string>() << " N=" << s["N"] << " beta=" << fmt(s["beta"].get<double>())
              << " median=" << fmt(s["median_escape_sweeps"].get<double>()) << " timeouts=" << s["timeouts"]
              << "\n";
  return 0;
}

int cmd_selftest(const Context& ctx) {
  const bool inject = scalar<bool>(ctx.params, "inject_fault");
  int failures = 0;
  auto cb = [](const char* name, int passed, const char* detail, void*) {
    std::cout << (passed ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
  };
  check(potts_selftest(inject ? 1 : 0, cb, nullptr, &failures), "selftest");
  std::cout << (failures ? "selftest failed: " : "selftest passed: ") << failures << " failing check(s)\n";
  return failures ? 1 : 0;
}

unsigned resolve_threads(long long flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("POTTS_EES_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw UsageError("POTTS_EES_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equi-energy sampler and Metropolis analysis for the mean-field Potts model"};
  app.require_subcommand(1, 1);
  app.fallthrough();  // inherited by subcommands: global flags may follow the subcommand
  std::string config_path;
  std::uint64_t seed = 20240101;
  std::string out_dir = "out";
  long long threads = 0;
  bool inject_fault = false;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (fallback: POTTS_EES_THREADS)")
      ->check(CLI::PositiveNumber);

  const std::vector<std::pair<std::string, int (*)(const Context&)>> commands = {
      {"landscape", cmd_landscape},     {"stationary", cmd_stationary}, {"gap", cmd_gap},
      {"conductance", cmd_conductance}, {"escape", cmd_escape},         {"selftest", cmd_selftest}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands) subs[name] = app.add_subcommand(name);
  subs["landscape"]->description("f landscape grid and local maxima per beta");
  subs["stationary"]->description("exact lumped stationary laws with enumeration oracle");
  subs["gap"]->description("spectral gap and Cheeger sandwich over the N x beta grid");
  subs["conductance"]->description("ball cut conductances, ratios and exponential fits");
  subs["escape"]->description("EES escape times, autocorrelation and q=2 contrast");
  subs["selftest"]->description("small-N oracle suite");
  subs["selftest"]->add_flag("--inject-fault", inject_fault, "corrupt one kernel row first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string command;
  int (*run)(const Context&) = nullptr;
  for (const auto& [name, fn] : commands)
    if (subs[name]->parsed()) {
      command = name;
      run = fn;
    }

  try {
    Context ctx;
    ctx.command = command;
    ctx.params = load_config(command, config_path);
    if (!seed_opt->count() && ctx.params.contains("seed")) seed = ctx.params["seed"].get<std::uint64_t>();
    if (!out_opt->count() && ctx.params.contains("out")) out_dir = ctx.params["out"].get<std::string>();
    if (threads <= 0 && ctx.params.contains("threads")) threads = ctx.params["threads"].get<long long>();
    ctx.params.erase("seed");
    ctx.params.erase("out");
    ctx.params.erase("threads");
    if (command == "selftest" && inject_fault) ctx.params["inject_fault"] = true;
    validate_common(ctx.params);
    ctx.seed = seed;
    ctx.threads = resolve_threads(threads);
    ctx.out = out_dir;
    if (command != "selftest") fs::create_directories(ctx.out);
    return run(ctx);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ApiError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.status == POTTS_ERR_INVALID_ARGUMENT ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
