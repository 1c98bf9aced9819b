#include "potts_ees/spin_reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "potts_ees/error.hpp"

namespace potts::reference {

std::uint64_t configuration_count(int n, int q) {
  require(n >= 1 && q >= 2, "invalid model size");
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) {
    require(total <= (std::uint64_t{1} << 40) / static_cast<std::uint64_t>(q),
            "configuration space too large for brute force");
    total *= static_cast<std::uint64_t>(q);
  }
  return total;
}

SpinConfiguration decode(std::uint64_t code, int n, int q) {
  SpinConfiguration s;
  s.colors.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    s.colors[static_cast<std::size_t>(i)] = static_cast<int>(code % static_cast<std::uint64_t>(q));
    code /= static_cast<std::uint64_t>(q);
  }
  return s;
}

std::int64_t pair_count(const SpinConfiguration& sigma) {
  std::int64_t c = 0;
  for (int a : sigma.colors)
    for (int b : sigma.colors) c += (a == b);
  return c;
}

double pair_sum_energy(const SpinConfiguration& sigma) {
  return static_cast<double>(pair_count(sigma)) / (2.0 * sigma.size());
}

std::vector<double> class_probabilities(const SimplexLattice& lattice, double beta) {
  const int n = lattice.n();
  const int q = lattice.q();
  const std::uint64_t total = configuration_count(n, q);
  // Two passes: the first finds the largest exponent.
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint64_t code = 0; code < total; ++code)
    top = std::max(top, beta * pair_sum_energy(decode(code, n, q)));
  std::vector<double> mass(lattice.size(), 0.0);
  double z = 0.0;
  for (std::uint64_t code = 0; code < total; ++code) {
    const auto sigma = decode(code, n, q);
    const double w = std::exp(beta * pair_sum_energy(sigma) - top);
    mass[lattice.index_of(magnetization(sigma, q).counts())] += w;
    z += w;
  }
  for (double& m : mass) m /= z;
  return mass;
}

DenseMatrix spin_metropolis_matrix(int n, int q, double beta) {
  const std::uint64_t total = configuration_count(n, q);
  DenseMatrix m{static_cast<std::size_t>(total),
                std::vector<double>(static_cast<std::size_t>(total * total), 0.0)};
  const double k = 1.0 / (2.0 * n * (q - 1));
  std::vector<double> energy(static_cast<std::size_t>(total));
  for (std::uint64_t c = 0; c < total; ++c) energy[c] = pair_sum_energy(decode(c, n, q));
  for (std::uint64_t x = 0; x < total; ++x) {
    const auto sigma = decode(x, n, q);
    double off = 0.0;
    std::uint64_t place = 1;
    for (int site = 0; site < n; ++site, place *= static_cast<std::uint64_t>(q)) {
      const int from = sigma.colors[static_cast<std::size_t>(site)];
      for (int to = 0; to < q; ++to) {
        if (to == from) continue;
        const std::uint64_t y = x + (static_cast<std::uint64_t>(to) - static_cast<std::uint64_t>(from)) * place;
        const double p = energy[y] >= energy[x] ? k : k * std::exp(beta * (energy[y] - energy[x]));
        m(x, y) = p;
        off += p;
      }
    }
    m(x, x) = 1.0 - off;
  }
  return m;
}

DenseMatrix spin_ee_jump_matrix_m0(int n, int q, const EnergyBands& bands, double beta_hi,
                                   double beta_lo) {
  const std::uint64_t total = configuration_count(n, q);
  DenseMatrix m{static_cast<std::size_t>(total),
                std::vector<double>(static_cast<std::size_t>(total * total), 0.0)};
  std::vector<double> energy(static_cast<std::size_t>(total));
  std::vector<int> band(static_cast<std::size_t>(total));
  std::vector<std::vector<std::uint64_t>> members(static_cast<std::size_t>(bands.m()) + 1);
  for (std::uint64_t c = 0; c < total; ++c) {
    const auto sigma = decode(c, n, q);
    energy[c] = pair_sum_energy(sigma);
    band[c] = bands.band_of(pair_count(sigma));
    members[static_cast<std::size_t>(band[c])].push_back(c);
  }
  for (std::uint64_t x = 0; x < total; ++x) {
    const auto& same = members[static_cast<std::size_t>(band[x])];
    const double uniform = 1.0 / static_cast<double>(same.size());
    double off = 0.0;
    for (std::uint64_t y : same) {
      if (y == x) continue;
      // pi_hi(y) pi_lo(x) / (pi_hi(x) pi_lo(y)) written out from the weights.
      const double ratio = std::exp(beta_hi * energy[y] + beta_lo * energy[x] -
                                    beta_hi * energy[x] - beta_lo * energy[y]);
      const double p = uniform * std::min(1.0, ratio);
      m(x, y) = p;
      off += p;
    }
    m(x, x) = 1.0 - off;
  }
  return m;
}

Projection project(const DenseMatrix& spin, const SimplexLattice& lattice) {
  const int n = lattice.n();
  const int q = lattice.q();
  const std::size_t l = lattice.size();
  std::vector<std::size_t> cls(spin.dim);
  for (std::size_t c = 0; c < spin.dim; ++c)
    cls[c] = lattice.index_of(magnetization(decode(c, n, q), q).counts());

  Projection out;
  out.lumped = DenseMatrix{l, std::vector<double>(l * l, 0.0)};
  std::vector<bool> seen(l, false);
  std::vector<double> row(l);
  for (std::size_t x = 0; x < spin.dim; ++x) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t y = 0; y < spin.dim; ++y) row[cls[y]] += spin(x, y);
    const std::size_t a = cls[x];
    if (!seen[a]) {
      seen[a] = true;
      for (std::size_t b = 0; b < l; ++b) out.lumped(a, b) = row[b];
    } else {
      for (std::size_t b = 0; b < l; ++b)
        out.lumpability_error = std::max(out.lumpability_error, std::abs(out.lumped(a, b) - row[b]));
    }
  }
  return out;
}

}  // namespace potts::reference
