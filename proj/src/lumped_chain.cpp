#include "potts_ees/lumped_chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "potts_ees/error.hpp"

namespace potts {

namespace {

std::vector<KernelEntry> finish_row(std::vector<KernelEntry> row, std::size_t diag) {
  std::sort(row.begin(), row.end(),
            [](const KernelEntry& a, const KernelEntry& b) { return a.col < b.col; });
  std::vector<KernelEntry> merged;
  merged.reserve(row.size() + 1);
  double off = 0.0;
  for (const auto& e : row) {
    if (e.col == diag) continue;
    if (!merged.empty() && merged.back().col == e.col) {
      merged.back().p += e.p;
    } else {
      merged.push_back(e);
    }
    off += e.p;
  }
  const auto pos = std::lower_bound(
      merged.begin(), merged.end(), diag,
      [](const KernelEntry& e, std::size_t c) { return e.col < c; });
  merged.insert(pos, KernelEntry{static_cast<std::uint32_t>(diag), 1.0 - off});
  return merged;
}

struct CsrBuilder {
  std::vector<std::size_t> row_ptr{0};
  std::vector<KernelEntry> entries;

  void push(const std::vector<KernelEntry>& row) {
    entries.insert(entries.end(), row.begin(), row.end());
    row_ptr.push_back(entries.size());
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// SimplexLattice

SimplexLattice::SimplexLattice(int n, int q) : n_(n), q_(q) {
  require(n >= 1, "N must be >= 1");
  require(q >= 2, "q must be >= 2");

  // C(N+q-1, q-1) with overflow detection.
  unsigned __int128 total = 1;
  for (int k = 1; k <= q - 1; ++k) {
    total = total * static_cast<unsigned __int128>(n + k) / k;
    if (total > std::numeric_limits<std::int32_t>::max()) {
      fail(ErrorKind::out_of_range, "lattice size exceeds the 32-bit index range");
    }
  }
  size_ = static_cast<std::size_t>(total);

  const int rows = n + q + 1;
  binom_.assign(static_cast<std::size_t>(rows) * (q + 1), 0);
  for (int r = 0; r < rows; ++r) {
    binom_[static_cast<std::size_t>(r) * (q + 1)] = 1;
    for (int k = 1; k <= std::min(r, q); ++k) {
      binom_[static_cast<std::size_t>(r) * (q + 1) + k] =
          binom_[static_cast<std::size_t>(r - 1) * (q + 1) + k - 1] +
          (k <= r - 1 ? binom_[static_cast<std::size_t>(r - 1) * (q + 1) + k] : 0);
    }
  }

  counts_.reserve(size_ * static_cast<std::size_t>(q));
  std::vector<int> current(static_cast<std::size_t>(q), 0);
  // Odometer over compositions in lexicographic order.
  auto emit = [&]() { counts_.insert(counts_.end(), current.begin(), current.end()); };
  auto fill = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == q - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      emit();
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      current[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  fill(fill, 0, n);

  sum_sq_.resize(size_);
  log_size_.resize(size_);
  const double lgn = std::lgamma(n + 1.0);
  const double sym = 1.0 / q;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size_; ++i) {
    const auto c = counts(i);
    std::int64_t s = 0;
    double lg = lgn;
    double dist = 0.0;
    for (int v : c) {
      s += static_cast<std::int64_t>(v) * v;
      lg -= std::lgamma(v + 1.0);
      dist += std::abs(static_cast<double>(v) / n - sym);
    }
    sum_sq_[i] = s;
    log_size_[i] = lg;
    if (dist < best - 1e-15) {
      best = dist;
      balanced_ = i;
    }
  }
}

std::uint64_t SimplexLattice::binom(int r, int k) const {
  if (k < 0 || r < 0 || k > r) return 0;
  return binom_[static_cast<std::size_t>(r) * (q_ + 1) + k];
}

ColorCount SimplexLattice::color_count(std::size_t index) const {
  const auto c = counts(index);
  return ColorCount(std::vector<int>(c.begin(), c.end()));
}

std::size_t SimplexLattice::index_of(std::span<const int> c) const {
  require(static_cast<int>(c.size()) == q_, "count vector has wrong length");
  int remaining = n_;
  std::uint64_t rank = 0;
  for (int i = 0; i + 1 < q_; ++i) {
    const int v = c[static_cast<std::size_t>(i)];
    require(v >= 0 && v <= remaining, "count vector does not sum to N");
    const int k = q_ - i - 1;
    rank += binom(remaining + k, k) - binom(remaining - v + k, k);
    remaining -= v;
  }
  require(c.back() == remaining, "count vector does not sum to N");
  return static_cast<std::size_t>(rank);
}

double SimplexLattice::l1_distance(std::size_t index, std::span<const double> center) const {
  const auto c = counts(index);
  double d = 0.0;
  for (int i = 0; i < q_; ++i)
    d += std::abs(static_cast<double>(c[static_cast<std::size_t>(i)]) / n_ -
                  center[static_cast<std::size_t>(i)]);
  return d;
}

LatticePtr enumerate_lattice(int n, int q) {
  return std::make_shared<const SimplexLattice>(n, q);
}

double log_class_size(const ColorCount& n) {
  double lg = std::lgamma(n.total() + 1.0);
  for (int v : n.counts()) lg -= std::lgamma(v + 1.0);
  return lg;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double v : values) s += std::exp(v - top);
  return top + std::log(s);
}

// ---------------------------------------------------------------------------
// LumpedDistribution

LumpedDistribution::LumpedDistribution(LatticePtr lattice, std::vector<double> log_weights)
    : lattice_(std::move(lattice)), log_weights_(std::move(log_weights)) {
  require(!log_weights_.empty(), "distribution needs at least one state");
  if (lattice_) require(lattice_->size() == log_weights_.size(), "log-weights do not match lattice");
  log_normalizer_ = log_sum_exp(log_weights_);
  require(std::isfinite(log_normalizer_), "distribution has no finite mass");
}

double LumpedDistribution::probability(std::size_t i) const {
  return std::exp(log_probability(i));
}

std::vector<double> LumpedDistribution::probabilities() const {
  std::vector<double> p(log_weights_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = probability(i);
  return p;
}

LumpedDistribution stationary_distribution(const LatticePtr& lattice, double beta) {
  require(lattice != nullptr, "lattice is null");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
  std::vector<double> lw(lattice->size());
  for (std::size_t i = 0; i < lw.size(); ++i)
    lw[i] = lattice->log_class_size(i) + beta * lattice->energy(i);
  return LumpedDistribution(lattice, std::move(lw));
}

// ---------------------------------------------------------------------------
// Bands and ladder

EnergyBands::EnergyBands(int n, int q, int m) : n_(n), q_(q), m_(m) {
  require(n >= 1 && q >= 2, "invalid model size");
  require(m >= 1, "number of energy bands must be >= 1");
}

EnergyBands EnergyBands::with_density(int n, int q, double d) {
  require(d > 0.0 && std::isfinite(d), "band density d must be positive");
  const double dn = d * n;
  const long long m = std::llround(dn);
  require(m >= 1 && std::abs(dn - static_cast<double>(m)) <= 1e-9 * std::max(1.0, dn),
          "d * N must be a positive integer");
  return EnergyBands(n, q, static_cast<int>(m));
}

double EnergyBands::h(int k) const { return 0.5 * n_ / q_ + k * width(); }

double EnergyBands::width() const { return (0.5 * n_ - 0.5 * n_ / q_) / m_; }

int EnergyBands::band_of(std::int64_t s) const {
  const std::int64_t n2 = static_cast<std::int64_t>(n_) * n_;
  const std::int64_t num = static_cast<std::int64_t>(m_) * (q_ * s - n2);
  const std::int64_t den = n2 * (q_ - 1);
  if (num < 0 || s > n2) fail(ErrorKind::out_of_range, "energy outside [h_0, h_M]");
  const std::int64_t k = (num + den - 1) / den;
  return static_cast<int>(std::max<std::int64_t>(1, k));
}

int EnergyBands::band_index(double energy) const {
  const double lo = h(0);
  const double hi = 0.5 * n_;
  const double slack = 1e-12 * hi;
  if (!(energy >= lo - slack && energy <= hi + slack)) {
    fail(ErrorKind::out_of_range, "energy outside [h_0, h_M]");
  }
  const double t = (energy - lo) / width();
  const int k = static_cast<int>(std::ceil(t - 1e-9));
  return std::clamp(k, 1, m_);
}

TemperatureLadder::TemperatureLadder(double beta, int m) {
  require(m >= 1, "ladder needs M >= 1");
  require(std::isfinite(beta) && beta > 0.0, "target beta must be positive");
  betas_.resize(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) betas_[static_cast<std::size_t>(i)] = i * beta / m;
  betas_.back() = beta;
}

// ---------------------------------------------------------------------------
// BandRecord

BandRecord::BandRecord(LatticePtr lattice, EnergyBands bands, int levels)
    : lattice_(std::move(lattice)), bands_(bands), levels_(levels) {
  require(lattice_ != nullptr, "lattice is null");
  require(levels >= 1, "record needs at least one level");
  require(bands_.n() == lattice_->n() && bands_.q() == lattice_->q(),
          "bands and lattice disagree on N or q");
  const std::size_t size = lattice_->size();
  cells_.resize(static_cast<std::size_t>(levels) * bands_.m());
  present_.assign(static_cast<std::size_t>(levels) * size, 0);
  class_band_.resize(size);
  std::vector<double> band_max(static_cast<std::size_t>(bands_.m()) + 1,
                               -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < size; ++i) {
    class_band_[i] = bands_.band_of(lattice_->sum_of_squares(i));
    auto& mx = band_max[static_cast<std::size_t>(class_band_[i])];
    mx = std::max(mx, lattice_->log_class_size(i));
  }
  relative_size_.resize(size);
  for (std::size_t i = 0; i < size; ++i)
    relative_size_[i] = std::exp(lattice_->log_class_size(i) -
                                 band_max[static_cast<std::size_t>(class_band_[i])]);
}

bool BandRecord::insert(int level, std::size_t class_index) {
  require(level >= 0 && level < levels_, "record level out of range");
  require(class_index < lattice_->size(), "class index out of range");
  auto& flag = present_[static_cast<std::size_t>(level) * lattice_->size() + class_index];
  if (flag) return false;
  flag = 1;
  auto& cell = cells_[cell_id(level, class_band_[class_index])];
  const double prev = cell.cumulative.empty() ? 0.0 : cell.cumulative.back();
  cell.classes.push_back(static_cast<std::uint32_t>(class_index));
  cell.cumulative.push_back(prev + relative_size_[class_index]);
  ++entries_;
  return true;
}

bool BandRecord::contains(int level, std::size_t class_index) const {
  return present_[static_cast<std::size_t>(level) * lattice_->size() + class_index] != 0;
}

std::uint32_t BandRecord::sample(int level, int band, double u) const {
  const auto& cell = cells_[cell_id(level, band)];
  const double target = u * cell.cumulative.back();
  auto it = std::upper_bound(cell.cumulative.begin(), cell.cumulative.end(), target);
  std::size_t pos = static_cast<std::size_t>(it - cell.cumulative.begin());
  if (pos >= cell.classes.size()) pos = cell.classes.size() - 1;
  return cell.classes[pos];
}

BandRecord populate_m0(const LatticePtr& lattice, const EnergyBands& bands, int levels) {
  BandRecord record(lattice, bands, levels);
  for (int level = 0; level < levels; ++level)
    for (std::size_t i = 0; i < lattice->size(); ++i) record.insert(level, i);
  return record;
}

// ---------------------------------------------------------------------------
// Kernels

LumpedKernel::LumpedKernel(LatticePtr lattice, KernelKind kind, double beta_hi,
                           double beta_lo, std::vector<std::size_t> row_ptr,
                           std::vector<KernelEntry> entries)
    : lattice_(std::move(lattice)),
      kind_(kind),
      beta_hi_(beta_hi),
      beta_lo_(beta_lo),
      row_ptr_(std::move(row_ptr)),
      entries_(std::move(entries)) {
  require(row_ptr_.size() >= 2 && row_ptr_.front() == 0 && row_ptr_.back() == entries_.size(),
          "malformed CSR structure");
  if (lattice_) require(lattice_->size() == size(), "kernel does not match lattice");
}

LumpedKernel LumpedKernel::from_rows(const std::vector<std::vector<KernelEntry>>& rows) {
  CsrBuilder b;
  for (const auto& r : rows) {
    for (const auto& e : r) require(e.col < rows.size(), "kernel column out of range");
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end(),
              [](const KernelEntry& x, const KernelEntry& y) { return x.col < y.col; });
    b.push(sorted);
  }
  return LumpedKernel(nullptr, KernelKind::generic, 0.0, 0.0, std::move(b.row_ptr),
                      std::move(b.entries));
}

double LumpedKernel::at(std::size_t i, std::size_t j) const {
  const auto r = row(i);
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const KernelEntry& e, std::size_t c) { return e.col < c; });
  return (it != r.end() && it->col == j) ? it->p : 0.0;
}

void LumpedKernel::corrupt_entry(std::size_t row_index, std::size_t slot, double p) {
  require(row_index < size(), "row out of range");
  require(slot < row_ptr_[row_index + 1] - row_ptr_[row_index], "slot out of range");
  entries_[row_ptr_[row_index] + slot].p = p;
}

LumpedKernel metropolis_kernel(const LatticePtr& lattice, double beta) {
  require(lattice != nullptr, "lattice is null");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
  const int n = lattice->n();
  const int q = lattice->q();
  const double proposal_scale = 1.0 / (2.0 * n * (q - 1));
  CsrBuilder b;
  std::vector<int> target(static_cast<std::size_t>(q));
  std::vector<KernelEntry> row;
  for (std::size_t i = 0; i < lattice->size(); ++i) {
    const auto c = lattice->counts(i);
    row.clear();
    for (int from = 0; from < q; ++from) {
      const int nf = c[static_cast<std::size_t>(from)];
      if (nf == 0) continue;
      for (int to = 0; to < q; ++to) {
        if (to == from) continue;
        const int nt = c[static_cast<std::size_t>(to)];
        const double dh = static_cast<double>(nt - nf + 1) / n;
        const double accept = dh >= 0.0 ? 1.0 : std::exp(beta * dh);
        std::copy(c.begin(), c.end(), target.begin());
        --target[static_cast<std::size_t>(from)];
        ++target[static_cast<std::size_t>(to)];
        row.push_back({static_cast<std::uint32_t>(lattice->index_of(target)),
                       nf * proposal_scale * accept});
      }
    }
    b.push(finish_row(row, i));
  }
  return LumpedKernel(lattice, KernelKind::metropolis, beta, beta, std::move(b.row_ptr),
                      std::move(b.entries));
}

LumpedKernel ee_jump_kernel(const LatticePtr& lattice, const EnergyBands& bands,
                            double beta_hi, double beta_lo, const BandRecord& record,
                            int level) {
  require(lattice != nullptr, "lattice is null");
  require(beta_hi > beta_lo && beta_lo >= 0.0, "need beta_hi > beta_lo >= 0");
  require(level >= 1 && level < record.levels(), "jump level must be in 1..M");
  require(record.lattice().get() == lattice.get() || record.lattice()->size() == lattice->size(),
          "record belongs to a different lattice");
  require(bands.m() == record.bands(), "bands disagree with record");

  const int n = lattice->n();
  const double dbeta = beta_hi - beta_lo;
  // log of the total recorded class size per band, at level - 1.
  std::vector<double> log_total(static_cast<std::size_t>(bands.m()) + 1,
                                -std::numeric_limits<double>::infinity());
  std::vector<double> scratch;
  for (int k = 1; k <= bands.m(); ++k) {
    const auto cell = record.cell(level - 1, k);
    scratch.clear();
    for (auto cls : cell) scratch.push_back(lattice->log_class_size(cls));
    log_total[static_cast<std::size_t>(k)] = log_sum_exp(scratch);
  }

  CsrBuilder b;
  std::vector<KernelEntry> row;
  for (std::size_t i = 0; i < lattice->size(); ++i) {
    row.clear();
    const int k = bands.band_of(lattice->sum_of_squares(i));
    const auto cell = record.cell(level - 1, k);
    const double norm = log_total[static_cast<std::size_t>(k)];
    for (auto t : cell) {
      if (t == i) continue;
      const double dh =
          static_cast<double>(lattice->sum_of_squares(t) - lattice->sum_of_squares(i)) /
          (2.0 * n);
      const double accept = dh >= 0.0 ? 1.0 : std::exp(dbeta * dh);
      row.push_back({t, std::exp(lattice->log_class_size(t) - norm) * accept});
    }
    b.push(finish_row(row, i));
  }
  return LumpedKernel(lattice, KernelKind::ee_jump, beta_hi, beta_lo, std::move(b.row_ptr),
                      std::move(b.entries));
}

LumpedKernel ee_jump_kernel_m0(const LatticePtr& lattice, const EnergyBands& bands,
                               double beta_hi, double beta_lo) {
  const BandRecord record = populate_m0(lattice, bands, 2);
  return ee_jump_kernel(lattice, bands, beta_hi, beta_lo, record, 1);
}

StochasticityReport check_stochastic(const LumpedKernel& kernel) {
  StochasticityReport rep;
  rep.min_entry = std::numeric_limits<double>::infinity();
  rep.max_entry = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    double s = 0.0;
    for (const auto& e : kernel.row(i)) {
      s += e.p;
      rep.min_entry = std::min(rep.min_entry, e.p);
      rep.max_entry = std::max(rep.max_entry, e.p);
    }
    const double err = std::abs(s - 1.0);
    if (err > rep.max_row_error) {
      rep.max_row_error = err;
      rep.worst_row = i;
    }
  }
  return rep;
}

double detailed_balance_error(const LumpedKernel& kernel, const LumpedDistribution& pi) {
  require(kernel.size() == pi.size(), "kernel and distribution sizes differ");
  double worst = 0.0;
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    const double px = pi.probability(x);
    for (const auto& e : kernel.row(x)) {
      if (e.col == x) continue;
      const double forward = px * e.p;
      const double backward = pi.probability(e.col) * kernel.at(e.col, x);
      worst = std::max(worst, std::abs(forward - backward));
    }
  }
  return worst;
}

}  // namespace potts
