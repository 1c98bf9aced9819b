#pragma once

#include <string>
#include <vector>

namespace potts {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  // Corrupts one Metropolis kernel row before validation (fault injection).
  bool inject_row_fault = false;
};

// Small-N oracle suite: stationary law and kernels against brute-force spin
// enumeration, row-stochasticity, detailed balance, band locality, the
// Cheeger sandwich and the free-energy structure.
std::vector<SelftestCheck> run_selftest(const SelftestOptions& options = {});

}  // namespace potts
