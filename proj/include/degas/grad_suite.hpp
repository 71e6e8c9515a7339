#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "degas/op_params.hpp"

namespace degas {

/// Results of one suite entry over all seeds.
struct SuiteResult {
  std::string name;
  std::vector<GradCheckReport> runs;  // one per seed
  double max_rel_error = 0.0;
  bool pass = true;
};

/// Every primitive kind, the α-gradients of a mixed edge, and the
/// reconstruction loss, each checked on `seeds` seeds (first_seed, ...).
std::vector<SuiteResult> gradient_suite(std::size_t seeds, double tolerance, std::uint64_t first_seed = 1,
                                        double h = 1e-5);

}  // namespace degas
