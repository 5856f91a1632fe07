#pragma once

#include <string>
#include <vector>

namespace sadepth::gradsuite {

struct SuiteEntry {
    std::string name;
    double max_rel_err = 0;
    double tolerance = 0;
    bool pass = false;
};

/// Finite-difference checks (step 1e-4, double precision) for every
/// differentiable kernel and for the assembled training objective, on tiny
/// instances. Kernel entries use tolerance 1e-4, the assembled loss 1e-3.
std::vector<SuiteEntry> run(uint64_t seed = 7);

bool all_pass(const std::vector<SuiteEntry>& entries);

} // namespace sadepth::gradsuite
