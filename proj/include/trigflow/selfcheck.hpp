// Numerical identity suite shared by the `selfcheck` CLI subcommand and the
// test binaries: autodiff vs finite differences, the tangent decomposition,
// the JVP rearrangement, the gradient-conversion identity, streaming vs dense
// attention, the discrete-tangent quotient and schedule equivalence.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trigflow {

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;     // measured error / statistic
    double threshold = 0.0; // pass iff value < threshold
};

std::vector<CheckResult> run_selfchecks(uint64_t seed);

} // namespace trigflow
