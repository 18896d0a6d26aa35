#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dropkit {

struct CheckResult {
    std::string name;
    bool passed = false;
    /// Largest error observed against the check's tolerance.
    double worst = 0.0;
    double tolerance = 0.0;
};

struct SelfCheckOptions {
    std::uint64_t seed = 0;
    std::size_t draws = 20;
    /// Test hook: corrupts the analytic gradient so the gradient checks fail.
    bool inject_fault = false;
};

/// Gradient, Hessian-vector and CG checks on small random problems for every
/// model kind.
std::vector<CheckResult> run_self_checks(const SelfCheckOptions& options = {});

}  // namespace dropkit
