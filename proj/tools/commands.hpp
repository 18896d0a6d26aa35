#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dropkit::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kRuntimeError = 2,
    kSelfTestFailure = 3,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dropkit::cli
