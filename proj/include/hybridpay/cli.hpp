#pragma once

#include <iosfwd>

namespace hybridpay::cli {

/// Process exit codes.
enum Exit : int {
    Ok = 0,
    Internal = 1,
    BadInput = 2,
    Violations = 3,
    GridTooLarge = 4,
};

/// Runs the command line against the given streams; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hybridpay::cli
