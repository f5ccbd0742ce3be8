// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace ramp::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kCheckFailed = 3 };

/// Entry point behind the `ramp` executable; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ramp::cli
