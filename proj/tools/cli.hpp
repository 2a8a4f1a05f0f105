// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sparsedist::cli {

/// Runs one command line (without the program name). Exit codes: 0 on
/// success, 2 on a usage or input-format error, 1 when a numerical module
/// fails. Errors are written to err as JSON {code, message, context}.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace sparsedist::cli
