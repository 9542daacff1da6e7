#pragma once

#include <ostream>

namespace ppgscreen {

/// Entry point of the `ppgscreen` tool. Returns the process exit code:
///   0 success, 2 unreadable input, 3 too little data, 4 anything else.
/// On failure a JSON error record goes to `err` and, when --out is known,
/// to <out>/error.json.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ppgscreen
