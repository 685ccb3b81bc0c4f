#pragma once

namespace genefield::cli {

// Entry point behind the genefield binary. Exit codes: 0 success, 1 runtime
// error, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace genefield::cli
