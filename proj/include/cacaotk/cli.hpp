#pragma once

namespace cacaotk::cli {

// Entry point behind the `cacaotk` binary. Exit codes: 0 success/clean,
// 1 validation-or-score failure, 2 usage error, 3 backend error.
int run(int argc, const char* const* argv);

}  // namespace cacaotk::cli
