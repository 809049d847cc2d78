#pragma once

namespace moranfilt::cli {

/// Entry point of the `moranfilt` command. Returns the process exit code:
/// 0 on success, 2 on usage or validation errors, 3 on numerical failures.
int run(int argc, char** argv);

}  // namespace moranfilt::cli
