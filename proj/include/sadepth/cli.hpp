#pragma once

#include <string>
#include <vector>

namespace sadepth::cli {

/// Entry point behind main(). Returns the process exit code:
/// 0 success, 1 validation failure, 2 usage error.
int run(const std::vector<std::string>& args);

} // namespace sadepth::cli
