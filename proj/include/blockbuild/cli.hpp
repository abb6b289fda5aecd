#pragma once

#include <string>
#include <vector>

namespace blockbuild {

/// Full pipeline entry point. args excludes the program name.
/// Exit codes: 0 success, 1 usage error, 2 data/validation error,
/// 3 numeric failure.
int cli_run(const std::vector<std::string>& args);

} // namespace blockbuild
