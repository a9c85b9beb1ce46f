#pragma once

#include <string>
#include <vector>

#include "artifacts.hpp"

namespace ubpod::cli {

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage. Returns the process exit code for outcomes that are not
/// exceptions (an oracle comparison outside tolerance returns 3).
int run_stage(const std::string& stage, const RunOptions& options);

}  // namespace ubpod::cli
