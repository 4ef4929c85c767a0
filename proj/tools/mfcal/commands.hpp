#pragma once

#include <functional>
#include <string>
#include <vector>

#include "config.hpp"

namespace mfcal::cli {

/// A command is prepared (config read and validated, inputs loaded) and
/// then run. Errors while preparing map to exit code 2, errors while
/// running to exit code 1.
using Job = std::function<void()>;
using Prepare = std::function<Job(RunContext&)>;

const std::vector<std::pair<std::string, Prepare>>& commands();

/// Extra positional arguments (used by `report`).
void set_positional(std::vector<std::string> args);

}  // namespace mfcal::cli
