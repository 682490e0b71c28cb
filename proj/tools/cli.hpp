#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace ppm::cli {

/// Runs one command line (without the program name), e.g.
/// {"train", "--config", "run.json", "--seed", "3"}. Returns the process
/// exit code: 0 success, 1 usage/config error, 2 data error, 3 numeric
/// failure.
int run(const std::vector<std::string>& args);

/// Built-in defaults for every configuration key.
nlohmann::json default_config();

}  // namespace ppm::cli
