#pragma once

#include "icaclf/config.hpp"

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace icaclf::inline ICACLF_ABI {

/// Exit codes: 0 success, 1 runtime error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Built-in defaults of every configurable value.
nlohmann::json default_run_config();

/// Applies "a.b.c=value"; the value is parsed as JSON when possible and kept
/// as a string otherwise. Throws ConfigError for a malformed override.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace icaclf
