#pragma once

#include <cstdlib>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsdec/error.hpp"

namespace rsdec::cli {

// 0 success, 1 configuration or usage error, 2 violated assumption,
// 3 runtime failure during simulation or quadrature.
int exit_code_for(ErrorKind kind) noexcept;

// Entry point shared by main() and the tests. args excludes the program
// name. env_seed is the RSDEC_SEED value, if any; --seed beats it and it
// beats the config file.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const char* env_seed = std::getenv("RSDEC_SEED"));

}  // namespace rsdec::cli
