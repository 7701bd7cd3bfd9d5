#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace recon {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumerical = 3 };

/// Entry point shared by the executable and tests. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes or of a string.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

/// UTC ISO-8601 timestamp; honors SOURCE_DATE_EPOCH for reproducible builds of outputs.
std::string run_timestamp();

}  // namespace recon
