#pragma once

// Run manifest: content hashes of inputs and outputs, seed, versions.

#include "json.hpp"

#include <cstdint>
#include <string>

namespace modaff::cli {

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Library and toolchain versions recorded in every manifest.
nlohmann::json version_info();

}  // namespace modaff::cli
