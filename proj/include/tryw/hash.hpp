#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tryw {

// Lower-case hex SHA-256 digests.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace tryw
