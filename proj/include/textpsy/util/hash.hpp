#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace textpsy {

// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

std::string sha256_file(const std::filesystem::path& path);

// First eight digest bytes, little-endian; used to derive RNG seeds from strings.
std::uint64_t hash64(std::string_view bytes);

}  // namespace textpsy
