#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

namespace crt {

// Lowercase hex SHA-256; used to pin backbone weight files in configs so a
// report always names the exact weights that produced it.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace crt
