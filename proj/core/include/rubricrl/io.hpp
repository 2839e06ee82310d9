#ifndef RUBRICRL_IO_HPP_
#define RUBRICRL_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

namespace rubricrl {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace rubricrl

#endif  // RUBRICRL_IO_HPP_
