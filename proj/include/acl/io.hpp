#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace acl {
namespace io {

// Shortest decimal form that parses back to the same 64-bit float.
std::string fmt_double(double x);

// Strict full-string parse; Err::DataError with `what` context on failure.
double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

}  // namespace io
}  // namespace acl
