#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sizer::kv {

using Pairs = std::vector<std::pair<std::string, std::string>>;

// Splits a line of whitespace-separated `key=value` tokens. `#` starts a
// comment. Throws Error{format} on a token without '='.
Pairs parse_line(std::string_view line, int line_no = 0);

// One `key=value` per line; later keys override earlier ones.
std::map<std::string, std::string> read_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

double parse_double(std::string_view text, std::string_view what);

}  // namespace sizer::kv
