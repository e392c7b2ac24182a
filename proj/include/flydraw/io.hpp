#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace flydraw::io {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double x);

// Throws FormatError on anything that is not a complete number.
double parse_double(std::string_view text);
long parse_long(std::string_view text);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);

// key=value tokens of a header line such as "# rate=7 source=drawn".
std::string header_value(std::string_view header, std::string_view key);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace flydraw::io
