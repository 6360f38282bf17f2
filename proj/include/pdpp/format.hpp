#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pdpp {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Whole-string parses; false on any trailing or missing characters.
bool parse_double(std::string_view s, double& out);
bool parse_size(std::string_view s, std::size_t& out);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, std::string_view sep);

}  // namespace pdpp
