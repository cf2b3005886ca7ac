#pragma once

#include <string>
#include <string_view>

namespace topicforge {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Shortest decimal text that parses back to the same value.
std::string format_double(double value);
std::string format_float(float value);

// Strict full-string numeric parse; throws Error naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text);

}  // namespace topicforge
