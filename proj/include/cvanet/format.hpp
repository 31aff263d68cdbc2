#pragma once

#include <string>
#include <string_view>

namespace cvanet {

/// Appends the shortest decimal text that round-trips to `value`.
/// Negative zero is written as "0".
void append_number(std::string& out, double value);

std::string format_number(double value);

/// Appends `text` as a JSON string literal, quotes included.
void append_json_string(std::string& out, std::string_view text);

}  // namespace cvanet
