#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vesper {

/// 6 significant digits, round-half-even on the exact binary value, "-0"
/// normalized to "0". Non-finite values render as an empty field.
std::string format_float(double v);
std::string format_float(std::optional<double> v);

/// Quotes a field when it contains a comma, quote, or newline.
std::string csv_field(std::string_view s);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace vesper
