#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vtfeed::text {

/// Splits on a single character; keeps empty fields.
std::vector<std::string_view> split(std::string_view s, char sep);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool is_hex(std::string_view s);

/// Trimmed copy with tabs, newlines and other control characters replaced by spaces,
/// so the value can live inside one TSV field. Empty result maps to nullopt.
std::optional<std::string> clean_field(std::string_view s);

/// Parses a base-10 signed integer occupying the whole string.
std::optional<std::int64_t> parse_int(std::string_view s);

/// Formats with fixed precision, dropping nothing (for stable byte-for-byte outputs).
std::string fixed(double v, int digits = 6);

}  // namespace vtfeed::text
