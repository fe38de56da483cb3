#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cacaotk {

using Json = nlohmann::json;
// Key-order-preserving variant; the model and validator work on this so that
// issue ordering and round-trip serialization follow document order.
using OrderedJson = nlohmann::ordered_json;

// Exact arithmetic for the averaged metrics and cost accounting.
using Rational = boost::rational<long long>;

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercased, trimmed, inner whitespace runs collapsed to single spaces.
// Used for GED node attributes.
std::string normalize_name(std::string_view s);

// Hex-encoded SHA-256.
std::string sha256_hex(std::string_view data);

// Decodes UTF-8 into code points; invalid sequences decode to U+FFFD.
std::vector<char32_t> utf8_decode(std::string_view s);

// Parses a plain decimal literal ("0.15", "-2", "3.50") exactly.
Rational decimal_to_rational(std::string_view text);

// Fixed-point rendering with the given number of fractional digits,
// round-half-up away from zero.
std::string rational_to_decimal(const Rational& r, int places);

bool is_rfc3339_utc(std::string_view s);

// "2024-05-01T12:00:00.000Z" style: millisecond precision, Z suffix.
std::string format_rfc3339_ms(std::int64_t unix_millis);

std::vector<std::string> split(std::string_view s, char sep);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace cacaotk
