#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracklens {

std::string to_lower_ascii(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::string_view trim(std::string_view s);
bool istarts_with(std::string_view s, std::string_view prefix);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Single pass of %XX decoding; malformed escapes are copied through. '+' is
// left alone.
std::string percent_decode(std::string_view s);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

std::optional<std::int64_t> parse_int64(std::string_view s);
std::optional<double> parse_double(std::string_view s);

// RFC 4180 style: quoted fields, doubled quotes, CRLF or LF line ends.
// A UTF-8 byte order mark at the start is dropped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_field(std::string_view value);

// Fixed six-decimal rendering used by every CSV writer.
std::string format_fixed(double value, int decimals = 6);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view data);

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d);

// "2020-07-01T10:00:00.123Z", optional fraction, "Z" or "+hh:mm" offset.
std::optional<std::int64_t> parse_iso8601_ms(std::string_view text);

// Cookie Expires dates: "Wdy, DD Mon YYYY HH:MM:SS GMT" and the dashed
// "DD-Mon-YY" variants browsers accept.
std::optional<std::int64_t> parse_http_date_ms(std::string_view text);

}  // namespace tracklens
