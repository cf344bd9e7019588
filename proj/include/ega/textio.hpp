#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Shared helpers for the library's text file formats.
namespace ega::textio {

/// Shortest decimal that parses back to exactly `v` ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_real(double v);
/// Throws InvalidInput unless the whole token is a number.
double parse_real(std::string_view token);
std::uint64_t parse_u64(std::string_view token);
long long parse_int(std::string_view token);

/// Splits on runs of whitespace.
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);

/// 64-bit FNV-1a; stable across platforms, used for config and data hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace ega::textio
