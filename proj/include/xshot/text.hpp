#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace xshot::text {

/// Unicode NFC normalization of UTF-8 text. Throws on invalid UTF-8.
std::string nfc(std::string_view utf8);

bool is_valid_utf8(std::string_view bytes);

/// Number of Unicode code points in valid UTF-8 text.
std::size_t code_point_count(std::string_view utf8);

/// Splits on Unicode white space (White_Space property), dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view utf8);

std::string to_hex(std::string_view bytes);
std::string from_hex(std::string_view hex);

}  // namespace xshot::text
