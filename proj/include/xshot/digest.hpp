#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace xshot {

/// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);

/// Sorted keys, no insignificant whitespace, UTF-8.
std::string canonical_json(const nlohmann::json& value);

/// First 8 bytes of SHA-256(bytes) as a big-endian integer.
std::uint64_t digest64(std::string_view bytes);

}  // namespace xshot
