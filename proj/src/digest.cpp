#include "xshot/digest.hpp"

#include <openssl/evp.h>

#include <array>

#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

namespace {
std::array<unsigned char, 32> sha256(std::string_view bytes) {
  std::array<unsigned char, 32> out{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &length, EVP_sha256(), nullptr) != 1 ||
      length != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}
}  // namespace

std::string sha256_hex(std::string_view bytes) {
  const auto raw = sha256(bytes);
  return text::to_hex(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

std::string canonical_json(const nlohmann::json& value) {
  // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::uint64_t digest64(std::string_view bytes) {
  const auto raw = sha256(bytes);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | raw[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace xshot
