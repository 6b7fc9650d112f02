#pragma once

#include <json.hpp>
#include <string>
#include <string_view>

namespace lw {

std::string sha256_hex(std::string_view data);

// Stable identifier: `<prefix>-<16 hex chars>` over the compact JSON dump of
// `parts`. nlohmann::json sorts object keys, so the dump is canonical.
std::string content_id(std::string_view prefix, const nlohmann::json& parts);

} // namespace lw
