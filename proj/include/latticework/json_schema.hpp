#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace lw {

// Validates `value` against the subset of JSON Schema the engine declares for
// model payloads and tool inputs: type, properties, required,
// additionalProperties (bool), items, minItems, maxItems, minLength, enum,
// minimum, maximum. Returns one message per violation, prefixed by a JSON
// pointer to the offending value; empty means valid.
std::vector<std::string> validate_schema(const nlohmann::json& schema, const nlohmann::json& value);

} // namespace lw
