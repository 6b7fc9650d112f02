#include "latticework/json_schema.hpp"

namespace lw {

using nlohmann::json;

namespace {

bool type_matches(const std::string& type, const json& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

void check(const json& schema, const json& v, const std::string& path, std::vector<std::string>& errors) {
    if (!schema.is_object()) return;
    const std::string where = path.empty() ? "/" : path;

    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        if (it->is_string()) {
            ok = type_matches(it->get<std::string>(), v);
        } else if (it->is_array()) {
            for (const auto& t : *it) ok = ok || type_matches(t.get<std::string>(), v);
        }
        if (!ok) {
            errors.push_back(where + ": expected type " + it->dump());
            return;
        }
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        bool found = false;
        for (const auto& e : *it) found = found || e == v;
        if (!found) errors.push_back(where + ": value not in enum " + it->dump());
    }
    if (v.is_number()) {
        double d = v.get<double>();
        if (auto it = schema.find("minimum"); it != schema.end() && d < it->get<double>())
            errors.push_back(where + ": below minimum " + it->dump());
        if (auto it = schema.find("maximum"); it != schema.end() && d > it->get<double>())
            errors.push_back(where + ": above maximum " + it->dump());
    }
    if (v.is_string()) {
        if (auto it = schema.find("minLength"); it != schema.end() && v.get<std::string>().size() < it->get<std::size_t>())
            errors.push_back(where + ": shorter than minLength " + it->dump());
    }
    if (v.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>())
            errors.push_back(where + ": fewer than minItems " + it->dump());
        if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>())
            errors.push_back(where + ": more than maxItems " + it->dump());
        if (auto it = schema.find("items"); it != schema.end()) {
            for (std::size_t i = 0; i < v.size(); ++i) check(*it, v[i], path + "/" + std::to_string(i), errors);
        }
    }
    if (v.is_object()) {
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const auto& key : *it) {
                if (!v.contains(key.get<std::string>()))
                    errors.push_back(where + ": missing required property " + key.dump());
            }
        }
        const json* props = nullptr;
        if (auto it = schema.find("properties"); it != schema.end()) props = &*it;
        bool closed = schema.value("additionalProperties", true) == false;
        for (auto& [key, val] : v.items()) {
            if (props && props->contains(key)) {
                check((*props)[key], val, path + "/" + key, errors);
            } else if (closed) {
                errors.push_back(where + ": unexpected property \"" + key + "\"");
            }
        }
    }
}

} // namespace

std::vector<std::string> validate_schema(const json& schema, const json& value) {
    std::vector<std::string> errors;
    check(schema, value, "", errors);
    return errors;
}

} // namespace lw
