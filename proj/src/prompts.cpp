#include "latticework/prompts.hpp"

#include "latticework/error.hpp"
#include "latticework/hashing.hpp"
#include "latticework/text_util.hpp"

#include <map>
#include <regex>
#include <set>

namespace lw {

namespace detail {
const std::map<std::string, std::string>& embedded_assets();
}

namespace {

const std::string& asset(const std::string& key) {
    const auto& assets = detail::embedded_assets();
    auto it = assets.find(key);
    if (it == assets.end()) throw Error(ErrorCode::ConfigError, "missing bundled asset " + key);
    return it->second;
}

} // namespace

const std::string& prompt_template(std::string_view name) {
    return asset("prompts/" + std::string(name));
}

std::vector<std::string> prompt_template_names() {
    std::vector<std::string> names;
    for (const auto& [key, _] : detail::embedded_assets())
        if (key.rfind("prompts/", 0) == 0 && key != "prompts/VERSION") names.push_back(key.substr(8));
    return names;
}

std::string prompt_templates_version() {
    static const std::string version = [] {
        std::string all;
        for (const auto& name : prompt_template_names()) all += name + "\n" + prompt_template(name);
        return "v" + trim(asset("prompts/VERSION")) + "+" + sha256_hex(all).substr(0, 8);
    }();
    return version;
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values) {
    static const std::regex placeholder(R"(\{([A-Z_]+)\})");
    std::set<std::string> missing;
    std::string out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), placeholder);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        out.append(text, last, static_cast<std::size_t>(m.position()) - last);
        auto v = values.find(m[1].str());
        if (v == values.end()) {
            missing.insert(m[1].str());
        } else {
            out += v->second;
        }
        last = static_cast<std::size_t>(m.position() + m.length());
    }
    out.append(text, last, std::string::npos);
    if (!missing.empty())
        throw Error(ErrorCode::InvalidInput,
                    "unfilled prompt placeholders: " + join(std::vector<std::string>(missing.begin(), missing.end()), ", "));
    return out;
}

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& values) {
    return render_template(prompt_template(name), values);
}

const std::string& default_constraints_text() {
    return asset("constraints");
}

} // namespace lw
