#include "latticework/config.hpp"

#include "latticework/actions.hpp"
#include "latticework/error.hpp"
#include "latticework/text_util.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace lw {

using nlohmann::json;

namespace {

class TomlLine {
public:
    TomlLine(const std::string& text, std::size_t line_no) : s_(text), line_(line_no) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_) + ": " + what);
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool at_end_or_comment() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    json value() {
        skip_ws();
        if (pos_ >= s_.size()) fail("missing value");
        char c = s_[pos_];
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
               s_[pos_] != '\t')
            ++pos_;
        std::string tok = s_.substr(start, pos_ - start);
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string digits;
        for (char d : tok)
            if (d != '_') digits += d;
        try {
            std::size_t used = 0;
            if (digits.find_first_of(".eE") == std::string::npos) {
                long long v = std::stoll(digits, &used);
                if (used == digits.size()) return v;
            } else {
                double v = std::stod(digits, &used);
                if (used == digits.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("cannot parse value '" + tok + "'");
    }

private:
    json basic_string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos_ >= s_.size()) fail("dangling escape");
            char e = s_[pos_++];
            switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unsupported escape \\") + e);
            }
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    json literal_string() {
        auto end = s_.find('\'', pos_ + 1);
        if (end == std::string::npos) fail("unterminated string");
        std::string out = s_.substr(pos_ + 1, end - pos_ - 1);
        pos_ = end + 1;
        return out;
    }

    json array() {
        ++pos_;
        json out = json::array();
        for (;;) {
            skip_ws();
            if (pos_ >= s_.size()) fail("unterminated array");
            if (s_[pos_] == ']') {
                ++pos_;
                return out;
            }
            out.push_back(value());
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
        }
    }

    const std::string& s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

std::size_t as_size(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw Error(ErrorCode::ConfigError, key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

int as_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw Error(ErrorCode::ConfigError, key + " must be an integer");
    return v.get<int>();
}

double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) throw Error(ErrorCode::ConfigError, key + " must be a number");
    return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw Error(ErrorCode::ConfigError, key + " must be true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw Error(ErrorCode::ConfigError, key + " must be a string");
    return v.get<std::string>();
}

std::vector<std::string> as_strings(const json& v, const std::string& key) {
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw Error(ErrorCode::ConfigError, key + " must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(as_string(e, key));
    return out;
}

} // namespace

std::map<std::string, json> parse_toml(const std::string& text) {
    std::map<std::string, json> out;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            auto close = line.find(']');
            if (close == std::string::npos) TomlLine(line, line_no).fail("unterminated section header");
            section = trim(line.substr(1, close - 1));
            if (!valid_key(section)) TomlLine(line, line_no).fail("bad section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) TomlLine(line, line_no).fail("expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
        if (!valid_key(key)) TomlLine(line, line_no).fail("bad key '" + key + "'");
        std::string rest = line.substr(eq + 1);
        TomlLine parser(rest, line_no);
        json v = parser.value();
        if (!parser.at_end_or_comment()) parser.fail("trailing characters after value");
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) parser.fail("duplicate key " + full);
        out[full] = std::move(v);
    }
    return out;
}

void Config::set(const std::string& key, const json& v) {
    const std::string models_prefix = "backend.models.";
    if (key.rfind(models_prefix, 0) == 0) {
        auto role = key.substr(models_prefix.size());
        model_role_from_string(role);
        backend.model_role_map[role] = as_string(v, key);
        return;
    }
    if (key == "store.root") store_root = as_string(v, key);
    else if (key == "backend.endpoint_url") backend.endpoint_url = as_string(v, key);
    else if (key == "backend.rerank_url") backend.rerank_url = as_string(v, key);
    else if (key == "backend.temperature") backend.temperature = as_double(v, key);
    else if (key == "backend.max_retries") backend.max_retries = as_int(v, key);
    else if (key == "backend.timeout_seconds")
        backend.timeout = std::chrono::milliseconds(static_cast<long long>(as_double(v, key) * 1000));
    else if (key == "backend.token_env") backend.token_env = as_string(v, key);
    else if (key == "backend.max_in_flight") backend.max_in_flight = as_size(v, key);
    else if (key == "ingest.timezone") ingest.timezone = as_string(v, key);
    else if (key == "ingest.session_policy") ingest.session_policy = session_policy_from_string(as_string(v, key));
    else if (key == "ingest.window_size") ingest.window_size = as_size(v, key);
    else if (key == "ingest.filter_enabled") ingest.filter_enabled = as_bool(v, key);
    else if (key == "ingest.denylist_path") ingest.denylist_path = as_string(v, key);
    else if (key == "synthesis.max_layers") synthesis.max_layers = as_size(v, key);
    else if (key == "synthesis.min_insights_per_session") synthesis.min_insights_per_session = as_size(v, key);
    else if (key == "synthesis.carry_forward_unmerged") synthesis.carry_forward_unmerged = as_bool(v, key);
    else if (key == "synthesis.workers") synthesis.workers = as_size(v, key);
    else if (key == "synthesis.user_name") synthesis.user_name = as_string(v, key);
    else if (key == "tasking.utility_threshold") tasking.utility_threshold = as_double(v, key);
    else if (key == "tasking.window_size") tasking.window_size = as_size(v, key);
    else if (key == "tasking.window_stride") tasking.window_stride = as_size(v, key);
    else if (key == "tasking.task_day") tasking.task_day = as_string(v, key);
    else if (key == "actions.top_k") actions.top_k = as_size(v, key);
    else if (key == "actions.constraints_path") actions.constraints_path = as_string(v, key);
    else if (key == "actions.conditions") actions.conditions = as_strings(v, key);
    else if (key == "agent.budget") agent.budget = as_size(v, key);
    else if (key == "agent.result_byte_cap") agent.result_byte_cap = as_size(v, key);
    else if (key == "agent.sandbox_root") agent.sandbox_root = as_string(v, key);
    else if (key == "agent.read_roots") agent.read_roots = as_strings(v, key);
    else if (key == "agent.calendar_path") agent.calendar_path = as_string(v, key);
    else if (key == "agent.web_fixtures_path") agent.web_fixtures_path = as_string(v, key);
    else if (key == "server.host") server.host = as_string(v, key);
    else if (key == "server.port") server.port = as_int(v, key);
    else if (key == "server.token_env") server.token_env = as_string(v, key);
    else throw Error(ErrorCode::ConfigError, "unknown config key " + key);
}

void Config::set_from_string(const std::string& key, const std::string& value) {
    json v;
    try {
        auto parsed = parse_toml("v = " + value);
        v = parsed.at("v");
    } catch (const Error&) {
        v = value;
    }
    // A bare word such as UTC or mock: is a string, not an error.
    try {
        set(key, v);
    } catch (const Error&) {
        if (v.is_string()) throw;
        set(key, json(value));
    }
}

void Config::check() const {
    backend.check();
    synthesis.check();
    if (ingest.window_size == 0) throw Error(ErrorCode::ConfigError, "ingest.window_size must be >= 1");
    if (tasking.window_size == 0 || tasking.window_stride == 0)
        throw Error(ErrorCode::ConfigError, "tasking window size and stride must be >= 1");
    if (!(tasking.utility_threshold >= 0.0 && tasking.utility_threshold <= 1.0))
        throw Error(ErrorCode::ConfigError, "tasking.utility_threshold must lie in [0, 1]");
    if (actions.top_k == 0) throw Error(ErrorCode::ConfigError, "actions.top_k must be >= 1");
    if (actions.conditions.empty()) throw Error(ErrorCode::ConfigError, "actions.conditions is empty");
    for (const auto& c : actions.conditions) {
        try {
            condition_from_string(c);
        } catch (const Error&) {
            throw Error(ErrorCode::ConfigError, "unknown condition " + c);
        }
    }
    if (agent.budget == 0) throw Error(ErrorCode::ConfigError, "agent.budget must be >= 1");
    if (server.port < 0 || server.port > 65535) throw Error(ErrorCode::ConfigError, "server.port out of range");
    TimeZone::parse(ingest.timezone);
}

Config parse_config(const std::string& text) {
    Config c;
    for (const auto& [key, value] : parse_toml(text)) c.set(key, value);
    c.check();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace lw
