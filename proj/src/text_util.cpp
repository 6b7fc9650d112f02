#include "latticework/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace lw {

namespace {
bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}
bool is_tag_char(char c) {
    return is_word_char(c) || c == '-' || c == '_';
}
} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_word_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::set<std::string> hashtags(std::string_view s) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '#') continue;
        if (i > 0 && is_tag_char(s[i - 1])) continue;
        std::size_t j = i + 1;
        while (j < s.size() && is_tag_char(s[j])) ++j;
        // trailing '-'/'_' belong to punctuation, not the tag
        std::size_t end = j;
        while (end > i + 1 && (s[end - 1] == '-' || s[end - 1] == '_')) --end;
        if (end > i + 1) out.insert(to_lower(s.substr(i + 1, end - i - 1)));
        i = j - 1;
    }
    return out;
}

std::string tag_phrase(std::string_view tag) {
    std::string out;
    for (char c : tag) out.push_back(c == '-' || c == '_' ? ' ' : c);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string slugify(std::string_view s, std::size_t max_len) {
    std::string out;
    for (char c : s) {
        if (out.size() >= max_len) break;
        if (is_word_char(c)) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!out.empty() && out.back() != '-') {
            out.push_back('-');
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "item" : out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace lw
