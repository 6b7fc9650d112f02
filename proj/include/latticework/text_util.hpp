#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lw {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool icontains(std::string_view haystack, std::string_view needle);

// Lowercased alphanumeric runs.
std::vector<std::string> word_tokens(std::string_view s);

// "#deadline-crunch" style markers, lowercased and without the '#'.
std::set<std::string> hashtags(std::string_view s);
// "presenting-academic-work" -> "Presenting academic work"
std::string tag_phrase(std::string_view tag);

// Filesystem-friendly lowercase slug, at most `max_len` characters.
std::string slugify(std::string_view s, std::size_t max_len = 48);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace lw
