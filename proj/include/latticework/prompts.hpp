#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lw {

// Templates are text assets compiled into the library (assets/prompts).
// Placeholders are written {NAME} with NAME in [A-Z_].
const std::string& prompt_template(std::string_view name);
std::vector<std::string> prompt_template_names();
std::string prompt_templates_version();

// Throws InvalidInput if the template has a placeholder without a value.
std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& values);
std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

// Default agent implementation constraints asset (assets/constraints.txt).
const std::string& default_constraints_text();

} // namespace lw
