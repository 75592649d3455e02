// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmagent/errors.hpp"

namespace mmagent::templates {

MMAGENT_ERROR_TYPE(TemplateMissing);

// Reads a template file verbatim. Throws TemplateMissing if absent.
std::string load_text_file(const std::string& path);

// Replaces every "{{name}}" slot. Unknown slots are left intact so golden
// diffs surface them.
std::string render(const std::string& text,
                   const std::vector<std::pair<std::string, std::string>>& slots);

// Returns the body between "<tag>\n" and "</tag>" (exclusive).
std::string extract_section(const std::string& text, const std::string& tag);

// Swaps the section body; replacing a section with its own extract is the
// identity.
std::string replace_section(const std::string& text, const std::string& tag,
                            const std::string& body);

}  // namespace mmagent::templates
