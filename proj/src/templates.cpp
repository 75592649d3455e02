// SPDX-License-Identifier: Apache-2.0
#include "mmagent/templates.hpp"

#include <fstream>
#include <sstream>

namespace mmagent::templates {

std::string load_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateMissing("template not found: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string render(const std::string& text,
                   const std::vector<std::pair<std::string, std::string>>& slots) {
    std::string out = text;
    for (const auto& [name, value] : slots) {
        std::string slot = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string extract_section(const std::string& text, const std::string& tag) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    auto begin = text.find(open);
    auto end = text.find(close);
    if (begin == std::string::npos || end == std::string::npos || end < begin)
        throw TemplateMissing("section <" + tag + "> not found");
    begin += open.size();
    if (begin < text.size() && text[begin] == '\n') ++begin;
    return text.substr(begin, end - begin);
}

std::string replace_section(const std::string& text, const std::string& tag,
                            const std::string& body) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    auto begin = text.find(open);
    auto end = text.find(close);
    if (begin == std::string::npos || end == std::string::npos || end < begin)
        throw TemplateMissing("section <" + tag + "> not found");
    begin += open.size();
    std::string inner = body;
    if (inner.empty() || inner.back() != '\n') inner += "\n";
    return text.substr(0, begin) + "\n" + inner + text.substr(end);
}

}  // namespace mmagent::templates
