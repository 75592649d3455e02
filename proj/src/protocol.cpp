// SPDX-License-Identifier: Apache-2.0
#include "mmagent/protocol.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace mmagent::protocol {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

// Bounded repair for common model-output damage: surrounding prose or
// markdown fences, and trailing commas before '}' or ']'. One pass only.
std::string repair(const std::string& raw) {
    auto first = raw.find('{');
    auto last = raw.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first)
        return raw;
    std::string body = raw.substr(first, last - first + 1);

    std::string out;
    out.reserve(body.size());
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (in_string) {
            out.push_back(c);
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < body.size() && std::isspace(static_cast<unsigned char>(body[j]))) ++j;
            if (j < body.size() && (body[j] == '}' || body[j] == ']')) continue;
        }
        out.push_back(c);
    }
    return out;
}

ordered_json parse_record(const std::string& raw) {
    std::string text = trim(raw);
    if (text.empty()) throw MalformedMessage("empty message");

    auto attempt = [](const std::string& s) -> std::optional<ordered_json> {
        auto parsed = ordered_json::parse(s, nullptr, /*allow_exceptions=*/false);
        if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
        return parsed;
    };

    if (auto clean = attempt(text)) return *clean;
    if (auto repaired = attempt(repair(text))) return *repaired;
    throw MalformedMessage("not a JSON object after repair pass");
}

std::string require_text(const ordered_json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end()) throw MissingField(std::string("missing \"") + key + "\"");
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

Action parse_action(const ordered_json& node) {
    if (!node.is_object()) throw MissingField("\"Action\" is not a record");
    Action action;
    action.tool_name = require_text(node, "tool_name");
    if (action.tool_name.empty()) throw MissingField("\"tool_name\" is empty");
    auto it = node.find("tool_input");
    if (it == node.end()) throw MissingField("missing \"tool_input\"");
    if (!it->is_object()) throw MissingField("\"tool_input\" is not a record");
    for (auto& [key, value] : it->items()) {
        // Inputs are text on the wire; coerce stray numbers/bools to their
        // JSON spelling so handlers can parse them.
        std::string text = value.is_string() ? value.get<std::string>() : value.dump();
        action.tool_input.emplace_back(key, std::move(text));
    }
    return action;
}

ordered_json action_to_json(const Action& action) {
    ordered_json input = ordered_json::object();
    for (const auto& [key, value] : action.tool_input) input[key] = value;
    return ordered_json{{"tool_name", action.tool_name}, {"tool_input", std::move(input)}};
}

}  // namespace

std::optional<std::string> Action::arg(std::string_view name) const {
    for (const auto& [key, value] : tool_input)
        if (key == name) return value;
    return std::nullopt;
}

AgentMessage parse_agent_message(const std::string& raw) {
    ordered_json record = parse_record(raw);

    bool has_answer = record.contains("Answer");
    bool has_action = record.contains("Action");
    if (has_answer && has_action)
        throw AmbiguousMessage("record carries both \"Answer\" and \"Action\"");

    if (has_answer) {
        return Answer{require_text(record, "Observation"), require_text(record, "Thought"),
                      require_text(record, "Answer")};
    }
    if (has_action) {
        return Step{require_text(record, "Observation"), require_text(record, "Thought"),
                    parse_action(record.at("Action"))};
    }
    if (record.contains("Output")) return ToolOutput{require_text(record, "Output")};
    if (record.contains("Critic Feedback"))
        return CriticFeedback{require_text(record, "Critic Feedback")};
    if (record.contains("Question")) return Query{require_text(record, "Question")};
    throw MissingField("record has none of \"Answer\", \"Action\", \"Output\", \"Critic Feedback\", \"Question\"");
}

std::string serialize_agent_message(const AgentMessage& msg) {
    ordered_json record = std::visit(
        [](const auto& m) -> ordered_json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Query>) {
                return ordered_json{{"Question", m.question}};
            } else if constexpr (std::is_same_v<T, Step>) {
                return ordered_json{{"Observation", m.observation},
                                    {"Thought", m.thought},
                                    {"Action", action_to_json(m.action)}};
            } else if constexpr (std::is_same_v<T, Answer>) {
                return ordered_json{{"Observation", m.observation},
                                    {"Thought", m.thought},
                                    {"Answer", m.answer}};
            } else if constexpr (std::is_same_v<T, ToolOutput>) {
                return ordered_json{{"Output", m.output}};
            } else {
                return ordered_json{{"Critic Feedback", m.feedback}};
            }
        },
        msg);
    return record.dump();
}

std::string to_string(Verdict v) {
    return v == Verdict::Yes ? "YES" : "NO";
}

CriticMessage parse_critic_message(const std::string& raw,
                                   const std::vector<std::string>& criteria_names) {
    ordered_json record = parse_record(raw);

    CriticMessage msg;
    msg.observation = require_text(record, "Observation");
    msg.thought = require_text(record, "Thought");

    auto feedback_it = record.find("Feedback");
    if (feedback_it == record.end()) throw MissingField("missing \"Feedback\"");
    if (!feedback_it->is_object()) throw MissingField("\"Feedback\" is not a record");

    for (std::size_t i = 0; i < criteria_names.size(); ++i) {
        std::string key = "Criteria " + std::to_string(i + 1);
        auto entry = feedback_it->find(key);
        if (entry == feedback_it->end())
            throw MissingCriterion("feedback lacks \"" + key + "\" for criterion \"" +
                                   criteria_names[i] + "\"");
        // The image pipeline's critics may grade each criterion; accept the
        // nested shape and keep the textual feedback.
        std::string text;
        if (entry->is_object() && entry->contains("Feedback"))
            text = require_text(*entry, "Feedback");
        else
            text = entry->is_string() ? entry->get<std::string>() : entry->dump();
        msg.feedback.emplace_back(criteria_names[i], std::move(text));
    }

    std::string verdict = trim(require_text(record, "Verdict"));
    std::transform(verdict.begin(), verdict.end(), verdict.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (verdict == "YES")
        msg.verdict = Verdict::Yes;
    else if (verdict == "NO")
        msg.verdict = Verdict::No;
    else
        throw InvalidVerdict("verdict is \"" + verdict + "\", expected YES or NO");
    return msg;
}

std::string serialize_critic_message(const CriticMessage& msg) {
    ordered_json feedback = ordered_json::object();
    for (std::size_t i = 0; i < msg.feedback.size(); ++i)
        feedback["Criteria " + std::to_string(i + 1)] = msg.feedback[i].second;
    ordered_json record{{"Observation", msg.observation},
                        {"Thought", msg.thought},
                        {"Feedback", std::move(feedback)},
                        {"Verdict", to_string(msg.verdict)}};
    return record.dump();
}

}  // namespace mmagent::protocol
