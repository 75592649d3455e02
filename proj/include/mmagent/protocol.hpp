// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mmagent/errors.hpp"

namespace mmagent::protocol {

MMAGENT_ERROR_TYPE(MalformedMessage);
MMAGENT_ERROR_TYPE(AmbiguousMessage);
MMAGENT_ERROR_TYPE(MissingField);
MMAGENT_ERROR_TYPE(InvalidVerdict);
MMAGENT_ERROR_TYPE(MissingCriterion);

// A tool invocation requested by the reasoner. Arguments keep their wire
// order; keys are unique.
struct Action {
    std::string tool_name;
    std::vector<std::pair<std::string, std::string>> tool_input;

    std::optional<std::string> arg(std::string_view name) const;

    bool operator==(const Action&) const = default;
};

struct Query {
    std::string question;
    bool operator==(const Query&) const = default;
};

struct Step {
    std::string observation;
    std::string thought;
    Action action;
    bool operator==(const Step&) const = default;
};

struct Answer {
    std::string observation;
    std::string thought;
    std::string answer;
    bool operator==(const Answer&) const = default;
};

struct ToolOutput {
    std::string output;
    bool operator==(const ToolOutput&) const = default;
};

struct CriticFeedback {
    std::string feedback;
    bool operator==(const CriticFeedback&) const = default;
};

using AgentMessage = std::variant<Query, Step, Answer, ToolOutput, CriticFeedback>;

// Parses one reasoner/tool/critic-feedback turn. Applies a single bounded
// repair pass (strip surrounding prose and code fences, drop trailing
// commas) before giving up with MalformedMessage. A record carrying both
// "Answer" and "Action" is rejected as AmbiguousMessage.
AgentMessage parse_agent_message(const std::string& raw);

// Deterministic key order: Observation, Thought, then Action or Answer.
std::string serialize_agent_message(const AgentMessage& msg);

enum class Verdict { Yes, No };

std::string to_string(Verdict v);

struct CriticMessage {
    std::string observation;
    std::string thought;
    // One entry per criterion, in criteria-set order: (criterion name, feedback).
    std::vector<std::pair<std::string, std::string>> feedback;
    Verdict verdict = Verdict::No;

    bool operator==(const CriticMessage&) const = default;
};

// `criteria_names` is the ordered criteria set used to build the critic
// prompt; "Criteria N" feedback keys are matched positionally against it.
// The verdict is trimmed and upper-cased before validation.
CriticMessage parse_critic_message(const std::string& raw,
                                   const std::vector<std::string>& criteria_names);

std::string serialize_critic_message(const CriticMessage& msg);

}  // namespace mmagent::protocol
