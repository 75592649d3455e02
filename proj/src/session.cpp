// SPDX-License-Identifier: Apache-2.0
#include "mmagent/session.hpp"

#include <algorithm>
#include <sstream>

#include "mmagent/templates.hpp"

namespace mmagent::session {

namespace {

// Fixed seed step for image sessions: gather a full description before
// free-form reasoning.
const protocol::Step kSeedDescribeStep{
    "Received a new question about an image.",
    "Gather a full description of the image before reasoning about the question.",
    protocol::Action{"vit_describe",
                     {{"query", "Describe this image in detail, including any text, objects, "
                                "people, and their relationships."}}}};

std::string render_critic_feedback(const protocol::CriticMessage& message) {
    std::ostringstream out;
    for (std::size_t i = 0; i < message.feedback.size(); ++i) {
        if (i) out << "\n";
        out << "Criteria " << (i + 1) << ": " << message.feedback[i].second;
    }
    return out.str();
}

backends::Request request_from_chain(const std::string& system_prompt,
                                     const ReasoningChain& chain) {
    backends::Request request;
    request.messages.push_back({"system", system_prompt});
    for (const auto& entry : chain.entries()) {
        switch (entry.role) {
            case Role::Reasoner:
                request.messages.push_back({"assistant", entry.serialized()});
                break;
            case Role::Critic: {
                protocol::CriticFeedback feedback{
                    render_critic_feedback(*entry.critic_message())};
                request.messages.push_back(
                    {"user", protocol::serialize_agent_message(feedback)});
                break;
            }
            case Role::User:
            case Role::Tool:
                request.messages.push_back({"user", entry.serialized()});
                break;
        }
    }
    return request;
}

std::optional<std::string> to_final_answer(const std::optional<std::string>& answer_text) {
    if (!answer_text) return std::nullopt;
    std::string trimmed = *answer_text;
    auto begin = trimmed.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return std::nullopt;
    auto end = trimmed.find_last_not_of(" \t\r\n");
    trimmed = trimmed.substr(begin, end - begin + 1);
    if (trimmed.rfind(kUnanswerableText, 0) == 0) return std::nullopt;
    return *answer_text;
}

}  // namespace

void SessionConfig::validate() const {
    if (max_iterations < 1) throw BadSessionConfig("max_iterations must be >= 1");
    if (max_critic_rounds < 0) throw BadSessionConfig("max_critic_rounds must be >= 0");
    if (malformed_retry_limit < 0)
        throw BadSessionConfig("malformed_retry_limit must be >= 0");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::CriticAccepted: return "CriticAccepted";
        case Termination::CriticBudgetExhausted: return "CriticBudgetExhausted";
        case Termination::IterationBudgetExhausted: return "IterationBudgetExhausted";
        case Termination::CriticDisabled: return "CriticDisabled";
        case Termination::Failure: return "Failure";
    }
    return "Failure";
}

Termination termination_from_string(const std::string& text) {
    if (text == "CriticAccepted") return Termination::CriticAccepted;
    if (text == "CriticBudgetExhausted") return Termination::CriticBudgetExhausted;
    if (text == "IterationBudgetExhausted") return Termination::IterationBudgetExhausted;
    if (text == "CriticDisabled") return Termination::CriticDisabled;
    if (text == "Failure") return Termination::Failure;
    throw Error("UnknownTermination", "unknown termination: " + text);
}

bool same_result(const SessionResult& a, const SessionResult& b) {
    return a.final_answer == b.final_answer && a.critic_rounds_used == b.critic_rounds_used &&
           a.termination == b.termination && equal_payloads(a.chain, b.chain);
}

std::string build_system_prompt(const toolkit::ToolRegistry& registry,
                                const std::string& template_text) {
    if (registry.size() == 0) throw EmptyRegistry("cannot build a prompt without tools");
    return templates::render(template_text, {{"tools", registry.describe_all()}});
}

std::string load_system_template(const std::string& template_dir, const std::string& family) {
    return templates::load_text_file(template_dir + "/" + family + "/system.txt");
}

bool is_seeded_first_step(const ChainEntry& entry) {
    if (entry.role != Role::Reasoner) return false;
    const auto* agent = entry.agent_message();
    if (!agent) return false;
    const auto* step = std::get_if<protocol::Step>(agent);
    return step && *step == kSeedDescribeStep;
}

SessionResult run_session(const std::string& query, const media::MediaHandle& media,
                          const toolkit::ToolRegistry& registry, backends::BackendSet& backends,
                          const critic::CriteriaSet& criteria, const SessionConfig& config) {
    std::string family = config.prompt_family.empty()
                             ? (media.kind() == media::MediaKind::Video ? "video" : "image")
                             : config.prompt_family;
    auto system_prompt =
        build_system_prompt(registry, load_system_template(config.template_dir, family));
    return run_session_with_prompt(system_prompt, query, media, registry, backends, criteria,
                                   config);
}

SessionResult run_session_with_prompt(const std::string& system_prompt, const std::string& query,
                                      const media::MediaHandle& media,
                                      const toolkit::ToolRegistry& registry,
                                      backends::BackendSet& backends,
                                      const critic::CriteriaSet& criteria,
                                      const SessionConfig& config) {
    config.validate();
    if (registry.size() == 0) throw EmptyRegistry("cannot run a session without tools");
    if (!backends.reasoner) throw BadSessionConfig("no reasoner backend configured");
    if (config.critic_enabled && config.max_critic_rounds > 0 && !backends.critic)
        throw BadSessionConfig("critic enabled but no critic backend configured");

    ReasoningChain chain;
    toolkit::SessionContext ctx{&media};
    std::optional<std::string> last_answer;
    int critic_rounds_used = 0;

    auto finish = [&](Termination termination) {
        SessionResult result;
        result.final_answer = to_final_answer(last_answer);
        result.chain = std::move(chain);
        result.critic_rounds_used = critic_rounds_used;
        result.termination = termination;
        return result;
    };

    chain.append(Role::User, protocol::Query{query});

    // Image sessions start with a forced describe action; video guidelines
    // recommend (but do not force) get_transcript first.
    if (media.kind() == media::MediaKind::Image && registry.contains("vit_describe")) {
        chain.append(Role::Reasoner, kSeedDescribeStep);
        try {
            auto seeded = registry.dispatch(kSeedDescribeStep.action, ctx);
            chain.append(Role::Tool, protocol::ToolOutput{seeded.output});
        } catch (const BackendFailure& e) {
            throw SessionTransportError(e, chain);
        }
    }

    const int malformed_limit = std::max(1, config.malformed_retry_limit);

    for (;;) {  // one pass per answer attempt; critic feedback restarts it
        int iterations = 0;
        int malformed_streak = 0;
        std::optional<std::string> retry_raw;
        bool answered = false;

        while (!answered) {
            if (iterations >= config.max_iterations)
                return finish(Termination::IterationBudgetExhausted);

            auto request = request_from_chain(system_prompt, chain);
            if (retry_raw) {
                request.messages.push_back({"assistant", *retry_raw});
                request.messages.push_back(
                    {"user", "Your last response was not in the required JSON format. Respond "
                             "with a single JSON record exactly as specified in <input-output>."});
            }

            std::string raw;
            try {
                raw = backends::chat(*backends.reasoner, request).text;
            } catch (const BackendFailure& e) {
                throw SessionTransportError(e, chain);
            }
            ++iterations;

            protocol::AgentMessage message;
            try {
                message = protocol::parse_agent_message(raw);
                if (!std::holds_alternative<protocol::Step>(message) &&
                    !std::holds_alternative<protocol::Answer>(message))
                    throw protocol::MalformedMessage("reasoner must emit a Step or an Answer");
            } catch (const Error&) {
                if (++malformed_streak >= malformed_limit)
                    return finish(Termination::Failure);
                retry_raw = raw;
                continue;
            }
            malformed_streak = 0;
            retry_raw.reset();

            if (const auto* step = std::get_if<protocol::Step>(&message)) {
                chain.append(Role::Reasoner, message);
                try {
                    auto result = registry.dispatch(step->action, ctx);
                    chain.append(Role::Tool, protocol::ToolOutput{result.output});
                } catch (const BackendFailure& e) {
                    throw SessionTransportError(e, chain);
                }
                continue;
            }

            last_answer = std::get<protocol::Answer>(message).answer;
            chain.append(Role::Reasoner, message);
            answered = true;
        }

        if (!config.critic_enabled) return finish(Termination::CriticDisabled);
        if (critic_rounds_used >= config.max_critic_rounds)
            return finish(Termination::CriticBudgetExhausted);

        // Evidence: the image itself for image sessions; clips around the
        // session's vision calls for video, text-only when there were none.
        framegrid::PhotoGrid grid;
        const framegrid::PhotoGrid* grid_ptr = nullptr;
        try {
            if (media.kind() == media::MediaKind::Image) {
                grid = framegrid::single_image_grid(media.image());
                grid_ptr = &grid;
            } else {
                auto evidence = critic::select_evidence(chain);
                grid = critic::build_evidence_grid(evidence, media);
                grid_ptr = &grid;
            }
        } catch (const critic::NoEvidence&) {
            grid_ptr = nullptr;  // critic proceeds on the chain alone
        }

        critic::CriticReport report;
        std::string family = config.prompt_family.empty()
                                 ? (media.kind() == media::MediaKind::Video ? "video" : "image")
                                 : config.prompt_family;
        try {
            report = critic::evaluate(chain, grid_ptr, criteria, *backends.critic,
                                      config.template_dir, family);
        } catch (const BackendFailure& e) {
            throw SessionTransportError(e, chain);
        }
        ++critic_rounds_used;
        chain.append(Role::Critic, report.message);

        if (report.message.verdict == protocol::Verdict::Yes)
            return finish(Termination::CriticAccepted);
        if (critic_rounds_used >= config.max_critic_rounds)
            return finish(Termination::CriticBudgetExhausted);
        // Verdict NO with budget remaining: the feedback is now in the
        // chain; reasoning continues with a fresh iteration budget.
    }
}

}  // namespace mmagent::session
