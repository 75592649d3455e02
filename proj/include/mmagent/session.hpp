// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "mmagent/backends.hpp"
#include "mmagent/chain.hpp"
#include "mmagent/critic.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/media.hpp"
#include "mmagent/toolkit.hpp"

namespace mmagent::session {

MMAGENT_ERROR_TYPE(EmptyRegistry);
MMAGENT_ERROR_TYPE(BadSessionConfig);

// A backend failure mid-session; carries the partial chain for diagnostics
// and trace capture. `code()` preserves the underlying failure's code.
class SessionTransportError : public Error {
public:
    SessionTransportError(const Error& cause, ReasoningChain chain)
        : Error(cause.code(), cause.what()), partial_chain_(std::move(chain)) {}

    const ReasoningChain& partial_chain() const { return partial_chain_; }

private:
    ReasoningChain partial_chain_;
};

struct SessionConfig {
    int max_iterations = 15;        // reasoner turns per answer attempt
    int max_critic_rounds = 1;      // critic calls per session (N)
    bool critic_enabled = true;
    int malformed_retry_limit = 2;  // consecutive unparseable outputs before Failure
    std::string template_dir = "templates";
    std::string prompt_family;      // "video" | "image"; derived from media kind when empty

    void validate() const;
};

enum class Termination {
    CriticAccepted,
    CriticBudgetExhausted,
    IterationBudgetExhausted,
    CriticDisabled,
    Failure,
};

std::string to_string(Termination t);
Termination termination_from_string(const std::string& text);

// The answer the guidelines tell the reasoner to give up with; mapped to
// the unanswerable marker (empty final_answer).
inline constexpr const char* kUnanswerableText = "I am unable to answer this question";

struct SessionResult {
    std::optional<std::string> final_answer;  // nullopt = unanswerable
    ReasoningChain chain;
    int critic_rounds_used = 0;
    Termination termination = Termination::Failure;

    bool answered() const { return final_answer.has_value(); }
};

bool same_result(const SessionResult& a, const SessionResult& b);

// Renders the registry into the template's {{tools}} slot; the guidelines
// and input-output sections pass through verbatim. Deterministic for
// identical inputs.
std::string build_system_prompt(const toolkit::ToolRegistry& registry,
                                const std::string& template_text);

std::string load_system_template(const std::string& template_dir, const std::string& family);

// The planner loop: reasoner emits Steps until an Answer, tools feed
// Outputs back, then the critic audits the chain. A NO verdict feeds
// critic feedback back and restarts reasoning with a fresh iteration
// budget, until the verdict is YES or the critic budget runs out.
SessionResult run_session(const std::string& query, const media::MediaHandle& media,
                          const toolkit::ToolRegistry& registry, backends::BackendSet& backends,
                          const critic::CriteriaSet& criteria, const SessionConfig& config);

// Same loop with a prebuilt system prompt (used by trace replay).
SessionResult run_session_with_prompt(const std::string& system_prompt, const std::string& query,
                                      const media::MediaHandle& media,
                                      const toolkit::ToolRegistry& registry,
                                      backends::BackendSet& backends,
                                      const critic::CriteriaSet& criteria,
                                      const SessionConfig& config);

// True for the framework-injected first describe step of image sessions.
bool is_seeded_first_step(const ChainEntry& entry);

}  // namespace mmagent::session
