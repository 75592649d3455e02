// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripted end-to-end session fixtures shared by the session, trace and
// acceptance suites.

#include <memory>
#include <string>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/critic.hpp"
#include "mmagent/media.hpp"
#include "mmagent/retrieval.hpp"
#include "mmagent/session.hpp"
#include "mmagent/toolkit.hpp"
#include "support.hpp"

namespace testsupport {

inline std::string step_json(const std::string& tool,
                             const std::vector<std::pair<std::string, std::string>>& args,
                             const std::string& observation = "o",
                             const std::string& thought = "t") {
    mmagent::protocol::Step step{observation, thought, {tool, args}};
    return mmagent::protocol::serialize_agent_message(step);
}

inline std::string answer_json(const std::string& answer, const std::string& observation = "o",
                               const std::string& thought = "t") {
    return mmagent::protocol::serialize_agent_message(
        mmagent::protocol::Answer{observation, thought, answer});
}

inline std::string critic_json(const std::string& verdict,
                               const std::vector<std::string>& feedback = {"fine", "fine",
                                                                           "fine"}) {
    mmagent::protocol::CriticMessage msg;
    msg.observation = "reviewed the logs";
    msg.thought = "checked each criterion";
    for (std::size_t i = 0; i < feedback.size(); ++i)
        msg.feedback.emplace_back("c" + std::to_string(i + 1), feedback[i]);
    msg.verdict = verdict == "YES" ? mmagent::protocol::Verdict::Yes
                                   : mmagent::protocol::Verdict::No;
    return mmagent::protocol::serialize_critic_message(msg);
}

// A complete scripted video session environment over a synthetic clip.
struct SessionFixture {
    mmagent::media::MediaHandle video = mmagent::media::MediaHandle::synthetic_video(180);
    mmagent::media::Transcript transcript;
    std::shared_ptr<mmagent::backends::ScriptedEmbeddingBackend> embedder =
        std::make_shared<mmagent::backends::ScriptedEmbeddingBackend>(4);
    std::shared_ptr<mmagent::backends::ScriptedChatBackend> reasoner =
        std::make_shared<mmagent::backends::ScriptedChatBackend>();
    std::shared_ptr<mmagent::backends::ScriptedChatBackend> critic =
        std::make_shared<mmagent::backends::ScriptedChatBackend>();
    std::shared_ptr<mmagent::backends::ScriptedChatBackend> vision =
        std::make_shared<mmagent::backends::ScriptedChatBackend>();
    mmagent::retrieval::PhraseIndex phrase_index;
    mmagent::retrieval::FrameIndex frame_index;
    mmagent::toolkit::ToolRegistry registry;
    mmagent::backends::BackendSet backends;
    mmagent::critic::CriteriaSet criteria;
    mmagent::session::SessionConfig config;

    SessionFixture() {
        using namespace mmagent;
        transcript.phrases = {
            {media::Timestamp(14), media::Timestamp(24), "warming up on the bike"},
            {media::Timestamp(76), media::Timestamp(86), "now we move to leg presses"},
            {media::Timestamp(155), media::Timestamp(165), "finishing with stretches"},
        };
        phrase_index = retrieval::build_phrase_index(transcript.phrases, *embedder);
        auto frames = media::sample_index_frames(video, 1.0);
        frame_index = retrieval::build_frame_index(frames, *embedder);

        toolkit::VideoToolDeps deps;
        deps.transcript = &transcript;
        deps.phrase_index = &phrase_index;
        deps.frame_index = &frame_index;
        deps.media = &video;
        deps.vision = vision.get();
        deps.embedder = embedder.get();
        deps.template_dir = template_dir();
        toolkit::register_video_tools(registry, deps);

        backends.reasoner = reasoner;
        backends.critic = critic;
        backends.embedder = embedder;

        criteria = critic::default_video_criteria(template_dir());
        config.template_dir = template_dir();
    }

    mmagent::session::SessionResult run(const std::string& query = "What exercise follows leg presses?") {
        return mmagent::session::run_session(query, video, registry, backends, criteria, config);
    }
};

// Fixture (a): transcript lookup, phrase search, answer, critic accepts.
inline void script_accepted_session(SessionFixture& fx) {
    fx.reasoner->push(step_json("get_transcript", {}));
    fx.reasoner->push(step_json("query_transcript", {{"transcript_query", "leg press"}}));
    fx.reasoner->push(answer_json("Leg extensions follow the leg presses."));
    fx.critic->push(critic_json("YES"));
}

// Deterministic chain behind the critic-prompt golden file.
inline mmagent::session::ReasoningChain golden_chain() {
    using namespace mmagent;
    session::ReasoningChain chain;
    chain.append(session::Role::User, protocol::Query{"What exercise follows leg presses?"});
    chain.append(session::Role::Reasoner,
                 protocol::Step{"A fitness video with a spoken walkthrough.",
                                "Start from the transcript.",
                                {"get_transcript", {}}});
    chain.append(session::Role::Tool,
                 protocol::ToolOutput{"[00:01:16 - 00:01:26] now we move to leg presses\n"});
    chain.append(session::Role::Reasoner,
                 protocol::Step{"The transcript mentions leg presses at 00:01:21.",
                                "Check the visuals right after that moment.",
                                {"query_vision",
                                 {{"timestamp", "00:01:21"},
                                  {"query", "These are the still frames from a short video "
                                            "clip. What exercise is being performed?"}}}});
    chain.append(session::Role::Tool, protocol::ToolOutput{"People are doing leg extensions."});
    chain.append(session::Role::Reasoner,
                 protocol::Answer{"The clip after the leg presses shows leg extensions.",
                                  "The transcript located the moment and the visuals confirm "
                                  "the following exercise.",
                                  "Leg extensions follow the leg presses."});
    return chain;
}

}  // namespace testsupport
