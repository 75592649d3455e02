// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "mmagent/session.hpp"

using namespace mmagent;
using namespace testsupport;
using session::Role;
using session::Termination;

TEST_CASE("system prompt carries all tool names and the JSON contract sentence") {
    SessionFixture fx;
    auto text = session::load_system_template(template_dir(), "video");
    auto prompt = session::build_system_prompt(fx.registry, text);

    for (const char* name : {"get_transcript", "query_transcript", "query_frames", "query_vision"})
        CHECK(prompt.find(name) != std::string::npos);
    CHECK(prompt.find("All communications would be using clean JSON format") != std::string::npos);
    CHECK(prompt.find("{{tools}}") == std::string::npos);
    CHECK(prompt.find("<guidelines>") != std::string::npos);
    CHECK(prompt.find("<input-output>") != std::string::npos);

    // deterministic output for identical inputs
    CHECK(session::build_system_prompt(fx.registry, text) == prompt);

    toolkit::ToolRegistry empty;
    CHECK_THROWS_AS(session::build_system_prompt(empty, text), session::EmptyRegistry);
}

TEST_CASE("single critic-accepted run produces the seven-entry chain") {
    SessionFixture fx;
    script_accepted_session(fx);

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticAccepted);
    CHECK(result.critic_rounds_used == 1);
    CHECK(result.final_answer == "Leg extensions follow the leg presses.");
    REQUIRE(result.chain.size() == 7);

    std::vector<Role> roles{Role::User,     Role::Reasoner, Role::Tool, Role::Reasoner,
                            Role::Tool,     Role::Reasoner, Role::Critic};
    for (std::size_t i = 0; i < roles.size(); ++i) CHECK(result.chain.at(i).role == roles[i]);

    CHECK(fx.reasoner->calls() == 3);
    CHECK(fx.critic->calls() == 1);
}

TEST_CASE("critic rejection feeds feedback back and reasoning continues") {
    SUBCASE("with budget for a second round the session converges") {
        SessionFixture fx;
        fx.config.max_critic_rounds = 2;
        fx.reasoner->push(answer_json("It is the bench press."));
        fx.critic->push(critic_json("NO", {"incomplete", "check the transcript", "ok"}));
        fx.reasoner->push(step_json("get_transcript", {}));
        fx.reasoner->push(answer_json("Leg extensions."));
        fx.critic->push(critic_json("YES"));

        auto result = fx.run();
        CHECK(result.termination == Termination::CriticAccepted);
        CHECK(result.critic_rounds_used == 2);
        CHECK(result.final_answer == "Leg extensions.");
        // query, answer, critic, step, output, answer, critic
        CHECK(result.chain.size() == 7);
    }

    SUBCASE("with a single round the budget exhausts on the first NO") {
        SessionFixture fx;
        fx.config.max_critic_rounds = 1;
        fx.reasoner->push(answer_json("It is the bench press."));
        fx.critic->push(critic_json("NO", {"incomplete", "check the transcript", "ok"}));

        auto result = fx.run();
        CHECK(result.termination == Termination::CriticBudgetExhausted);
        CHECK(result.critic_rounds_used == 1);
        CHECK(result.final_answer == "It is the bench press.");
        CHECK(fx.reasoner->calls() == 1);
    }
}

TEST_CASE("endless stepping exhausts the iteration budget as unanswerable") {
    SessionFixture fx;
    fx.config.max_iterations = 4;
    for (int i = 0; i < 10; ++i) fx.reasoner->push(step_json("get_transcript", {}));

    auto result = fx.run();
    CHECK(result.termination == Termination::IterationBudgetExhausted);
    CHECK_FALSE(result.answered());
    CHECK(fx.reasoner->calls() == 4);
    CHECK(fx.critic->calls() == 0);
}

TEST_CASE("critic call count never exceeds the configured budget") {
    for (int rounds : {1, 3, 5}) {
        SessionFixture fx;
        fx.config.max_critic_rounds = rounds;
        for (int i = 0; i <= rounds; ++i) {
            fx.reasoner->push(answer_json("attempt " + std::to_string(i)));
            fx.critic->push(critic_json("NO", {"no", "no", "no"}));
        }
        auto result = fx.run();
        CHECK(result.termination == Termination::CriticBudgetExhausted);
        CHECK(result.critic_rounds_used == rounds);
        CHECK(fx.critic->calls() == static_cast<std::uint64_t>(rounds));
        // bound from the session contract
        auto bound = static_cast<std::uint64_t>(fx.config.max_iterations) *
                         static_cast<std::uint64_t>(rounds + 1) +
                     static_cast<std::uint64_t>(rounds);
        CHECK(fx.reasoner->calls() <= bound);
    }
}

TEST_CASE("a disabled critic is never prompted") {
    SessionFixture fx;
    fx.config.critic_enabled = false;
    fx.reasoner->push(answer_json("done"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticDisabled);
    CHECK(result.critic_rounds_used == 0);
    CHECK(fx.critic->calls() == 0);
}

TEST_CASE("zero critic budget with the critic enabled exhausts immediately") {
    SessionFixture fx;
    fx.config.max_critic_rounds = 0;
    fx.reasoner->push(answer_json("done"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticBudgetExhausted);
    CHECK(fx.critic->calls() == 0);
}

TEST_CASE("scripted sessions are deterministic across runs") {
    auto run_once = [] {
        SessionFixture fx;
        script_accepted_session(fx);
        return fx.run();
    };
    auto a = run_once();
    auto b = run_once();
    CHECK(session::same_result(a, b));
}

TEST_CASE("two consecutive malformed outputs fail the session") {
    SessionFixture fx;
    fx.reasoner->push("I think I should look at the transcript first.");
    fx.reasoner->push("Sorry, still thinking out loud.");

    auto result = fx.run();
    CHECK(result.termination == Termination::Failure);
    CHECK_FALSE(result.answered());
    CHECK(fx.reasoner->calls() == 2);
}

TEST_CASE("a malformed output followed by a valid one recovers") {
    SessionFixture fx;
    fx.reasoner->push("not json at all");
    fx.reasoner->push(answer_json("recovered"));
    fx.critic->push(critic_json("YES"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticAccepted);
    CHECK(result.final_answer == "recovered");
    // malformed outputs never enter the chain
    CHECK(result.chain.size() == 3);
}

TEST_CASE("a reasoner record that is neither Step nor Answer counts as malformed") {
    SessionFixture fx;
    fx.reasoner->push(R"({"Output":"I am a confused reasoner"})");
    fx.reasoner->push(answer_json("back on track"));
    fx.critic->push(critic_json("YES"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticAccepted);
    CHECK(result.final_answer == "back on track");
}

TEST_CASE("an enabled critic without a configured backend is a config error") {
    SessionFixture fx;
    fx.backends.critic = nullptr;
    fx.reasoner->push(answer_json("x"));
    CHECK_THROWS_AS(fx.run(), session::BadSessionConfig);

    fx.config.critic_enabled = false;
    auto result = fx.run();
    CHECK(result.termination == Termination::CriticDisabled);
}

TEST_CASE("a misnamed tool surfaces as output and the reasoner recovers") {
    SessionFixture fx;
    fx.reasoner->push(step_json("get_transcirpt", {}));  // typo
    fx.reasoner->push(step_json("get_transcript", {}));
    fx.reasoner->push(answer_json("ok"));
    fx.critic->push(critic_json("YES"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticAccepted);

    const auto* mistake =
        std::get_if<protocol::ToolOutput>(result.chain.at(2).agent_message());
    REQUIRE(mistake != nullptr);
    CHECK(mistake->output.rfind("Unknown tool", 0) == 0);
}

TEST_CASE("every dispatched action names a registered tool") {
    SessionFixture fx;
    script_accepted_session(fx);
    auto result = fx.run();
    for (const auto& entry : result.chain.entries()) {
        if (entry.role != Role::Reasoner) continue;
        if (const auto* step = std::get_if<protocol::Step>(entry.agent_message()))
            CHECK(fx.registry.contains(step->action.tool_name));
    }
}

TEST_CASE("every tool entry immediately follows the reasoner step it answers") {
    SessionFixture fx;
    fx.config.max_critic_rounds = 2;
    fx.reasoner->push(step_json("get_transcript", {}));
    fx.reasoner->push(answer_json("first"));
    fx.critic->push(critic_json("NO", {"dig deeper", "shallow", "ok"}));
    fx.reasoner->push(step_json("query_transcript", {{"transcript_query", "stretches"}}));
    fx.reasoner->push(answer_json("second"));
    fx.critic->push(critic_json("YES"));

    auto result = fx.run();
    const auto& entries = result.chain.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].role != Role::Tool) continue;
        REQUIRE(i > 0);
        CHECK(entries[i - 1].role == Role::Reasoner);
        CHECK(std::holds_alternative<protocol::Step>(*entries[i - 1].agent_message()));
    }
}

TEST_CASE("the giving-up phrase maps to the unanswerable marker") {
    SessionFixture fx;
    fx.config.critic_enabled = false;
    fx.reasoner->push(answer_json("I am unable to answer this question"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticDisabled);
    CHECK_FALSE(result.answered());
}

TEST_CASE("transport failures propagate with the partial chain attached") {
    SessionFixture fx;
    fx.reasoner->push(step_json("get_transcript", {}));
    // script exhausts on the second reasoner call

    try {
        fx.run();
        FAIL("expected SessionTransportError");
    } catch (const session::SessionTransportError& e) {
        CHECK(e.code() == "ScriptExhausted");
        CHECK(e.partial_chain().size() == 3);  // query, step, output
    }
}

TEST_CASE("image sessions are seeded with a describe step and critic sees the image") {
    auto source = media::MediaHandle::synthetic_video(1);
    auto image = media::MediaHandle::from_image(source.frame_at(0), "fixture.png");

    auto vit = std::make_shared<backends::ScriptedChatBackend>();
    auto ocr = std::make_shared<backends::ScriptedChatBackend>();
    auto detect = std::make_shared<backends::ScriptedChatBackend>();
    auto recognize = std::make_shared<backends::ScriptedChatBackend>();
    vit->push("A menu with prices.");

    toolkit::ImageToolDeps deps;
    deps.image = &image;
    deps.capabilities = {{"vit", vit.get()}, {"ocr", ocr.get()}, {"detect", detect.get()},
                         {"recognize", recognize.get()}};
    deps.template_dir = template_dir();
    toolkit::ToolRegistry registry;
    toolkit::register_image_tools(registry, deps);

    auto reasoner = std::make_shared<backends::ScriptedChatBackend>();
    auto critic_backend = std::make_shared<backends::ScriptedChatBackend>();
    reasoner->push(answer_json("The total is $18."));
    critic_backend->push(R"({"Observation":"o","Thought":"t",
        "Feedback":{"Criteria 1":"clear","Criteria 2":"right","Criteria 3":"grounded"},
        "Verdict":"YES"})");

    backends::BackendSet set;
    set.reasoner = reasoner;
    set.critic = critic_backend;
    set.vit = vit;

    auto criteria = critic::CriteriaSet::load(template_dir() + "/image/default_criteria.json");
    session::SessionConfig config;
    config.template_dir = template_dir();

    auto result = session::run_session("What is the total price?", image, registry, set,
                                       criteria, config);
    CHECK(result.termination == Termination::CriticAccepted);
    REQUIRE(result.chain.size() >= 3);
    CHECK(session::is_seeded_first_step(result.chain.at(1)));
    const auto* described = std::get_if<protocol::ToolOutput>(result.chain.at(2).agent_message());
    REQUIRE(described != nullptr);
    CHECK(described->output == "A menu with prices.");
    CHECK(vit->calls() == 1);             // the forced describe call
    CHECK(critic_backend->max_images_seen() == 1);  // the image itself as evidence
}

TEST_CASE("a video session with no vision calls still gets a text-only critic") {
    SessionFixture fx;
    fx.reasoner->push(answer_json("From the transcript alone: stretches."));
    fx.critic->push(critic_json("YES"));

    auto result = fx.run();
    CHECK(result.termination == Termination::CriticAccepted);
    CHECK(fx.critic->calls() == 1);
    CHECK(fx.critic->max_images_seen() == 0);
}
