// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "mmagent/trace.hpp"

using namespace mmagent;
using namespace testsupport;
using session::Termination;

namespace {

struct TracedRun {
    session::SessionResult result;
    std::string path;

    explicit TracedRun(const std::string& name) : path(name) {
        SessionFixture fx;
        script_accepted_session(fx);
        std::string query = "What exercise follows leg presses?";
        result = fx.run(query);
        auto system_prompt = session::build_system_prompt(
            fx.registry, session::load_system_template(template_dir(), "video"));
        session::write_trace(path, result, query, fx.video, fx.config, system_prompt,
                             fx.criteria.names());
    }

    ~TracedRun() { std::remove(path.c_str()); }
};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& line : lines) out << line << "\n";
}

}  // namespace

TEST_CASE("traces round-trip through write and read") {
    TracedRun traced("trace_roundtrip.trace");
    auto trace = session::read_trace(traced.path);

    CHECK(trace.meta.query == "What exercise follows leg presses?");
    CHECK(trace.meta.termination == Termination::CriticAccepted);
    CHECK(trace.meta.critic_rounds_used == 1);
    CHECK(trace.meta.media_duration == 180);
    CHECK(trace.entries.size() == traced.result.chain.size());
    CHECK(session::matches_trace(traced.result, trace));
}

TEST_CASE("replay reproduces the original result field-for-field") {
    TracedRun traced("trace_replay.trace");
    auto replayed = session::replay_session(traced.path);
    CHECK(session::same_result(replayed, traced.result));
    CHECK(session::matches_trace(replayed, session::read_trace(traced.path)));
}

TEST_CASE("replay performs zero network activity") {
    TracedRun traced("trace_offline.trace");
    auto before = backends::network_request_count();
    session::replay_session(traced.path);
    CHECK(backends::network_request_count() == before);
}

TEST_CASE("a truncated trace is incomplete") {
    TracedRun traced("trace_truncated.trace");
    auto lines = read_lines(traced.path);
    REQUIRE(lines.size() == 8);  // meta + 7 entries
    lines.pop_back();            // drop the critic entry
    write_lines(traced.path, lines);

    CHECK_THROWS_AS(session::replay_session(traced.path), session::TraceIncomplete);
}

TEST_CASE("a corrupt record is distinguished from a truncated one") {
    TracedRun traced("trace_corrupt.trace");
    auto lines = read_lines(traced.path);
    lines[3] = "{ this is not json";
    write_lines(traced.path, lines);
    CHECK_THROWS_AS(session::read_trace(traced.path), session::TraceCorrupt);

    CHECK_THROWS_AS(session::read_trace("no_such_file.trace"), session::TraceCorrupt);
}

TEST_CASE("editing a tool output shifts the replayed chain at exactly that entry") {
    TracedRun traced("trace_edited.trace");
    auto lines = read_lines(traced.path);

    // seq 3 (chain entry 2) is the first tool output (get_transcript).
    auto pos = lines[3].find("[00:01:16 - 00:01:26] now we move to leg presses");
    REQUIRE(pos != std::string::npos);
    lines[3].replace(pos, std::string("[00:01:16 - 00:01:26] now we move to leg presses").size(),
                     "[00:01:16 - 00:01:26] now we move to squats");
    write_lines(traced.path, lines);

    auto replayed = session::replay_session(traced.path);
    REQUIRE(replayed.chain.size() == traced.result.chain.size());

    std::size_t differing = 0;
    std::size_t first_difference = 0;
    for (std::size_t i = 0; i < replayed.chain.size(); ++i) {
        if (replayed.chain.at(i).payload != traced.result.chain.at(i).payload) {
            if (differing == 0) first_difference = i;
            ++differing;
        }
    }
    CHECK(differing == 1);
    CHECK(first_difference == 2);
}

TEST_CASE("image session traces replay including the seeded describe step") {
    auto source = media::MediaHandle::synthetic_video(1);
    auto image = media::MediaHandle::from_image(source.frame_at(0), "fixture.png");

    auto vit = std::make_shared<backends::ScriptedChatBackend>();
    auto ocr = std::make_shared<backends::ScriptedChatBackend>();
    auto detect = std::make_shared<backends::ScriptedChatBackend>();
    auto recognize = std::make_shared<backends::ScriptedChatBackend>();
    vit->push("A menu listing a pizza and a calzone.");

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

    auto criteria = critic::CriteriaSet::load(template_dir() + "/image/default_criteria.json");
    session::SessionConfig config;
    config.template_dir = template_dir();

    auto system_prompt = session::build_system_prompt(
        registry, session::load_system_template(template_dir(), "image"));
    std::string query = "What is the total price?";
    auto result = session::run_session_with_prompt(system_prompt, query, image, registry, set,
                                                   criteria, config);
    REQUIRE(result.termination == Termination::CriticAccepted);

    std::string path = "trace_image.trace";
    session::write_trace(path, result, query, image, config, system_prompt, criteria.names());
    auto replayed = session::replay_session(path);
    CHECK(session::same_result(replayed, result));
    std::remove(path.c_str());
}

TEST_CASE("trace files are byte-identical across runs modulo timestamps") {
    TracedRun a("trace_stable_a.trace");
    TracedRun b("trace_stable_b.trace");

    auto strip_ts = [](const std::string& line) {
        auto pos = line.find("\"ts\":");
        return pos == std::string::npos ? line : line.substr(0, pos);
    };
    auto la = read_lines(a.path);
    auto lb = read_lines(b.path);
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(strip_ts(la[i]) == strip_ts(lb[i]));
}
