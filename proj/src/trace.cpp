// SPDX-License-Identifier: Apache-2.0
#include "mmagent/trace.hpp"

#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

namespace mmagent::session {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string iso8601(std::chrono::system_clock::time_point tp) {
    auto t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json meta_payload(const SessionResult& result, const std::string& query,
                          const media::MediaHandle& media, const SessionConfig& config,
                          const std::string& system_prompt,
                          const std::vector<std::string>& criteria_names) {
    ordered_json payload;
    payload["version"] = 1;
    payload["query"] = query;
    payload["media"] = {{"kind", media.kind() == media::MediaKind::Video ? "video" : "image"},
                        {"source", media.source()},
                        {"duration", media.duration()}};
    payload["config"] = {{"max_iterations", config.max_iterations},
                         {"max_critic_rounds", config.max_critic_rounds},
                         {"critic_enabled", config.critic_enabled},
                         {"malformed_retry_limit", config.malformed_retry_limit},
                         {"template_dir", config.template_dir},
                         {"prompt_family", config.prompt_family}};
    payload["system_prompt"] = system_prompt;
    payload["criteria"] = criteria_names;
    payload["result"] = {{"termination", to_string(result.termination)},
                         {"answered", result.answered()},
                         {"final_answer", result.final_answer.value_or("")},
                         {"critic_rounds_used", result.critic_rounds_used}};
    return payload;
}

ChainEntry entry_from_record(const ordered_json& record,
                             const std::vector<std::string>& criteria_names) {
    ChainEntry entry;
    entry.role = role_from_string(record.at("role").get<std::string>());
    entry.ts = std::chrono::system_clock::time_point{};
    std::string payload = record.at("payload").dump();
    if (entry.role == Role::Critic)
        entry.payload = protocol::parse_critic_message(payload, criteria_names);
    else
        entry.payload = protocol::parse_agent_message(payload);
    return entry;
}

}  // namespace

void write_trace(const std::string& path, const SessionResult& result, const std::string& query,
                 const media::MediaHandle& media, const SessionConfig& config,
                 const std::string& system_prompt,
                 const std::vector<std::string>& criteria_names) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw TraceCorrupt("cannot write trace: " + path);

    auto now = std::chrono::system_clock::now();
    out << ordered_json{{"seq", 0},
                        {"role", "meta"},
                        {"payload", meta_payload(result, query, media, config, system_prompt,
                                                 criteria_names)},
                        {"ts", iso8601(now)}}
               .dump()
        << "\n";

    std::size_t seq = 1;
    for (const auto& entry : result.chain.entries()) {
        out << ordered_json{{"seq", seq++},
                            {"role", to_string(entry.role)},
                            {"payload", ordered_json::parse(entry.serialized())},
                            {"ts", iso8601(entry.ts)}}
                   .dump()
            << "\n";
    }
}

Trace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceCorrupt("cannot open trace: " + path);

    Trace trace;
    std::string line;
    std::size_t expected_seq = 0;
    bool have_meta = false;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json record = ordered_json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object())
            throw TraceCorrupt("unparseable record at seq " + std::to_string(expected_seq) +
                               " in " + path);
        if (!record.contains("seq") || !record.contains("role") || !record.contains("payload"))
            throw TraceCorrupt("record missing seq/role/payload in " + path);
        if (record.at("seq").get<std::size_t>() != expected_seq)
            throw TraceCorrupt("non-contiguous seq in " + path);

        if (expected_seq == 0) {
            if (record.at("role").get<std::string>() != "meta")
                throw TraceCorrupt("first record must be the meta header in " + path);
            const auto& payload = record.at("payload");
            try {
                trace.meta.version = payload.at("version").get<int>();
                trace.meta.query = payload.at("query").get<std::string>();
                const auto& m = payload.at("media");
                trace.meta.media_kind = m.at("kind").get<std::string>() == "video"
                                            ? media::MediaKind::Video
                                            : media::MediaKind::Image;
                trace.meta.media_source = m.at("source").get<std::string>();
                trace.meta.media_duration = m.at("duration").get<std::uint64_t>();
                const auto& c = payload.at("config");
                trace.meta.config.max_iterations = c.at("max_iterations").get<int>();
                trace.meta.config.max_critic_rounds = c.at("max_critic_rounds").get<int>();
                trace.meta.config.critic_enabled = c.at("critic_enabled").get<bool>();
                trace.meta.config.malformed_retry_limit =
                    c.at("malformed_retry_limit").get<int>();
                trace.meta.config.template_dir = c.value("template_dir", "templates");
                trace.meta.config.prompt_family = c.value("prompt_family", "");
                trace.meta.system_prompt = payload.at("system_prompt").get<std::string>();
                trace.meta.criteria_names =
                    payload.at("criteria").get<std::vector<std::string>>();
                const auto& r = payload.at("result");
                trace.meta.termination =
                    termination_from_string(r.at("termination").get<std::string>());
                if (r.at("answered").get<bool>())
                    trace.meta.final_answer = r.at("final_answer").get<std::string>();
                trace.meta.critic_rounds_used = r.at("critic_rounds_used").get<int>();
            } catch (const ordered_json::exception& e) {
                throw TraceCorrupt(std::string("bad meta header: ") + e.what());
            }
            have_meta = true;
        } else {
            try {
                trace.entries.push_back(entry_from_record(record, trace.meta.criteria_names));
            } catch (const Error& e) {
                throw TraceCorrupt("bad chain record at seq " + std::to_string(expected_seq) +
                                   ": " + e.what());
            }
        }
        ++expected_seq;
    }
    if (!have_meta) throw TraceCorrupt("trace has no meta header: " + path);
    return trace;
}

SessionResult replay_session(const std::string& trace_path) {
    Trace trace = read_trace(trace_path);

    auto reasoner = std::make_shared<backends::ScriptedChatBackend>();
    auto critic_backend = std::make_shared<backends::ScriptedChatBackend>();
    auto tool_outputs = std::make_shared<std::deque<std::string>>();
    std::set<std::string> tool_names;

    bool first_reasoner = true;
    for (const auto& entry : trace.entries) {
        switch (entry.role) {
            case Role::Reasoner: {
                // The framework re-injects the seeded describe step itself;
                // it never came from the reasoner backend.
                bool seeded = first_reasoner && trace.meta.media_kind == media::MediaKind::Image &&
                              is_seeded_first_step(entry);
                first_reasoner = false;
                if (!seeded) reasoner->push(entry.serialized());
                if (const auto* agent = entry.agent_message())
                    if (const auto* step = std::get_if<protocol::Step>(agent))
                        tool_names.insert(step->action.tool_name);
                break;
            }
            case Role::Critic:
                critic_backend->push(entry.serialized());
                break;
            case Role::Tool: {
                const auto* agent = entry.agent_message();
                const auto* output = std::get_if<protocol::ToolOutput>(agent);
                if (!output) throw TraceCorrupt("tool record without an Output payload");
                tool_outputs->push_back(output->output);
                break;
            }
            case Role::User:
                break;
        }
    }

    if (tool_names.empty()) {
        // Answer-only trace: the registry still has to be non-empty.
        if (trace.meta.media_kind == media::MediaKind::Video)
            tool_names = {"get_transcript", "query_transcript", "query_frames", "query_vision"};
        else
            tool_names = {"vit_describe", "ocr", "detect_objects", "recognize"};
    }

    toolkit::ToolRegistry registry;
    for (const auto& name : tool_names) {
        toolkit::ToolDescriptor descriptor;
        descriptor.name = name;
        descriptor.description = "replayed from trace";
        descriptor.accepts_any_args = true;
        registry.register_tool(std::move(descriptor),
                               [tool_outputs](const protocol::Action&, toolkit::SessionContext&) {
                                   if (tool_outputs->empty())
                                       throw backends::ScriptExhausted(
                                           "trace has no further tool outputs");
                                   toolkit::ToolResult result{tool_outputs->front(), {}, {}};
                                   tool_outputs->pop_front();
                                   return result;
                               });
    }

    media::MediaHandle handle =
        trace.meta.media_kind == media::MediaKind::Video
            ? media::MediaHandle::synthetic_video(std::max<std::uint64_t>(1, trace.meta.media_duration),
                                                  trace.meta.media_source)
            : media::MediaHandle::from_image(
                  media::MediaHandle::synthetic_video(1, trace.meta.media_source).frame_at(0),
                  trace.meta.media_source);

    std::vector<critic::Criterion> criteria;
    for (const auto& name : trace.meta.criteria_names) criteria.push_back({name, "", {}});
    if (criteria.empty()) criteria.push_back({"Answer Completeness", "", {}});

    backends::BackendSet set;
    set.reasoner = reasoner;
    set.critic = critic_backend;

    // Replay traces carry no descriptor texts; the registry above registered
    // wildcard handlers, so the recorded system prompt is reused verbatim.
    try {
        return run_session_with_prompt(trace.meta.system_prompt, trace.meta.query, handle,
                                       registry, set, critic::CriteriaSet(std::move(criteria)),
                                       trace.meta.config);
    } catch (const SessionTransportError& e) {
        if (e.code() == "ScriptExhausted")
            throw TraceIncomplete("trace ends before the session does: " + trace_path);
        throw;
    }
}

bool matches_trace(const SessionResult& result, const Trace& trace) {
    if (result.termination != trace.meta.termination) return false;
    if (result.final_answer != trace.meta.final_answer) return false;
    if (result.critic_rounds_used != trace.meta.critic_rounds_used) return false;
    if (result.chain.size() != trace.entries.size()) return false;
    for (std::size_t i = 0; i < trace.entries.size(); ++i) {
        if (result.chain.at(i).role != trace.entries[i].role) return false;
        if (result.chain.at(i).payload != trace.entries[i].payload) return false;
    }
    return true;
}

}  // namespace mmagent::session
