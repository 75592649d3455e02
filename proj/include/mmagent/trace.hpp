// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mmagent/session.hpp"

namespace mmagent::session {

MMAGENT_ERROR_TYPE(TraceCorrupt);
MMAGENT_ERROR_TYPE(TraceIncomplete);

// Everything replay needs beyond the chain itself: the query, media shape,
// session config, assembled system prompt, active criteria names, and the
// recorded outcome to compare against.
struct TraceMeta {
    int version = 1;
    std::string query;
    media::MediaKind media_kind = media::MediaKind::Video;
    std::string media_source;
    std::uint64_t media_duration = 0;
    SessionConfig config;
    std::string system_prompt;
    std::vector<std::string> criteria_names;
    Termination termination = Termination::Failure;
    std::optional<std::string> final_answer;
    int critic_rounds_used = 0;
};

struct Trace {
    TraceMeta meta;
    std::vector<ChainEntry> entries;
};

// Line-delimited records: a meta record at seq 0, then one record per chain
// entry: {"seq":n,"role":...,"payload":...,"ts":...}.
void write_trace(const std::string& path, const SessionResult& result, const std::string& query,
                 const media::MediaHandle& media, const SessionConfig& config,
                 const std::string& system_prompt,
                 const std::vector<std::string>& criteria_names);

Trace read_trace(const std::string& path);

// Re-executes the session with every backend scripted from the trace. The
// result matches the original run field-for-field (timestamps excluded).
SessionResult replay_session(const std::string& trace_path);

bool matches_trace(const SessionResult& result, const Trace& trace);

}  // namespace mmagent::session
