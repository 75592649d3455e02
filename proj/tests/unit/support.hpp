// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test helpers: repo paths, generators, and the independent oracles
// the retrieval and grid suites check against. Oracles here must stay
// independent of the implementation paths they verify.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/media.hpp"
#include "mmagent/protocol.hpp"
#include "mmagent/retrieval.hpp"

namespace testsupport {

inline std::string repo_path(const std::string& relative) {
    return std::string(MMAGENT_SOURCE_DIR) + "/" + relative;
}

inline std::string template_dir() {
    return repo_path("templates");
}

// Elementwise-loop cosine oracle.
inline double cosine_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Full-sort top-k oracle over raw entries, tie-break toward earlier
// timestamps, computed without touching VectorIndex::search.
inline std::vector<mmagent::media::Timestamp> topk_oracle(
    const std::vector<mmagent::retrieval::IndexEntry>& entries, const std::vector<double>& query,
    std::size_t k) {
    struct Row {
        double sim;
        mmagent::media::Timestamp ts;
    };
    std::vector<Row> rows;
    rows.reserve(entries.size());
    for (const auto& entry : entries) rows.push_back({cosine_oracle(query, entry.vec), entry.key});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.ts < b.ts;
    });
    std::vector<mmagent::media::Timestamp> out;
    for (std::size_t i = 0; i < std::min(k, rows.size()); ++i) out.push_back(rows[i].ts);
    return out;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len = 24) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,:;!?\"\\/{}[]#'\n\t";
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out;
    std::size_t n = len(rng);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(alphabet[pick(rng)]);
    return out;
}

inline mmagent::protocol::Action random_action(std::mt19937_64& rng) {
    mmagent::protocol::Action action;
    action.tool_name = "tool_" + std::to_string(rng() % 1000);
    std::uniform_int_distribution<int> arg_count(0, 3);
    int n = arg_count(rng);
    for (int i = 0; i < n; ++i)
        action.tool_input.emplace_back("arg" + std::to_string(i), random_text(rng));
    return action;
}

inline mmagent::protocol::AgentMessage random_message(std::mt19937_64& rng) {
    using namespace mmagent::protocol;
    switch (rng() % 5) {
        case 0: return Query{random_text(rng)};
        case 1: return Step{random_text(rng), random_text(rng), random_action(rng)};
        case 2: return Answer{random_text(rng), random_text(rng), random_text(rng)};
        case 3: return ToolOutput{random_text(rng)};
        default: return CriticFeedback{random_text(rng)};
    }
}

// Fixed request corpus behind tests/golden/fingerprints.golden; the golden
// file pins fingerprint stability across process restarts.
inline std::vector<mmagent::backends::Request> fingerprint_corpus() {
    using mmagent::backends::Request;
    auto text_request = [](const std::string& content) {
        Request request;
        request.messages.push_back({"user", content});
        return request;
    };
    auto frame = [](std::uint64_t second) {
        return mmagent::media::MediaHandle::synthetic_video(60).frame_at(
            static_cast<double>(second));
    };

    std::vector<Request> corpus;
    corpus.push_back(text_request("hello"));
    {
        Request r;
        r.messages.push_back({"system", "be brief"});
        r.messages.push_back({"user", "summarize the video"});
        r.temperature = 0.0;
        corpus.push_back(r);
    }
    {
        Request r = text_request("with image");
        r.images.push_back(frame(0));
        corpus.push_back(r);
    }
    {
        Request r = text_request("with image");
        r.images.push_back(frame(1));
        corpus.push_back(r);
    }
    return corpus;
}

}  // namespace testsupport
