// SPDX-License-Identifier: Apache-2.0
#include "mmagent/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmagent::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {
constexpr const char* kTranscriptMagic = "MMAGENT-TRANSCRIPT v1";
}

SidecarPaths sidecar_paths(const std::string& media_path) {
    return {media_path + ".transcript.json", media_path + ".phrases.idx",
            media_path + ".frames.idx"};
}

std::string media_digest(const media::MediaHandle& media) {
    std::ifstream in(media.source(), std::ios::binary);
    if (in) {
        std::ostringstream buffer;
        buffer << in.rdbuf();
        auto bytes = buffer.str();
        return backends::digest_bytes(bytes.data(), bytes.size());
    }
    // Synthetic and remote sources key off the source string.
    return backends::digest_bytes(media.source().data(), media.source().size());
}

void save_transcript(const media::Transcript& transcript, const std::string& path) {
    json rows = json::array();
    for (const auto& phrase : transcript.phrases)
        rows.push_back({phrase.start.str(), phrase.end.str(), phrase.text});
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << json{{"magic", kTranscriptMagic}, {"phrases", rows}}.dump() << "\n";
}

std::optional<media::Transcript> load_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || doc.value("magic", "") != kTranscriptMagic) return std::nullopt;
    media::Transcript transcript;
    for (const auto& row : doc["phrases"])
        transcript.phrases.push_back({media::Timestamp::parse(row.at(0).get<std::string>()),
                                      media::Timestamp::parse(row.at(1).get<std::string>()),
                                      row.at(2).get<std::string>()});
    return transcript;
}

VideoContext build_context(const media::MediaHandle& video, backends::ASRBackend& asr,
                           backends::EmbeddingBackend& embedder, double frame_rate) {
    VideoContext ctx;
    ctx.transcript = media::acquire_transcript(video, asr);
    if (!ctx.transcript.empty()) {
        ctx.phrase_index = retrieval::build_phrase_index(ctx.transcript.phrases, embedder);
        ctx.has_phrase_index = true;
    }
    auto frames = media::sample_index_frames(video, frame_rate);
    ctx.frame_index = retrieval::build_frame_index(frames, embedder);
    return ctx;
}

void save_context(const VideoContext& ctx, const SidecarPaths& paths) {
    save_transcript(ctx.transcript, paths.transcript);
    ctx.frame_index.save(paths.frames);
    if (ctx.has_phrase_index) ctx.phrase_index.save(paths.phrases);
}

bool try_load_context(VideoContext& ctx, const SidecarPaths& paths) {
    auto transcript = load_transcript(paths.transcript);
    if (!transcript || !fs::exists(paths.frames)) return false;
    ctx.transcript = std::move(*transcript);
    ctx.frame_index = retrieval::FrameIndex::load(paths.frames);
    ctx.has_phrase_index = false;
    if (fs::exists(paths.phrases)) {
        ctx.phrase_index = retrieval::PhraseIndex::load(paths.phrases);
        ctx.has_phrase_index = true;
    } else if (!ctx.transcript.empty()) {
        return false;  // sidecar set is incomplete
    }
    return true;
}

VideoContext acquire_context(const media::MediaHandle& video, backends::ASRBackend& asr,
                             backends::EmbeddingBackend& embedder,
                             const CacheOptions& options) {
    VideoContext ctx;
    if (!options.no_cache && try_load_context(ctx, sidecar_paths(video.source()))) return ctx;

    std::ostringstream key;
    key << media_digest(video) << "-" << options.backend_identity << "-r" << options.frame_rate;
    SidecarPaths cached = sidecar_paths((fs::path(options.cache_dir) / key.str()).string());
    if (!options.no_cache && try_load_context(ctx, cached)) return ctx;

    ctx = build_context(video, asr, embedder, options.frame_rate);
    if (!options.no_cache) {
        fs::create_directories(options.cache_dir);
        save_context(ctx, cached);
    }
    return ctx;
}

}  // namespace mmagent::pipeline
