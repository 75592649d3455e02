// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "mmagent/backends.hpp"
#include "mmagent/media.hpp"
#include "mmagent/retrieval.hpp"

namespace mmagent::pipeline {

// Everything a video session needs before the planner loop starts: the
// transcript and both retrieval indexes.
struct VideoContext {
    media::Transcript transcript;
    retrieval::PhraseIndex phrase_index;
    retrieval::FrameIndex frame_index;
    bool has_phrase_index = false;  // false iff the transcript is empty
};

struct SidecarPaths {
    std::string transcript;
    std::string phrases;
    std::string frames;
};

// Sidecars live next to the media file: <path>.transcript.json,
// <path>.phrases.idx, <path>.frames.idx.
SidecarPaths sidecar_paths(const std::string& media_path);

struct CacheOptions {
    std::string cache_dir = ".mmagent-cache";
    double frame_rate = 1.0;
    bool no_cache = false;
    // Part of the cache key alongside the media digest and frame rate.
    std::string backend_identity = "none";
};

std::string media_digest(const media::MediaHandle& media);

void save_transcript(const media::Transcript& transcript, const std::string& path);
std::optional<media::Transcript> load_transcript(const std::string& path);

VideoContext build_context(const media::MediaHandle& video, backends::ASRBackend& asr,
                           backends::EmbeddingBackend& embedder, double frame_rate);

void save_context(const VideoContext& ctx, const SidecarPaths& paths);
bool try_load_context(VideoContext& ctx, const SidecarPaths& paths);

// Sidecars next to the media win, then the digest-keyed cache; otherwise the
// context is built and written to the cache. With no_cache set, nothing is
// read or written and the context is always rebuilt.
VideoContext acquire_context(const media::MediaHandle& video, backends::ASRBackend& asr,
                             backends::EmbeddingBackend& embedder, const CacheOptions& options);

}  // namespace mmagent::pipeline
