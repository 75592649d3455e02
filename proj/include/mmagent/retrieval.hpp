// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmagent/backends.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/media.hpp"

namespace mmagent::retrieval {

MMAGENT_ERROR_TYPE(DimensionMismatch);
MMAGENT_ERROR_TYPE(ZeroVector);
MMAGENT_ERROR_TYPE(EmptyTranscript);
MMAGENT_ERROR_TYPE(IndexFormatError);

using backends::EmbeddingVector;

// dot(a,b) / (|a||b|), accumulated in double precision.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct IndexEntry {
    media::Timestamp key;
    EmbeddingVector vec;
    std::string payload;
};

// Exact-search vector index over transcript phrases or sampled frames.
// Immutable once built; desk-scale sizes make brute-force search the right
// tool (no approximate structures).
class VectorIndex {
public:
    VectorIndex() = default;
    VectorIndex(std::string kind, std::vector<IndexEntry> entries);

    const std::string& kind() const { return kind_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::vector<IndexEntry>& entries() const { return entries_; }

    // Top-k keys by cosine similarity, best first; ties break toward the
    // earlier timestamp. Returns all entries when k exceeds the index size.
    std::vector<media::Timestamp> search(const EmbeddingVector& query, std::size_t k) const;

    // Sidecar persistence: a versioned magic header line followed by one
    // JSON record per entry.
    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

private:
    std::string kind_;
    std::vector<IndexEntry> entries_;
    std::size_t dimension_ = 0;
};

using PhraseIndex = VectorIndex;
using FrameIndex = VectorIndex;

// Midpoint key: arithmetic mean of start and end seconds, rounded half-up.
media::Timestamp phrase_midpoint(const media::TranscriptPhrase& phrase);

PhraseIndex build_phrase_index(std::span<const media::TranscriptPhrase> phrases,
                               backends::EmbeddingBackend& embedder);

FrameIndex build_frame_index(std::span<const media::Frame> frames,
                             backends::EmbeddingBackend& embedder);

std::vector<media::Timestamp> search_phrases(const PhraseIndex& index, const std::string& query,
                                             std::size_t k, backends::EmbeddingBackend& embedder);

std::vector<media::Timestamp> search_frames(const FrameIndex& index, const std::string& query,
                                            std::size_t k, backends::EmbeddingBackend& embedder);

// "00:01:21,00:00:19,00:02:40" — match order, best first.
std::string format_timestamps(std::span<const media::Timestamp> timestamps);

}  // namespace mmagent::retrieval
