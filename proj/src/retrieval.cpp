// SPDX-License-Identifier: Apache-2.0
#include "mmagent/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmagent::retrieval {

using json = nlohmann::json;

namespace {

constexpr const char* kMagic = "MMAGENT-INDEX v1";

double norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

}  // namespace

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("vector dimensions differ: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot / (na * nb);
}

VectorIndex::VectorIndex(std::string kind, std::vector<IndexEntry> entries)
    : kind_(std::move(kind)), entries_(std::move(entries)) {
    if (entries_.empty()) return;
    dimension_ = entries_.front().vec.size();
    for (const auto& entry : entries_) {
        if (entry.vec.size() != dimension_)
            throw DimensionMismatch("index entries have mixed dimensions");
        if (norm(entry.vec) == 0.0)
            throw ZeroVector("zero vector for entry at " + entry.key.str());
    }
}

std::vector<media::Timestamp> VectorIndex::search(const EmbeddingVector& query,
                                                  std::size_t k) const {
    if (k == 0 || entries_.empty()) return {};
    struct Scored {
        double similarity;
        media::Timestamp key;
    };
    std::vector<Scored> scored;
    scored.reserve(entries_.size());
    for (const auto& entry : entries_)
        scored.push_back({cosine_similarity(query, entry.vec), entry.key});

    auto better = [](const Scored& a, const Scored& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.key < b.key;
    };
    k = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end(), better);

    std::vector<media::Timestamp> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].key);
    return out;
}

void VectorIndex::save(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IndexFormatError("cannot write index: " + path);
    out << kMagic << "\n";
    out << json{{"kind", kind_}, {"dimension", dimension_}, {"count", entries_.size()}}.dump()
        << "\n";
    for (const auto& entry : entries_)
        out << json{{"ts", entry.key.str()}, {"vec", entry.vec}, {"payload", entry.payload}}
                   .dump()
            << "\n";
}

VectorIndex VectorIndex::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IndexFormatError("cannot open index: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw IndexFormatError("bad magic header in " + path);
    if (!std::getline(in, line)) throw IndexFormatError("missing index header in " + path);
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded()) throw IndexFormatError("corrupt index header in " + path);

    std::vector<IndexEntry> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded()) throw IndexFormatError("corrupt index entry in " + path);
        IndexEntry entry;
        entry.key = media::Timestamp::parse(record.at("ts").get<std::string>());
        entry.vec = record.at("vec").get<EmbeddingVector>();
        entry.payload = record.value("payload", "");
        entries.push_back(std::move(entry));
    }
    if (entries.size() != header.value("count", entries.size()))
        throw IndexFormatError("entry count mismatch in " + path);
    return VectorIndex(header.value("kind", ""), std::move(entries));
}

media::Timestamp phrase_midpoint(const media::TranscriptPhrase& phrase) {
    // Mean of start and end, rounded half-up to whole seconds.
    return media::Timestamp((phrase.start.seconds() + phrase.end.seconds() + 1) / 2);
}

PhraseIndex build_phrase_index(std::span<const media::TranscriptPhrase> phrases,
                               backends::EmbeddingBackend& embedder) {
    if (phrases.empty()) throw EmptyTranscript("no phrases to index");
    std::vector<std::string> texts;
    texts.reserve(phrases.size());
    for (const auto& phrase : phrases) texts.push_back(phrase.text);
    auto vectors = embedder.embed(texts);

    std::vector<IndexEntry> entries;
    entries.reserve(phrases.size());
    for (std::size_t i = 0; i < phrases.size(); ++i)
        entries.push_back({phrase_midpoint(phrases[i]), std::move(vectors[i]), phrases[i].text});
    return PhraseIndex("phrases", std::move(entries));
}

FrameIndex build_frame_index(std::span<const media::Frame> frames,
                             backends::EmbeddingBackend& embedder) {
    std::vector<media::Image> images;
    images.reserve(frames.size());
    for (const auto& frame : frames) images.push_back(frame.image);
    auto vectors = embedder.embed_images(images);

    std::vector<IndexEntry> entries;
    entries.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        entries.push_back({frames[i].ts, std::move(vectors[i]), frames[i].image.label});
    return FrameIndex("frames", std::move(entries));
}

std::vector<media::Timestamp> search_phrases(const PhraseIndex& index, const std::string& query,
                                             std::size_t k,
                                             backends::EmbeddingBackend& embedder) {
    auto vectors = embedder.embed({query});
    return index.search(vectors.front(), k);
}

std::vector<media::Timestamp> search_frames(const FrameIndex& index, const std::string& query,
                                            std::size_t k, backends::EmbeddingBackend& embedder) {
    auto vectors = embedder.embed({query});
    return index.search(vectors.front(), k);
}

std::string format_timestamps(std::span<const media::Timestamp> timestamps) {
    std::ostringstream out;
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (i) out << ",";
        out << timestamps[i].str();
    }
    return out.str();
}

}  // namespace mmagent::retrieval
