// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmagent/errors.hpp"

namespace mmagent::backends {
class ASRBackend;
}

namespace mmagent::media {

MMAGENT_ERROR_TYPE(BadTimestamp);
MMAGENT_ERROR_TYPE(OutOfRange);
MMAGENT_ERROR_TYPE(DecodeFailure);
MMAGENT_ERROR_TYPE(ImageComposeFailure);

// Whole-second timestamp with the "HH:MM:SS" wire form.
class Timestamp {
public:
    Timestamp() = default;
    explicit Timestamp(std::uint64_t total_seconds) : seconds_(total_seconds) {}

    // Accepts zero-padded "HH:MM:SS" with MM,SS < 60; hours may exceed two
    // digits for long media.
    static Timestamp parse(const std::string& text);

    std::uint64_t seconds() const { return seconds_; }
    std::string str() const;

    auto operator<=>(const Timestamp&) const = default;

private:
    std::uint64_t seconds_ = 0;
};

struct TranscriptPhrase {
    Timestamp start;
    Timestamp end;  // start <= end
    std::string text;

    bool operator==(const TranscriptPhrase&) const = default;
};

struct Transcript {
    std::vector<TranscriptPhrase> phrases;  // ordered by start time

    bool empty() const { return phrases.empty(); }
    // "[HH:MM:SS - HH:MM:SS] text" per phrase; the get_transcript output.
    std::string to_text() const;
};

// Packed RGB raster. `label` is a stable identity ("source@HH:MM:SS" for
// video frames) used by request fingerprints and scripted embedders.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
    std::string label;

    bool empty() const { return width == 0 || height == 0; }
};

struct Frame {
    Timestamp ts;
    Image image;
};

enum class MediaKind { Image, Video };

// Narrow decoder interface; concrete decoders (file-backed, synthetic) live
// behind it.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::uint64_t duration_seconds() const = 0;
    virtual Image frame_at(double seconds) const = 0;
};

class MediaHandle {
public:
    // Detects image vs. video by file extension and decodes accordingly.
    // Paths of the form "synth:<seconds>" open a synthetic video, useful for
    // offline runs.
    static MediaHandle open(const std::string& path);
    static MediaHandle synthetic_video(std::uint64_t duration_seconds,
                                       const std::string& source = "synthetic");
    static MediaHandle from_image(Image image, const std::string& source);

    MediaKind kind() const { return kind_; }
    std::uint64_t duration() const { return duration_; }
    const std::string& source() const { return source_; }

    Image frame_at(double seconds) const;
    // The single frame of an image handle.
    const Image& image() const;

private:
    MediaHandle() = default;

    MediaKind kind_ = MediaKind::Image;
    std::uint64_t duration_ = 0;
    std::string source_;
    std::shared_ptr<const FrameSource> frames_;
    std::shared_ptr<const Image> still_;
};

Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp t);

// Ten frames at 1 fps covering [center-5, center+4], window shifted to stay
// inside [0, duration-1]. Shorter media yield one frame per available second.
std::vector<Frame> sample_clip(const MediaHandle& media, Timestamp center);

// Frames at t = 0, 1/rate, 2/rate, ... < duration, keyed by whole seconds.
std::vector<Frame> sample_index_frames(const MediaHandle& media, double rate);

// Phrases as reported by the ASR backend, re-sorted by start time. Silent
// media yield an empty transcript, not an error.
Transcript acquire_transcript(const MediaHandle& media, backends::ASRBackend& asr);

// Raster helpers shared by framegrid and the CLI. Implemented over the
// linked image codecs; the rest of the codebase stays decoder-agnostic.
Image decode_image_file(const std::string& path);
Image resize_to_height(const Image& image, int height);
Image hconcat(const std::vector<Image>& images);
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::string& path);

}  // namespace mmagent::media
