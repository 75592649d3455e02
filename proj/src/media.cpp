// SPDX-License-Identifier: Apache-2.0
#include "mmagent/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "mmagent/backends.hpp"

namespace mmagent::media {

namespace {

bool has_extension(const std::string& path, std::initializer_list<const char*> exts) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return std::any_of(exts.begin(), exts.end(), [&](const char* e) { return ext == e; });
}

Image from_mat(const cv::Mat& bgr, std::string label) {
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    Image img;
    img.width = rgb.cols;
    img.height = rgb.rows;
    img.label = std::move(label);
    img.rgb.assign(rgb.data, rgb.data + static_cast<std::size_t>(rgb.total()) * 3);
    return img;
}

cv::Mat to_mat(const Image& image) {
    cv::Mat rgb(image.height, image.width, CV_8UC3,
                const_cast<std::uint8_t*>(image.rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

// Deterministic frames for offline runs: a time-coded color wash with a
// moving bar, so consecutive seconds are visually distinct.
class SyntheticSource final : public FrameSource {
public:
    SyntheticSource(std::uint64_t duration, std::string source)
        : duration_(duration), source_(std::move(source)) {}

    std::uint64_t duration_seconds() const override { return duration_; }

    Image frame_at(double seconds) const override {
        if (seconds < 0 || seconds >= static_cast<double>(duration_))
            throw OutOfRange("synthetic frame at " + std::to_string(seconds) + "s");
        auto sec = static_cast<std::uint64_t>(seconds);
        Image img;
        img.width = 64;
        img.height = 36;
        img.label = source_ + "@" + Timestamp(sec).str();
        img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
        auto r = static_cast<std::uint8_t>((sec * 37) % 256);
        auto g = static_cast<std::uint8_t>((sec * 101) % 256);
        int bar = static_cast<int>(sec % static_cast<std::uint64_t>(img.width));
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                std::size_t i = (static_cast<std::size_t>(y) * img.width + x) * 3;
                img.rgb[i] = r;
                img.rgb[i + 1] = g;
                img.rgb[i + 2] = (x == bar) ? 255 : static_cast<std::uint8_t>((x * 4) % 256);
            }
        }
        return img;
    }

private:
    std::uint64_t duration_;
    std::string source_;
};

class VideoFileSource final : public FrameSource {
public:
    explicit VideoFileSource(const std::string& path) : path_(path), capture_(path) {
        if (!capture_.isOpened()) throw DecodeFailure("cannot open video: " + path);
        double fps = capture_.get(cv::CAP_PROP_FPS);
        double frames = capture_.get(cv::CAP_PROP_FRAME_COUNT);
        if (fps <= 0 || frames <= 0) throw DecodeFailure("cannot read duration of " + path);
        duration_ = static_cast<std::uint64_t>(std::max(1.0, std::floor(frames / fps)));
    }

    std::uint64_t duration_seconds() const override { return duration_; }

    Image frame_at(double seconds) const override {
        capture_.set(cv::CAP_PROP_POS_MSEC, seconds * 1000.0);
        cv::Mat frame;
        if (!capture_.read(frame) || frame.empty())
            throw DecodeFailure("cannot decode frame at " + std::to_string(seconds) + "s of " + path_);
        auto sec = static_cast<std::uint64_t>(seconds);
        return from_mat(frame, path_ + "@" + Timestamp(sec).str());
    }

private:
    std::string path_;
    mutable cv::VideoCapture capture_;  // seek+read serialized by the handle
    std::uint64_t duration_ = 0;
};

}  // namespace

Timestamp Timestamp::parse(const std::string& text) {
    bool shape_ok = !text.empty() && std::all_of(text.begin(), text.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == ':';
    });
    unsigned long long h = 0, m = 0, s = 0;
    char tail = 0;
    if (!shape_ok || std::sscanf(text.c_str(), "%llu:%llu:%llu%c", &h, &m, &s, &tail) != 3)
        throw BadTimestamp("expected HH:MM:SS, got \"" + text + "\"");
    if (m >= 60 || s >= 60)
        throw BadTimestamp("minutes/seconds out of range in \"" + text + "\"");
    return Timestamp(h * 3600 + m * 60 + s);
}

std::string Timestamp::str() const {
    std::uint64_t h = seconds_ / 3600;
    std::uint64_t m = (seconds_ % 3600) / 60;
    std::uint64_t s = seconds_ % 60;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02llu:%02llu:%02llu",
                  static_cast<unsigned long long>(h), static_cast<unsigned long long>(m),
                  static_cast<unsigned long long>(s));
    return buf;
}

Timestamp parse_timestamp(const std::string& text) {
    return Timestamp::parse(text);
}

std::string format_timestamp(Timestamp t) {
    return t.str();
}

std::string Transcript::to_text() const {
    std::ostringstream out;
    for (const auto& phrase : phrases)
        out << "[" << phrase.start.str() << " - " << phrase.end.str() << "] " << phrase.text
            << "\n";
    return out.str();
}

MediaHandle MediaHandle::open(const std::string& path) {
    if (path.rfind("synth:", 0) == 0) {
        auto seconds = std::strtoull(path.c_str() + 6, nullptr, 10);
        if (seconds == 0) throw DecodeFailure("synthetic duration must be >= 1: " + path);
        return synthetic_video(seconds, path);
    }
    if (has_extension(path, {"png", "jpg", "jpeg", "bmp", "ppm", "pgm", "tif", "tiff", "webp"}))
        return from_image(decode_image_file(path), path);

    MediaHandle handle;
    handle.kind_ = MediaKind::Video;
    handle.source_ = path;
    auto source = std::make_shared<VideoFileSource>(path);
    handle.duration_ = source->duration_seconds();
    handle.frames_ = std::move(source);
    return handle;
}

MediaHandle MediaHandle::synthetic_video(std::uint64_t duration_seconds,
                                         const std::string& source) {
    if (duration_seconds == 0) throw DecodeFailure("video duration must be >= 1");
    MediaHandle handle;
    handle.kind_ = MediaKind::Video;
    handle.source_ = source;
    handle.duration_ = duration_seconds;
    handle.frames_ = std::make_shared<SyntheticSource>(duration_seconds, source);
    return handle;
}

MediaHandle MediaHandle::from_image(Image image, const std::string& source) {
    if (image.empty()) throw DecodeFailure("empty image for " + source);
    MediaHandle handle;
    handle.kind_ = MediaKind::Image;
    handle.source_ = source;
    handle.duration_ = 0;
    if (image.label.empty()) image.label = source;
    handle.still_ = std::make_shared<Image>(std::move(image));
    return handle;
}

Image MediaHandle::frame_at(double seconds) const {
    if (kind_ == MediaKind::Image) return *still_;
    return frames_->frame_at(seconds);
}

const Image& MediaHandle::image() const {
    if (kind_ != MediaKind::Image) throw DecodeFailure("media is not an image: " + source_);
    return *still_;
}

std::vector<Frame> sample_clip(const MediaHandle& media, Timestamp center) {
    if (media.kind() != MediaKind::Video)
        throw OutOfRange("sample_clip requires video media: " + media.source());
    const std::uint64_t duration = media.duration();
    if (center.seconds() >= duration)
        throw OutOfRange("clip center " + center.str() + " is at/past duration " +
                         Timestamp(duration).str());

    // Window [center-5, center+4], shifted (not truncated) to stay in range.
    std::uint64_t count = std::min<std::uint64_t>(10, duration);
    std::int64_t start = static_cast<std::int64_t>(center.seconds()) - 5;
    start = std::max<std::int64_t>(start, 0);
    start = std::min<std::int64_t>(start, static_cast<std::int64_t>(duration - count));

    std::vector<Frame> frames;
    frames.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Timestamp ts(static_cast<std::uint64_t>(start) + i);
        frames.push_back({ts, media.frame_at(static_cast<double>(ts.seconds()))});
    }
    return frames;
}

std::vector<Frame> sample_index_frames(const MediaHandle& media, double rate) {
    if (rate <= 0) throw OutOfRange("sampling rate must be positive");
    if (media.kind() != MediaKind::Video)
        throw OutOfRange("sample_index_frames requires video media: " + media.source());

    std::vector<Frame> frames;
    const double duration = static_cast<double>(media.duration());
    for (std::uint64_t n = 0;; ++n) {
        double t = static_cast<double>(n) / rate;
        if (t >= duration) break;
        Timestamp ts(static_cast<std::uint64_t>(std::llround(t)));
        frames.push_back({ts, media.frame_at(t)});
    }
    return frames;
}

Transcript acquire_transcript(const MediaHandle& media, backends::ASRBackend& asr) {
    if (media.kind() != MediaKind::Video)
        throw OutOfRange("transcripts require video media: " + media.source());
    Transcript transcript;
    transcript.phrases = asr.transcribe(media);
    std::stable_sort(transcript.phrases.begin(), transcript.phrases.end(),
                     [](const TranscriptPhrase& a, const TranscriptPhrase& b) {
                         return a.start < b.start;
                     });
    for (const auto& phrase : transcript.phrases) {
        if (phrase.end < phrase.start)
            throw backends::ASRFailure("phrase ends before it starts: " + phrase.text);
    }
    return transcript;
}

Image decode_image_file(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
    if (mat.empty()) throw DecodeFailure("cannot decode image: " + path);
    return from_mat(mat, path);
}

Image resize_to_height(const Image& image, int height) {
    if (image.empty() || height <= 0)
        throw ImageComposeFailure("cannot resize empty image or to non-positive height");
    if (image.height == height) return image;
    int width = std::max(1, static_cast<int>(std::lround(
                                static_cast<double>(image.width) * height / image.height)));
    cv::Mat resized;
    cv::resize(to_mat(image), resized, cv::Size(width, height), 0, 0, cv::INTER_AREA);
    return from_mat(resized, image.label);
}

Image hconcat(const std::vector<Image>& images) {
    if (images.empty()) throw ImageComposeFailure("nothing to concatenate");
    int height = images.front().height;
    std::vector<cv::Mat> mats;
    mats.reserve(images.size());
    for (const auto& image : images) {
        if (image.height != height)
            throw ImageComposeFailure("mixed heights in horizontal stack");
        mats.push_back(to_mat(image));
    }
    cv::Mat out;
    cv::hconcat(mats, out);
    return from_mat(out, images.front().label);
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::vector<std::uint8_t> buffer;
    if (!cv::imencode(".png", to_mat(image), buffer))
        throw ImageComposeFailure("PNG encoding failed for " + image.label);
    return buffer;
}

void write_png(const Image& image, const std::string& path) {
    auto bytes = encode_png(image);
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ImageComposeFailure("cannot write " + path);
    std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
}

}  // namespace mmagent::media
