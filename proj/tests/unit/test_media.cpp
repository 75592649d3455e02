// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "mmagent/backends.hpp"
#include "mmagent/media.hpp"
#include "support.hpp"

using namespace mmagent;
using media::Timestamp;

TEST_CASE("timestamp parse and format") {
    CHECK(Timestamp::parse("00:08:27").seconds() == 507);
    CHECK(Timestamp(0).str() == "00:00:00");
    CHECK(Timestamp(507).str() == "00:08:27");
    CHECK(Timestamp::parse("01:00:00").seconds() == 3600);
    CHECK_THROWS_AS(Timestamp::parse("00:61:00"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse("00:00:60"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse("8:27"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse("00:08:27x"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse("not a time"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse("-1:00:00"), media::BadTimestamp);
    CHECK_THROWS_AS(Timestamp::parse(" 00:00:01"), media::BadTimestamp);
}

TEST_CASE("timestamp round trip on sampled values") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        std::uint64_t t = rng() % 360000;
        CHECK(Timestamp::parse(Timestamp(t).str()).seconds() == t);
    }
}

TEST_CASE("clip sampling uses the shifted ten-second window") {
    auto video = media::MediaHandle::synthetic_video(180);

    SUBCASE("interior center covers [center-5, center+4]") {
        auto frames = media::sample_clip(video, Timestamp(36));
        REQUIRE(frames.size() == 10);
        CHECK(frames.front().ts.seconds() == 31);
        CHECK(frames.back().ts.seconds() == 40);
        for (std::size_t i = 1; i < frames.size(); ++i)
            CHECK(frames[i].ts.seconds() == frames[i - 1].ts.seconds() + 1);
    }
    SUBCASE("window shifts at the start") {
        auto frames = media::sample_clip(video, Timestamp(2));
        REQUIRE(frames.size() == 10);
        CHECK(frames.front().ts.seconds() == 0);
        CHECK(frames.back().ts.seconds() == 9);
    }
    SUBCASE("window shifts at the end") {
        auto frames = media::sample_clip(video, Timestamp(179));
        REQUIRE(frames.size() == 10);
        CHECK(frames.front().ts.seconds() == 170);
        CHECK(frames.back().ts.seconds() == 179);
    }
}

TEST_CASE("clip center past the duration is out of range") {
    auto video = media::MediaHandle::synthetic_video(60);
    CHECK_THROWS_AS(media::sample_clip(video, Timestamp::parse("00:59:59")), media::OutOfRange);
    CHECK_THROWS_AS(media::sample_clip(video, Timestamp(60)), media::OutOfRange);
}

TEST_CASE("short videos yield one frame per available second") {
    auto video = media::MediaHandle::synthetic_video(6);
    auto frames = media::sample_clip(video, Timestamp(3));
    REQUIRE(frames.size() == 6);
    CHECK(frames.front().ts.seconds() == 0);
    CHECK(frames.back().ts.seconds() == 5);
}

TEST_CASE("index frame sampling follows the rate") {
    auto video = media::MediaHandle::synthetic_video(180);
    CHECK(media::sample_index_frames(video, 1.0).size() == 180);

    auto sparse = media::sample_index_frames(media::MediaHandle::synthetic_video(10), 0.5);
    REQUIRE(sparse.size() == 5);
    std::vector<std::uint64_t> expected{0, 2, 4, 6, 8};
    for (std::size_t i = 0; i < sparse.size(); ++i)
        CHECK(sparse[i].ts.seconds() == expected[i]);

    CHECK_THROWS_AS(media::sample_index_frames(video, 0.0), media::OutOfRange);
}

TEST_CASE("unreadable media fails to decode") {
    CHECK_THROWS_AS(media::MediaHandle::open("/nonexistent/clip.mp4"), media::DecodeFailure);
    CHECK_THROWS_AS(media::MediaHandle::open("/nonexistent/img.png"), media::DecodeFailure);
}

TEST_CASE("transcripts come back ordered regardless of backend order") {
    auto video = media::MediaHandle::synthetic_video(60);

    backends::ScriptedASRBackend asr({
        {Timestamp(20), Timestamp(25), "second"},
        {Timestamp(1), Timestamp(4), "first"},
        {Timestamp(40), Timestamp(45), "third"},
    });
    auto transcript = media::acquire_transcript(video, asr);
    REQUIRE(transcript.phrases.size() == 3);
    CHECK(transcript.phrases[0].text == "first");
    CHECK(transcript.phrases[1].text == "second");
    CHECK(transcript.phrases[2].text == "third");
    CHECK(transcript.to_text().find("[00:00:01 - 00:00:04] first") != std::string::npos);
}

TEST_CASE("silent media yields an empty transcript, not an error") {
    auto video = media::MediaHandle::synthetic_video(60);
    backends::ScriptedASRBackend asr;
    auto transcript = media::acquire_transcript(video, asr);
    CHECK(transcript.empty());
    CHECK(transcript.to_text().empty());
}

TEST_CASE("horizontal stacking adds widths at a common height") {
    auto video = media::MediaHandle::synthetic_video(10);
    auto frame = video.frame_at(0);
    auto resized = media::resize_to_height(frame, 360);
    CHECK(resized.height == 360);

    media::Image a = resized, b = resized, c = resized;
    auto stacked = media::hconcat({a, b, c});
    CHECK(stacked.width == 3 * resized.width);
    CHECK(stacked.height == 360);
    CHECK_THROWS_AS(media::hconcat({}), media::ImageComposeFailure);
}

TEST_CASE("png encoding produces a decodable file") {
    auto video = media::MediaHandle::synthetic_video(5);
    auto frame = video.frame_at(2);
    auto bytes = media::encode_png(frame);
    CHECK(bytes.size() > 8);
    // PNG signature
    CHECK(bytes[1] == 'P');
    CHECK(bytes[2] == 'N');
    CHECK(bytes[3] == 'G');
}
