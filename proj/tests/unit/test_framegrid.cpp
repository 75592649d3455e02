// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "mmagent/framegrid.hpp"
#include "support.hpp"

using namespace mmagent;
using media::Timestamp;

namespace {

std::vector<Timestamp> stamps(std::initializer_list<std::uint64_t> seconds) {
    std::vector<Timestamp> out;
    for (auto s : seconds) out.emplace_back(s);
    return out;
}

std::vector<int> image_counts(const framegrid::GridAllocation& allocation) {
    std::vector<int> out;
    for (const auto& alloc : allocation.per_timestamp) out.push_back(alloc.image_count);
    return out;
}

void check_even_split(const std::vector<int>& counts) {
    auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
    // Larger counts only at trailing positions: once a count rises to the
    // max, it never drops back.
    bool seen_high = false;
    for (int c : counts) {
        if (c == *hi) seen_high = true;
        else CHECK(!seen_high);
    }
}

// Exhaustive allocation checker: conservation, the <=1 spread, and
// remainders at trailing positions, for both levels of the split. The
// across-timestamp image counts form an even split only for full clips;
// boundary-shortened clips may hold fewer images than their allotment.
void check_allocation(const framegrid::GridAllocation& allocation,
                      const std::vector<int>& frame_counts, int max_images) {
    REQUIRE(allocation.per_timestamp.size() == frame_counts.size());
    CHECK(allocation.total_images() <= max_images);

    bool full_clips = std::all_of(frame_counts.begin(), frame_counts.end(),
                                  [](int c) { return c >= 10; });
    if (full_clips) check_even_split(image_counts(allocation));

    for (std::size_t i = 0; i < allocation.per_timestamp.size(); ++i) {
        const auto& alloc = allocation.per_timestamp[i];
        REQUIRE(static_cast<int>(alloc.frames_per_image.size()) == alloc.image_count);
        int total = std::accumulate(alloc.frames_per_image.begin(),
                                    alloc.frames_per_image.end(), 0);
        CHECK(total == frame_counts[i]);
        for (int c : alloc.frames_per_image) CHECK(c >= 1);
        check_even_split(alloc.frames_per_image);
    }
}

}  // namespace

TEST_CASE("three timestamps split as the worked example: images [3,3,4], frames [3,3,4]") {
    auto allocation = framegrid::allocate(stamps({36, 133, 83}));
    CHECK(image_counts(allocation) == std::vector<int>{3, 3, 4});
    CHECK(allocation.per_timestamp[0].frames_per_image == std::vector<int>{3, 3, 4});
    CHECK(allocation.per_timestamp[1].frames_per_image == std::vector<int>{3, 3, 4});
    CHECK(allocation.per_timestamp[2].frames_per_image == std::vector<int>{2, 2, 3, 3});
    CHECK(allocation.total_images() == 10);
}

TEST_CASE("one timestamp yields ten single-frame images") {
    auto allocation = framegrid::allocate(stamps({42}));
    REQUIRE(allocation.per_timestamp.size() == 1);
    CHECK(allocation.per_timestamp[0].image_count == 10);
    CHECK(allocation.per_timestamp[0].frames_per_image == std::vector<int>(10, 1));
}

TEST_CASE("four timestamps split images [2,2,3,3] with the expected inner splits") {
    auto allocation = framegrid::allocate(stamps({10, 20, 30, 40}));
    CHECK(image_counts(allocation) == std::vector<int>{2, 2, 3, 3});
    CHECK(allocation.per_timestamp[0].frames_per_image == std::vector<int>{5, 5});
    CHECK(allocation.per_timestamp[2].frames_per_image == std::vector<int>{3, 3, 4});
    check_allocation(allocation, {10, 10, 10, 10}, 10);
}

TEST_CASE("allocation depends only on the timestamp count") {
    auto a = framegrid::allocate(stamps({1, 2, 3}));
    auto b = framegrid::allocate(stamps({500, 100, 900}));
    CHECK(image_counts(a) == image_counts(b));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a.per_timestamp[i].frames_per_image == b.per_timestamp[i].frames_per_image);
}

TEST_CASE("more than ten timestamps is a caller error") {
    std::vector<Timestamp> eleven;
    for (std::uint64_t i = 0; i < 11; ++i) eleven.emplace_back(i);
    CHECK_THROWS_AS(framegrid::allocate(eleven), framegrid::TooManyTimestamps);
    CHECK_THROWS_AS(framegrid::allocate({}), framegrid::TooManyTimestamps);
}

TEST_CASE("randomized full-clip allocations obey both split levels") {
    std::mt19937_64 rng(31337);
    for (int round = 0; round < 300; ++round) {
        int count = 1 + static_cast<int>(rng() % 10);
        std::vector<Timestamp> ts;
        for (int i = 0; i < count; ++i) ts.emplace_back(rng() % 10000);
        auto allocation = framegrid::allocate(ts);
        check_allocation(allocation, std::vector<int>(ts.size(), 10), 10);
    }
}

TEST_CASE("boundary-shortened clips allocate their actual frame count") {
    std::mt19937_64 rng(4242);
    for (int round = 0; round < 300; ++round) {
        int count = 1 + static_cast<int>(rng() % 10);
        std::vector<Timestamp> ts;
        std::vector<int> frames;
        for (int i = 0; i < count; ++i) {
            ts.emplace_back(rng() % 10000);
            frames.push_back(1 + static_cast<int>(rng() % 10));
        }
        auto allocation = framegrid::allocate(ts, frames);
        check_allocation(allocation, frames, 10);
        // A clip never spans more images than it has frames.
        for (std::size_t i = 0; i < frames.size(); ++i)
            CHECK(allocation.per_timestamp[i].image_count <= frames[i]);
    }
}

TEST_CASE("compose stacks frames horizontally in temporal order") {
    auto video = media::MediaHandle::synthetic_video(200);

    SUBCASE("three frames of equal size stack to triple width") {
        auto clip = media::sample_clip(video, Timestamp(36));
        std::vector<media::Frame> three(clip.begin(), clip.begin() + 3);
        auto allocation = framegrid::allocate(stamps({36}), 3);
        auto grid = framegrid::compose(allocation, {three}, 360);
        // 64x36 source scaled to height 360 -> width 640 each.
        REQUIRE(grid.images.size() == 3);
        CHECK(grid.images[0].width == 640);
        CHECK(grid.images[0].height == 360);
        int total_frames = 0;
        for (const auto& refs : grid.manifest) total_frames += static_cast<int>(refs.size());
        CHECK(total_frames == 3);
    }

    SUBCASE("the full worked example packs thirty frames into ten composites") {
        auto ts = stamps({36, 133, 83});
        std::vector<std::vector<media::Frame>> clips;
        for (const auto& t : ts) clips.push_back(media::sample_clip(video, t));
        auto grid = framegrid::compose(framegrid::allocate(ts), clips, 36);
        CHECK(grid.images.size() == 10);
        CHECK(grid.frame_count() == 30);
        // temporal order within each composite
        for (const auto& refs : grid.manifest)
            for (std::size_t i = 1; i < refs.size(); ++i)
                CHECK(refs[i - 1].frame_ts < refs[i].frame_ts);
    }

    SUBCASE("mismatched frame counts are rejected") {
        auto clip = media::sample_clip(video, Timestamp(36));
        clip.pop_back();
        CHECK_THROWS_AS(framegrid::compose(framegrid::allocate(stamps({36})), {clip}, 36),
                        framegrid::FrameCountMismatch);
    }
}

TEST_CASE("every frame lands in exactly one composite across random grids") {
    auto video = media::MediaHandle::synthetic_video(500);
    std::mt19937_64 rng(555);
    for (int round = 0; round < 20; ++round) {
        int count = 1 + static_cast<int>(rng() % 10);
        std::vector<Timestamp> ts;
        std::vector<std::vector<media::Frame>> clips;
        std::vector<int> frames;
        std::size_t expected = 0;
        for (int i = 0; i < count; ++i) {
            ts.emplace_back(10 + rng() % 480);
            clips.push_back(media::sample_clip(video, ts.back()));
            frames.push_back(static_cast<int>(clips.back().size()));
            expected += clips.back().size();
        }
        auto grid = framegrid::compose(framegrid::allocate(ts, frames), clips, 18);
        CHECK(grid.images.size() <= 10);
        CHECK(grid.frame_count() == expected);

        // Composites traverse the clips in order without dropping or
        // duplicating any frame instance.
        std::size_t clip_index = 0, offset = 0;
        for (const auto& refs : grid.manifest) {
            for (const auto& ref : refs) {
                if (offset == clips[clip_index].size()) {
                    ++clip_index;
                    offset = 0;
                }
                REQUIRE(clip_index < clips.size());
                CHECK(ref.frame_ts == clips[clip_index][offset].ts);
                CHECK(ref.label == clips[clip_index][offset].image.label);
                ++offset;
            }
        }
        CHECK(clip_index == clips.size() - 1);
        CHECK(offset == clips.back().size());
    }
}

TEST_CASE("single image grids wrap the image unchanged") {
    auto image = media::MediaHandle::synthetic_video(1).frame_at(0);
    auto grid = framegrid::single_image_grid(image);
    CHECK(grid.images.size() == 1);
    CHECK(grid.images[0].width == image.width);
    CHECK(grid.frame_count() == 1);
}
