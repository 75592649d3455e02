// SPDX-License-Identifier: Apache-2.0
#include "mmagent/framegrid.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace mmagent::framegrid {

namespace {

// Even split with the remainder assigned to trailing positions:
// split(10, 3) -> [3, 3, 4].
std::vector<int> even_split(int total, int parts) {
    std::vector<int> out(static_cast<std::size_t>(parts), total / parts);
    int remainder = total % parts;
    for (int i = 0; i < remainder; ++i) out[static_cast<std::size_t>(parts - 1 - i)] += 1;
    return out;
}

}  // namespace

int GridAllocation::total_images() const {
    int total = 0;
    for (const auto& alloc : per_timestamp) total += alloc.image_count;
    return total;
}

GridAllocation allocate(const std::vector<media::Timestamp>& timestamps,
                        int frames_per_timestamp, int max_images) {
    return allocate(timestamps,
                    std::vector<int>(timestamps.size(), frames_per_timestamp), max_images);
}

GridAllocation allocate(const std::vector<media::Timestamp>& timestamps,
                        const std::vector<int>& frame_counts, int max_images) {
    if (timestamps.empty()) throw TooManyTimestamps("no timestamps to allocate");
    if (static_cast<int>(timestamps.size()) > max_images)
        throw TooManyTimestamps(std::to_string(timestamps.size()) +
                                " timestamps exceed the " + std::to_string(max_images) +
                                "-image budget; apply the last-" + std::to_string(max_images) +
                                " rule first");
    if (frame_counts.size() != timestamps.size())
        throw FrameCountMismatch("frame counts do not match timestamps");

    auto images_per_ts = even_split(max_images, static_cast<int>(timestamps.size()));

    GridAllocation allocation;
    allocation.per_timestamp.reserve(timestamps.size());
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        int frames = frame_counts[i];
        if (frames < 1) throw FrameCountMismatch("clip at " + timestamps[i].str() + " has no frames");
        TimestampAllocation alloc;
        alloc.ts = timestamps[i];
        // A clip never spans more images than it has frames.
        alloc.image_count = std::min(images_per_ts[i], frames);
        alloc.frames_per_image = even_split(frames, alloc.image_count);
        allocation.per_timestamp.push_back(std::move(alloc));
    }
    return allocation;
}

std::size_t PhotoGrid::frame_count() const {
    std::size_t total = 0;
    for (const auto& refs : manifest) total += refs.size();
    return total;
}

PhotoGrid compose(const GridAllocation& allocation,
                  const std::vector<std::vector<media::Frame>>& clips, int common_height) {
    if (clips.size() != allocation.per_timestamp.size())
        throw FrameCountMismatch("clip count does not match allocation");

    PhotoGrid grid;
    grid.allocation = allocation;
    for (std::size_t t = 0; t < clips.size(); ++t) {
        const auto& alloc = allocation.per_timestamp[t];
        const auto& clip = clips[t];
        int expected = std::accumulate(alloc.frames_per_image.begin(),
                                       alloc.frames_per_image.end(), 0);
        if (static_cast<int>(clip.size()) != expected)
            throw FrameCountMismatch("clip at " + alloc.ts.str() + " has " +
                                     std::to_string(clip.size()) + " frames, allocation expects " +
                                     std::to_string(expected));

        std::size_t offset = 0;
        for (int count : alloc.frames_per_image) {
            std::vector<media::Image> strip;
            std::vector<FrameRef> refs;
            strip.reserve(static_cast<std::size_t>(count));
            for (int f = 0; f < count; ++f) {
                const media::Frame& frame = clip[offset + static_cast<std::size_t>(f)];
                strip.push_back(media::resize_to_height(frame.image, common_height));
                refs.push_back({alloc.ts, frame.ts, frame.image.label});
            }
            offset += static_cast<std::size_t>(count);
            grid.images.push_back(media::hconcat(strip));
            grid.manifest.push_back(std::move(refs));
        }
    }
    return grid;
}

PhotoGrid single_image_grid(const media::Image& image) {
    PhotoGrid grid;
    grid.images.push_back(image);
    TimestampAllocation alloc;
    alloc.ts = media::Timestamp(0);
    alloc.image_count = 1;
    alloc.frames_per_image = {1};
    grid.allocation.per_timestamp.push_back(std::move(alloc));
    grid.manifest.push_back({FrameRef{media::Timestamp(0), media::Timestamp(0), image.label}});
    return grid;
}

void dump(const PhotoGrid& grid, const std::string& directory) {
    std::filesystem::create_directories(directory);
    nlohmann::json manifest = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.images.size(); ++i) {
        std::string name = "composite_" + std::to_string(i + 1) + ".png";
        media::write_png(grid.images[i], (std::filesystem::path(directory) / name).string());
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& ref : grid.manifest[i])
            frames.push_back({{"clip", ref.clip_ts.str()},
                              {"frame", ref.frame_ts.str()},
                              {"label", ref.label}});
        manifest.push_back({{"image", name}, {"frames", std::move(frames)}});
    }
    std::ofstream out(std::filesystem::path(directory) / "manifest.json");
    out << manifest.dump(2) << "\n";
}

}  // namespace mmagent::framegrid
