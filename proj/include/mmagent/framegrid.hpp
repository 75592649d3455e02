// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mmagent/errors.hpp"
#include "mmagent/media.hpp"

namespace mmagent::framegrid {

MMAGENT_ERROR_TYPE(TooManyTimestamps);
MMAGENT_ERROR_TYPE(FrameCountMismatch);

struct TimestampAllocation {
    media::Timestamp ts;
    int image_count = 0;
    std::vector<int> frames_per_image;  // size image_count; sums to the clip's frame count
};

struct GridAllocation {
    std::vector<TimestampAllocation> per_timestamp;
    int total_images() const;
};

// Splits up to `max_images` composite images across the given clip
// timestamps, then each clip's frames across its images. Remainders go to
// trailing positions; any even split differs by at most one.
GridAllocation allocate(const std::vector<media::Timestamp>& timestamps,
                        int frames_per_timestamp = 10, int max_images = 10);

// Same, with per-timestamp frame counts for boundary-shortened clips.
GridAllocation allocate(const std::vector<media::Timestamp>& timestamps,
                        const std::vector<int>& frame_counts, int max_images = 10);

struct FrameRef {
    media::Timestamp clip_ts;   // the vision-call timestamp this frame belongs to
    media::Timestamp frame_ts;  // the frame's own second
    std::string label;
};

struct PhotoGrid {
    std::vector<media::Image> images;            // composites, <= max_images
    GridAllocation allocation;
    std::vector<std::vector<FrameRef>> manifest;  // per composite, temporal order
    std::size_t frame_count() const;
};

// Builds the composites by resizing each clip's frames to a common height
// and stacking them horizontally in temporal order.
PhotoGrid compose(const GridAllocation& allocation,
                  const std::vector<std::vector<media::Frame>>& clips,
                  int common_height = 360);

// Image-session evidence: the image itself as a one-composite grid.
PhotoGrid single_image_grid(const media::Image& image);

// Persists composites as PNG plus a JSON manifest sidecar (--dump-grid).
void dump(const PhotoGrid& grid, const std::string& directory);

}  // namespace mmagent::framegrid
