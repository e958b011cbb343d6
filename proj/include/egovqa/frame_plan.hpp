#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "egovqa/error.hpp"
#include "egovqa/timeline.hpp"
#include "egovqa/timestamp.hpp"

namespace egovqa {

/// Per-frame floor and per-video ceiling on decoded pixels.
struct PixelBudget {
  std::int64_t min_pixels_per_frame = 3136;
  std::int64_t max_total_pixels = 846720;
};

struct FrameBounds {
  std::int64_t min_frames = kMinFramesPerSample;
  std::int64_t max_frames = kMaxFramesPerSample;
};

struct FramePlan {
  std::int64_t frame_count = 0;
  std::vector<Timestamp> sample_times;
  std::int64_t per_frame_pixels = 0;

  std::int64_t total_pixels() const { return frame_count * per_frame_pixels; }
};

/// Sampling plan for one segment.
///
/// The nominal count is ceil(length * fps). Within the bounds frames are taken
/// every 1/fps seconds from the segment start; when the count is clamped the
/// samples are spread uniformly over [start, end] instead. Pixels per frame
/// share the per-video ceiling evenly, never dropping below the per-frame floor
/// (so with more than ceiling/floor frames the floor wins).
///
/// Segments shorter than (count - 1) ms cannot hold distinct integer
/// millisecond samples; those plans repeat sample times.
inline FramePlan compute_frame_plan(const TimeSegment& segment, Fps fps, PixelBudget budget = {},
                                    FrameBounds bounds = {}) {
  const std::int64_t len = segment.length_ms();
  if (len <= 0) throw Error(Errc::DegenerateSegment, "zero-length segment of '" + segment.video_id + "'");
  if (fps.num <= 0 || fps.den <= 0) throw Error(Errc::DegenerateSegment, "fps must be positive");

  FramePlan plan;
  const std::int64_t nominal = fps.frames_in(len);
  plan.frame_count = std::clamp(nominal, bounds.min_frames, bounds.max_frames);
  plan.sample_times.reserve(static_cast<std::size_t>(plan.frame_count));
  if (plan.frame_count == nominal) {
    for (std::int64_t i = 0; i < plan.frame_count; ++i)
      plan.sample_times.emplace_back(segment.start.millis + i * 1000 * fps.den / fps.num);
  } else {
    const std::int64_t gaps = plan.frame_count - 1;
    for (std::int64_t i = 0; i < plan.frame_count; ++i)
      plan.sample_times.emplace_back(segment.start.millis + (i * len + gaps / 2) / gaps);
  }
  plan.per_frame_pixels = std::max(budget.min_pixels_per_frame, budget.max_total_pixels / plan.frame_count);
  return plan;
}

}  // namespace egovqa
