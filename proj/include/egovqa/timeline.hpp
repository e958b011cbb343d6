#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "egovqa/error.hpp"
#include "egovqa/timestamp.hpp"

namespace egovqa {

inline constexpr std::int64_t kMaxFramesPerSample = 768;
inline constexpr std::int64_t kMinFramesPerSample = 4;

/// Clamped window [t - w, t + w] around an event inside one video.
inline TimeSegment focus_window(const std::string& video_id, Timestamp event_t, std::int64_t half_width_ms,
                                std::int64_t video_duration_ms) {
  if (half_width_ms <= 0) throw Error(Errc::EventOutOfRange, "window half-width must be positive");
  if (event_t.millis < 0 || event_t.millis > video_duration_ms)
    throw Error(Errc::EventOutOfRange, format_timestamp(event_t) + " outside [0, " +
                                           format_timestamp(Timestamp{video_duration_ms}) + "]");
  return TimeSegment(video_id, Timestamp{std::max<std::int64_t>(0, event_t.millis - half_width_ms)},
                     Timestamp{std::min(video_duration_ms, event_t.millis + half_width_ms)});
}

inline TimeSegment focus_window(Timestamp event_t, std::int64_t half_width_ms, std::int64_t video_duration_ms) {
  return focus_window("V1", event_t, half_width_ms, video_duration_ms);
}

/// Several clips laid end to end on one time axis.
class UnifiedTimeline {
 public:
  struct Part {
    std::string video_id;
    std::int64_t duration_ms;
  };

  static UnifiedTimeline build(std::vector<Part> clips) {
    if (clips.empty()) throw Error(Errc::EmptyClipList, "no clips to concatenate");
    UnifiedTimeline tl;
    std::int64_t offset = 0;
    for (auto& c : clips) {
      if (c.duration_ms <= 0) throw Error(Errc::ZeroDuration, "clip '" + c.video_id + "' has no duration");
      for (const auto& p : tl.parts_)
        if (p.video_id == c.video_id) throw Error(Errc::PlanConflict, "clip '" + c.video_id + "' listed twice");
      tl.offsets_.push_back(offset);
      offset += c.duration_ms;
      tl.parts_.push_back(std::move(c));
    }
    tl.total_ms_ = offset;
    return tl;
  }

  const std::vector<Part>& parts() const { return parts_; }
  const std::vector<std::int64_t>& offsets() const { return offsets_; }
  std::int64_t total_ms() const { return total_ms_; }

  std::size_t index_of(const std::string& video_id) const {
    for (std::size_t i = 0; i < parts_.size(); ++i)
      if (parts_[i].video_id == video_id) return i;
    throw Error(Errc::UnknownVideo, "'" + video_id + "' is not part of the timeline");
  }

  Timestamp renormalize(const std::string& video_id, Timestamp t) const {
    auto i = index_of(video_id);
    if (t.millis < 0 || t.millis > parts_[i].duration_ms)
      throw Error(Errc::TimestampBeyondClip, format_timestamp(t) + " beyond clip '" + video_id + "'");
    return Timestamp{offsets_[i] + t.millis};
  }

  TimeSegment renormalize(const TimeSegment& s, const std::string& unified_id = "unified") const {
    return TimeSegment(unified_id, renormalize(s.video_id, s.start), renormalize(s.video_id, s.end));
  }

  /// Unified time -> (video, local time). A time equal to a boundary belongs to
  /// the later clip, except the very end which belongs to the last clip.
  std::pair<std::string, Timestamp> locate(Timestamp unified) const {
    if (unified.millis < 0 || unified.millis > total_ms_)
      throw Error(Errc::TimestampBeyondClip, format_timestamp(unified) + " beyond unified timeline");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), unified.millis);
    auto i = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    return {parts_[i].video_id, Timestamp{unified.millis - offsets_[i]}};
  }

 private:
  std::vector<Part> parts_;
  std::vector<std::int64_t> offsets_;
  std::int64_t total_ms_ = 0;
};

inline UnifiedTimeline build_unified_timeline(std::vector<UnifiedTimeline::Part> clips) {
  return UnifiedTimeline::build(std::move(clips));
}

struct ChunkPlan {
  std::vector<TimeSegment> chunks;
  std::int64_t chunk_len_ms = 0;
  Fps fps;
};

/// Splits [0, duration) into consecutive chunk_len pieces; the last one may be shorter.
inline ChunkPlan plan_chunks(const std::string& video_id, std::int64_t duration_ms, std::int64_t chunk_len_ms, Fps fps,
                             std::int64_t frame_cap = kMaxFramesPerSample) {
  if (duration_ms <= 0) throw Error(Errc::ZeroDuration, "cannot chunk an empty video");
  if (chunk_len_ms <= 0 || fps.num <= 0 || fps.den <= 0)
    throw Error(Errc::ChunkTooLong, "chunk length and fps must be positive");
  if (fps.frames_in(chunk_len_ms) >= frame_cap)
    throw Error(Errc::ChunkTooLong, std::to_string(fps.frames_in(chunk_len_ms)) + " frames per chunk (cap " +
                                        std::to_string(frame_cap) + ")");
  ChunkPlan plan{{}, chunk_len_ms, fps};
  for (std::int64_t start = 0; start < duration_ms; start += chunk_len_ms)
    plan.chunks.emplace_back(video_id, Timestamp{start}, Timestamp{std::min(duration_ms, start + chunk_len_ms)});
  return plan;
}

inline ChunkPlan plan_chunks(std::int64_t duration_ms, std::int64_t chunk_len_ms, Fps fps) {
  return plan_chunks("V1", duration_ms, chunk_len_ms, fps);
}

/// `[start - end] text` per chunk, newline-joined, closed by a `---` line.
inline std::string aggregate_narrations(const std::vector<std::pair<TimeSegment, std::string>>& narrations) {
  std::string out;
  for (std::size_t i = 0; i < narrations.size(); ++i) {
    const auto& [seg, text] = narrations[i];
    if (i > 0 && seg.start < narrations[i - 1].first.start)
      throw Error(Errc::UnorderedNarrations, "chunk " + std::to_string(i) + " starts before its predecessor");
    std::string flat = text;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    out += "[" + format_timestamp(seg.start) + " - " + format_timestamp(seg.end) + "] " + flat + "\n";
  }
  if (!out.empty()) out += "---\n";
  return out;
}

}  // namespace egovqa
