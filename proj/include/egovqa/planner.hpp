#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "egovqa/error.hpp"
#include "egovqa/preprocess.hpp"
#include "egovqa/question.hpp"
#include "egovqa/timeline.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

inline constexpr std::string_view kBboxPlaceholder = "{BBOX}";

struct PlannerConfig {
  std::int64_t window_half_width_ms = 10'000;
  std::int64_t chunk_len_ms = 600'000;
  Fps fps{1, 1};
  std::vector<std::string> implicit_now_prototypes = {"object_location", "stationary_object_localization",
                                                      "gaze_estimation"};
  std::int64_t chunking_threshold_ms = 720'000;
  bool narration_sees_question = false;

  bool is_implicit_now(PrototypeId p) const {
    return std::find(implicit_now_prototypes.begin(), implicit_now_prototypes.end(), p.name()) !=
           implicit_now_prototypes.end();
  }

  static Fps parse_fps(const nlohmann::json& j) {
    if (j.is_number_integer() && j.get<std::int64_t>() > 0) return {j.get<std::int64_t>(), 1};
    if (j.is_string()) {
      auto s = j.get<std::string>();
      auto slash = s.find('/');
      try {
        if (slash == std::string::npos) return {std::stoll(s), 1};
        Fps f{std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
        if (f.num > 0 && f.den > 0) return f;
      } catch (const std::exception&) {
      }
    }
    throw Error(Errc::ConfigError, "fps must be a positive integer or an \"n/d\" string");
  }

  static PlannerConfig from_json(const nlohmann::json& j) {
    PlannerConfig c;
    if (!j.is_object()) throw Error(Errc::ConfigError, "planner config must be an object");
    try {
      if (j.contains("window_half_width_ms")) c.window_half_width_ms = j["window_half_width_ms"].get<std::int64_t>();
      if (j.contains("chunk_len_ms")) c.chunk_len_ms = j["chunk_len_ms"].get<std::int64_t>();
      if (j.contains("fps")) c.fps = parse_fps(j["fps"]);
      if (j.contains("implicit_now_prototypes"))
        c.implicit_now_prototypes = j["implicit_now_prototypes"].get<std::vector<std::string>>();
      if (j.contains("chunking_threshold_ms")) c.chunking_threshold_ms = j["chunking_threshold_ms"].get<std::int64_t>();
      if (j.contains("narration_sees_question")) c.narration_sees_question = j["narration_sees_question"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, std::string("planner config: ") + e.what());
    }
    for (const auto& p : c.implicit_now_prototypes)
      if (!PrototypeId::find(p)) throw Error(Errc::ConfigError, "planner config: unknown prototype '" + p + "'");
    if (c.window_half_width_ms <= 0 || c.chunk_len_ms <= 0 || c.chunking_threshold_ms <= 0)
      throw Error(Errc::ConfigError, "planner config: durations must be positive");
    if (c.fps.frames_in(c.chunk_len_ms) >= kMaxFramesPerSample)
      throw Error(Errc::ConfigError, "planner config: chunk_len_ms exceeds the frame cap at the configured fps");
    return c;
  }
};

// ---------------------------------------------------------------------------
// Plan representation
// ---------------------------------------------------------------------------

/// What the model should look at for one call.
struct VisualPayload {
  std::vector<std::string> images;
  std::optional<std::pair<std::string, Timestamp>> keyframe;  // one frame pulled from a video
  std::vector<TimeSegment> clips;                             // local video time
  std::optional<UnifiedTimeline> timeline;                    // clips shown as one stream
};

struct ResolveBboxStep {
  BoundingBox bbox;
  std::string placeholder_key{kBboxPlaceholder};
  VisualPayload frame;
};

struct NarrateSegmentStep {
  TimeSegment segment;  // local time in its video
  TimeSegment display;  // how the segment is labelled in the answer context
};

struct NarrateChunkStep {
  std::size_t chunk_index = 0;
  TimeSegment segment;
};

using PlanStep = std::variant<ResolveBboxStep, NarrateSegmentStep, NarrateChunkStep>;

enum class Strategy { Direct, Windowing, Concatenation, Chunking };

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Direct: return "direct";
    case Strategy::Windowing: return "windowing";
    case Strategy::Concatenation: return "concatenation";
    case Strategy::Chunking: return "chunking";
  }
  return "";
}

struct AnswerStep {
  VisualPayload payload;
  std::string question_text;
  std::string choices_block;
  std::vector<std::string> choice_lines;
  bool needs_bbox_phrase = false;
  bool needs_segment_narrations = false;
  bool needs_chunk_narrations = false;
};

struct TcotPlan {
  std::vector<PlanStep> steps;
  AnswerStep final_step;
  Strategy strategy = Strategy::Direct;
  bool tcot = true;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline std::string resolve_bbox_placeholder(const std::string& question_text, const std::string& noun_phrase,
                                            std::string_view placeholder = kBboxPlaceholder) {
  auto n = util::count_occurrences(question_text, placeholder);
  if (n == 0) throw Error(Errc::PlaceholderMissing, "no " + std::string(placeholder) + " in question");
  if (n > 1) throw Error(Errc::PlaceholderAmbiguous, std::to_string(n) + " occurrences of " + std::string(placeholder));
  std::string out = question_text;
  out.replace(out.find(placeholder), placeholder.size(), noun_phrase);
  return out;
}

inline std::string describe_bbox(const BoundingBox& b) {
  return "the object in the bounding box (x=" + std::to_string(b.x) + ", y=" + std::to_string(b.y) +
         ", w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) + ")";
}

/// Checks that a payload has the shape its modality class promises.
inline bool payload_respects(const VisualPayload& p, ModalityClass m) {
  auto single_video = [&] {
    if (p.clips.empty()) return false;
    for (const auto& c : p.clips)
      if (c.video_id != p.clips.front().video_id) return false;
    return true;
  };
  std::set<std::string> videos;
  for (const auto& c : p.clips) videos.insert(c.video_id);
  switch (m) {
    case ModalityClass::SingleImage:
      return p.clips.empty() && !p.timeline && (p.images.size() == 1) != p.keyframe.has_value();
    case ModalityClass::MultiImage:
      return p.clips.empty() && !p.keyframe && p.images.size() >= 2;
    case ModalityClass::SingleClip:
      return p.images.empty() && !p.keyframe && !p.timeline && single_video();
    case ModalityClass::MultiClip:
      return p.images.empty() && !p.keyframe && videos.size() >= 2;
  }
  return false;
}

/// Every intermediate output must be consumed by the answer step, and chunk
/// narrations must be ordered and disjoint.
inline void validate_plan(const TcotPlan& plan) {
  bool has_bbox = false, has_seg = false, has_chunk = false;
  const NarrateChunkStep* prev = nullptr;
  for (const auto& step : plan.steps) {
    if (std::holds_alternative<ResolveBboxStep>(step)) {
      if (has_bbox) throw Error(Errc::PlanConflict, "more than one bbox step");
      has_bbox = true;
    } else if (std::holds_alternative<NarrateSegmentStep>(step)) {
      has_seg = true;
    } else {
      const auto& c = std::get<NarrateChunkStep>(step);
      if (prev && (c.segment.start < prev->segment.end || c.chunk_index != prev->chunk_index + 1))
        throw Error(Errc::PlanConflict, "chunk steps overlap or are out of order");
      prev = &c;
      has_chunk = true;
    }
  }
  const auto& f = plan.final_step;
  if (has_bbox != f.needs_bbox_phrase || has_seg != f.needs_segment_narrations || has_chunk != f.needs_chunk_narrations)
    throw Error(Errc::PlanConflict, "plan step outputs and answer inputs disagree");
}

namespace detail {

inline std::int64_t duration_of(const std::map<std::string, std::int64_t>& durations, const std::string& video) {
  auto it = durations.find(video);
  if (it == durations.end()) throw Error(Errc::MissingDuration, "duration of '" + video + "' is unknown");
  return it->second;
}

inline const std::string& marker_video(const QuestionRecord& q, const QueryMarker& m) {
  const auto& videos = q.visuals.videos;
  if (videos.empty()) throw Error(Errc::PlanConflict, "question '" + q.id + "' has time markers but no video");
  if (!m.video_ordinal) return videos.front();  // untagged markers refer to the first (or only) video
  if (*m.video_ordinal == 0 || *m.video_ordinal > videos.size())
    throw Error(Errc::PlanConflict, "marker tag [V" + std::to_string(*m.video_ordinal) + "] has no video");
  return videos[*m.video_ordinal - 1];
}

inline VisualPayload still_payload(const QuestionRecord& q) {
  VisualPayload p;
  if (q.visuals.images.size() == 1 && q.visuals.videos.empty()) {
    p.images = q.visuals.images;
  } else if (q.visuals.bbox && q.visuals.bbox->t && q.visuals.video_ordinal(q.visuals.bbox->frame)) {
    p.keyframe = std::make_pair(q.visuals.bbox->frame, *q.visuals.bbox->t);
  } else {
    throw Error(Errc::PlanConflict, "question '" + q.id + "': no still frame to show");
  }
  return p;
}

inline VisualPayload bbox_frame_payload(const QuestionRecord& q) {
  const auto& b = *q.visuals.bbox;
  VisualPayload p;
  if (std::find(q.visuals.images.begin(), q.visuals.images.end(), b.frame) != q.visuals.images.end())
    p.images = {b.frame};
  else if (b.t && q.visuals.video_ordinal(b.frame))
    p.keyframe = std::make_pair(b.frame, *b.t);
  else
    throw Error(Errc::PlanConflict, "bbox frame '" + b.frame + "' does not resolve to an attached visual");
  return p;
}

// The clip the question is about: declared segments of the video, else the whole video.
inline std::vector<TimeSegment> base_clips(const QuestionRecord& q, const std::string& video,
                                           const std::map<std::string, std::int64_t>& durations) {
  std::vector<TimeSegment> clips;
  for (const auto& s : q.visuals.segments)
    if (s.video_id == video && s.length_ms() > 0) clips.push_back(s);
  if (clips.empty()) clips.emplace_back(video, Timestamp{0}, Timestamp{duration_of(durations, video)});
  return clips;
}

}  // namespace detail

/// Direct single-pass plan: no intermediate calls, the BBOX placeholder is
/// replaced by a coordinate description, clips are shown as-is.
inline TcotPlan plan_direct(const RefinedQuestion& rq, const std::map<std::string, std::int64_t>& durations) {
  const auto& q = rq.original;
  TcotPlan plan;
  plan.tcot = false;
  auto& f = plan.final_step;
  f.question_text = rq.refined_text;
  if (q.visuals.bbox && util::count_occurrences(f.question_text, kBboxPlaceholder) == 1)
    f.question_text = resolve_bbox_placeholder(f.question_text, describe_bbox(*q.visuals.bbox));
  f.choices_block = rq.standardized_choices.block;
  f.choice_lines = rq.standardized_choices.lines;
  switch (rq.modality) {
    case ModalityClass::SingleImage: f.payload = detail::still_payload(q); break;
    case ModalityClass::MultiImage: f.payload.images = q.visuals.images; break;
    case ModalityClass::SingleClip: f.payload.clips = detail::base_clips(q, q.visuals.videos.front(), durations); break;
    case ModalityClass::MultiClip:
      for (const auto& v : q.visuals.videos) {
        auto clips = detail::base_clips(q, v, durations);
        f.payload.clips.insert(f.payload.clips.end(), clips.begin(), clips.end());
      }
      break;
  }
  validate_plan(plan);
  return plan;
}

/// Two-stage plan. Cue exploitation (bbox resolution, narration of explicit
/// segments) comes first, then at most one of windowing, concatenation or
/// chunking:
///   - MultiClip questions are concatenated onto one timeline;
///   - "implicit now" prototypes with exactly one time anchor are windowed;
///   - otherwise a single video longer than the chunking threshold is chunked.
inline TcotPlan plan_tcot(const RefinedQuestion& rq, const PlannerConfig& cfg,
                          const std::map<std::string, std::int64_t>& durations) {
  const auto& q = rq.original;
  TcotPlan plan;
  auto& f = plan.final_step;
  f.question_text = rq.refined_text;
  f.choices_block = rq.standardized_choices.block;
  f.choice_lines = rq.standardized_choices.lines;

  if (q.visuals.bbox) {
    // validates the placeholder count up front
    (void)resolve_bbox_placeholder(f.question_text, "");
    plan.steps.emplace_back(ResolveBboxStep{*q.visuals.bbox, std::string(kBboxPlaceholder), detail::bbox_frame_payload(q)});
    f.needs_bbox_phrase = true;
  }

  const bool clip_based = rq.modality == ModalityClass::SingleClip || rq.modality == ModalityClass::MultiClip;
  const auto markers = extract_query_parts(f.question_text).temporal_markers;

  std::optional<UnifiedTimeline> timeline;
  if (rq.modality == ModalityClass::MultiClip) {
    std::vector<UnifiedTimeline::Part> parts;
    for (const auto& v : q.visuals.videos) parts.push_back({v, detail::duration_of(durations, v)});
    timeline = UnifiedTimeline::build(std::move(parts));
  }

  if (clip_based) {
    for (const auto& m : markers) {
      if (!m.is_segment() || *m.end == m.start) continue;
      const auto& video = detail::marker_video(q, m);
      TimeSegment seg(video, m.start, *m.end);
      auto d = durations.find(video);
      if (d != durations.end() && seg.end.millis > d->second)
        throw Error(Errc::TimestampBeyondClip, m.render() + " beyond '" + video + "'");
      plan.steps.emplace_back(NarrateSegmentStep{seg, timeline ? timeline->renormalize(seg) : seg});
      f.needs_segment_narrations = true;
    }
  }

  switch (rq.modality) {
    case ModalityClass::SingleImage:
      f.payload = detail::still_payload(q);
      break;
    case ModalityClass::MultiImage:
      f.payload.images = q.visuals.images;
      break;
    case ModalityClass::MultiClip: {
      plan.strategy = Strategy::Concatenation;
      for (const auto& part : timeline->parts())
        f.payload.clips.emplace_back(part.video_id, Timestamp{0}, Timestamp{part.duration_ms});
      // Re-express markers in the question on the unified axis, right to left so spans stay valid.
      std::string text = f.question_text;
      for (auto it = markers.rbegin(); it != markers.rend(); ++it) {
        const auto& video = detail::marker_video(q, *it);
        std::string unified = format_timestamp(timeline->renormalize(video, it->start));
        if (it->end) unified += " - " + format_timestamp(timeline->renormalize(video, *it->end));
        text.replace(it->pos, it->len, unified);
      }
      f.question_text = std::move(text);
      // Re-render temporal options on the unified axis.
      for (std::size_t i = 0; i < q.choices.size(); ++i) {
        const auto* segs = std::get_if<std::vector<TimeSegment>>(&q.choices.options[i]);
        if (!segs) continue;
        std::vector<TimeSegment> unified;
        for (const auto& s : *segs) unified.push_back(timeline->renormalize(s));
        const char letter = rq.standardized_choices.letters[i];
        if (rq.preprocessed) {
          f.choice_lines[i] = format_unified_option(letter, unified);
        } else {
          std::string body;
          for (std::size_t k = 0; k < unified.size(); ++k)
            body += (k ? ", " : "") + format_timestamp(unified[k].start) + "-" + format_timestamp(unified[k].end);
          f.choice_lines[i] = "(" + std::string{letter} + ") " + body;
        }
      }
      std::string sep = rq.preprocessed ? std::string(delimiter_text(rq.delimiter)) : " ";
      f.choices_block.clear();
      for (std::size_t i = 0; i < f.choice_lines.size(); ++i) f.choices_block += (i ? sep : "") + f.choice_lines[i];
      f.payload.timeline = timeline;
      break;
    }
    case ModalityClass::SingleClip: {
      const auto& video = q.visuals.videos.front();
      const auto duration = detail::duration_of(durations, video);
      std::vector<Timestamp> anchors;
      for (const auto& m : markers)
        if (!m.is_segment()) anchors.push_back(m.start);
      if (q.visuals.bbox && q.visuals.bbox->t && q.visuals.bbox->frame == video) anchors.push_back(*q.visuals.bbox->t);
      std::sort(anchors.begin(), anchors.end());
      anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

      if (cfg.is_implicit_now(q.prototype) && anchors.size() == 1) {
        plan.strategy = Strategy::Windowing;
        f.payload.clips = {focus_window(video, anchors.front(), cfg.window_half_width_ms, duration)};
      } else if (duration > cfg.chunking_threshold_ms) {
        plan.strategy = Strategy::Chunking;
        auto chunks = plan_chunks(video, duration, cfg.chunk_len_ms, cfg.fps);
        for (std::size_t i = 0; i < chunks.chunks.size(); ++i) plan.steps.emplace_back(NarrateChunkStep{i, chunks.chunks[i]});
        f.needs_chunk_narrations = true;
        f.payload.clips = detail::base_clips(q, video, durations);
      } else {
        f.payload.clips = detail::base_clips(q, video, durations);
      }
      break;
    }
  }
  validate_plan(plan);
  return plan;
}

}  // namespace egovqa
