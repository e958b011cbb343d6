#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "egovqa/error.hpp"
#include "egovqa/prototype.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

struct BoundingBox {
  std::string frame;                // image path or video path
  std::optional<Timestamp> t;       // required when `frame` names a video
  std::int64_t x = 0, y = 0, w = 1, h = 1;

  void validate() const {
    if (frame.empty()) throw Error(Errc::InvalidBoundingBox, "empty frame reference");
    if (x < 0 || y < 0) throw Error(Errc::InvalidBoundingBox, "negative origin");
    if (w <= 0 || h <= 0) throw Error(Errc::InvalidBoundingBox, "non-positive extent");
  }

  bool fits_within(std::int64_t frame_width, std::int64_t frame_height) const {
    return x + w <= frame_width && y + h <= frame_height;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Either free text or one or more time segments.
using ChoiceOption = std::variant<std::string, std::vector<TimeSegment>>;

inline bool is_temporal(const ChoiceOption& o) { return std::holds_alternative<std::vector<TimeSegment>>(o); }

struct ChoiceSet {
  std::vector<ChoiceOption> options;

  std::size_t size() const { return options.size(); }
};

struct Visuals {
  std::vector<std::string> images;
  std::vector<std::string> videos;
  std::vector<TimeSegment> segments;
  std::optional<BoundingBox> bbox;
  // Optional per-video durations; missing ones are probed through the media provider.
  std::map<std::string, std::int64_t> durations_ms;

  // 1-based ordinal of a video inside `videos`, as used by `[V<k>]` tags.
  std::optional<std::size_t> video_ordinal(const std::string& video) const {
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (videos[i] == video) return i + 1;
    return std::nullopt;
  }
};

struct QuestionRecord {
  std::string id;
  PrototypeId prototype = PrototypeId::at(0);
  std::string query_text;
  ChoiceSet choices;
  Visuals visuals;
  std::optional<std::size_t> gold_index;
};

namespace detail {

inline Error record_error(const std::string& id, const std::string& field, const std::string& msg) {
  return Error(Errc::ManifestValidation, "record '" + id + "' field '" + field + "': " + msg);
}

inline TimeSegment segment_from_json(const nlohmann::json& j, const std::string& id, const std::string& field) {
  try {
    if (!j.is_object()) throw record_error(id, field, "segment must be an object");
    return TimeSegment(j.at("video").get<std::string>(), parse_timestamp(j.at("start").get<std::string>()),
                       parse_timestamp(j.at("end").get<std::string>()));
  } catch (const Error& e) {
    if (e.code() == Errc::ManifestValidation) throw;
    throw record_error(id, field, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw record_error(id, field, e.what());
  }
}

inline nlohmann::json segment_to_json(const TimeSegment& s) {
  return {{"video", s.video_id}, {"start", format_timestamp(s.start)}, {"end", format_timestamp(s.end)}};
}

}  // namespace detail

/// Validates one manifest object. Throws ManifestValidation naming the record and field.
inline QuestionRecord parse_question(const nlohmann::json& j) {
  using detail::record_error;
  if (!j.is_object()) throw record_error("?", "<record>", "expected an object");
  QuestionRecord q;
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
    throw record_error("?", "id", "missing or not a non-empty string");
  q.id = j["id"].get<std::string>();
  const auto& id = q.id;

  if (!j.contains("prototype") || !j["prototype"].is_string()) throw record_error(id, "prototype", "missing");
  auto proto = PrototypeId::find(j["prototype"].get<std::string>());
  if (!proto) throw record_error(id, "prototype", "unknown prototype '" + j["prototype"].get<std::string>() + "'");
  q.prototype = *proto;

  if (!j.contains("question") || !j["question"].is_string()) throw record_error(id, "question", "missing");
  q.query_text = j["question"].get<std::string>();

  if (!j.contains("choices") || !j["choices"].is_array()) throw record_error(id, "choices", "missing array");
  for (std::size_t i = 0; i < j["choices"].size(); ++i) {
    const auto& c = j["choices"][i];
    const std::string field = "choices[" + std::to_string(i) + "]";
    if (c.is_object() && c.contains("text") && c["text"].is_string()) {
      q.choices.options.emplace_back(c["text"].get<std::string>());
    } else if (c.is_object() && c.contains("segments") && c["segments"].is_array() && !c["segments"].empty()) {
      std::vector<TimeSegment> segs;
      for (const auto& s : c["segments"]) segs.push_back(detail::segment_from_json(s, id, field));
      q.choices.options.emplace_back(std::move(segs));
    } else {
      throw record_error(id, field, "expected {\"text\": str} or non-empty {\"segments\": [...]}");
    }
  }
  if (q.choices.size() < 2 || q.choices.size() > 26)
    throw record_error(id, "choices", "option count must be within 2..26, got " + std::to_string(q.choices.size()));

  if (j.contains("visuals")) {
    const auto& v = j["visuals"];
    if (!v.is_object()) throw record_error(id, "visuals", "expected an object");
    auto strings = [&](const char* key) {
      std::vector<std::string> out;
      if (!v.contains(key)) return out;
      if (!v[key].is_array()) throw record_error(id, std::string("visuals.") + key, "expected an array");
      for (const auto& s : v[key]) {
        if (!s.is_string() || s.get<std::string>().empty())
          throw record_error(id, std::string("visuals.") + key, "expected non-empty strings");
        out.push_back(s.get<std::string>());
      }
      return out;
    };
    q.visuals.images = strings("images");
    q.visuals.videos = strings("videos");
    if (std::set<std::string>(q.visuals.videos.begin(), q.visuals.videos.end()).size() != q.visuals.videos.size())
      throw record_error(id, "visuals.videos", "duplicate video reference");
    if (v.contains("segments")) {
      if (!v["segments"].is_array()) throw record_error(id, "visuals.segments", "expected an array");
      for (const auto& s : v["segments"]) q.visuals.segments.push_back(detail::segment_from_json(s, id, "visuals.segments"));
    }
    if (v.contains("bbox") && !v["bbox"].is_null()) {
      const auto& b = v["bbox"];
      try {
        BoundingBox box;
        box.frame = b.at("frame").get<std::string>();
        if (b.contains("t") && !b["t"].is_null()) box.t = parse_timestamp(b["t"].get<std::string>());
        box.x = b.at("x").get<std::int64_t>();
        box.y = b.at("y").get<std::int64_t>();
        box.w = b.at("w").get<std::int64_t>();
        box.h = b.at("h").get<std::int64_t>();
        box.validate();
        q.visuals.bbox = box;
      } catch (const nlohmann::json::exception& e) {
        throw record_error(id, "visuals.bbox", e.what());
      } catch (const Error& e) {
        throw record_error(id, "visuals.bbox", e.what());
      }
    }
    if (v.contains("durations")) {
      if (!v["durations"].is_object()) throw record_error(id, "visuals.durations", "expected an object");
      for (const auto& [video, ms] : v["durations"].items()) {
        if (!ms.is_number_integer() || ms.get<std::int64_t>() <= 0)
          throw record_error(id, "visuals.durations", "duration of '" + video + "' must be a positive integer");
        q.visuals.durations_ms[video] = ms.get<std::int64_t>();
      }
    }
  }

  auto check_video = [&](const std::string& video, const std::string& field) {
    if (!q.visuals.video_ordinal(video))
      throw record_error(id, field, "segment references video '" + video + "' not listed in visuals.videos");
  };
  for (const auto& s : q.visuals.segments) check_video(s.video_id, "visuals.segments");
  for (std::size_t i = 0; i < q.choices.size(); ++i)
    if (auto* segs = std::get_if<std::vector<TimeSegment>>(&q.choices.options[i]))
      for (const auto& s : *segs) check_video(s.video_id, "choices[" + std::to_string(i) + "]");
  for (const auto& [video, ms] : q.visuals.durations_ms) check_video(video, "visuals.durations");
  if (q.visuals.bbox) {
    const auto& frame = q.visuals.bbox->frame;
    bool is_image = std::find(q.visuals.images.begin(), q.visuals.images.end(), frame) != q.visuals.images.end();
    bool is_video = q.visuals.video_ordinal(frame).has_value();
    if (!is_image && !is_video) throw record_error(id, "visuals.bbox", "frame '" + frame + "' is not an attached visual");
    if (is_video && !is_image && !q.visuals.bbox->t)
      throw record_error(id, "visuals.bbox", "a bbox on a video frame needs a timestamp 't'");
  }

  if (j.contains("answer") && !j["answer"].is_null()) {
    if (!j["answer"].is_number_integer() || j["answer"].get<std::int64_t>() < 0)
      throw record_error(id, "answer", "expected a non-negative integer");
    auto a = j["answer"].get<std::size_t>();
    if (a >= q.choices.size())
      throw record_error(id, "answer", "index " + std::to_string(a) + " out of range for " +
                                           std::to_string(q.choices.size()) + " choices");
    q.gold_index = a;
  }
  return q;
}

inline std::vector<QuestionRecord> parse_manifest(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ManifestParse, e.what());
  }
  if (!doc.is_array()) throw Error(Errc::ManifestParse, "manifest must be a JSON array");
  std::vector<QuestionRecord> out;
  out.reserve(doc.size());
  std::set<std::string> seen;
  for (const auto& rec : doc) {
    out.push_back(parse_question(rec));
    if (!seen.insert(out.back().id).second) throw detail::record_error(out.back().id, "id", "duplicate id");
  }
  return out;
}

inline std::vector<QuestionRecord> load_manifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::ManifestParse, e.what());
  }
  return parse_manifest(text);
}

}  // namespace egovqa
