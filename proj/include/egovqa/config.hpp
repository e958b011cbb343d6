#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "egovqa/backend.hpp"
#include "egovqa/error.hpp"
#include "egovqa/planner.hpp"
#include "egovqa/preprocess.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

struct StageToggles {
  bool preprocessing = true;
  bool tcot = true;
  bool postprocessing = true;

  std::string label() const {
    if (preprocessing && tcot && postprocessing) return "full";
    std::string out;
    auto add = [&](bool on, const char* name) {
      if (on) return;
      out += out.empty() ? "w/o " : " + ";
      out += name;
    };
    add(preprocessing, "Pre-Processing");
    add(tcot, "T-CoT");
    add(postprocessing, "Post-Processing");
    return out;
  }

  nlohmann::ordered_json to_json() const {
    return {{"preprocessing", preprocessing}, {"tcot", tcot}, {"postprocessing", postprocessing}};
  }

  static StageToggles from_json(const nlohmann::json& j) {
    return {j.value("preprocessing", true), j.value("tcot", true), j.value("postprocessing", true)};
  }
};

enum class Averaging { Weighted, Macro };

struct EnsembleConfig {
  std::size_t size = 5;
  bool share_tcot_context = true;
};

struct MediaConfig {
  std::string provider = "synthetic";  // synthetic | external
  std::string extractor;               // executable for the external provider
  std::filesystem::path work_dir = "/tmp/egovqa-frames";
  std::map<std::string, std::int64_t> durations_ms;
};

struct PipelineConfig {
  std::filesystem::path data_dir = ".";
  PlannerConfig planner;
  FrameSettings frames;
  ChoiceDelimiter delimiter = ChoiceDelimiter::Newline;
  EnsembleConfig ensemble;
  Averaging averaging = Averaging::Weighted;
  DecodeParams answer_decode{16, 0.0, 0};
  DecodeParams narrate_decode{256, 0.0, 0};
  nlohmann::json backend = nlohmann::json::object();
  MediaConfig media;
  nlohmann::json raw = nlohmann::json::object();

  /// Identity of a run configuration; resume refuses verdicts made under a different one.
  std::string hash(const StageToggles& t) const {
    return util::sha256_hex(raw.dump() + "|pre=" + (t.preprocessing ? "1" : "0") + "|tcot=" + (t.tcot ? "1" : "0") +
                            "|post=" + (t.postprocessing ? "1" : "0"));
  }

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
    PipelineConfig c;
    c.raw = j;
    try {
      std::filesystem::path dd = j.value("data_dir", std::string("."));
      c.data_dir = dd.is_absolute() ? dd : base_dir / dd;
      if (j.contains("planner")) c.planner = PlannerConfig::from_json(j["planner"]);
      c.frames.fps = c.planner.fps;
      if (j.contains("frames")) {
        const auto& f = j["frames"];
        if (f.contains("fps")) c.frames.fps = PlannerConfig::parse_fps(f["fps"]);
        c.frames.bounds.min_frames = f.value("min_frames", c.frames.bounds.min_frames);
        c.frames.bounds.max_frames = f.value("max_frames", c.frames.bounds.max_frames);
        c.frames.pixels.min_pixels_per_frame = f.value("min_pixels", c.frames.pixels.min_pixels_per_frame);
        c.frames.pixels.max_total_pixels = f.value("max_pixels", c.frames.pixels.max_total_pixels);
      }
      if (j.contains("choices")) {
        auto d = parse_delimiter(j["choices"].value("delimiter", std::string("newline")));
        if (!d) throw Error(Errc::ConfigError, "choices.delimiter must be newline, semicolon or space");
        c.delimiter = *d;
      }
      if (j.contains("ensemble")) {
        c.ensemble.size = j["ensemble"].value("size", c.ensemble.size);
        c.ensemble.share_tcot_context = j["ensemble"].value("share_tcot_context", true);
      }
      if (j.contains("scoring")) {
        auto a = j["scoring"].value("averaging", std::string("weighted"));
        if (a == "weighted") c.averaging = Averaging::Weighted;
        else if (a == "macro") c.averaging = Averaging::Macro;
        else throw Error(Errc::ConfigError, "scoring.averaging must be weighted or macro");
      }
      if (j.contains("decode")) {
        const auto& d = j["decode"];
        c.answer_decode.max_new_tokens = d.value("answer_max_tokens", c.answer_decode.max_new_tokens);
        c.narrate_decode.max_new_tokens = d.value("narration_max_tokens", c.narrate_decode.max_new_tokens);
        if (d.contains("seed")) {
          auto s = d["seed"].is_null() ? std::optional<std::int64_t>{} : d["seed"].get<std::int64_t>();
          c.answer_decode.seed = c.narrate_decode.seed = s;
        }
      }
      if (j.contains("backend")) c.backend = j["backend"];
      if (j.contains("media")) {
        const auto& m = j["media"];
        c.media.provider = m.value("provider", c.media.provider);
        c.media.extractor = m.value("extractor", std::string());
        if (m.contains("work_dir")) c.media.work_dir = m["work_dir"].get<std::string>();
        if (m.contains("durations_ms")) c.media.durations_ms = m["durations_ms"].get<std::map<std::string, std::int64_t>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, std::string("config: ") + e.what());
    }
    if (c.ensemble.size < 1) throw Error(Errc::ConfigError, "ensemble.size must be at least 1");
    if (c.frames.bounds.min_frames < 1 || c.frames.bounds.max_frames < c.frames.bounds.min_frames)
      throw Error(Errc::ConfigError, "frames: need 1 <= min_frames <= max_frames");
    if (c.media.provider != "synthetic" && c.media.provider != "external")
      throw Error(Errc::ConfigError, "media.provider must be synthetic or external");
    if (c.media.provider == "external" && c.media.extractor.empty())
      throw Error(Errc::ConfigError, "media.extractor is required for the external provider");
    return c;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  }
};

/// Prompt bodies for the three call kinds, read from `prompts/`.
struct PromptSet {
  std::string answer = "{context}{question}\n{choices}\nAnswer with the option's letter from the given choices directly.";
  std::string narrate = "Describe what the camera wearer does between {start} and {end}.{focus}";
  std::string resolve_bbox = "Name the object inside the box x={x}, y={y}, w={w}, h={h}. Reply with a short noun phrase.";

  static PromptSet load(const std::filesystem::path& dir) {
    PromptSet p;
    auto read = [&](const char* name, std::string& into) {
      auto path = dir / name;
      if (!std::filesystem::exists(path)) return;
      into = util::read_file(path);
      while (!into.empty() && (into.back() == '\n' || into.back() == '\r')) into.pop_back();
    };
    read("answer.txt", p.answer);
    read("narrate.txt", p.narrate);
    read("resolve_bbox.txt", p.resolve_bbox);
    for (const char* key : {"{question}", "{choices}"})
      if (p.answer.find(key) == std::string::npos)
        throw Error(Errc::ConfigError, std::string("answer prompt lacks ") + key);
    return p;
  }
};

}  // namespace egovqa
