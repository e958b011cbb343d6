#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "egovqa/error.hpp"
#include "egovqa/frame_plan.hpp"
#include "egovqa/planner.hpp"
#include "egovqa/timeline.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

enum class StepKind { ResolveBbox, NarrateSegment, NarrateChunk, Answer };

inline std::string_view step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::ResolveBbox: return "resolve_bbox";
    case StepKind::NarrateSegment: return "narrate_segment";
    case StepKind::NarrateChunk: return "narrate_chunk";
    case StepKind::Answer: return "answer";
  }
  return "";
}

inline std::optional<StepKind> parse_step_kind(std::string_view s) {
  for (auto k : {StepKind::ResolveBbox, StepKind::NarrateSegment, StepKind::NarrateChunk, StepKind::Answer})
    if (step_kind_name(k) == s) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Media descriptors
// ---------------------------------------------------------------------------

struct MediaImage {
  std::string path;
};

struct MediaKeyframe {
  std::string video;
  Timestamp t;
};

struct MediaClip {
  TimeSegment segment;
  FramePlan frames;
};

// Several clips presented as one stream; sample times are on the unified axis.
struct MediaStream {
  UnifiedTimeline timeline;
  FramePlan frames;
};

using MediaItem = std::variant<MediaImage, MediaKeyframe, MediaClip, MediaStream>;

struct FrameSettings {
  Fps fps{1, 1};
  PixelBudget pixels;
  FrameBounds bounds;
};

/// Turns a plan payload into concrete media with frame plans. When a payload
/// carries several clips the frame and pixel ceilings are shared between them.
inline std::vector<MediaItem> build_media(const VisualPayload& p, const FrameSettings& fs) {
  std::vector<MediaItem> out;
  for (const auto& img : p.images) out.emplace_back(MediaImage{img});
  if (p.keyframe) out.emplace_back(MediaKeyframe{p.keyframe->first, p.keyframe->second});
  if (p.timeline) {
    TimeSegment axis("unified", Timestamp{0}, Timestamp{p.timeline->total_ms()});
    out.emplace_back(MediaStream{*p.timeline, compute_frame_plan(axis, fs.fps, fs.pixels, fs.bounds)});
  } else if (!p.clips.empty()) {
    const auto k = static_cast<std::int64_t>(p.clips.size());
    FrameBounds bounds{fs.bounds.min_frames, std::max(fs.bounds.min_frames, fs.bounds.max_frames / k)};
    PixelBudget pixels{fs.pixels.min_pixels_per_frame, fs.pixels.max_total_pixels / k};
    for (const auto& c : p.clips) out.emplace_back(MediaClip{c, compute_frame_plan(c, fs.fps, pixels, bounds)});
  }
  return out;
}

inline nlohmann::json media_to_json(const MediaItem& m) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MediaImage>) {
          return {{"type", "image"}, {"path", v.path}};
        } else if constexpr (std::is_same_v<T, MediaKeyframe>) {
          return {{"type", "keyframe"}, {"video", v.video}, {"t", format_timestamp(v.t)}};
        } else if constexpr (std::is_same_v<T, MediaClip>) {
          return {{"type", "clip"},
                  {"video", v.segment.video_id},
                  {"start", format_timestamp(v.segment.start)},
                  {"end", format_timestamp(v.segment.end)},
                  {"frames", v.frames.frame_count},
                  {"per_frame_pixels", v.frames.per_frame_pixels}};
        } else {
          nlohmann::json parts = nlohmann::json::array();
          for (std::size_t i = 0; i < v.timeline.parts().size(); ++i)
            parts.push_back({{"video", v.timeline.parts()[i].video_id},
                             {"offset", format_timestamp(Timestamp{v.timeline.offsets()[i]})},
                             {"duration_ms", v.timeline.parts()[i].duration_ms}});
          return {{"type", "stream"},
                  {"parts", parts},
                  {"frames", v.frames.frame_count},
                  {"per_frame_pixels", v.frames.per_frame_pixels}};
        }
      },
      m);
}

// ---------------------------------------------------------------------------
// Calls and replies
// ---------------------------------------------------------------------------

struct DecodeParams {
  int max_new_tokens = 128;
  double temperature = 0.0;
  std::optional<std::int64_t> seed = 0;
};

struct ModelCall {
  StepKind kind = StepKind::Answer;
  std::string prompt;
  std::vector<MediaItem> media;
  DecodeParams decode;

  std::string prompt_hash() const { return util::sha256_hex(prompt); }
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ModelReply {
  std::string text;  // empty signals a refusal
  Usage usage;
  std::int64_t latency_ms = 0;
  int attempts = 1;
};

inline nlohmann::json call_to_json(const ModelCall& c) {
  nlohmann::json media = nlohmann::json::array();
  for (const auto& m : c.media) media.push_back(media_to_json(m));
  nlohmann::json decode = {{"max_new_tokens", c.decode.max_new_tokens}, {"temperature", c.decode.temperature}};
  decode["seed"] = c.decode.seed ? nlohmann::json(*c.decode.seed) : nlohmann::json(nullptr);
  return {{"kind", step_kind_name(c.kind)},
          {"prompt", c.prompt},
          {"prompt_hash", c.prompt_hash()},
          {"media", media},
          {"decode", decode}};
}

inline nlohmann::json reply_to_json(const ModelReply& r) {
  return {{"text", r.text},
          {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}},
          {"latency_ms", r.latency_ms},
          {"attempts", r.attempts}};
}

/// Anything that can answer a ModelCall. Implementations must be safe to call
/// from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelReply send(const ModelCall& call) = 0;
  // Cheap reachability probe used at startup.
  virtual bool available() { return true; }
};

// ---------------------------------------------------------------------------
// Retry and request gating
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 5;
  std::int64_t initial_backoff_ms = 500;
  double multiplier = 2.0;
  std::int64_t max_backoff_ms = 30'000;

  // Delay before attempt `n + 1`, for n >= 1.
  std::int64_t delay_after(int attempt) const {
    double d = static_cast<double>(initial_backoff_ms);
    for (int i = 1; i < attempt; ++i) {
      d *= multiplier;
      if (d >= static_cast<double>(max_backoff_ms)) break;
    }
    return std::min(max_backoff_ms, static_cast<std::int64_t>(d));
  }
};

enum class AttemptStatus { Ok, Transient, BadRequest, TooLarge };

struct AttemptResult {
  AttemptStatus status = AttemptStatus::Ok;
  ModelReply reply;
  std::string detail;
};

using Sleeper = std::function<void(std::int64_t ms)>;

inline Sleeper real_sleeper() {
  return [](std::int64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

/// Runs `attempt` until it succeeds, fails permanently, or the policy is exhausted.
template <class Attempt>
ModelReply send_with_retries(const RetryPolicy& policy, Attempt&& attempt, const Sleeper& sleep,
                             std::vector<std::int64_t>* delays = nullptr) {
  std::string last;
  for (int n = 1; n <= policy.max_attempts; ++n) {
    AttemptResult r = attempt();
    switch (r.status) {
      case AttemptStatus::Ok:
        r.reply.attempts = n;
        return r.reply;
      case AttemptStatus::BadRequest: throw Error(Errc::BadRequest, r.detail);
      case AttemptStatus::TooLarge: throw Error(Errc::MediaTooLarge, r.detail);
      case AttemptStatus::Transient: last = r.detail; break;
    }
    if (n < policy.max_attempts) {
      auto d = policy.delay_after(n);
      if (delays) delays->push_back(d);
      sleep(d);
    }
  }
  throw BackendUnavailable(policy.max_attempts, last);
}

/// Global cap on concurrent requests plus a minimum spacing between request starts.
class RequestGate {
 public:
  RequestGate(int max_in_flight, double requests_per_second)
      : max_in_flight_(std::max(1, max_in_flight)),
        spacing_(requests_per_second > 0 ? std::chrono::microseconds(static_cast<std::int64_t>(1e6 / requests_per_second))
                                         : std::chrono::microseconds(0)) {}

  class Ticket {
   public:
    explicit Ticket(RequestGate* g) : gate_(g) {}
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;
    ~Ticket() { gate_->release(); }

   private:
    RequestGate* gate_;
  };

  [[nodiscard]] Ticket acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    auto now = std::chrono::steady_clock::now();
    auto slot = std::max(now, next_start_);
    next_start_ = slot + spacing_;
    lock.unlock();
    std::this_thread::sleep_until(slot);
    lock.lock();
    peak_ = std::max(peak_, in_flight_);
    return Ticket(this);
  }

  int peak_in_flight() const {
    std::lock_guard lock(mu_);
    return peak_;
  }

 private:
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  const int max_in_flight_;
  const std::chrono::microseconds spacing_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
  std::chrono::steady_clock::time_point next_start_{};
};

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

struct MockFixture {
  std::optional<StepKind> kind;            // nullopt matches any kind
  std::optional<std::string> contains;     // substring of the prompt
  std::optional<std::string> pattern;      // ECMAScript regex searched in the prompt
  std::optional<std::string> prompt_hash;  // prefix of the prompt's sha256
  std::string reply;
  std::optional<Errc> fail;                // raise instead of replying

  bool matches(const ModelCall& c) const {
    if (kind && *kind != c.kind) return false;
    if (contains && c.prompt.find(*contains) == std::string::npos) return false;
    if (pattern && !std::regex_search(c.prompt, std::regex(*pattern))) return false;
    if (prompt_hash && c.prompt_hash().rfind(*prompt_hash, 0) != 0) return false;
    return true;
  }
};

inline std::vector<MockFixture> parse_mock_fixtures(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::ConfigError, "mock fixtures must be a JSON array");
  std::vector<MockFixture> out;
  for (const auto& f : j) {
    MockFixture m;
    try {
      if (f.contains("kind") && f["kind"].get<std::string>() != "any") {
        m.kind = parse_step_kind(f["kind"].get<std::string>());
        if (!m.kind) throw Error(Errc::ConfigError, "unknown fixture kind '" + f["kind"].get<std::string>() + "'");
      }
      if (f.contains("contains")) m.contains = f["contains"].get<std::string>();
      if (f.contains("regex")) {
        m.pattern = f["regex"].get<std::string>();
        (void)std::regex(*m.pattern);
      }
      if (f.contains("prompt_hash")) m.prompt_hash = f["prompt_hash"].get<std::string>();
      if (f.contains("reply")) m.reply = f["reply"].get<std::string>();
      if (f.contains("fail")) {
        auto what = f["fail"].get<std::string>();
        if (what == "backend_unavailable") m.fail = Errc::BackendUnavailable;
        else if (what == "bad_request") m.fail = Errc::BadRequest;
        else if (what == "media_too_large") m.fail = Errc::MediaTooLarge;
        else throw Error(Errc::ConfigError, "unknown fixture failure '" + what + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, std::string("mock fixture: ") + e.what());
    } catch (const std::regex_error& e) {
      throw Error(Errc::ConfigError, std::string("mock fixture regex: ") + e.what());
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// Deterministic backend: the first fixture that matches a call supplies the
/// reply. A call that no fixture matches raises UnscriptedCall.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<MockFixture> fixtures) : fixtures_(std::move(fixtures)) {}

  static std::unique_ptr<MockBackend> load(const std::filesystem::path& path) {
    try {
      return std::make_unique<MockBackend>(parse_mock_fixtures(nlohmann::json::parse(util::read_file(path))));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
  }

  ModelReply send(const ModelCall& call) override {
    {
      std::lock_guard lock(mu_);
      log_.push_back({call.kind, call.prompt_hash()});
    }
    for (const auto& f : fixtures_) {
      if (!f.matches(call)) continue;
      if (f.fail == Errc::BackendUnavailable) throw BackendUnavailable(1, "scripted failure");
      if (f.fail) throw Error(*f.fail, "scripted failure");
      ModelReply r;
      r.text = f.reply;
      r.usage = {static_cast<std::int64_t>(call.prompt.size() / 4), static_cast<std::int64_t>(f.reply.size() / 4)};
      return r;
    }
    throw Error(Errc::UnscriptedCall,
                std::string(step_kind_name(call.kind)) + " call with prompt hash " + call.prompt_hash().substr(0, 16));
  }

  struct LoggedCall {
    StepKind kind;
    std::string prompt_hash;
  };

  std::vector<LoggedCall> call_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::size_t call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

 private:
  std::vector<MockFixture> fixtures_;
  mutable std::mutex mu_;
  std::vector<LoggedCall> log_;
};

inline std::unique_ptr<MockBackend> mock_script(std::vector<MockFixture> fixtures) {
  return std::make_unique<MockBackend>(std::move(fixtures));
}

}  // namespace egovqa
