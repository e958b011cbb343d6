#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <regex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "egovqa/backend.hpp"
#include "egovqa/error.hpp"
#include "egovqa/media.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

struct HttpBackendConfig {
  std::string endpoint = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "qwen2.5-vl-7b-instruct";
  std::string api_key;  // filled from EGOVQA_API_KEY when empty
  int timeout_s = 120;
  RetryPolicy retry;
  int max_in_flight = 4;
  double requests_per_second = 0.0;  // 0 = unlimited
  std::size_t max_request_bytes = 64u << 20;
  bool label_frames = true;  // interleave "frame at ..." text parts

  static HttpBackendConfig from_json(const nlohmann::json& j) {
    HttpBackendConfig c;
    try {
      if (j.contains("endpoint")) c.endpoint = j["endpoint"].get<std::string>();
      if (j.contains("path")) c.path = j["path"].get<std::string>();
      if (j.contains("model")) c.model = j["model"].get<std::string>();
      if (j.contains("timeout_s")) c.timeout_s = j["timeout_s"].get<int>();
      if (j.contains("max_attempts")) c.retry.max_attempts = j["max_attempts"].get<int>();
      if (j.contains("initial_backoff_ms")) c.retry.initial_backoff_ms = j["initial_backoff_ms"].get<std::int64_t>();
      if (j.contains("backoff_multiplier")) c.retry.multiplier = j["backoff_multiplier"].get<double>();
      if (j.contains("max_backoff_ms")) c.retry.max_backoff_ms = j["max_backoff_ms"].get<std::int64_t>();
      if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<int>();
      if (j.contains("requests_per_second")) c.requests_per_second = j["requests_per_second"].get<double>();
      if (j.contains("max_request_bytes")) c.max_request_bytes = j["max_request_bytes"].get<std::size_t>();
      if (j.contains("label_frames")) c.label_frames = j["label_frames"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, std::string("backend config: ") + e.what());
    }
    if (c.retry.max_attempts < 1 || c.retry.multiplier < 1.0 || c.retry.initial_backoff_ms < 0)
      throw Error(Errc::ConfigError, "backend config: invalid retry policy");
    static const std::regex url_re(R"(^https?://[^/]+$)");
    if (!std::regex_match(c.endpoint, url_re))
      throw Error(Errc::ConfigError, "backend config: endpoint must look like http://host:port");
    return c;
  }
};

/// Builds the chat-completions request body for one call.
inline nlohmann::json chat_request_body(const ModelCall& call, const std::vector<std::vector<EncodedFrame>>& media,
                                        const HttpBackendConfig& cfg) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& frames : media) {
    for (const auto& f : frames) {
      if (cfg.label_frames && !f.label.empty()) content.push_back({{"type", "text"}, {"text", "Frame at " + f.label + ":"}});
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:" + f.mime + ";base64," + util::base64_encode(f.bytes)}}}});
    }
  }
  content.push_back({{"type", "text"}, {"text", call.prompt}});
  nlohmann::json body = {{"model", cfg.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                         {"max_tokens", call.decode.max_new_tokens},
                         {"temperature", call.decode.temperature}};
  if (call.decode.seed) body["seed"] = *call.decode.seed;
  return body;
}

/// Extracts the assistant text from a chat-completions response body.
inline ModelReply parse_chat_response(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw Error(Errc::BadRequest, "malformed chat completion response");
  const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
  ModelReply r;
  if (msg.contains("content")) {
    const auto& c = msg["content"];
    if (c.is_string()) {
      r.text = c.get<std::string>();
    } else if (c.is_array()) {
      for (const auto& part : c)
        if (part.value("type", "") == "text") r.text += part.value("text", "");
    }
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
  }
  return r;
}

/// OpenAI-compatible chat-completions client. Frames come from the media
/// provider and travel as base64 image parts. Safe for concurrent use; the
/// in-flight cap and request rate apply across all callers.
class HttpBackend : public Backend {
 public:
  HttpBackend(HttpBackendConfig cfg, std::shared_ptr<MediaProvider> media, Sleeper sleeper = real_sleeper())
      : cfg_(std::move(cfg)),
        media_(std::move(media)),
        sleep_(std::move(sleeper)),
        gate_(cfg_.max_in_flight, cfg_.requests_per_second) {
    if (cfg_.api_key.empty())
      if (const char* k = std::getenv("EGOVQA_API_KEY")) cfg_.api_key = k;
  }

  ModelReply send(const ModelCall& call) override {
    if (call.prompt.empty()) throw Error(Errc::BadRequest, "empty prompt");
    std::vector<std::vector<EncodedFrame>> frames;
    for (const auto& m : call.media) frames.push_back(media_->frames(m));
    const std::string body = chat_request_body(call, frames, cfg_).dump();
    if (body.size() > cfg_.max_request_bytes)
      throw Error(Errc::MediaTooLarge, std::to_string(body.size()) + " byte request exceeds " +
                                           std::to_string(cfg_.max_request_bytes));

    const auto t0 = std::chrono::steady_clock::now();
    auto reply = send_with_retries(
        cfg_.retry, [&] { return attempt(body); }, sleep_);
    reply.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    return reply;
  }

  bool available() override {
    auto cli = client();
    cli->set_connection_timeout(5);
    auto res = cli->Get("/v1/models", headers());
    return static_cast<bool>(res);
  }

  const RequestGate& gate() const { return gate_; }

 private:
  std::unique_ptr<httplib::Client> client() const {
    auto cli = std::make_unique<httplib::Client>(cfg_.endpoint);
    cli->set_connection_timeout(cfg_.timeout_s);
    cli->set_read_timeout(cfg_.timeout_s);
    cli->set_write_timeout(cfg_.timeout_s);
    return cli;
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!cfg_.api_key.empty()) h.emplace("Authorization", "Bearer " + cfg_.api_key);
    return h;
  }

  AttemptResult attempt(const std::string& body) {
    auto ticket = gate_.acquire();
    auto res = client()->Post(cfg_.path, headers(), body, "application/json");
    if (!res) return {AttemptStatus::Transient, {}, "transport error: " + httplib::to_string(res.error())};
    const int status = res->status;
    if (status == 200) {
      try {
        return {AttemptStatus::Ok, parse_chat_response(res->body), {}};
      } catch (const Error& e) {
        return {AttemptStatus::BadRequest, {}, e.what()};
      }
    }
    std::string detail = "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200);
    if (status == 429 || status >= 500) return {AttemptStatus::Transient, {}, detail};
    if (status == 413) return {AttemptStatus::TooLarge, {}, detail};
    return {AttemptStatus::BadRequest, {}, detail};
  }

  HttpBackendConfig cfg_;
  std::shared_ptr<MediaProvider> media_;
  Sleeper sleep_;
  RequestGate gate_;
};

}  // namespace egovqa
