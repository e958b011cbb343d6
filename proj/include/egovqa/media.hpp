#pragma once

#include <sys/wait.h>
#include <spawn.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <zlib.h>

#include "egovqa/backend.hpp"
#include "egovqa/error.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"

extern char** environ;

namespace egovqa {

struct EncodedFrame {
  std::string mime;
  std::string bytes;
  std::string label;  // e.g. "00:01:05.000" or "[V2] 00:00:04.000"
};

/// Supplies pixels for media descriptors and durations for videos.
class MediaProvider {
 public:
  virtual ~MediaProvider() = default;
  virtual std::vector<EncodedFrame> frames(const MediaItem& item) = 0;
  virtual std::optional<std::int64_t> duration_ms(const std::string& video) = 0;
};

namespace detail {

inline void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

inline void png_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body = std::string(type, 4) + data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(
                    crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

/// 8-bit grayscale PNG.
inline std::string encode_gray_png(std::uint32_t width, std::uint32_t height, const std::vector<std::uint8_t>& pixels) {
  std::string raw;
  raw.reserve((width + 1) * height);
  for (std::uint32_t y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(pixels.data() + y * width), width);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::string z(zlen, '\0');
  if (compress(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
               static_cast<uLong>(raw.size())) != Z_OK)
    throw Error(Errc::MediaError, "zlib compression failed");
  z.resize(zlen);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, width);
  detail::put_be32(ihdr, height);
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // depth 8, grayscale, deflate, no filter, no interlace
  detail::png_chunk(png, "IHDR", ihdr);
  detail::png_chunk(png, "IDAT", z);
  detail::png_chunk(png, "IEND", "");
  return png;
}

namespace detail {

// Sample times of a clip or stream, resolved to (video, local time, label).
struct FrameRequest {
  std::string video;
  Timestamp local;
  std::string label;
};

inline std::vector<FrameRequest> frame_requests(const MediaItem& item) {
  std::vector<FrameRequest> out;
  if (const auto* k = std::get_if<MediaKeyframe>(&item)) {
    out.push_back({k->video, k->t, format_timestamp(k->t)});
  } else if (const auto* c = std::get_if<MediaClip>(&item)) {
    for (auto t : c->frames.sample_times) out.push_back({c->segment.video_id, t, format_timestamp(t)});
  } else if (const auto* s = std::get_if<MediaStream>(&item)) {
    for (auto t : s->frames.sample_times) {
      auto [video, local] = s->timeline.locate(t);
      out.push_back({video, local, format_timestamp(t)});
    }
  }
  return out;
}

}  // namespace detail

/// Fabricates small labelled placeholder frames; durations come from a table.
class SyntheticMediaProvider : public MediaProvider {
 public:
  explicit SyntheticMediaProvider(std::map<std::string, std::int64_t> durations = {}, std::uint32_t side = 28)
      : durations_(std::move(durations)), side_(side) {}

  std::vector<EncodedFrame> frames(const MediaItem& item) override {
    std::vector<EncodedFrame> out;
    if (const auto* img = std::get_if<MediaImage>(&item)) {
      out.push_back({"image/png", placeholder(img->path), img->path});
      return out;
    }
    for (const auto& r : detail::frame_requests(item))
      out.push_back({"image/png", placeholder(r.video + "@" + format_timestamp(r.local)), r.label});
    return out;
  }

  std::optional<std::int64_t> duration_ms(const std::string& video) override {
    auto it = durations_.find(video);
    if (it == durations_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::string placeholder(const std::string& key) const {
    auto h = util::sha256_hex(key);
    auto shade = static_cast<std::uint8_t>(std::stoi(h.substr(0, 2), nullptr, 16));
    std::vector<std::uint8_t> px(static_cast<std::size_t>(side_) * side_, shade);
    for (std::uint32_t i = 0; i < side_; ++i) px[i * side_ + i] = static_cast<std::uint8_t>(255 - shade);
    return encode_gray_png(side_, side_, px);
  }

  std::map<std::string, std::int64_t> durations_;
  std::uint32_t side_;
};

namespace detail {

inline int run_process(const std::vector<std::string>& argv) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid;
  if (posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), environ) != 0) return -1;
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string mime_for(const std::filesystem::path& p) {
  auto ext = util::to_lower(p.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

}  // namespace detail

/// Delegates frame extraction to an external executable:
///   <exe> --input <path> --times <csv of HH:MM:SS.sss> --out <dir> --max-pixels <int>
/// which writes one image per timestamp named by its index (0.jpg, 1.jpg, ...).
/// Durations are probed with ffprobe when it is on PATH.
class ExternalFrameProvider : public MediaProvider {
 public:
  ExternalFrameProvider(std::string executable, std::filesystem::path work_dir, std::string ffprobe = "ffprobe")
      : exe_(std::move(executable)), work_dir_(std::move(work_dir)), ffprobe_(std::move(ffprobe)) {}

  std::vector<EncodedFrame> frames(const MediaItem& item) override {
    if (const auto* img = std::get_if<MediaImage>(&item)) {
      return {{detail::mime_for(img->path), util::read_file(img->path), img->path}};
    }
    std::int64_t max_pixels = 0;
    if (const auto* c = std::get_if<MediaClip>(&item)) max_pixels = c->frames.per_frame_pixels;
    else if (const auto* s = std::get_if<MediaStream>(&item)) max_pixels = s->frames.per_frame_pixels;
    else max_pixels = PixelBudget{}.max_total_pixels;

    auto requests = detail::frame_requests(item);
    // One extractor run per video, preserving request order in the output.
    std::vector<EncodedFrame> out(requests.size());
    std::map<std::string, std::vector<std::size_t>> by_video;
    for (std::size_t i = 0; i < requests.size(); ++i) by_video[requests[i].video].push_back(i);
    for (const auto& [video, idx] : by_video) {
      auto dir = work_dir_ / ("frames-" + std::to_string(::getpid()) + "-" + std::to_string(counter_.fetch_add(1)));
      std::filesystem::create_directories(dir);
      std::string csv;
      for (std::size_t k = 0; k < idx.size(); ++k) csv += (k ? "," : "") + format_timestamp(requests[idx[k]].local);
      int rc = detail::run_process(
          {exe_, "--input", video, "--times", csv, "--out", dir.string(), "--max-pixels", std::to_string(max_pixels)});
      if (rc != 0) throw Error(Errc::MediaError, exe_ + " exited with " + std::to_string(rc) + " for " + video);
      std::map<std::string, std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(dir)) files[e.path().stem().string()] = e.path();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        auto f = files.find(std::to_string(k));
        if (f == files.end()) throw Error(Errc::MediaError, "extractor produced no frame " + std::to_string(k));
        out[idx[k]] = {detail::mime_for(f->second), util::read_file(f->second), requests[idx[k]].label};
      }
      std::filesystem::remove_all(dir);
    }
    return out;
  }

  std::optional<std::int64_t> duration_ms(const std::string& video) override {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(video); it != cache_.end()) return it->second;
    }
    std::string cmd = ffprobe_ + " -v error -show_entries format=duration -of csv=p=0 '" +
                      util::replace_all(video, "'", "'\\''") + "' 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return std::nullopt;
    char buf[64] = {0};
    bool ok = std::fgets(buf, sizeof buf, pipe) != nullptr;
    pclose(pipe);
    if (!ok) return std::nullopt;
    try {
      auto ms = static_cast<std::int64_t>(std::stod(buf) * 1000.0 + 0.5);
      if (ms <= 0) return std::nullopt;
      std::lock_guard lock(mu_);
      cache_[video] = ms;
      return ms;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

 private:
  std::string exe_;
  std::filesystem::path work_dir_;
  std::string ffprobe_;
  std::atomic<std::uint64_t> counter_{0};
  std::mutex mu_;
  std::map<std::string, std::int64_t> cache_;
};

}  // namespace egovqa
