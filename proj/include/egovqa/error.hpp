#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egovqa {

enum class Errc {
  MalformedTimestamp,
  InvalidSegment,
  InvalidBoundingBox,
  UnknownPrototype,
  ManifestParse,
  ManifestValidation,
  ConfigError,
  VisualsMismatch,
  TooFewOptions,
  TooManyOptions,
  PlanConflict,
  PlaceholderMissing,
  PlaceholderAmbiguous,
  EventOutOfRange,
  EmptyClipList,
  ZeroDuration,
  UnknownVideo,
  TimestampBeyondClip,
  ChunkTooLong,
  UnorderedNarrations,
  DegenerateSegment,
  MissingDuration,
  BackendUnavailable,
  BadRequest,
  MediaTooLarge,
  MediaError,
  UnscriptedCall,
  InsufficientVariants,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedTimestamp: return "MalformedTimestamp";
    case Errc::InvalidSegment: return "InvalidSegment";
    case Errc::InvalidBoundingBox: return "InvalidBoundingBox";
    case Errc::UnknownPrototype: return "UnknownPrototype";
    case Errc::ManifestParse: return "ManifestParse";
    case Errc::ManifestValidation: return "ManifestValidation";
    case Errc::ConfigError: return "ConfigError";
    case Errc::VisualsMismatch: return "VisualsMismatch";
    case Errc::TooFewOptions: return "TooFewOptions";
    case Errc::TooManyOptions: return "TooManyOptions";
    case Errc::PlanConflict: return "PlanConflict";
    case Errc::PlaceholderMissing: return "PlaceholderMissing";
    case Errc::PlaceholderAmbiguous: return "PlaceholderAmbiguous";
    case Errc::EventOutOfRange: return "EventOutOfRange";
    case Errc::EmptyClipList: return "EmptyClipList";
    case Errc::ZeroDuration: return "ZeroDuration";
    case Errc::UnknownVideo: return "UnknownVideo";
    case Errc::TimestampBeyondClip: return "TimestampBeyondClip";
    case Errc::ChunkTooLong: return "ChunkTooLong";
    case Errc::UnorderedNarrations: return "UnorderedNarrations";
    case Errc::DegenerateSegment: return "DegenerateSegment";
    case Errc::MissingDuration: return "MissingDuration";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::BadRequest: return "BadRequest";
    case Errc::MediaTooLarge: return "MediaTooLarge";
    case Errc::MediaError: return "MediaError";
    case Errc::UnscriptedCall: return "UnscriptedCall";
    case Errc::InsufficientVariants: return "InsufficientVariants";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Retries exhausted; attempts() is the number of requests actually issued.
class BackendUnavailable : public Error {
 public:
  BackendUnavailable(int attempts, const std::string& what)
      : Error(Errc::BackendUnavailable, what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace egovqa
