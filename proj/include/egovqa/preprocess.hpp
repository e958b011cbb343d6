#pragma once

#include <array>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "egovqa/error.hpp"
#include "egovqa/prototype.hpp"
#include "egovqa/question.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

// ---------------------------------------------------------------------------
// Modality classification
// ---------------------------------------------------------------------------

/// prototype -> visual-context class, loaded from `modality_map.json`.
class ModalityMap {
 public:
  ModalityMap() = default;

  static ModalityMap from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::ConfigError, "modality map must be a JSON object");
    ModalityMap m;
    for (const auto& [name, cls] : j.items()) {
      auto proto = PrototypeId::find(name);
      if (!proto) throw Error(Errc::ConfigError, "modality map: unknown prototype '" + name + "'");
      auto mod = cls.is_string() ? parse_modality(cls.get<std::string>()) : std::nullopt;
      if (!mod) throw Error(Errc::ConfigError, "modality map: bad class for '" + name + "'");
      m.set(*proto, *mod);
    }
    return m;
  }

  static ModalityMap load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(util::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
  }

  void set(PrototypeId p, ModalityClass m) { table_[p.index()] = m; }

  std::optional<ModalityClass> lookup(PrototypeId p) const { return table_[p.index()]; }

  bool complete() const {
    for (const auto& e : table_)
      if (!e) return false;
    return true;
  }

 private:
  std::array<std::optional<ModalityClass>, kPrototypes.size()> table_{};
};

/// Returns the mapped class after checking the attached visuals agree with it.
inline ModalityClass classify_modality(const QuestionRecord& q, const ModalityMap& mapping) {
  auto cls = mapping.lookup(q.prototype);
  if (!cls) throw Error(Errc::ConfigError, "no modality mapping for prototype '" + std::string(q.prototype.name()) + "'");
  const auto n_img = q.visuals.images.size();
  const auto n_vid = q.visuals.videos.size();
  auto mismatch = [&](const std::string& why) {
    return Error(Errc::VisualsMismatch, "question '" + q.id + "' (" + std::string(modality_name(*cls)) + "): " + why);
  };
  switch (*cls) {
    case ModalityClass::SingleImage: {
      // Either one still image, or a keyframe addressed inside one video.
      bool still = n_img == 1 && n_vid == 0;
      bool keyframe = n_img == 0 && n_vid == 1 && q.visuals.bbox && q.visuals.bbox->t;
      if (!still && !keyframe) throw mismatch("needs exactly one image (or one video with a timed bbox keyframe)");
      break;
    }
    case ModalityClass::MultiImage:
      if (n_img < 2 || n_vid != 0) throw mismatch("needs two or more images and no videos");
      break;
    case ModalityClass::SingleClip:
      if (n_vid != 1) throw mismatch("needs exactly one video");
      break;
    case ModalityClass::MultiClip:
      if (n_vid < 2) throw mismatch("needs two or more videos");
      break;
  }
  return *cls;
}

// ---------------------------------------------------------------------------
// Query part extraction
// ---------------------------------------------------------------------------

/// A timestamp or time range found in question text.
struct QueryMarker {
  std::optional<std::size_t> video_ordinal;  // from a `[V<k>]` tag
  Timestamp start;
  std::optional<Timestamp> end;              // set for ranges
  std::size_t pos = 0;                       // byte span in the source text
  std::size_t len = 0;

  bool is_segment() const { return end.has_value(); }

  std::string render() const {
    std::string out;
    if (video_ordinal) out += "[V" + std::to_string(*video_ordinal) + "] ";
    out += format_timestamp(start);
    if (end) out += " - " + format_timestamp(*end);
    return out;
  }

  friend bool operator==(const QueryMarker&, const QueryMarker&) = default;
};

struct QueryParts {
  std::vector<std::string> entities;
  std::vector<QueryMarker> temporal_markers;
  std::vector<std::string> relations;
};

namespace detail {

struct Token {
  std::size_t pos;
  std::size_t len;
  std::string_view text;
};

inline bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
}

inline std::vector<Token> tokenize_words(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isalnum(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && word_char(s[j])) ++j;
    while (j > i && (s[j - 1] == '\'' || s[j - 1] == '-')) --j;
    out.push_back({i, j - i, s.substr(i, j - i)});
    i = j == i ? i + 1 : j;
  }
  return out;
}

inline bool is_alpha_word(std::string_view w) {
  for (char c : w)
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '\'' && c != '-') return false;
  return !w.empty();
}

inline bool in_list(std::string_view lower_word, std::initializer_list<std::string_view> list) {
  for (auto w : list)
    if (w == lower_word) return true;
  return false;
}

inline bool is_determiner(std::string_view lower) {
  return in_list(lower, {"the", "a", "an", "this", "that", "these", "those", "my", "your", "his", "her", "their",
                         "its", "our", "some", "each", "every"});
}

// Words that terminate a determiner-led noun phrase.
inline bool is_phrase_stop(std::string_view lower) {
  return is_determiner(lower) ||
         in_list(lower, {"is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "done",
                         "have", "has", "had", "will", "would", "can", "could", "should", "may", "might", "must",
                         "in", "on", "at", "to", "from", "of", "for", "with", "by", "into", "onto", "over", "under",
                         "about", "as", "up", "down", "out", "off", "near", "inside", "behind", "before", "after",
                         "while", "between", "during", "until", "since", "and", "or", "but", "nor", "so", "then",
                         "than", "if", "last", "first", "next", "now", "again", "still", "just", "currently", "when",
                         "where", "what", "which", "who", "whom", "whose", "how", "why", "it", "i", "you", "he",
                         "she", "they", "we", "me", "him", "them", "us", "not", "no", "most", "more", "least",
                         "located", "placed", "put", "taken", "moved", "used", "added", "seen", "shown"}) ||
         (lower.size() > 3 && lower.substr(lower.size() - 2) == "ly");
}

inline bool sentence_start(std::string_view s, std::size_t pos) {
  for (std::size_t i = pos; i > 0; --i) {
    char c = s[i - 1];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '(') continue;
    return c == '.' || c == '?' || c == '!' || c == ':' || c == '\n';
  }
  return true;
}

inline bool overlaps(std::size_t a, std::size_t alen, std::size_t b, std::size_t blen) {
  return a < b + blen && b < a + alen;
}

}  // namespace detail

/// Regex-grade extraction of temporal markers, entity phrases and relation keywords.
inline QueryParts extract_query_parts(std::string_view text) {
  QueryParts parts;

  // Temporal markers: every timestamp, pairing adjacent ones joined by a range word.
  static const std::regex ts_re(R"(\d+:\d{2}:\d{2}\.\d{3})");
  static const std::regex tag_re(R"(\[V(\d+)\]\s*$)");
  struct Hit {
    std::size_t pos, len;
    Timestamp t;
  };
  std::vector<Hit> hits;
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), ts_re); it != std::sregex_iterator(); ++it) {
    auto pos = static_cast<std::size_t>(it->position());
    auto len = static_cast<std::size_t>(it->length());
    if (pos + len < owned.size() && std::isdigit(static_cast<unsigned char>(owned[pos + len]))) continue;
    try {
      hits.push_back({pos, len, parse_timestamp(std::string_view(owned).substr(pos, len))});
    } catch (const Error&) {
      // e.g. minutes >= 60: not a marker
    }
  }
  auto tag_before = [&](std::size_t pos, std::size_t floor) -> std::pair<std::optional<std::size_t>, std::size_t> {
    std::smatch m;
    std::string head = owned.substr(floor, pos - floor);
    if (std::regex_search(head, m, tag_re))
      return {static_cast<std::size_t>(std::stoul(m[1].str())), floor + static_cast<std::size_t>(m.position(0))};
    return {std::nullopt, pos};
  };
  std::size_t consumed = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    QueryMarker mk;
    auto [ordinal, begin] = tag_before(hits[i].pos, consumed);
    mk.video_ordinal = ordinal;
    mk.start = hits[i].t;
    std::size_t stop = hits[i].pos + hits[i].len;
    if (i + 1 < hits.size()) {
      std::size_t gap_begin = stop;
      std::size_t gap_end = hits[i + 1].pos;
      auto [ord2, begin2] = tag_before(gap_end, gap_begin);
      auto joiner = util::to_lower(util::trim(std::string_view(owned).substr(gap_begin, begin2 - gap_begin)));
      bool same_video = !ord2 || !ordinal || *ord2 == *ordinal;
      if (same_video && (joiner == "-" || joiner == "\xE2\x80\x93" || joiner == "to" || joiner == "and" ||
                         joiner == "until" || joiner == "till")) {
        if (!mk.video_ordinal) mk.video_ordinal = ord2;
        mk.end = hits[i + 1].t;
        stop = hits[i + 1].pos + hits[i + 1].len;
        ++i;
      }
    }
    if (mk.end && *mk.end < mk.start) std::swap(*mk.end, mk.start);
    mk.pos = begin;
    mk.len = stop - begin;
    consumed = stop;
    parts.temporal_markers.push_back(mk);
  }
  auto inside_marker = [&](std::size_t pos, std::size_t len) {
    for (const auto& m : parts.temporal_markers)
      if (detail::overlaps(pos, len, m.pos, m.len)) return true;
    return false;
  };

  // Entities, kept in text order.
  struct Span {
    std::size_t pos, len;
  };
  std::vector<Span> spans;
  auto claim = [&](std::size_t pos, std::size_t len) {
    if (len == 0 || inside_marker(pos, len)) return;
    for (const auto& s : spans)
      if (detail::overlaps(pos, len, s.pos, s.len)) return;
    spans.push_back({pos, len});
  };
  // 1. quoted spans
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '"') continue;
    auto close = text.find('"', i + 1);
    if (close == std::string_view::npos) break;
    auto inner = util::trim(text.substr(i + 1, close - i - 1));
    if (!inner.empty()) claim(static_cast<std::size_t>(inner.data() - text.data()), inner.size());
    i = close;
  }
  auto tokens = detail::tokenize_words(text);
  auto only_spaces = [&](std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k)
      if (text[k] != ' ') return false;
    return true;
  };
  auto bracketed = [&](const detail::Token& t) {
    return (t.pos > 0 && (text[t.pos - 1] == '[' || text[t.pos - 1] == '{'));
  };
  // 2. determiner + up to three content words
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!detail::is_determiner(util::to_lower(tokens[i].text))) continue;
    std::size_t last = i;
    for (std::size_t k = i + 1; k < tokens.size() && k <= i + 3; ++k) {
      const auto& t = tokens[k];
      if (!only_spaces(tokens[k - 1].pos + tokens[k - 1].len, t.pos)) break;
      if (!detail::is_alpha_word(t.text) || bracketed(t) || detail::is_phrase_stop(util::to_lower(t.text))) break;
      last = k;
    }
    if (last > i) {
      claim(tokens[i].pos, tokens[last].pos + tokens[last].len - tokens[i].pos);
      i = last;
    }
  }
  // 3. capitalized spans that are not sentence-initial
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    bool cap = std::isupper(static_cast<unsigned char>(t.text[0])) != 0;
    if (!cap || t.text == "I" || bracketed(t) || detail::sentence_start(text, t.pos) ||
        detail::is_determiner(util::to_lower(t.text)))
      continue;
    std::size_t last = i;
    while (last + 1 < tokens.size() && std::isupper(static_cast<unsigned char>(tokens[last + 1].text[0])) &&
           only_spaces(tokens[last].pos + tokens[last].len, tokens[last + 1].pos) && !bracketed(tokens[last + 1]))
      ++last;
    claim(t.pos, tokens[last].pos + tokens[last].len - t.pos);
    i = last;
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.pos < b.pos; });
  for (const auto& s : spans) {
    std::string e(text.substr(s.pos, s.len));
    if (std::find(parts.entities.begin(), parts.entities.end(), e) == parts.entities.end())
      parts.entities.push_back(std::move(e));
  }

  // Relations.
  for (const auto& t : tokens) {
    auto lower = util::to_lower(t.text);
    if (detail::in_list(lower, {"before", "after", "while", "between"}) &&
        std::find(parts.relations.begin(), parts.relations.end(), lower) == parts.relations.end())
      parts.relations.push_back(lower);
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Prompt refinement
// ---------------------------------------------------------------------------

struct PromptTemplate {
  std::string trigger_source;
  std::regex trigger;
  std::string body;     // {question}, {entityN}, {markerN}, {relationN}, {matchN}
  std::string example;  // a representative input, used by the bank self-checks
};

inline PromptTemplate parse_template(std::string_view text, const std::string& origin) {
  PromptTemplate t;
  for (const auto& raw : util::split_lines(text)) {
    auto line = util::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw Error(Errc::ConfigError, origin + ": expected 'key: value' lines");
    auto key = util::trim(line.substr(0, colon));
    auto value = std::string(util::trim(line.substr(colon + 1)));
    if (key == "trigger") t.trigger_source = value;
    else if (key == "template") t.body = value;
    else if (key == "example") t.example = value;
    else throw Error(Errc::ConfigError, origin + ": unknown key '" + std::string(key) + "'");
  }
  if (t.trigger_source.empty() || t.body.empty()) throw Error(Errc::ConfigError, origin + ": needs trigger and template");
  try {
    t.trigger = std::regex(t.trigger_source, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw Error(Errc::ConfigError, origin + ": bad trigger regex: " + e.what());
  }
  return t;
}

/// One template per prototype, read from `templates/<prototype>.txt`.
class TemplateBank {
 public:
  static TemplateBank load(const std::filesystem::path& dir) {
    TemplateBank bank;
    for (std::size_t i = 0; i < kPrototypes.size(); ++i) {
      auto path = dir / (std::string(kPrototypes[i].name) + ".txt");
      if (std::filesystem::exists(path)) bank.templates_[i] = parse_template(util::read_file(path), path.string());
    }
    return bank;
  }

  void set(PrototypeId p, PromptTemplate t) { templates_[p.index()] = std::move(t); }

  const PromptTemplate* find(PrototypeId p) const {
    const auto& t = templates_[p.index()];
    return t ? &*t : nullptr;
  }

 private:
  std::array<std::optional<PromptTemplate>, kPrototypes.size()> templates_{};
};

enum class RefineStatus {
  Applied,
  TemplateMissing,  // no template registered: original text, with a warning
  TriggerMiss,      // template exists but the text is not in its trigger form
  Fallback,         // instantiation would drop an extracted part
};

struct RefineOutcome {
  std::string text;
  RefineStatus status = RefineStatus::Applied;
};

namespace detail {

// Expands {name<N>} placeholders; returns nullopt on an unknown or out-of-range reference.
inline std::optional<std::string> expand_template(const std::string& body, const std::string& question,
                                                  const QueryParts& parts, const std::smatch& match) {
  std::string out;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '{') {
      out.push_back(body[i++]);
      continue;
    }
    auto close = body.find('}', i);
    if (close == std::string::npos) return std::nullopt;
    std::string key = body.substr(i + 1, close - i - 1);
    i = close + 1;
    if (key == "question") {
      out += question;
      continue;
    }
    std::size_t digit = key.find_first_of("0123456789");
    if (digit == std::string::npos) return std::nullopt;
    std::string name = key.substr(0, digit);
    std::size_t n = std::stoul(key.substr(digit));
    if (name == "entity" && n < parts.entities.size()) out += parts.entities[n];
    else if (name == "marker" && n < parts.temporal_markers.size()) out += parts.temporal_markers[n].render();
    else if (name == "relation" && n < parts.relations.size()) out += parts.relations[n];
    else if (name == "match" && n < match.size() && match[n].matched) out += util::trim(match[n].str());
    else return std::nullopt;
  }
  return out;
}

inline bool preserves_parts(const std::string& out, const std::string& source, const QueryParts& parts) {
  for (const auto& e : parts.entities)
    if (out.find(e) == std::string::npos) return false;
  for (const auto& m : parts.temporal_markers) {
    auto original = source.substr(m.pos, m.len);
    if (out.find(original) == std::string::npos && out.find(m.render()) == std::string::npos) return false;
  }
  auto lower = util::to_lower(out);
  for (const auto& r : parts.relations)
    if (lower.find(r) == std::string::npos) return false;
  return true;
}

}  // namespace detail

/// Instantiates the prototype's template. The original text is returned
/// unchanged when no template exists, the trigger does not match, or the
/// result would lose an extracted entity, marker or relation.
inline RefineOutcome refine_prompt_ex(const QuestionRecord& q, const QueryParts& parts, const TemplateBank& bank) {
  const auto* tmpl = bank.find(q.prototype);
  if (!tmpl) return {q.query_text, RefineStatus::TemplateMissing};
  const std::string source(util::trim(q.query_text));
  std::smatch match;
  if (!std::regex_match(source, match, tmpl->trigger)) return {q.query_text, RefineStatus::TriggerMiss};
  auto out = detail::expand_template(tmpl->body, source, parts, match);
  if (!out || !detail::preserves_parts(*out, q.query_text, parts)) return {q.query_text, RefineStatus::Fallback};
  return {*out, RefineStatus::Applied};
}

inline std::string refine_prompt(const QuestionRecord& q, const QueryParts& parts, const TemplateBank& bank) {
  return refine_prompt_ex(q, parts, bank).text;
}

// ---------------------------------------------------------------------------
// Choice standardization
// ---------------------------------------------------------------------------

enum class ChoiceDelimiter { Newline, Semicolon, Space };

inline std::string_view delimiter_text(ChoiceDelimiter d) {
  switch (d) {
    case ChoiceDelimiter::Newline: return "\n";
    case ChoiceDelimiter::Semicolon: return "; ";
    case ChoiceDelimiter::Space: return "  ";
  }
  return "\n";
}

inline std::optional<ChoiceDelimiter> parse_delimiter(std::string_view s) {
  if (s == "newline") return ChoiceDelimiter::Newline;
  if (s == "semicolon") return ChoiceDelimiter::Semicolon;
  if (s == "space") return ChoiceDelimiter::Space;
  return std::nullopt;
}

/// Removes one leading enumerator such as `1.`, `2)`, `a)`, `(i)`, `B:`, then trims.
inline std::string strip_enumerator(std::string_view option) {
  static const std::regex enum_re(
      R"(^\s*(?:\(\s*(?:\d{1,2}|[A-Za-z]|[ivxIVX]{1,4})\s*\)|(?:\d{1,2}|[A-Za-z]|[ivxIVX]{1,4})\s*[.):])(?=\s|$))");
  std::string s(option);
  std::smatch m;
  if (std::regex_search(s, m, enum_re)) s.erase(0, static_cast<std::size_t>(m.length(0)));
  return std::string(util::trim(s));
}

/// `<L>. [V<k>] HH:MM:SS.sss - HH:MM:SS.sss`, segments joined by `; `.
inline std::string format_temporal_option(char letter, const std::vector<TimeSegment>& segments,
                                          const std::vector<std::string>& videos) {
  if (segments.empty()) throw Error(Errc::InvalidSegment, "temporal option without segments");
  std::string out{letter};
  out += ". ";
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    auto it = std::find(videos.begin(), videos.end(), s.video_id);
    if (it == videos.end()) throw Error(Errc::UnknownVideo, "no ordinal for video '" + s.video_id + "'");
    if (i) out += "; ";
    out += "[V" + std::to_string(it - videos.begin() + 1) + "] " + format_timestamp(s.start) + " - " +
           format_timestamp(s.end);
  }
  return out;
}

/// Same shape without video tags, for options already mapped onto one unified timeline.
inline std::string format_unified_option(char letter, const std::vector<TimeSegment>& segments) {
  if (segments.empty()) throw Error(Errc::InvalidSegment, "temporal option without segments");
  std::string out{letter};
  out += ". ";
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += "; ";
    out += format_timestamp(segments[i].start) + " - " + format_timestamp(segments[i].end);
  }
  return out;
}

struct StandardizedChoices {
  std::string block;
  std::vector<std::string> lines;
  std::vector<char> letters;  // letters[i] names option i

  std::optional<std::size_t> index_of(char letter) const {
    for (std::size_t i = 0; i < letters.size(); ++i)
      if (letters[i] == letter) return i;
    return std::nullopt;
  }
};

inline void check_option_count(std::size_t n) {
  if (n > 26) throw Error(Errc::TooManyOptions, std::to_string(n) + " options (max 26)");
  if (n < 2) throw Error(Errc::TooFewOptions, std::to_string(n) + " options (min 2)");
}

inline std::string option_plain_text(const ChoiceOption& o) {
  if (const auto* s = std::get_if<std::string>(&o)) {
    std::string flat = *s;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    std::replace(flat.begin(), flat.end(), '\r', ' ');
    return strip_enumerator(flat);
  }
  return {};
}

inline StandardizedChoices standardize_choices(const ChoiceSet& c, const std::vector<std::string>& videos = {},
                                               ChoiceDelimiter delimiter = ChoiceDelimiter::Newline) {
  check_option_count(c.size());
  StandardizedChoices out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    out.letters.push_back(letter);
    if (const auto* segs = std::get_if<std::vector<TimeSegment>>(&c.options[i]))
      out.lines.push_back(format_temporal_option(letter, *segs, videos));
    else
      out.lines.push_back(std::string{letter} + ". " + option_plain_text(c.options[i]));
  }
  for (std::size_t i = 0; i < out.lines.size(); ++i) {
    if (i) out.block += delimiter_text(delimiter);
    out.block += out.lines[i];
  }
  return out;
}

/// Pass-through rendering used when pre-processing is disabled: original option
/// text verbatim, lettered only so that replies remain scoreable.
inline StandardizedChoices render_raw_choices(const ChoiceSet& c) {
  check_option_count(c.size());
  StandardizedChoices out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    out.letters.push_back(letter);
    std::string body;
    if (const auto* segs = std::get_if<std::vector<TimeSegment>>(&c.options[i])) {
      for (std::size_t k = 0; k < segs->size(); ++k) {
        if (k) body += ", ";
        body += (*segs)[k].video_id + " " + format_timestamp((*segs)[k].start) + "-" + format_timestamp((*segs)[k].end);
      }
    } else {
      body = std::get<std::string>(c.options[i]);
    }
    out.lines.push_back("(" + std::string{letter} + ") " + body);
  }
  for (std::size_t i = 0; i < out.lines.size(); ++i) {
    if (i) out.block += " ";
    out.block += out.lines[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole stage
// ---------------------------------------------------------------------------

struct RefinedQuestion {
  QuestionRecord original;
  ModalityClass modality = ModalityClass::SingleClip;
  std::string refined_text;
  QueryParts extracted;
  StandardizedChoices standardized_choices;
  RefineStatus refine_status = RefineStatus::Applied;
  bool preprocessed = true;
  ChoiceDelimiter delimiter = ChoiceDelimiter::Newline;
};

struct PreprocessContext {
  const ModalityMap* modality_map = nullptr;
  const TemplateBank* templates = nullptr;
  ChoiceDelimiter delimiter = ChoiceDelimiter::Newline;
};

/// With `enabled == false` the question text and options pass through raw; the
/// modality is still classified since later stages need to know what to send.
inline RefinedQuestion preprocess_question(const QuestionRecord& q, const PreprocessContext& ctx, bool enabled = true) {
  RefinedQuestion rq;
  rq.original = q;
  rq.modality = classify_modality(q, *ctx.modality_map);
  rq.extracted = extract_query_parts(q.query_text);
  rq.preprocessed = enabled;
  rq.delimiter = ctx.delimiter;
  if (enabled) {
    auto outcome = refine_prompt_ex(q, rq.extracted, *ctx.templates);
    rq.refined_text = std::move(outcome.text);
    rq.refine_status = outcome.status;
    rq.standardized_choices = standardize_choices(q.choices, q.visuals.videos, ctx.delimiter);
  } else {
    rq.refined_text = q.query_text;
    rq.refine_status = RefineStatus::TriggerMiss;
    rq.standardized_choices = render_raw_choices(q.choices);
  }
  return rq;
}

}  // namespace egovqa
