#pragma once

#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egovqa/error.hpp"
#include "egovqa/preprocess.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

enum class ExtractionRule { ExactLetter, FinalAnswerPattern, FirstStandaloneLetter, OptionTextMatch };

inline std::string_view rule_name(ExtractionRule r) {
  switch (r) {
    case ExtractionRule::ExactLetter: return "ExactLetter";
    case ExtractionRule::FinalAnswerPattern: return "FinalAnswerPattern";
    case ExtractionRule::FirstStandaloneLetter: return "FirstStandaloneLetter";
    case ExtractionRule::OptionTextMatch: return "OptionTextMatch";
  }
  return "";
}

struct CleanedAnswer {
  std::size_t index = 0;
  char letter = 'A';
  ExtractionRule rule = ExtractionRule::ExactLetter;
  std::string raw;
};

/// Full runs the whole rule cascade; ExactOnly stops after the first rule.
enum class CleaningMode { Full, ExactOnly };

namespace detail {

inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Rule 1: the whole reply is one letter, optionally bracketed or followed by punctuation.
inline std::optional<char> exact_letter(std::string_view raw) {
  auto s = util::trim(raw);
  auto strip = [&](std::string_view chars) {
    while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
    while (!s.empty() && chars.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
    s = util::trim(s);
  };
  strip("*`\"'");
  if (!s.empty() && (s.back() == '.' || s.back() == ':' || s.back() == ')' || s.back() == ']')) {
    bool bracketed = s.back() == ')' || s.back() == ']';
    s.remove_suffix(1);
    if (bracketed && !s.empty() && (s.front() == '(' || s.front() == '[')) s.remove_prefix(1);
  } else if (!s.empty() && (s.front() == '(' || s.front() == '[')) {
    return std::nullopt;
  }
  if (s.size() != 1 || !std::isalpha(static_cast<unsigned char>(s[0]))) return std::nullopt;
  return static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
}

// Rule 2: last committed "answer is X"-style statement. A lowercase letter only
// counts when nothing but punctuation follows it ("answer: b" yes, "answer is a pan" no).
inline std::optional<char> final_answer_letter(std::string_view raw, std::size_t n_options) {
  static constexpr std::string_view kKeys[] = {"answer",      "correct option", "correct choice", "best option",
                                               "best choice", "choose",         "go with",        "my choice",
                                               "it's",        "it is",          "pick"};
  static const std::regex suffix_re(R"((?:^|[^A-Za-z0-9])\(?([A-Z])\)?\s+is\s+(?:the\s+)?(?:correct|right|best)\b)");
  const auto lower = util::to_lower(raw);
  std::optional<char> best;
  std::size_t best_pos = 0;
  auto offer = [&](char letter, std::size_t pos) {
    if (static_cast<std::size_t>(letter - 'A') >= n_options) return;
    if (!best || pos >= best_pos) {
      best = letter;
      best_pos = pos;
    }
  };
  for (auto key : kKeys) {
    for (auto pos = lower.find(key); pos != std::string::npos; pos = lower.find(key, pos + 1)) {
      if (pos > 0 && is_alnum(raw[pos - 1])) continue;
      std::size_t p = pos + key.size();
      for (int guard = 0; guard < 4; ++guard) {
        while (p < raw.size() && std::string_view(" \t\n:-=*\"'`").find(raw[p]) != std::string_view::npos) ++p;
        bool skipped = false;
        for (std::string_view filler : {"is", "be", "would", "should", "will", "must", "option", "choice", "letter"}) {
          if (lower.compare(p, filler.size(), filler) == 0 &&
              (p + filler.size() >= raw.size() || !is_alnum(raw[p + filler.size()]))) {
            p += filler.size();
            skipped = true;
            break;
          }
        }
        if (!skipped) break;
      }
      while (p < raw.size() && (raw[p] == '(' || raw[p] == '[' || raw[p] == '*')) ++p;
      if (p >= raw.size() || !std::isalpha(static_cast<unsigned char>(raw[p]))) continue;
      const bool upper = raw[p] >= 'A' && raw[p] <= 'Z';
      const std::string_view rest = util::trim(raw.substr(p + 1));
      if (upper ? (p + 1 < raw.size() && is_alnum(raw[p + 1]))
                : !(rest.empty() || std::string_view(".)]:!*").find(rest.front()) != std::string_view::npos))
        continue;
      offer(static_cast<char>(std::toupper(static_cast<unsigned char>(raw[p]))), pos);
    }
  }
  const std::string owned(raw);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), suffix_re); it != std::sregex_iterator(); ++it)
    offer((*it)[1].str()[0], static_cast<std::size_t>(it->position(1)));
  return best;
}

// Rule 3: first line that starts with an in-range enumerator such as "C." or "(B)".
inline std::optional<char> line_start_letter(std::string_view raw, std::size_t n_options) {
  for (const auto& line : util::split_lines(raw)) {
    std::string_view s = util::trim(line);
    while (!s.empty() && (s.front() == '*' || s.front() == '-' || s.front() == '>')) s = util::trim(s.substr(1));
    bool paren = !s.empty() && s.front() == '(';
    if (paren) s.remove_prefix(1);
    if (s.size() < 2 || s[0] < 'A' || s[0] > 'Z') continue;
    if (s[1] != '.' && s[1] != ')' && s[1] != ':') continue;
    if (static_cast<std::size_t>(s[0] - 'A') < n_options) return s[0];
  }
  return std::nullopt;
}

// Rule 4: exactly one option's full text appears in the reply.
inline std::optional<std::size_t> option_text_match(std::string_view raw, std::span<const std::string> options) {
  const auto lower = util::to_lower(raw);
  std::optional<std::size_t> hit;
  for (std::size_t i = 0; i < options.size(); ++i) {
    auto text = util::to_lower(util::trim(options[i]));
    if (text.empty() || lower.find(text) == std::string::npos) continue;
    if (hit) return std::nullopt;
    hit = i;
  }
  return hit;
}

}  // namespace detail

/// Extracts a zero-based choice index from a free-form reply. Rules fire in a
/// fixed priority order; nullopt means Unextractable (never a guess).
inline std::optional<CleanedAnswer> clean_answer(std::string_view raw, std::size_t n_options,
                                                 std::span<const std::string> option_texts = {},
                                                 CleaningMode mode = CleaningMode::Full) {
  if (n_options < 2 || n_options > 26) throw Error(Errc::TooManyOptions, "n_options must be within 2..26");
  auto make = [&](char letter, ExtractionRule rule) {
    return CleanedAnswer{static_cast<std::size_t>(letter - 'A'), letter, rule, std::string(raw)};
  };
  if (auto l = detail::exact_letter(raw); l && static_cast<std::size_t>(*l - 'A') < n_options)
    return make(*l, ExtractionRule::ExactLetter);
  if (mode == CleaningMode::ExactOnly) return std::nullopt;
  if (auto l = detail::final_answer_letter(raw, n_options)) return make(*l, ExtractionRule::FinalAnswerPattern);
  if (auto l = detail::line_start_letter(raw, n_options)) return make(*l, ExtractionRule::FirstStandaloneLetter);
  if (option_texts.size() == n_options)
    if (auto i = detail::option_text_match(raw, option_texts))
      return make(static_cast<char>('A' + *i), ExtractionRule::OptionTextMatch);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Paraphrase ensemble
// ---------------------------------------------------------------------------

/// Surface variants read from `paraphrases/variants.txt`; line 0 is the identity.
class ParaphraseBank {
 public:
  explicit ParaphraseBank(std::vector<std::string> templates) : templates_(std::move(templates)) {
    if (templates_.empty() || templates_.front() != "{question}")
      throw Error(Errc::ConfigError, "paraphrase bank must start with the identity line '{question}'");
    for (const auto& t : templates_)
      if (util::count_occurrences(t, "{question}") != 1)
        throw Error(Errc::ConfigError, "paraphrase template needs exactly one {question}: " + t);
  }

  static ParaphraseBank load(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    for (auto& l : util::split_lines(util::read_file(path)))
      if (!util::trim(l).empty()) lines.push_back(std::move(l));
    return ParaphraseBank(std::move(lines));
  }

  std::size_t size() const { return templates_.size(); }
  const std::vector<std::string>& templates() const { return templates_; }

 private:
  std::vector<std::string> templates_;
};

inline std::vector<std::string> generate_paraphrases(const std::string& refined_text, const QueryParts& parts,
                                                     std::size_t k, const ParaphraseBank& bank) {
  if (k < 1) throw Error(Errc::InsufficientVariants, "ensemble size must be at least 1");
  if (k > bank.size())
    throw Error(Errc::InsufficientVariants,
                "asked for " + std::to_string(k) + " variants, bank has " + std::to_string(bank.size()));
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < k; ++i) {
    std::string v = util::replace_all(bank.templates()[i], "{question}", refined_text);
    for (const auto& e : parts.entities)
      if (v.find(e) == std::string::npos) throw Error(Errc::InsufficientVariants, "variant drops entity '" + e + "'");
    for (const auto& m : parts.temporal_markers)
      if (v.find(m.render()) == std::string::npos && v.find(refined_text.substr(m.pos, m.len)) == std::string::npos)
        throw Error(Errc::InsufficientVariants, "variant drops marker " + m.render());
    auto lower = util::to_lower(v);
    for (const auto& r : parts.relations)
      if (lower.find(r) == std::string::npos) throw Error(Errc::InsufficientVariants, "variant drops relation " + r);
    if (!seen.insert(v).second) throw Error(Errc::InsufficientVariants, "variant " + std::to_string(i) + " is a duplicate");
    out.push_back(std::move(v));
  }
  return out;
}

struct EnsembleResult {
  std::vector<std::optional<CleanedAnswer>> votes;
  std::optional<CleanedAnswer> winner;  // nullopt when every vote was Unextractable
  bool tie_broken = false;
};

/// Most frequent index wins. Ties go to the canonical (unmodified prompt) vote
/// when it is among the tied modes, else to the lowest tied index.
inline EnsembleResult majority_vote(std::vector<std::optional<CleanedAnswer>> votes, std::size_t canonical_index) {
  EnsembleResult r;
  r.votes = std::move(votes);
  std::map<std::size_t, std::size_t> counts;
  for (const auto& v : r.votes)
    if (v) ++counts[v->index];
  if (counts.empty()) return r;
  std::size_t top = 0;
  for (const auto& [idx, n] : counts) top = std::max(top, n);
  std::vector<std::size_t> modes;
  for (const auto& [idx, n] : counts)
    if (n == top) modes.push_back(idx);  // ascending
  auto first_vote_for = [&](std::size_t idx) {
    for (const auto& v : r.votes)
      if (v && v->index == idx) return *v;
    return CleanedAnswer{};
  };
  if (modes.size() == 1) {
    r.winner = canonical_index < r.votes.size() && r.votes[canonical_index] && r.votes[canonical_index]->index == modes[0]
                   ? *r.votes[canonical_index]
                   : first_vote_for(modes[0]);
    return r;
  }
  r.tie_broken = true;
  const auto& canon = canonical_index < r.votes.size() ? r.votes[canonical_index] : std::optional<CleanedAnswer>{};
  if (canon && std::find(modes.begin(), modes.end(), canon->index) != modes.end())
    r.winner = *canon;
  else
    r.winner = first_vote_for(modes.front());
  return r;
}

}  // namespace egovqa
