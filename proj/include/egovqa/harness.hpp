#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "egovqa/backend.hpp"
#include "egovqa/config.hpp"
#include "egovqa/error.hpp"
#include "egovqa/media.hpp"
#include "egovqa/planner.hpp"
#include "egovqa/postprocess.hpp"
#include "egovqa/preprocess.hpp"
#include "egovqa/question.hpp"
#include "egovqa/util.hpp"

namespace egovqa {

inline constexpr std::string_view kEmptyBboxPhrase = "the object in the bounding box";
inline constexpr std::string_view kEmptyNarration = "(no narration)";

struct StageTimings {
  std::int64_t preprocess_ms = 0;
  std::int64_t plan_ms = 0;
  std::int64_t execute_ms = 0;
  std::int64_t postprocess_ms = 0;
};

struct Verdict {
  std::string question_id;
  PrototypeId prototype = PrototypeId::at(0);
  std::optional<std::size_t> predicted_index;  // nullopt: Unextractable or failed
  std::optional<std::size_t> gold_index;
  bool correct = false;
  std::optional<std::string> error;
  std::string strategy;
  std::size_t backend_calls = 0;
  std::vector<std::optional<std::size_t>> votes;
  bool tie_broken = false;
  std::string transcript_ref;
  StageTimings timings;
  std::vector<nlohmann::ordered_json> transcript;  // call/reply records in plan order
};

inline nlohmann::ordered_json verdict_to_json(const Verdict& v, const std::string& config_hash,
                                              const StageToggles& toggles) {
  auto opt = [](const std::optional<std::size_t>& i) { return i ? nlohmann::ordered_json(*i) : nlohmann::ordered_json(); };
  nlohmann::ordered_json votes = nlohmann::ordered_json::array();
  for (const auto& x : v.votes) votes.push_back(opt(x));
  nlohmann::ordered_json j;
  j["type"] = "verdict";
  j["question_id"] = v.question_id;
  j["prototype"] = v.prototype.name();
  j["predicted_index"] = opt(v.predicted_index);
  j["gold_index"] = opt(v.gold_index);
  j["correct"] = v.correct;
  j["error"] = v.error ? nlohmann::ordered_json(*v.error) : nlohmann::ordered_json();
  j["strategy"] = v.strategy;
  j["backend_calls"] = v.backend_calls;
  j["votes"] = votes;
  j["tie_broken"] = v.tie_broken;
  j["transcript_ref"] = v.transcript_ref;
  j["config_hash"] = config_hash;
  j["toggles"] = toggles.to_json();
  j["timings_ms"] = {{"preprocess", v.timings.preprocess_ms},
                     {"plan", v.timings.plan_ms},
                     {"execute", v.timings.execute_ms},
                     {"postprocess", v.timings.postprocess_ms}};
  return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& x) { return x.is_null() ? std::optional<std::size_t>{} : x.get<std::size_t>(); };
  Verdict v;
  try {
    v.question_id = j.at("question_id").get<std::string>();
    v.prototype = PrototypeId::from_name(j.at("prototype").get<std::string>());
    v.predicted_index = opt(j.at("predicted_index"));
    v.gold_index = opt(j.at("gold_index"));
    v.correct = j.at("correct").get<bool>();
    if (!j.at("error").is_null()) v.error = j["error"].get<std::string>();
    v.strategy = j.value("strategy", "");
    v.backend_calls = j.value("backend_calls", std::size_t{0});
    for (const auto& x : j.value("votes", nlohmann::json::array())) v.votes.push_back(opt(x));
    v.tie_broken = j.value("tie_broken", false);
    v.transcript_ref = j.value("transcript_ref", "");
    if (j.contains("timings_ms")) {
      const auto& t = j["timings_ms"];
      v.timings = {t.value("preprocess", std::int64_t{0}), t.value("plan", std::int64_t{0}),
                   t.value("execute", std::int64_t{0}), t.value("postprocess", std::int64_t{0})};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("verdict record: ") + e.what());
  }
  return v;
}

namespace detail {

inline std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

// Single pass over {key} placeholders, so values that themselves contain braces stay literal.
inline std::string fill(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

inline std::string noun_phrase(std::string_view reply) {
  std::string s(util::trim(reply));
  auto nl = s.find('\n');
  if (nl != std::string::npos) s = std::string(util::trim(s.substr(0, nl)));
  while (!s.empty() && (s.back() == '.' || s.back() == '"' || s.back() == '\'')) s.pop_back();
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(0, 1);
  for (std::string_view article : {"The ", "A ", "An "})
    if (s.rfind(article, 0) == 0) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string segment_label(const TimeSegment& s) {
  return format_timestamp(s.start) + " - " + format_timestamp(s.end);
}

// Outcome of one backend call, kept apart so concurrent calls can be logged in plan order.
struct CallRecord {
  std::vector<nlohmann::ordered_json> entries;
  std::string text;
  std::exception_ptr error;
};

}  // namespace detail

/// The per-question pipeline: pre-processing, planning, plan execution,
/// cleaning and voting, each replaceable by its pass-through via StageToggles.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, StageToggles toggles, Backend& backend, std::shared_ptr<MediaProvider> media = nullptr)
      : cfg_(std::move(cfg)), toggles_(toggles), backend_(backend), media_(std::move(media)) {
    modality_ = ModalityMap::load(cfg_.data_dir / "modality_map.json");
    if (!modality_.complete()) throw Error(Errc::ConfigError, "modality map does not cover all prototypes");
    templates_ = TemplateBank::load(cfg_.data_dir / "templates");
    paraphrases_ = std::make_unique<ParaphraseBank>(ParaphraseBank::load(cfg_.data_dir / "paraphrases" / "variants.txt"));
    prompts_ = PromptSet::load(cfg_.data_dir / "prompts");
    if (toggles_.postprocessing && cfg_.ensemble.size > paraphrases_->size())
      throw Error(Errc::ConfigError, "ensemble.size exceeds the paraphrase bank");
    if (!media_) media_ = std::make_shared<SyntheticMediaProvider>(cfg_.media.durations_ms);
  }

  const PipelineConfig& config() const { return cfg_; }
  const StageToggles& toggles() const { return toggles_; }
  std::string config_hash() const { return cfg_.hash(toggles_); }

  Verdict run(const QuestionRecord& q) const {
    Verdict v;
    v.question_id = q.id;
    v.prototype = q.prototype;
    v.gold_index = q.gold_index;
    v.transcript_ref = "verdicts/" + transcript_name(q.id);
    std::vector<nlohmann::ordered_json> log;
    try {
      auto t = std::chrono::steady_clock::now();
      PreprocessContext pctx{&modality_, &templates_, cfg_.delimiter};
      RefinedQuestion rq = preprocess_question(q, pctx, toggles_.preprocessing);
      v.timings.preprocess_ms = detail::elapsed_ms(t);

      t = std::chrono::steady_clock::now();
      auto durations = durations_for(q);
      TcotPlan plan = toggles_.tcot ? plan_tcot(rq, cfg_.planner, durations) : plan_direct(rq, durations);
      v.strategy = strategy_name(plan.strategy);
      v.timings.plan_ms = detail::elapsed_ms(t);

      t = std::chrono::steady_clock::now();
      const std::size_t k = toggles_.postprocessing ? cfg_.ensemble.size : 1;
      auto first = execute_context(plan, log);
      std::vector<std::string> variants{first.question};
      if (toggles_.postprocessing)
        variants = generate_paraphrases(first.question, extract_query_parts(first.question), k, *paraphrases_);

      const auto media = build_media(plan.final_step.payload, cfg_.frames);
      std::vector<std::future<detail::CallRecord>> answers;
      for (std::size_t i = 0; i < k; ++i) {
        std::string context = first.context;
        if (i > 0 && !cfg_.ensemble.share_tcot_context) context = execute_context(plan, log).context;
        ModelCall call{StepKind::Answer,
                       detail::fill(prompts_.answer, {{"context", context},
                                                      {"question", variants[i]},
                                                      {"choices", plan.final_step.choices_block}}),
                       media, cfg_.answer_decode};
        answers.push_back(std::async(std::launch::async, [this, call] { return send(call); }));
      }
      std::vector<detail::CallRecord> replies;
      for (auto& f : answers) replies.push_back(f.get());
      append(log, replies);
      for (const auto& r : replies)
        if (r.error) std::rethrow_exception(r.error);
      v.timings.execute_ms = detail::elapsed_ms(t);

      t = std::chrono::steady_clock::now();
      std::vector<std::string> option_texts;
      for (const auto& o : q.choices.options)
        if (!is_temporal(o)) option_texts.push_back(option_plain_text(o));
      const auto mode = toggles_.postprocessing ? CleaningMode::Full : CleaningMode::ExactOnly;
      std::vector<std::optional<CleanedAnswer>> votes;
      for (const auto& r : replies) votes.push_back(clean_answer(r.text, q.choices.size(), option_texts, mode));
      for (const auto& x : votes) v.votes.push_back(x ? std::optional<std::size_t>(x->index) : std::nullopt);
      auto result = majority_vote(std::move(votes), 0);
      if (result.winner) v.predicted_index = result.winner->index;
      v.tie_broken = result.tie_broken;
      v.timings.postprocess_ms = detail::elapsed_ms(t);
    } catch (const std::exception& e) {
      v.error = e.what();
      v.predicted_index.reset();
    }
    v.correct = v.predicted_index && v.gold_index && *v.predicted_index == *v.gold_index;
    v.backend_calls = static_cast<std::size_t>(std::count_if(
        log.begin(), log.end(), [](const auto& e) { return e["type"] == "call"; }));
    v.transcript = std::move(log);
    return v;
  }

  std::map<std::string, std::int64_t> durations_for(const QuestionRecord& q) const {
    std::map<std::string, std::int64_t> out;
    for (const auto& video : q.visuals.videos) {
      if (auto it = q.visuals.durations_ms.find(video); it != q.visuals.durations_ms.end()) out[video] = it->second;
      else if (auto c = cfg_.media.durations_ms.find(video); c != cfg_.media.durations_ms.end()) out[video] = c->second;
      else if (auto d = media_->duration_ms(video)) out[video] = *d;
    }
    return out;
  }

  static std::string transcript_name(const std::string& id) {
    auto safe = util::safe_filename(id);
    if (safe != id) safe += "-" + util::sha256_hex(id).substr(0, 8);
    return safe + ".jsonl";
  }

 private:
  struct AnswerContext {
    std::string question;
    std::string context;
  };

  detail::CallRecord send(const ModelCall& call) const {
    detail::CallRecord rec;
    rec.entries.push_back({{"type", "call"}, {"call", call_to_json(call)}});
    try {
      auto reply = backend_.send(call);
      rec.text = reply.text;
      rec.entries.push_back({{"type", "reply"}, {"reply", reply_to_json(reply)}});
    } catch (const std::exception& e) {
      rec.error = std::current_exception();
      rec.entries.push_back({{"type", "error"}, {"error", e.what()}});
    }
    return rec;
  }

  static void append(std::vector<nlohmann::ordered_json>& log, const std::vector<detail::CallRecord>& recs) {
    for (const auto& r : recs)
      for (const auto& e : r.entries) {
        auto line = e;
        line["seq"] = log.size();
        log.push_back(std::move(line));
      }
  }

  static std::string or_default(const detail::CallRecord& r, std::string_view fallback) {
    if (r.error) std::rethrow_exception(r.error);
    auto t = std::string(util::trim(r.text));
    return t.empty() ? std::string(fallback) : t;
  }

  // Runs every intermediate step; returns the final question text and the narration context.
  AnswerContext execute_context(const TcotPlan& plan, std::vector<nlohmann::ordered_json>& log) const {
    AnswerContext out{plan.final_step.question_text, {}};
    for (const auto& step : plan.steps) {
      const auto* b = std::get_if<ResolveBboxStep>(&step);
      if (!b) continue;
      ModelCall call{StepKind::ResolveBbox,
                     detail::fill(prompts_.resolve_bbox, {{"x", std::to_string(b->bbox.x)},
                                                          {"y", std::to_string(b->bbox.y)},
                                                          {"w", std::to_string(b->bbox.w)},
                                                          {"h", std::to_string(b->bbox.h)}}),
                     build_media(b->frame, cfg_.frames), cfg_.narrate_decode};
      auto rec = send(call);
      append(log, {rec});
      auto phrase = detail::noun_phrase(or_default(rec, kEmptyBboxPhrase));
      if (phrase.empty()) phrase = kEmptyBboxPhrase;
      out.question = resolve_bbox_placeholder(out.question, phrase, b->placeholder_key);
    }

    std::vector<const PlanStep*> narrations;
    std::vector<std::future<detail::CallRecord>> pending;
    const std::string focus = cfg_.planner.narration_sees_question
                                  ? " Focus on what is relevant to this question: " + out.question
                                  : std::string();
    for (const auto& step : plan.steps) {
      std::optional<TimeSegment> seg;
      StepKind kind = StepKind::NarrateSegment;
      if (const auto* s = std::get_if<NarrateSegmentStep>(&step)) {
        seg = s->segment;
      } else if (const auto* c = std::get_if<NarrateChunkStep>(&step)) {
        seg = c->segment;
        kind = StepKind::NarrateChunk;
      }
      if (!seg) continue;
      VisualPayload payload;
      payload.clips = {*seg};
      ModelCall call{kind,
                     detail::fill(prompts_.narrate, {{"start", format_timestamp(seg->start)},
                                                     {"end", format_timestamp(seg->end)},
                                                     {"focus", focus}}),
                     build_media(payload, cfg_.frames), cfg_.narrate_decode};
      narrations.push_back(&step);
      pending.push_back(std::async(std::launch::async, [this, call] { return send(call); }));
    }
    std::vector<detail::CallRecord> recs;
    for (auto& f : pending) recs.push_back(f.get());
    append(log, recs);

    std::string segment_lines;
    std::vector<std::pair<TimeSegment, std::string>> chunks;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto text = or_default(recs[i], kEmptyNarration);
      if (const auto* s = std::get_if<NarrateSegmentStep>(narrations[i]))
        segment_lines += "[" + detail::segment_label(s->display) + "] " + util::replace_all(text, "\n", " ") + "\n";
      else
        chunks.emplace_back(std::get<NarrateChunkStep>(*narrations[i]).segment, text);
    }
    if (!segment_lines.empty()) out.context += "Narration of the referenced segments:\n" + segment_lines + "---\n";
    if (!chunks.empty()) out.context += "Narration of the video in order:\n" + aggregate_narrations(chunks);
    return out;
  }

  PipelineConfig cfg_;
  StageToggles toggles_;
  Backend& backend_;
  std::shared_ptr<MediaProvider> media_;
  ModalityMap modality_;
  TemplateBank templates_;
  std::unique_ptr<ParaphraseBank> paraphrases_;
  PromptSet prompts_;
};

inline Verdict run_question(const QuestionRecord& q, const StageToggles& toggles, const PipelineConfig& cfg,
                            Backend& backend) {
  return Pipeline(cfg, toggles, backend).run(q);
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct AccuracyCell {
  std::size_t questions = 0;  // labeled questions only
  std::size_t correct = 0;
  std::optional<double> accuracy;  // percent; nullopt when there is nothing to average
};

struct RunReport {
  std::array<AccuracyCell, kPrototypes.size()> prototypes{};
  std::array<AccuracyCell, kCategories.size()> categories{};
  AccuracyCell overall;
  Averaging averaging = Averaging::Weighted;
  StageToggles toggles;
  std::string config_hash;
  std::size_t total = 0;
  std::size_t unextractable = 0;
  std::size_t errors = 0;
  std::vector<Verdict> verdicts;  // sorted by question id
};

/// Prototype cells are plain accuracies. Weighted: categories and the overall
/// average pool questions. Macro: categories average their prototypes and the
/// overall figure averages the categories, skipping empty cells.
inline RunReport score(std::vector<Verdict> verdicts, Averaging averaging = Averaging::Weighted,
                       StageToggles toggles = {}, std::string config_hash = {}) {
  RunReport r;
  r.averaging = averaging;
  r.toggles = toggles;
  r.config_hash = std::move(config_hash);
  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.question_id < b.question_id; });
  auto cat_index = [](Category c) { return static_cast<std::size_t>(c); };
  for (const auto& v : verdicts) {
    ++r.total;
    if (v.error) ++r.errors;
    else if (!v.predicted_index) ++r.unextractable;
    if (!v.gold_index) continue;
    for (auto* cell : {&r.prototypes[v.prototype.index()], &r.categories[cat_index(v.prototype.category())], &r.overall}) {
      ++cell->questions;
      if (v.correct) ++cell->correct;
    }
  }
  auto pct = [](AccuracyCell& c) {
    if (c.questions) c.accuracy = 100.0 * static_cast<double>(c.correct) / static_cast<double>(c.questions);
  };
  for (auto& c : r.prototypes) pct(c);
  if (averaging == Averaging::Weighted) {
    for (auto& c : r.categories) pct(c);
    pct(r.overall);
  } else {
    for (std::size_t k = 0; k < r.categories.size(); ++k) {
      double sum = 0;
      int n = 0;
      for (std::size_t p = 0; p < kPrototypes.size(); ++p)
        if (cat_index(kPrototypes[p].category) == k && r.prototypes[p].accuracy) {
          sum += *r.prototypes[p].accuracy;
          ++n;
        }
      if (n) r.categories[k].accuracy = sum / n;
    }
    double sum = 0;
    int n = 0;
    for (const auto& c : r.categories)
      if (c.accuracy) {
        sum += *c.accuracy;
        ++n;
      }
    if (n) r.overall.accuracy = sum / n;
  }
  r.verdicts = std::move(verdicts);
  return r;
}

inline std::string_view averaging_name(Averaging a) { return a == Averaging::Weighted ? "weighted" : "macro"; }

inline nlohmann::ordered_json cell_to_json(const AccuracyCell& c) {
  return {{"questions", c.questions},
          {"correct", c.correct},
          {"accuracy", c.accuracy ? nlohmann::ordered_json(*c.accuracy) : nlohmann::ordered_json()}};
}

/// Deterministic report: no timings, verdicts sorted by id.
inline std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["averaging"] = averaging_name(r.averaging);
  j["config_hash"] = r.config_hash;
  j["toggles"] = r.toggles.to_json();
  j["counts"] = {{"questions", r.total},
                 {"labeled", r.overall.questions},
                 {"correct", r.overall.correct},
                 {"unextractable", r.unextractable},
                 {"errors", r.errors}};
  j["overall"] = cell_to_json(r.overall);
  auto cats = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < kCategories.size(); ++k) {
    auto c = nlohmann::ordered_json{{"category", category_name(kCategories[k])}};
    c.update(cell_to_json(r.categories[k]));
    cats.push_back(c);
  }
  j["categories"] = cats;
  auto protos = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < kPrototypes.size(); ++p) {
    auto c = nlohmann::ordered_json{{"prototype", kPrototypes[p].name},
                                    {"category", category_name(kPrototypes[p].category)}};
    c.update(cell_to_json(r.prototypes[p]));
    protos.push_back(c);
  }
  j["prototypes"] = protos;
  auto qs = nlohmann::ordered_json::array();
  for (const auto& v : r.verdicts) {
    auto opt = [](const std::optional<std::size_t>& i) { return i ? nlohmann::ordered_json(*i) : nlohmann::ordered_json(); };
    qs.push_back({{"id", v.question_id},
                  {"prototype", v.prototype.name()},
                  {"predicted", opt(v.predicted_index)},
                  {"gold", opt(v.gold_index)},
                  {"correct", v.correct},
                  {"error", v.error ? nlohmann::ordered_json(*v.error) : nlohmann::ordered_json()}});
  }
  j["questions"] = qs;
  return j.dump(2) + "\n";
}

inline std::string format_percent(const std::optional<double>& a) {
  if (!a) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *a);
  return buf;
}

/// Two tables: categories with the overall average, then the 30 prototypes.
inline std::string report_csv(const RunReport& r) {
  const std::string label = r.toggles.label();
  std::string out = "Method";
  for (auto c : kCategories) out += "," + std::string(category_name(c));
  out += ",Avg\n" + label;
  for (const auto& c : r.categories) out += "," + format_percent(c.accuracy);
  out += "," + format_percent(r.overall.accuracy) + "\n\nMethod";
  for (const auto& p : kPrototypes) out += "," + std::string(p.display);
  out += "\n" + label;
  for (const auto& c : r.prototypes) out += "," + format_percent(c.accuracy);
  return out + "\n";
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

struct BenchmarkOptions {
  std::filesystem::path out_dir = "out";
  std::size_t parallelism = 1;
  bool resume = false;
};

/// Last record of a transcript file when it is a verdict made under `config_hash`.
inline std::optional<Verdict> read_finished_verdict(const std::filesystem::path& path, const std::string& config_hash) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto lines = util::split_lines(util::read_file(path));
  while (!lines.empty() && util::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) return std::nullopt;
  auto j = nlohmann::json::parse(lines.back(), nullptr, false);
  if (j.is_discarded() || j.value("type", "") != "verdict" || j.value("config_hash", "") != config_hash)
    return std::nullopt;
  return verdict_from_json(j);
}

inline void write_transcript(const std::filesystem::path& path, const Verdict& v, const std::string& config_hash,
                             const StageToggles& toggles) {
  std::string body;
  for (const auto& e : v.transcript) body += e.dump() + "\n";
  body += verdict_to_json(v, config_hash, toggles).dump() + "\n";
  util::write_file_atomic(path, body);
}

/// Runs every question through `pipeline` with a bounded worker pool, writing
/// one transcript per question plus report.json and report.csv into out_dir.
inline RunReport run_benchmark(const std::vector<QuestionRecord>& questions, const Pipeline& pipeline,
                               const BenchmarkOptions& opts) {
  const auto verdict_dir = opts.out_dir / "verdicts";
  std::filesystem::create_directories(verdict_dir);
  const auto hash = pipeline.config_hash();

  std::vector<Verdict> verdicts(questions.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr fatal;
  auto worker = [&] {
    for (std::size_t i = next++; i < questions.size(); i = next++) {
      try {
        const auto path = verdict_dir / Pipeline::transcript_name(questions[i].id);
        if (opts.resume)
          if (auto done = read_finished_verdict(path, hash)) {
            verdicts[i] = std::move(*done);
            continue;
          }
        verdicts[i] = pipeline.run(questions[i]);
        write_transcript(path, verdicts[i], hash, pipeline.toggles());
        verdicts[i].transcript.clear();
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const auto n = std::clamp<std::size_t>(opts.parallelism, 1, std::max<std::size_t>(1, questions.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  auto report = score(std::move(verdicts), pipeline.config().averaging, pipeline.toggles(), hash);
  util::write_file_atomic(opts.out_dir / "report.json", report_json(report));
  util::write_file_atomic(opts.out_dir / "report.csv", report_csv(report));
  return report;
}

inline RunReport run_benchmark(const std::filesystem::path& manifest_path, const Pipeline& pipeline,
                               const BenchmarkOptions& opts) {
  return run_benchmark(load_manifest(manifest_path), pipeline, opts);
}

/// Verdict records of a finished run, for re-scoring without re-running.
struct VerdictSet {
  std::vector<Verdict> verdicts;
  std::string config_hash;
  StageToggles toggles;
};

inline VerdictSet read_verdicts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::ConfigError, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  VerdictSet out;
  std::set<std::string> hashes;
  for (const auto& f : files) {
    auto lines = util::split_lines(util::read_file(f));
    while (!lines.empty() && util::trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) continue;
    auto j = nlohmann::json::parse(lines.back(), nullptr, false);
    if (j.is_discarded() || j.value("type", "") != "verdict") continue;
    out.verdicts.push_back(verdict_from_json(j));
    hashes.insert(j.value("config_hash", ""));
    if (j.contains("toggles")) out.toggles = StageToggles::from_json(j["toggles"]);
  }
  out.config_hash = hashes.size() == 1 ? *hashes.begin() : (hashes.empty() ? "" : "mixed");
  return out;
}

}  // namespace egovqa
