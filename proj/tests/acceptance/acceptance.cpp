// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "egovqa/egovqa.hpp"

using namespace egovqa;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = EGOVQA_DATA_DIR;
const fs::path kSamplesDir = EGOVQA_SAMPLES_DIR;
const fs::path kTestDataDir = EGOVQA_TEST_DATA_DIR;

constexpr int kTimestampCases = 10000;
constexpr double kTimestampBudgetS = 1.0;
constexpr int kTimelines = 1000;
constexpr int kChunkTriples = 1000;
constexpr int kChoiceSets = 1000;
constexpr double kCleaningAgreement = 0.95;
constexpr int kCleaningCorpusMin = 50;
constexpr int kCleaningRandomStrings = 20000;
constexpr int kMaxVotes = 5;
constexpr int kMaxLetters = 4;
constexpr double kSuiteBudgetS = 10.0;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : e_(seed) {}
  std::int64_t range(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(e_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(e_); }
  std::string text(std::size_t max_len, std::string_view alphabet) {
    std::string s(static_cast<std::size_t>(range(0, static_cast<std::int64_t>(max_len))), ' ');
    for (auto& c : s) c = alphabet[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
    return s;
  }

 private:
  std::mt19937_64 e_;
};

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string two(std::int64_t v) { return (v < 10 ? "0" : "") + std::to_string(v); }

Outcome timestamps() {
  Outcome o;
  Rng g(101);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::int64_t> ms;
  for (int i = 0; i < kTimestampCases && o.pass; ++i) {
    auto h = g.range(0, 99), m = g.range(0, 59), s = g.range(0, 59), f = g.range(0, 999);
    std::string frac = std::to_string(f);
    frac.insert(0, 3 - frac.size(), '0');
    auto text = two(h) + ":" + two(m) + ":" + two(s) + "." + frac;
    auto expect = ((h * 60 + m) * 60 + s) * 1000 + f;
    auto t = parse_timestamp(text);
    if (t.millis != expect) o.fail("parse " + text);
    if (format_timestamp(t) != text) o.fail("format " + text);
    ms.push_back(expect);
  }
  for (std::size_t i = 1; i < ms.size() && o.pass; ++i) {
    auto a = format_timestamp(Timestamp{ms[i - 1]}), b = format_timestamp(Timestamp{ms[i]});
    if ((a < b) != (ms[i - 1] < ms[i]) || (a == b) != (ms[i - 1] == ms[i])) o.fail("order " + a + " vs " + b);
  }
  auto elapsed = seconds_since(t0);
  if (elapsed >= kTimestampBudgetS) o.fail("took " + std::to_string(elapsed) + " s");
  if (o.pass) o.detail = std::to_string(kTimestampCases) + " cases in " + std::to_string(elapsed) + " s";
  return o;
}

Outcome renormalization() {
  Outcome o;
  Rng g(202);
  std::size_t lookups = 0;
  for (int i = 0; i < kTimelines && o.pass; ++i) {
    std::vector<UnifiedTimeline::Part> parts;
    auto n = g.range(1, 8);
    for (std::int64_t k = 0; k < n; ++k) parts.push_back({"clip" + std::to_string(k), g.range(1, 7200000)});
    auto tl = build_unified_timeline(parts);
    for (std::size_t a = 0; a < parts.size() && o.pass; ++a) {
      for (int trial = 0; trial < 10; ++trial) {
        auto t = trial == 0 ? 0 : trial == 1 ? parts[a].duration_ms : g.range(0, parts[a].duration_ms);
        std::int64_t oracle = t;
        for (std::size_t b = 0; b < a; ++b) oracle += parts[b].duration_ms;
        auto u = tl.renormalize(parts[a].video_id, Timestamp{t});
        ++lookups;
        if (u.millis != oracle) {
          o.fail("timeline " + std::to_string(i) + " clip " + std::to_string(a));
          break;
        }
        // the end of one clip is the start of the next; that instant reads back as the later clip
        bool shared_boundary = t == parts[a].duration_ms && a + 1 < parts.size();
        auto [video, local] = tl.locate(u);
        auto want_video = shared_boundary ? parts[a + 1].video_id : parts[a].video_id;
        auto want_local = shared_boundary ? 0 : t;
        if (video != want_video || local.millis != want_local) {
          o.fail("reverse lookup, timeline " + std::to_string(i));
          break;
        }
      }
    }
  }
  if (o.pass) o.detail = std::to_string(kTimelines) + " timelines, " + std::to_string(lookups) + " lookups";
  return o;
}

Outcome chunking() {
  Outcome o;
  Rng g(303);
  int valid = 0, rejected = 0;
  while (valid < kChunkTriples && o.pass) {
    Fps fps{g.range(1, 30), g.range(1, 2)};
    auto len = g.range(1000, 900000);
    auto dur = g.range(1, 14400000);
    if (fps.frames_in(len) >= kMaxFramesPerSample) {
      bool threw = false;
      try {
        (void)plan_chunks(dur, len, fps);
      } catch (const Error&) {
        threw = true;
      }
      if (!threw) o.fail("chunk length over the frame cap accepted");
      ++rejected;
      continue;
    }
    ++valid;
    auto p = plan_chunks(dur, len, fps);
    std::int64_t cursor = 0;
    for (const auto& c : p.chunks) {
      if (c.start.millis != cursor || c.length_ms() <= 0 || c.length_ms() > len) o.fail("not a partition");
      if (fps.frames_in(c.length_ms()) > kMaxFramesPerSample) o.fail("chunk over frame cap");
      auto plan = compute_frame_plan(c, fps);
      if (plan.frame_count < 4 || plan.frame_count > kMaxFramesPerSample) o.fail("frame plan out of bounds");
      cursor = c.end.millis;
    }
    if (cursor != dur) o.fail("coverage ends at " + std::to_string(cursor) + " of " + std::to_string(dur));
  }
  auto seg = [](std::int64_t s) { return TimeSegment("v", Timestamp{0}, Timestamp{s * 1000}); };
  if (compute_frame_plan(seg(2), Fps{1, 1}).frame_count != 4) o.fail("2 s clip should plan 4 frames");
  if (compute_frame_plan(seg(900), Fps{1, 1}).frame_count != 768) o.fail("900 s clip should plan 768 frames");
  if (o.pass)
    o.detail = std::to_string(valid) + " triples, " + std::to_string(rejected) + " over-cap rejections, 2s->4, 900s->768";
  return o;
}

Outcome choices() {
  Outcome o;
  Rng g(404);
  for (int i = 0; i < kChoiceSets && o.pass; ++i) {
    ChoiceSet c;
    std::vector<std::string> plain;
    auto n = g.range(2, 26);
    for (std::int64_t k = 0; k < n; ++k) {
      std::string words;
      auto count = g.range(1, 5);
      for (std::int64_t w = 0; w < count; ++w) {
        if (w) words += ' ';
        words += g.text(7, "abcdefghijklmnopqrstuvwxyz0123456789-'") + "x";
      }
      plain.push_back(words);
      switch (g.range(0, 3)) {
        case 0: c.options.emplace_back(std::to_string(k + 1) + ". " + words); break;
        case 1: c.options.emplace_back(std::to_string(k + 1) + ") " + words); break;
        case 2: c.options.emplace_back("(" + std::string(1, static_cast<char>('a' + k)) + ") " + words); break;
        default: c.options.emplace_back(words);
      }
    }
    auto s = standardize_choices(c);
    if (s.lines.size() != plain.size()) {
      o.fail("line count, set " + std::to_string(i));
      break;
    }
    for (std::size_t k = 0; k < plain.size(); ++k) {
      if (s.letters[k] != static_cast<char>('A' + k) || s.index_of(s.letters[k]) != k) o.fail("letter mapping");
      if (strip_enumerator(s.lines[k]) != plain[k]) o.fail("content changed: '" + s.lines[k] + "' vs '" + plain[k] + "'");
    }
  }

  std::ifstream in(kDataDir / "fixtures" / "temporal_options.jsonl");
  std::string line;
  int fixtures = 0;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    std::vector<TimeSegment> segs;
    for (const auto& s : j["segments"])
      segs.emplace_back(s[0].get<std::string>(), Timestamp{s[1].get<std::int64_t>()}, Timestamp{s[2].get<std::int64_t>()});
    auto got = format_temporal_option(j["letter"].get<std::string>()[0], segs, j["videos"].get<std::vector<std::string>>());
    if (got != j["expected"].get<std::string>()) o.fail("temporal format: got '" + got + "'");
    ++fixtures;
  }
  if (fixtures == 0) o.fail("no temporal fixtures found");
  if (o.pass) o.detail = std::to_string(kChoiceSets) + " sets, " + std::to_string(fixtures) + " temporal fixtures byte-exact";
  return o;
}

Outcome cleaning() {
  Outcome o;
  std::ifstream in(kDataDir / "fixtures" / "cleaning_corpus.jsonl");
  std::string line;
  int total = 0, agree = 0;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    auto c = clean_answer(j["raw"].get<std::string>(), j["n_options"].get<std::size_t>());
    std::optional<std::size_t> got, want;
    if (c) got = c->index;
    if (!j["label"].is_null()) want = j["label"].get<std::size_t>();
    ++total;
    agree += got == want;
  }
  double rate = total ? static_cast<double>(agree) / total : 0.0;
  if (total < kCleaningCorpusMin) o.fail("corpus has only " + std::to_string(total) + " entries");
  if (rate < kCleaningAgreement) o.fail("agreement " + std::to_string(rate));

  Rng g(505);
  const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcz().:*[] \n'answerisfinal";
  for (int i = 0; i < kCleaningRandomStrings && o.pass; ++i) {
    auto n = static_cast<std::size_t>(g.range(2, 26));
    auto raw = g.text(40, alphabet);
    if (g.coin(0.2)) raw = "Final answer: " + raw;
    std::vector<std::string> opts;
    if (g.coin(0.3))
      for (std::size_t k = 0; k < n; ++k) opts.push_back(g.text(8, "abcdefz "));
    auto c = clean_answer(raw, n, opts);
    if (c && (c->index >= n || c->letter != static_cast<char>('A' + c->index))) o.fail("out of range on '" + raw + "'");
  }
  if (o.pass)
    o.detail = std::to_string(agree) + "/" + std::to_string(total) + " corpus agreement (" + std::to_string(rate * 100) +
               "%), " + std::to_string(kCleaningRandomStrings) + " random strings in range";
  return o;
}

Outcome voting() {
  Outcome o;
  // each vote is a letter 0..kMaxLetters-1 or kMaxLetters for Unextractable
  std::size_t sequences = 0, canonical_tie = 0, lowest_tie = 0;
  std::function<void(std::vector<int>&)> walk = [&](std::vector<int>& seq) {
    for (std::size_t canon = 0; canon < std::max<std::size_t>(seq.size(), 1) && o.pass; ++canon) {
      std::vector<std::optional<CleanedAnswer>> votes;
      for (int v : seq)
        if (v == kMaxLetters) votes.emplace_back(std::nullopt);
        else votes.push_back(CleanedAnswer{static_cast<std::size_t>(v), static_cast<char>('A' + v), ExtractionRule::ExactLetter, ""});
      int tally[kMaxLetters] = {};
      for (int v : seq)
        if (v < kMaxLetters) ++tally[v];
      int best = 0;
      for (int l = 0; l < kMaxLetters; ++l) best = std::max(best, tally[l]);
      int tied = 0, lowest = -1;
      for (int l = 0; l < kMaxLetters; ++l)
        if (best > 0 && tally[l] == best) {
          ++tied;
          if (lowest < 0) lowest = l;
        }
      std::optional<int> want;
      if (best > 0) {
        int c = canon < seq.size() ? seq[canon] : kMaxLetters;
        bool canon_in_tie = c < kMaxLetters && tally[c] == best;
        want = canon_in_tie ? c : lowest;
        if (tied > 1) ++(canon_in_tie ? canonical_tie : lowest_tie);
      }
      auto r = majority_vote(votes, canon);
      std::optional<int> got;
      if (r.winner) got = static_cast<int>(r.winner->index);
      if (got != want || r.tie_broken != (tied > 1)) {
        std::string s;
        for (int v : seq) s += v == kMaxLetters ? '-' : static_cast<char>('A' + v);
        o.fail("votes '" + s + "' canonical " + std::to_string(canon));
      }
      ++sequences;
    }
    if (seq.size() == static_cast<std::size_t>(kMaxVotes)) return;
    for (int v = 0; v <= kMaxLetters && o.pass; ++v) {
      seq.push_back(v);
      walk(seq);
      seq.pop_back();
    }
  };
  std::vector<int> seq;
  walk(seq);
  if (canonical_tie == 0 || lowest_tie == 0) o.fail("a tie-break branch was never exercised");
  if (o.pass)
    o.detail = std::to_string(sequences) + " ordered vote lists; ties to canonical " + std::to_string(canonical_tie) +
               ", to lowest " + std::to_string(lowest_tie);
  return o;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("egovqa_accept_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Outcome golden_run() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = PipelineConfig::load(kSamplesDir / "config.json");
  auto questions = load_manifest(kSamplesDir / "manifest.json");
  auto golden = util::read_file(kTestDataDir / "golden" / "report.json");
  int runs = 0;
  for (std::size_t par : {1, 4, 1, 4}) {
    auto dir = scratch("golden_" + std::to_string(runs));
    auto mock = MockBackend::load(kSamplesDir / "mock_fixtures.json");
    Pipeline p(cfg, {}, *mock);
    run_benchmark(questions, p, {dir, par, false});
    if (util::read_file(dir / "report.json") != golden) o.fail("report differs at parallelism " + std::to_string(par));
    ++runs;
  }

  auto dir = scratch("toggles_off");
  auto mock = MockBackend::load(kSamplesDir / "mock_fixtures.json");
  Pipeline off(cfg, {false, false, false}, *mock);
  run_benchmark(questions, off, {dir, 2, false});
  for (const auto& q : questions) {
    std::ifstream in(dir / "verdicts" / Pipeline::transcript_name(q.id));
    std::string line;
    int calls = 0;
    while (std::getline(in, line))
      if (!util::trim(line).empty() && nlohmann::json::parse(line)["type"] == "call") ++calls;
    if (calls != 1) o.fail(q.id + " made " + std::to_string(calls) + " calls with every stage off");
  }
  if (mock->call_count() != questions.size()) o.fail("mock saw " + std::to_string(mock->call_count()) + " calls");
  fs::remove_all(dir.parent_path());
  auto elapsed = seconds_since(t0);
  if (o.pass)
    o.detail = std::to_string(runs) + " runs byte-identical to golden, 1 call/question with stages off, " +
               std::to_string(elapsed) + " s";
  return o;
}

class StubEndpoint {
 public:
  StubEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
      // every third request is throttled once to drive the retry path
      if (hits_.fetch_add(1) % 3 == 0) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Final answer: B"}}],"usage":{"prompt_tokens":9,"completion_tokens":3}})",
                      "application/json");
    });
    server_.Get("/v1/models", [](const httplib::Request&, httplib::Response& res) { res.set_content(R"({"data":[]})", "application/json"); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  std::atomic<std::size_t> hits_{0};
  int port_ = 0;
  std::thread thread_;
};

std::optional<QuestionRecord> single_image_question(const std::vector<QuestionRecord>& qs, const ModalityMap& map) {
  for (const auto& q : qs)
    if (classify_modality(q, map) == ModalityClass::SingleImage) return q;
  return std::nullopt;
}

Outcome live_smoke() {
  Outcome o;
  auto cfg = PipelineConfig::load(kSamplesDir / "config.json");
  auto map = ModalityMap::load(cfg.data_dir / "modality_map.json");
  auto q = single_image_question(load_manifest(kSamplesDir / "manifest.json"), map);
  if (!q) {
    o.fail("sample manifest has no SingleImage question");
    return o;
  }
  auto media = std::make_shared<SyntheticMediaProvider>(cfg.media.durations_ms);

  StubEndpoint stub;
  auto hc = HttpBackendConfig::from_json(cfg.backend);
  hc.endpoint = stub.endpoint();
  hc.api_key = "local";
  hc.max_in_flight = 1;
  hc.requests_per_second = 50.0;
  std::vector<std::int64_t> slept;
  std::mutex mu;
  HttpBackend http(hc, media, [&](std::int64_t ms) {
    std::lock_guard lock(mu);
    slept.push_back(ms);
  });
  if (!http.available()) o.fail("stub endpoint not reachable");
  Pipeline p(cfg, {}, http, media);
  auto v = p.run(*q);
  if (v.error) o.fail("stub run error: " + *v.error);
  if (!v.predicted_index || *v.predicted_index != 1) o.fail("stub run did not clean to B");
  if (stub.hits() <= v.backend_calls || slept.empty()) o.fail("retry path not exercised");
  if (http.gate().peak_in_flight() > 1) o.fail("rate gate exceeded one request in flight");
  std::string detail = "stub: " + std::to_string(v.backend_calls) + " calls, " +
                       std::to_string(stub.hits() - v.backend_calls) + " retried 429s, cleaned to B";

  const char* key = std::getenv("EGOVQA_API_KEY");
  const char* endpoint = std::getenv("EGOVQA_ENDPOINT");
  if (key && *key && endpoint && *endpoint) {
    auto live = HttpBackendConfig::from_json(cfg.backend);
    live.endpoint = endpoint;
    live.api_key = key;
    if (const char* model = std::getenv("EGOVQA_MODEL")) live.model = model;
    HttpBackend real(live, media);
    Pipeline lp(cfg, {true, false, false}, real, media);
    auto lv = lp.run(*q);
    if (lv.error) o.fail("live endpoint: " + *lv.error);
    else if (!lv.predicted_index) o.fail("live endpoint reply could not be cleaned");
    detail += "; live endpoint answered " + std::string(1, static_cast<char>('A' + lv.predicted_index.value_or(25)));
  } else {
    detail += "; live endpoint skipped (EGOVQA_API_KEY/EGOVQA_ENDPOINT unset)";
  }
  if (o.pass) o.detail = detail;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"timestamp algebra", timestamps},
      {"renormalization oracle", renormalization},
      {"chunk planning and frame bounds", chunking},
      {"choice standardization", choices},
      {"answer cleaning", cleaning},
      {"majority voting", voting},
      {"end-to-end golden run", golden_run},
      {"live-backend smoke", live_smoke},
  };
  auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  auto elapsed = seconds_since(t0);
  if (elapsed >= kSuiteBudgetS) {
    std::cout << "FAIL suite runtime: " << elapsed << " s (limit " << kSuiteBudgetS << " s)" << std::endl;
    ++failed;
  }
  return failed ? 1 : 0;
}
