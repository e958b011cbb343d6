#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace egovqa;
using testing_support::question;
using testing_support::refine;

namespace {

using Durations = std::map<std::string, std::int64_t>;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::ConfigError;
}

template <class T>
std::size_t count_steps(const TcotPlan& p) {
  std::size_t n = 0;
  for (const auto& s : p.steps) n += std::holds_alternative<T>(s);
  return n;
}

}  // namespace

TEST(Placeholder, Substitution) {
  EXPECT_EQ(resolve_bbox_placeholder("Where was {BBOX} last placed?", "the blue mug"), "Where was the blue mug last placed?");
  EXPECT_EQ(code_of([] { resolve_bbox_placeholder("Where was it?", "x"); }), Errc::PlaceholderMissing);
  EXPECT_EQ(code_of([] { resolve_bbox_placeholder("{BBOX} or {BBOX}?", "x"); }), Errc::PlaceholderAmbiguous);
}

TEST(Planner, FixtureWithBboxResolvesFirst) {
  auto q = question(R"({"id": "f", "prototype": "fixture_location", "question": "Where is {BBOX}?",
    "choices": [{"text": "left"}, {"text": "right"}],
    "visuals": {"images": ["a.jpg"], "bbox": {"frame": "a.jpg", "x": 1, "y": 2, "w": 3, "h": 4}}})");
  auto plan = plan_tcot(refine(q), PlannerConfig{}, {});
  ASSERT_EQ(plan.steps.size(), 1u);
  ASSERT_TRUE(std::holds_alternative<ResolveBboxStep>(plan.steps[0]));
  EXPECT_TRUE(plan.final_step.needs_bbox_phrase);
  EXPECT_EQ(plan.final_step.payload.images, std::vector<std::string>{"a.jpg"});
  EXPECT_TRUE(payload_respects(plan.final_step.payload, ModalityClass::SingleImage));
  EXPECT_NE(plan.final_step.question_text.find("{BBOX}"), std::string::npos);

  auto direct = plan_direct(refine(q), {});
  EXPECT_TRUE(direct.steps.empty());
  EXPECT_EQ(direct.final_step.question_text.find("{BBOX}"), std::string::npos);
}

TEST(Planner, ShortClipNoCues) {
  auto q = question(R"({"id": "s", "prototype": "recipe_recognition", "question": "Which recipe?",
    "choices": [{"text": "soup"}, {"text": "salad"}], "visuals": {"videos": ["v.mp4"]}})");
  auto plan = plan_tcot(refine(q), PlannerConfig{}, {{"v.mp4", 180000}});
  EXPECT_TRUE(plan.steps.empty());
  EXPECT_EQ(plan.strategy, Strategy::Direct);
  ASSERT_EQ(plan.final_step.payload.clips.size(), 1u);
  EXPECT_EQ(plan.final_step.payload.clips[0].end.millis, 180000);
}

TEST(Planner, LongVideoIsChunked) {
  auto q = question(R"({"id": "o", "prototype": "ingredients_order", "question": "In which order did I add them?",
    "choices": [{"text": "a"}, {"text": "b"}], "visuals": {"videos": ["v.mp4"]}})");
  auto plan = plan_tcot(refine(q), PlannerConfig{}, {{"v.mp4", 25 * 60000}});
  EXPECT_EQ(plan.strategy, Strategy::Chunking);
  EXPECT_EQ(count_steps<NarrateChunkStep>(plan), 3u);
  EXPECT_EQ(plan.steps.size(), 3u);
  EXPECT_TRUE(plan.final_step.needs_chunk_narrations);
  // exactly at the 12-minute threshold nothing is chunked
  EXPECT_EQ(plan_tcot(refine(q), PlannerConfig{}, {{"v.mp4", 720000}}).strategy, Strategy::Direct);
}

TEST(Planner, ImplicitNowIsWindowed) {
  auto q = question(R"({"id": "g", "prototype": "gaze_estimation", "question": "What was I looking at at 00:01:30.000?",
    "choices": [{"text": "a"}, {"text": "b"}], "visuals": {"videos": ["v.mp4"]}})");
  // windowing wins over chunking when there is a single anchor
  auto plan = plan_tcot(refine(q), PlannerConfig{}, {{"v.mp4", 30 * 60000}});
  EXPECT_EQ(plan.strategy, Strategy::Windowing);
  ASSERT_EQ(plan.final_step.payload.clips.size(), 1u);
  EXPECT_EQ(plan.final_step.payload.clips[0].start.millis, 80000);
  EXPECT_EQ(plan.final_step.payload.clips[0].end.millis, 100000);
}

TEST(Planner, MultiClipConcatenates) {
  auto qs = load_manifest(testing_support::kSamplesDir / "manifest.json");
  const auto& q = qs[2];
  ASSERT_EQ(q.id, "prep-003");
  auto plan = plan_tcot(refine(q), PlannerConfig{}, q.visuals.durations_ms);
  EXPECT_EQ(plan.strategy, Strategy::Concatenation);
  ASSERT_TRUE(plan.final_step.payload.timeline);
  EXPECT_EQ(plan.final_step.payload.timeline->total_ms(), 210000);
  EXPECT_NE(plan.final_step.question_text.find("00:02:30.000 - 00:02:45.000"), std::string::npos);
  EXPECT_EQ(plan.final_step.choice_lines[2], "C. 00:02:05.000 - 00:02:15.000");
  ASSERT_EQ(count_steps<NarrateSegmentStep>(plan), 1u);
  const auto& seg = std::get<NarrateSegmentStep>(plan.steps[0]);
  EXPECT_EQ(seg.segment.video_id, "videos/P03_b.mp4");
  EXPECT_EQ(seg.display.start.millis, 150000);
}

TEST(Planner, Errors) {
  auto twice = question(R"({"id": "f", "prototype": "fixture_location", "question": "{BBOX} or {BBOX}?",
    "choices": [{"text": "l"}, {"text": "r"}],
    "visuals": {"images": ["a.jpg"], "bbox": {"frame": "a.jpg", "x": 1, "y": 2, "w": 3, "h": 4}}})");
  EXPECT_EQ(code_of([&] { plan_tcot(refine(twice), PlannerConfig{}, {}); }), Errc::PlaceholderAmbiguous);

  auto q = question(R"({"id": "s", "prototype": "recipe_recognition", "question": "Which recipe?",
    "choices": [{"text": "soup"}, {"text": "salad"}], "visuals": {"videos": ["v.mp4"]}})");
  EXPECT_EQ(code_of([&] { plan_tcot(refine(q), PlannerConfig{}, {}); }), Errc::MissingDuration);

  auto beyond = question(R"({"id": "b", "prototype": "step_recognition",
    "question": "What did I do between 00:04:00.000 and 00:06:00.000?",
    "choices": [{"text": "a"}, {"text": "b"}], "visuals": {"videos": ["v.mp4"]}})");
  EXPECT_EQ(code_of([&] { plan_tcot(refine(beyond), PlannerConfig{}, {{"v.mp4", 300000}}); }),
            Errc::TimestampBeyondClip);
}

TEST(PlannerConfig, Parsing) {
  auto c = PlannerConfig::from_json(nlohmann::json::parse(
      R"({"window_half_width_ms": 5000, "chunk_len_ms": 300000, "fps": "2/1", "chunking_threshold_ms": 600000})"));
  EXPECT_EQ(c.window_half_width_ms, 5000);
  EXPECT_EQ(c.fps, (Fps{2, 1}));
  EXPECT_THROW(PlannerConfig::from_json(nlohmann::json::parse(R"({"chunk_len_ms": 800000})")), Error);
  EXPECT_THROW(PlannerConfig::from_json(nlohmann::json::parse(R"({"implicit_now_prototypes": ["bogus"]})")), Error);
  EXPECT_THROW(PlannerConfig::from_json(nlohmann::json::parse(R"({"fps": "0/1"})")), Error);
}

TEST(Planner, CompletenessOverAllPrototypes) {
  const auto& bank = testing_support::template_bank();
  for (std::size_t i = 0; i < kPrototypes.size(); ++i) {
    auto p = PrototypeId::at(i);
    auto q = testing_support::synthetic_question(p, bank.find(p)->example);
    Durations d = {{"vid0.mp4", 1500000}, {"vid1.mp4", 240000}};
    for (bool pre : {true, false}) {
      auto rq = refine(q, pre);
      auto tcot = plan_tcot(rq, PlannerConfig{}, d);
      auto direct = plan_direct(rq, d);
      EXPECT_TRUE(payload_respects(tcot.final_step.payload, rq.modality)) << p.name();
      EXPECT_TRUE(payload_respects(direct.final_step.payload, rq.modality)) << p.name();
      EXPECT_NO_THROW(validate_plan(tcot));
      EXPECT_EQ(tcot.final_step.choice_lines.size(), q.choices.size());
    }
  }
}
