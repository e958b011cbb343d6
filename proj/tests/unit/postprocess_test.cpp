#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "test_support.hpp"

using namespace egovqa;
using testing_support::Gen;

namespace {

std::optional<std::size_t> idx(std::string_view raw, std::size_t n) {
  auto c = clean_answer(raw, n);
  return c ? std::optional<std::size_t>(c->index) : std::nullopt;
}

std::optional<CleanedAnswer> vote(std::size_t i) { return CleanedAnswer{i, static_cast<char>('A' + i), ExtractionRule::ExactLetter, ""}; }

ParaphraseBank shipped_bank() { return ParaphraseBank::load(testing_support::kDataDir / "paraphrases" / "variants.txt"); }

}  // namespace

TEST(Cleaning, Examples) {
  auto b = clean_answer("B", 4);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->index, 1u);
  EXPECT_EQ(b->rule, ExtractionRule::ExactLetter);
  EXPECT_EQ(idx("The correct answer is (C).", 4), 2u);
  EXPECT_EQ(idx("It could be A, but considering the timeline... Final answer: D", 4), 3u);
  EXPECT_FALSE(idx("F", 5));
  EXPECT_THROW(clean_answer("A", 27), Error);
  EXPECT_THROW(clean_answer("A", 1), Error);
}

TEST(Cleaning, RuleOrder) {
  EXPECT_EQ(clean_answer("(b)", 4)->rule, ExtractionRule::ExactLetter);
  EXPECT_EQ(clean_answer("My answer is D.", 4)->rule, ExtractionRule::FinalAnswerPattern);
  auto line = clean_answer("Looking closely:\nC. the hob is on", 4);
  ASSERT_TRUE(line);
  EXPECT_EQ(line->rule, ExtractionRule::FirstStandaloneLetter);
  EXPECT_EQ(line->index, 2u);
  std::vector<std::string> opts = {"the sink", "the hob", "the fridge"};
  auto text = clean_answer("I was staring at the fridge the whole time", 3, opts);
  ASSERT_TRUE(text);
  EXPECT_EQ(text->rule, ExtractionRule::OptionTextMatch);
  EXPECT_EQ(text->index, 2u);
  EXPECT_FALSE(clean_answer("the sink or the hob", 3, opts));  // ambiguous
  EXPECT_FALSE(clean_answer("My answer is D.", 4, {}, CleaningMode::ExactOnly));
}

TEST(Cleaning, HandLabeledCorpus) {
  std::ifstream in(testing_support::kDataDir / "fixtures" / "cleaning_corpus.jsonl");
  std::string line;
  int total = 0, agree = 0;
  std::vector<std::string> misses;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    auto got = idx(j["raw"].get<std::string>(), j["n_options"].get<std::size_t>());
    std::optional<std::size_t> want;
    if (!j["label"].is_null()) want = j["label"].get<std::size_t>();
    ++total;
    if (got == want) ++agree;
    else misses.push_back(j["raw"].get<std::string>());
  }
  ASSERT_GE(total, 50);
  const double rate = static_cast<double>(agree) / total;
  EXPECT_GE(rate, 0.95) << ::testing::PrintToString(misses);
}

TEST(Cleaning, NeverOutOfRange) {
  Gen g(17);
  const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefz().:*[] \n'answerisfinal";
  for (int i = 0; i < 20000; ++i) {
    auto n = static_cast<std::size_t>(g.range(2, 26));
    auto raw = g.text(40, alphabet);
    if (g.coin(0.2)) raw = "Final answer: " + raw;
    auto a = clean_answer(raw, n);
    auto b = clean_answer(raw, n);
    if (!a) {
      ASSERT_FALSE(b);
      continue;
    }
    ASSERT_LT(a->index, n) << raw;
    ASSERT_EQ(a->letter, static_cast<char>('A' + a->index));
    ASSERT_EQ(a->rule, b->rule);
    ASSERT_EQ(a->index, b->index);
  }
}

TEST(Paraphrase, IdentityAndEntities) {
  auto bank = shipped_bank();
  auto parts = extract_query_parts("Determine the direction of the kettle.");
  auto one = generate_paraphrases("Determine the direction of the kettle.", parts, 1, bank);
  EXPECT_EQ(one, std::vector<std::string>{"Determine the direction of the kettle."});
  auto five = generate_paraphrases("Determine the direction of the kettle.", parts, 5, bank);
  ASSERT_EQ(five.size(), 5u);
  EXPECT_EQ(five[0], "Determine the direction of the kettle.");
  for (const auto& v : five) EXPECT_NE(v.find("the kettle"), std::string::npos) << v;
}

TEST(Paraphrase, DistinctAndPreserving) {
  auto bank = shipped_bank();
  const auto& templates = testing_support::template_bank();
  for (std::size_t i = 0; i < kPrototypes.size(); ++i) {
    auto q = testing_support::synthetic_question(PrototypeId::at(i), templates.find(PrototypeId::at(i))->example);
    auto rq = testing_support::refine(q);
    auto vs = generate_paraphrases(rq.refined_text, rq.extracted, bank.size(), bank);
    std::set<std::string> uniq(vs.begin(), vs.end());
    EXPECT_EQ(uniq.size(), vs.size());
    for (const auto& v : vs) {
      for (const auto& e : rq.extracted.entities) EXPECT_NE(v.find(e), std::string::npos);
      for (const auto& m : rq.extracted.temporal_markers)
        EXPECT_NE(v.find(rq.refined_text.substr(m.pos, m.len)), std::string::npos);
    }
  }
}

TEST(Paraphrase, Errors) {
  auto bank = shipped_bank();
  auto code = [&](std::size_t k, const ParaphraseBank& b) {
    try {
      generate_paraphrases("Where?", {}, k, b);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::ConfigError;
  };
  EXPECT_EQ(code(0, bank), Errc::InsufficientVariants);
  EXPECT_EQ(code(bank.size() + 1, bank), Errc::InsufficientVariants);
  EXPECT_EQ(code(2, ParaphraseBank({"{question}", "{question}"})), Errc::InsufficientVariants);
  EXPECT_THROW(ParaphraseBank({"Q: {question}"}), Error);
  EXPECT_THROW(ParaphraseBank({"{question}", "no placeholder"}), Error);
}

TEST(Vote, Examples) {
  auto r = majority_vote({vote(0), vote(0), vote(1), vote(2), vote(0)}, 0);
  EXPECT_EQ(r.winner->index, 0u);
  EXPECT_FALSE(r.tie_broken);

  // [A,B,A,B,C] with the canonical vote at position 1 (B)
  r = majority_vote({vote(0), vote(1), vote(0), vote(1), vote(2)}, 1);
  EXPECT_EQ(r.winner->index, 1u);
  EXPECT_TRUE(r.tie_broken);

  // canonical vote at position 4 (C), not a mode
  r = majority_vote({vote(0), vote(1), vote(0), vote(1), vote(2)}, 4);
  EXPECT_EQ(r.winner->index, 0u);
  EXPECT_TRUE(r.tie_broken);

  r = majority_vote({std::nullopt, std::nullopt}, 0);
  EXPECT_FALSE(r.winner);
  r = majority_vote({std::nullopt, vote(3), std::nullopt}, 0);
  EXPECT_EQ(r.winner->index, 3u);
}

TEST(Vote, PermutationInvarianceWithUniqueMode) {
  Gen g(29);
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::optional<CleanedAnswer>> votes;
    for (int k = 0; k < g.range(1, 7); ++k) votes.push_back(g.coin(0.15) ? std::nullopt : vote(static_cast<std::size_t>(g.range(0, 3))));
    auto canon = static_cast<std::size_t>(g.range(0, static_cast<std::int64_t>(votes.size()) - 1));
    auto base = majority_vote(votes, canon);
    if (base.tie_broken || !base.winner) continue;
    auto tagged = votes[canon];
    std::shuffle(votes.begin(), votes.end(), g.engine());
    std::size_t new_canon = 0;
    for (std::size_t k = 0; k < votes.size(); ++k)
      if (votes[k].has_value() == tagged.has_value() && (!tagged || votes[k]->index == tagged->index)) new_canon = k;
    ASSERT_EQ(majority_vote(votes, new_canon).winner->index, base.winner->index);
  }
}
