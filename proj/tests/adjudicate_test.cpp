#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "parena/adjudicate.hpp"
#include "test_util.hpp"

namespace parena {
namespace {

using testing::id;

const char* const kCeoResponse = "The CEO of OpenAI is either Elon Musk or Mark Zuckerberg";

TargetAnswerMap ceo_targets() {
  return TargetAnswerMap({{id("A"), "Elon Musk"},
                          {id("B"), "Tim Cook"},
                          {id("C"), "Jensen Huang"},
                          {id("D"), "Mark Zuckerberg"}});
}

TEST(JudgeSubstring, CeoExample) {
  const auto targets = ceo_targets();
  const auto subset = make_ids({"A", "B", "C", "D"});
  EXPECT_EQ(judge_substring(kCeoResponse, targets, subset), make_ids({"A", "D"}));
}

TEST(JudgeSubstring, CeoExamplePerturbed) {
  const auto targets = ceo_targets();
  const auto subset = make_ids({"D", "C", "B", "A"});
  for (const char* response :
       {"THE CEO OF OPENAI IS EITHER ELON MUSK OR MARK ZUCKERBERG",
        "the ceo of openai is either elon musk or mark zuckerberg",
        "  The CEO of OpenAI is either   Elon\tMusk or Mark\n\nZuckerberg  ",
        "The CEO of OpenAI is either eLoN    mUsK or MARK zuckerberg."}) {
    EXPECT_EQ(judge_substring(response, targets, subset), make_ids({"A", "D"})) << response;
  }
}

TEST(JudgeSubstring, SubstringNotExact) {
  const TargetAnswerMap targets({{id("A"), "Sam Altman"}, {id("B"), "Satya Nadella"}});
  EXPECT_EQ(judge_substring("Sam Altman is the CEO", targets, make_ids({"A", "B"})),
            make_ids({"A"}));
}

TEST(JudgeSubstring, NoMatch) {
  EXPECT_TRUE(judge_substring("I do not know.", ceo_targets(), make_ids({"A", "B", "C", "D"}))
                  .empty());
}

TEST(JudgeSubstring, NeedleEdgePunctuationStripped) {
  const TargetAnswerMap targets({{id("A"), "\"Paris.\""}, {id("B"), "(Rome)"}});
  EXPECT_EQ(judge_substring("It is Paris, of course", targets, make_ids({"A", "B"})),
            make_ids({"A"}));
}

TEST(JudgeSubstring, OnlySubsetMembersJudged) {
  EXPECT_EQ(judge_substring(kCeoResponse, ceo_targets(), make_ids({"B", "D"})), make_ids({"D"}));
}

TEST(JudgeSubstring, SubsetMemberWithoutTargetIsAnError) {
  try {
    judge_substring(kCeoResponse, ceo_targets(), make_ids({"A", "E"}));
    FAIL() << "expected missing-target";
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingTarget);
  }
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_text("  Hello\t\n  World  "), "hello world");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_needle(" ...Elon  Musk!! "), "elon musk");
  EXPECT_EQ(normalize_needle("?!"), "");
  // Non-ASCII bytes are left alone.
  EXPECT_EQ(normalize_text("\xC3\x89LAN"), "\xC3\x89lan");
}

// Random words over a small alphabet so that targets hit often.
std::string random_text(std::mt19937_64& gen, int max_words) {
  static const std::vector<std::string> words = {"elon", "Musk", "tim",  "COOK", "  ",
                                                 "the",  "ceo",  "is",   "\t",   "Mark",
                                                 ".",    "or",   "zuck", "!",    "\n"};
  std::uniform_int_distribution<int> n(0, max_words);
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1);
  std::string out;
  for (int i = n(gen); i > 0; --i) {
    out += words[w(gen)];
    if (gen() % 2 == 0) out += ' ';
  }
  return out;
}

TargetAnswerMap property_targets() {
  return TargetAnswerMap({{id("A"), "elon musk"},
                          {id("B"), "Tim Cook"},
                          {id("C"), "the ceo"},
                          {id("D"), "Mark"},
                          {id("E"), "or"}});
}

TEST(JudgeSubstringProperty, AppendingNeverRemovesWinners) {
  std::mt19937_64 gen(101);
  const auto targets = property_targets();
  const auto subset = make_ids({"A", "B", "C", "D", "E"});
  for (int i = 0; i < 2000; ++i) {
    const std::string base = random_text(gen, 10);
    const std::string extended = base + random_text(gen, 6);
    const auto before = judge_substring(base, targets, subset);
    const auto after = judge_substring(extended, targets, subset);
    EXPECT_TRUE(std::includes(after.begin(), after.end(), before.begin(), before.end()))
        << "'" << base << "' -> '" << extended << "'";
  }
}

TEST(JudgeSubstringProperty, ResultIsWithinSubset) {
  std::mt19937_64 gen(202);
  const auto targets = property_targets();
  const auto all = make_ids({"A", "B", "C", "D", "E"});
  for (int i = 0; i < 2000; ++i) {
    AttackerList subset;
    for (const auto& a : all) {
      if (gen() % 2 == 0) subset.push_back(a);
    }
    const auto winners = judge_substring(random_text(gen, 12), targets, subset);
    for (const auto& w : winners) {
      EXPECT_NE(std::find(subset.begin(), subset.end(), w), subset.end());
    }
  }
}

TEST(JudgeSubstringProperty, NormalizationIdempotent) {
  std::mt19937_64 gen(303);
  const auto targets = property_targets();
  const auto subset = make_ids({"A", "B", "C", "D", "E"});
  for (int i = 0; i < 2000; ++i) {
    const std::string raw = random_text(gen, 12);
    const std::string norm = normalize_text(raw);
    EXPECT_EQ(normalize_text(norm), norm);
    EXPECT_EQ(judge_substring(norm, targets, subset), judge_substring(raw, targets, subset));
  }
}

TEST(TargetAnswerMap, Validation) {
  TargetAnswerMap m;
  m.add(id("A"), "Elon Musk");
  auto expect_code = [&](const AttackerId& who, const std::string& answer, ErrorCode code) {
    try {
      m.add(who, answer);
      FAIL() << "accepted '" << answer << "'";
    } catch (const ArenaError& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code(id("B"), "  ...  ", ErrorCode::kMalformedField);
  expect_code(id("B"), " ELON   musk! ", ErrorCode::kMalformedField);
  expect_code(id("A"), "Tim Cook", ErrorCode::kDuplicateRecord);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.answer(id("A")), "Elon Musk");
  EXPECT_EQ(m.needle(id("A")), "elon musk");
}

// ---------------------------------------------------------------------------
// Synthetic oracle

double win_frequency(const SyntheticRoster& roster, const AttackerList& subset,
                     const AttackerId& who, int draws, std::uint64_t seed) {
  int wins = 0;
  for (int t = 0; t < draws; ++t) {
    Rng rng = Rng::for_round(seed, static_cast<std::uint64_t>(t), Stream::kAdjudication);
    const auto w = synthetic_outcome(roster, subset, rng);
    if (w.size() == 1 && w.front() == who) ++wins;
  }
  return static_cast<double>(wins) / draws;
}

TEST(SyntheticOutcome, EqualStrengthsSplitEvenly) {
  SyntheticRoster r{{{id("A"), 0.7}, {id("B"), 0.7}}, 0.0};
  EXPECT_NEAR(win_frequency(r, make_ids({"A", "B"}), id("A"), 10000, 7), 0.5, 0.02);
}

TEST(SyntheticOutcome, SoftmaxTwoAttackers) {
  SyntheticRoster r{{{id("A"), 2.0}, {id("B"), 0.0}}, 0.0};
  // e^2 / (e^2 + 1)
  EXPECT_NEAR(win_frequency(r, make_ids({"A", "B"}), id("A"), 10000, 11), 0.8807970779778823,
              0.01);
}

TEST(SyntheticOutcome, NoWinnerProbOneNeverPicks) {
  SyntheticRoster r{{{id("A"), 5.0}, {id("B"), 0.0}}, 1.0};
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Rng rng = Rng::for_round(3, t, Stream::kAdjudication);
    EXPECT_TRUE(synthetic_outcome(r, make_ids({"A", "B"}), rng).empty());
  }
}

TEST(SyntheticOutcome, ExactlyOneWinnerFromSubset) {
  SyntheticRoster r{{{id("A"), 1.0}, {id("B"), 0.0}, {id("C"), -1.0}, {id("D"), 3.0}}, 0.0};
  const auto subset = make_ids({"A", "C"});
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Rng rng = Rng::for_round(5, t, Stream::kAdjudication);
    const auto w = synthetic_outcome(r, subset, rng);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_TRUE(w.front() == id("A") || w.front() == id("C"));
  }
}

TEST(SyntheticOutcome, DeterministicGivenStream) {
  SyntheticRoster r{{{id("A"), 0.3}, {id("B"), -0.2}, {id("C"), 0.1}}, 0.2};
  const auto subset = make_ids({"A", "B", "C"});
  for (std::uint64_t t = 0; t < 200; ++t) {
    Rng a = Rng::for_round(9, t, Stream::kAdjudication);
    Rng b = Rng::for_round(9, t, Stream::kAdjudication);
    EXPECT_EQ(synthetic_outcome(r, subset, a), synthetic_outcome(r, subset, b));
  }
}

TEST(SyntheticOutcome, NoWinnerRateMatchesGate) {
  SyntheticRoster r{{{id("A"), 0.0}, {id("B"), 0.0}}, 0.3};
  int empty = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    Rng rng = Rng::for_round(13, static_cast<std::uint64_t>(t), Stream::kAdjudication);
    if (synthetic_outcome(r, make_ids({"A", "B"}), rng).empty()) ++empty;
  }
  EXPECT_NEAR(static_cast<double>(empty) / draws, 0.3, 0.02);
}

// Pearson chi-square against softmax on a 5-attacker subset. 4 degrees of
// freedom; the 0.999 quantile is 18.4668.
TEST(SyntheticOutcome, ChiSquareAgainstSoftmax) {
  SyntheticRoster r{{{id("A"), 1.2},
                     {id("B"), 0.4},
                     {id("C"), 0.0},
                     {id("D"), -0.7},
                     {id("E"), -1.5},
                     {id("F"), 2.5}},
                    0.0};
  const auto subset = make_ids({"A", "B", "C", "D", "E"});
  std::map<AttackerId, int> counts;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    Rng rng = Rng::for_round(42, static_cast<std::uint64_t>(t), Stream::kAdjudication);
    const auto w = synthetic_outcome(r, subset, rng);
    ASSERT_EQ(w.size(), 1u);
    ++counts[w.front()];
  }
  double z = 0.0;
  for (const auto& a : subset) z += std::exp(r.true_strengths.at(a));
  double chi2 = 0.0;
  for (const auto& a : subset) {
    const double expected = draws * std::exp(r.true_strengths.at(a)) / z;
    const double diff = counts[a] - expected;
    chi2 += diff * diff / expected;
  }
  EXPECT_LT(chi2, 18.4668);
  EXPECT_EQ(counts.count(id("F")), 0u);
}

TEST(SyntheticOutcome, RejectsBadInput) {
  SyntheticRoster r{{{id("A"), 0.0}, {id("B"), 0.0}}, 0.0};
  Rng rng = Rng::for_round(1, 0, Stream::kAdjudication);
  EXPECT_THROW(synthetic_outcome(r, make_ids({"A"}), rng), ArenaError);
  EXPECT_THROW(synthetic_outcome(r, make_ids({"A", "Z"}), rng), ArenaError);
  EXPECT_THROW(SyntheticAdjudicator(SyntheticRoster{{{id("A"), NAN}}, 0.0}), ArenaError);
  EXPECT_THROW(SyntheticAdjudicator(SyntheticRoster{{{id("A"), 0.0}}, 1.5}), ArenaError);
}

// ---------------------------------------------------------------------------
// Replay

CompetitionLog small_log() {
  CompetitionLog log(make_ids({"A", "B", "C"}), {});
  log.set_targets("q1", TargetAnswerMap({{id("A"), "Elon Musk"},
                                         {id("B"), "Tim Cook"},
                                         {id("C"), "Jensen Huang"}}));
  log.add_round({"q1", make_ids({"B", "A"}), "It is Elon Musk.", std::nullopt, {}});
  log.add_round({"q1", make_ids({"A", "B", "C"}), "Tim Cook or Jensen Huang", std::nullopt,
                 {{id("C"), false}}});
  return log;
}

TEST(ReplayLookup, ExactKey) {
  const auto log = small_log();
  const auto& rec = replay_lookup(log, "q1", make_ids({"A", "B"}));
  EXPECT_EQ(rec.response_text, "It is Elon Musk.");
  EXPECT_EQ(rec.participants, make_ids({"A", "B"}));
}

TEST(ReplayLookup, OrderInsensitive) {
  const auto log = small_log();
  EXPECT_EQ(&replay_lookup(log, "q1", make_ids({"B", "A"})),
            &replay_lookup(log, "q1", make_ids({"A", "B"})));
  EXPECT_EQ(&replay_lookup(log, "q1", make_ids({"C", "A", "B"})),
            &replay_lookup(log, "q1", make_ids({"A", "B", "C"})));
}

TEST(ReplayLookup, MissingKeyNamesIt) {
  const auto log = small_log();
  try {
    replay_lookup(log, "q1", make_ids({"C", "A"}));
    FAIL() << "expected missing-record";
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingRecord);
    EXPECT_NE(std::string(e.what()).find("(q1, A|C)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(replay_lookup(log, "q2", make_ids({"A", "B"})), ArenaError);
}

TEST(ReplayLookup, PureAcrossCalls) {
  const auto log = small_log();
  const RecordedResponse first = replay_lookup(log, "q1", make_ids({"A", "B"}));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(replay_lookup(log, "q1", make_ids({"A", "B"})), first);
}

TEST(ReplayAdjudicator, VerdictOverridesSubstring) {
  const auto log = small_log();
  ReplayAdjudicator adj(log);
  Rng rng = Rng::for_round(1, 0, Stream::kAdjudication);
  EXPECT_EQ(adj.adjudicate("q1", make_ids({"A", "B"}), rng).winners, make_ids({"A"}));
  // C's answer is in the text but the recorded verdict says no.
  EXPECT_EQ(adj.adjudicate("q1", make_ids({"A", "B", "C"}), rng).winners, make_ids({"B"}));
}

TEST(ReplayAdjudicator, PositiveVerdictWithoutSubstring) {
  CompetitionLog log(make_ids({"A", "B"}), {});
  log.set_targets("q", TargetAnswerMap({{id("A"), "x ray"}, {id("B"), "gamma"}}));
  log.add_round({"q", make_ids({"A", "B"}), "nothing relevant", std::nullopt, {{id("A"), true}}});
  Rng rng = Rng::for_round(1, 0, Stream::kAdjudication);
  EXPECT_EQ(ReplayAdjudicator(log).adjudicate("q", make_ids({"A", "B"}), rng).winners,
            make_ids({"A"}));
}

class ExactJudge final : public AnswerJudge {
 public:
  bool matches(std::string_view response, std::string_view target) const override {
    return response == target;
  }
};

TEST(ReplayAdjudicator, PluggableJudge) {
  CompetitionLog log(make_ids({"A", "B"}), {});
  log.set_targets("q", TargetAnswerMap({{id("A"), "Paris"}, {id("B"), "Rome"}}));
  log.add_round({"q", make_ids({"A", "B"}), "Paris is lovely", std::nullopt, {}});
  Rng rng = Rng::for_round(1, 0, Stream::kAdjudication);
  EXPECT_EQ(ReplayAdjudicator(log).adjudicate("q", make_ids({"A", "B"}), rng).winners,
            make_ids({"A"}));
  EXPECT_TRUE(ReplayAdjudicator(log, std::make_shared<ExactJudge>())
                  .adjudicate("q", make_ids({"A", "B"}), rng)
                  .winners.empty());
}

TEST(CompetitionLog, AddRoundValidation) {
  auto log = small_log();
  auto code_of = [&](RecordedResponse r) {
    try {
      log.add_round(std::move(r));
    } catch (const ArenaError& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;  // sentinel: accepted
  };
  EXPECT_EQ(code_of({"q1", make_ids({"A", "B"}), "again", std::nullopt, {}}),
            ErrorCode::kDuplicateRecord);
  EXPECT_EQ(code_of({"q1", make_ids({"A"}), "solo", std::nullopt, {}}),
            ErrorCode::kMalformedField);
  EXPECT_EQ(code_of({"q1", make_ids({"A", "Z"}), "?", std::nullopt, {}}),
            ErrorCode::kMissingAttacker);
  EXPECT_EQ(code_of({"q9", make_ids({"A", "C"}), "?", std::nullopt, {}}),
            ErrorCode::kMissingTarget);
  EXPECT_EQ(code_of({"q1", make_ids({"A", "C"}), "?", RetrievalMap{{id("B"), {}}}, {}}),
            ErrorCode::kMalformedField);
  EXPECT_EQ(code_of({"q1", make_ids({"A", "C"}), "?", RetrievalMap{{id("A"), {5, 5, 6}}}, {}}),
            ErrorCode::kMalformedField);
  EXPECT_EQ(code_of({"q1", make_ids({"A", "C"}), "?", std::nullopt, {{id("B"), true}}}),
            ErrorCode::kMalformedField);
  EXPECT_EQ(log.rounds().size(), 2u);
}

}  // namespace
}  // namespace parena
