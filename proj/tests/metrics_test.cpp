#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "parena/metrics.hpp"
#include "test_util.hpp"

namespace parena {
namespace {

using testing::id;

TEST(RetrievalPrf, Examples) {
  const PRF full = retrieval_prf({5, 5, 5});
  EXPECT_EQ(full.precision, 1.0);
  EXPECT_EQ(full.recall, 1.0);
  EXPECT_EQ(full.f1, 1.0);

  const PRF two = retrieval_prf({5, 5, 2});
  EXPECT_DOUBLE_EQ(two.precision, 0.4);
  EXPECT_DOUBLE_EQ(two.recall, 0.4);
  EXPECT_DOUBLE_EQ(two.f1, 0.4);

  const PRF none = retrieval_prf({5, 5, 0});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(RetrievalPrf, UnequalBudget) {
  // k = 10, n_poison = 5, 4 retrieved: P = 0.4, R = 0.8, F1 = 2*0.32/1.2
  const PRF p = retrieval_prf({10, 5, 4});
  EXPECT_DOUBLE_EQ(p.precision, 0.4);
  EXPECT_DOUBLE_EQ(p.recall, 0.8);
  EXPECT_NEAR(p.f1, 0.5333333333333333, 1e-15);
}

TEST(RetrievalPrf, CountBounds) {
  auto reason = [](RetrievalCounts c) {
    try {
      retrieval_prf(c);
    } catch (const ArenaError& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_NE(reason({5, 5, 9}).find("count exceeds k"), std::string::npos);
  EXPECT_NE(reason({10, 5, 7}).find("count exceeds n_poison"), std::string::npos);
  EXPECT_NE(reason({5, 5, -1}).find("non-negative"), std::string::npos);
  EXPECT_NE(reason({0, 5, 0}).find("k must be positive"), std::string::npos);
  EXPECT_NE(reason({5, 0, 0}).find("n_poison must be positive"), std::string::npos);
}

TEST(RetrievalPrfProperty, EqualBudgetGivesIdenticalScores) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> r(0, 5);
  for (int i = 0; i < 1000; ++i) {
    const PRF p = retrieval_prf({5, 5, r(gen)});
    EXPECT_EQ(p.precision, p.recall);
    EXPECT_EQ(p.precision, p.f1);
  }
  for (int k = 1; k <= 40; ++k) {
    for (int c = 0; c <= k; ++c) {
      const PRF p = retrieval_prf({k, k, c});
      EXPECT_EQ(p.precision, p.recall);
      EXPECT_EQ(p.precision, p.f1);
    }
  }
}

TEST(RetrievalPrfProperty, F1MonotoneAndBetweenPAndR) {
  for (int k = 1; k <= 12; ++k) {
    for (int n = 1; n <= 12; ++n) {
      double prev = -1.0;
      for (int c = 0; c <= std::min(k, n); ++c) {
        const PRF p = retrieval_prf({k, n, c});
        EXPECT_GE(p.f1, prev);
        prev = p.f1;
        EXPECT_GE(p.f1, std::min(p.precision, p.recall) - 1e-15);
        EXPECT_LE(p.f1, std::max(p.precision, p.recall) + 1e-15);
        EXPECT_NEAR(p.f1, f1_score(p.precision, p.recall), 1e-15);
        EXPECT_GE(p.f1, 0.0);
        EXPECT_LE(p.f1, 1.0);
      }
    }
  }
}

TEST(F1Score, ZeroDenominator) { EXPECT_EQ(f1_score(0.0, 0.0), 0.0); }

// ---------------------------------------------------------------------------
// s-ASR

AttackRunRecord run(const std::string& q, const std::string& who, const std::string& target,
                    const std::string& response, int retrieved = 5) {
  return {q, AttackerId(who), target, response, {5, 5, retrieved}, std::nullopt};
}

TEST(SAsr, AllSucceed) {
  std::vector<AttackRunRecord> runs;
  for (int i = 0; i < 8; ++i) {
    runs.push_back(run("q" + std::to_string(i), "A", "Paris", "Surely PARIS."));
  }
  EXPECT_EQ(s_asr(runs, SubstringJudge{}), 1.0);
}

TEST(SAsr, ThreeOfTen) {
  std::vector<AttackRunRecord> runs;
  for (int i = 0; i < 10; ++i) {
    runs.push_back(run("q" + std::to_string(i), "A", "Paris", i < 3 ? "paris" : "london"));
  }
  EXPECT_DOUBLE_EQ(s_asr(runs, SubstringJudge{}), 0.3);
}

TEST(SAsr, VerdictOverrides) {
  auto yes = run("q0", "A", "Paris", "london");
  yes.judge_verdict = true;
  auto no = run("q1", "A", "Paris", "paris");
  no.judge_verdict = false;
  const std::vector<AttackRunRecord> runs{yes, no};
  EXPECT_DOUBLE_EQ(s_asr(runs, SubstringJudge{}), 0.5);
  EXPECT_TRUE(run_succeeded(yes, SubstringJudge{}));
  EXPECT_FALSE(run_succeeded(no, SubstringJudge{}));
}

TEST(SAsr, EmptyInput) {
  try {
    s_asr(std::vector<AttackRunRecord>{}, SubstringJudge{});
    FAIL();
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

// 100 synthetic records; the expected ratio is counted directly from the
// construction, not through the judge.
TEST(SAsrProperty, MatchesBruteForceCount) {
  std::mt19937_64 gen(77);
  const std::vector<std::string> answers = {"Paris", "Rome", "Berlin", "Madrid", "Oslo"};
  std::vector<AttackRunRecord> runs;
  int expected_successes = 0;
  for (int i = 0; i < 100; ++i) {
    const std::string target = answers[gen() % answers.size()];
    std::string response = "Answer: ";
    bool success = false;
    switch (gen() % 4) {
      case 0:
        response += target;
        success = true;
        break;
      case 1: {
        std::string upper = target;
        for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        response += " it is   " + upper + "!";
        success = true;
        break;
      }
      case 2:
        response += "unknown";
        break;
      default:
        // A different capital, never a superstring of the target.
        response += answers[(std::find(answers.begin(), answers.end(), target) - answers.begin() +
                             1) % answers.size()];
        break;
    }
    auto r = run("q" + std::to_string(i), "A" + std::to_string(i % 3), target, response);
    if (gen() % 10 == 0) {
      r.judge_verdict = !success;
      success = !success;
    }
    expected_successes += success ? 1 : 0;
    runs.push_back(r);
  }
  EXPECT_EQ(s_asr(runs, SubstringJudge{}), expected_successes / 100.0);
}

// ---------------------------------------------------------------------------
// Aggregation

TEST(AggregateF1, Examples) {
  const auto roster = make_ids({"A", "B", "C"});
  const std::vector<F1Unit> units = {
      {id("A"), "q1", retrieval_prf({5, 5, 5})},
      {id("A"), "q2", retrieval_prf({5, 5, 0})},
      {id("B"), "q1", retrieval_prf({5, 5, 2})},
      {id("B"), "q2", retrieval_prf({5, 5, 2})},
      {id("B"), "q3", retrieval_prf({5, 5, 2})},
  };
  const auto agg = aggregate_f1(roster, units, F1Grouping::kPerQuery);
  EXPECT_DOUBLE_EQ(agg.mean_f1.at(id("A")), 0.5);
  EXPECT_DOUBLE_EQ(agg.mean_f1.at(id("B")), 0.4);
  EXPECT_EQ(agg.mean_f1.count(id("C")), 0u);
  EXPECT_EQ(agg.excluded, make_ids({"C"}));
}

TEST(AggregateF1, EqualBudgetMeansCoincide) {
  std::mt19937_64 gen(9);
  std::vector<F1Unit> units;
  StreamingMean p, r;
  for (int i = 0; i < 50; ++i) {
    const PRF prf = retrieval_prf({5, 5, static_cast<int>(gen() % 6)});
    units.push_back({id("A"), "q" + std::to_string(i), prf});
    p.add(prf.precision);
    r.add(prf.recall);
  }
  const auto roster = make_ids({"A"});
  const double f1 = aggregate_f1(roster, units, F1Grouping::kPerQuery).mean_f1.at(id("A"));
  EXPECT_NEAR(f1, p.value(), 1e-12);
  EXPECT_EQ(p.value(), r.value());
}

TEST(AggregateF1, Errors) {
  const auto roster = make_ids({"A"});
  const std::vector<F1Unit> dup = {{id("A"), "r1", {}}, {id("A"), "r1", {}}};
  const std::vector<F1Unit> stranger = {{id("Z"), "r1", {}}};
  try {
    aggregate_f1(roster, dup, F1Grouping::kPerRound);
    FAIL();
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateRecord);
  }
  try {
    aggregate_f1(roster, stranger, F1Grouping::kPerRound);
    FAIL();
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingAttacker);
  }
}

TEST(AggregateProperty, StreamingMatchesBatch) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen() % 2000;
    std::vector<double> values(n);
    for (auto& v : values) v = u(gen);
    StreamingMean s;
    for (double v : values) s.add(v);
    const double batch = batch_mean(values);
    EXPECT_NEAR(s.value(), batch, 1e-12);
    EXPECT_GE(batch, 0.0);
    EXPECT_LE(batch, 1.0);
    std::shuffle(values.begin(), values.end(), gen);
    EXPECT_NEAR(batch_mean(values), batch, 1e-12);
  }
}

TEST(SummarizeSingleRuns, PerAttacker) {
  std::vector<AttackRunRecord> runs = {
      run("q1", "A", "Paris", "paris", 5),  run("q2", "A", "Rome", "no", 1),
      run("q1", "B", "Oslo", "oslo!", 2),   run("q2", "B", "Bern", "BERN", 4),
      run("q3", "B", "Lima", "lima", 0),
  };
  const auto s = summarize_single_runs(runs, SubstringJudge{});
  EXPECT_DOUBLE_EQ(s.s_asr.at(id("A")), 0.5);
  EXPECT_DOUBLE_EQ(s.s_asr.at(id("B")), 1.0);
  EXPECT_DOUBLE_EQ(s.s_f1.at(id("A")), 0.6);
  EXPECT_DOUBLE_EQ(s.s_f1.at(id("B")), 0.4);
  EXPECT_EQ(s.runs.at(id("A")), 2u);
  EXPECT_EQ(s.runs.at(id("B")), 3u);
  EXPECT_THROW(summarize_single_runs(std::vector<AttackRunRecord>{}, SubstringJudge{}),
               ArenaError);
}

}  // namespace
}  // namespace parena
