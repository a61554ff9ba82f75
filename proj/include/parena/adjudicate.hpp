#ifndef PARENA_ADJUDICATE_HPP_
#define PARENA_ADJUDICATE_HPP_

// Winner-set decisions for a round: replayed from recorded responses, or
// sampled from a synthetic strength model for testing the estimator.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parena/attacker_id.hpp"
#include "parena/error.hpp"
#include "parena/judge.hpp"
#include "parena/metrics.hpp"
#include "parena/rng.hpp"

namespace parena {

using RetrievalMap = std::map<AttackerId, RetrievalCounts>;

struct Verdict {
  AttackerList winners;
  std::optional<RetrievalMap> retrieval;
};

// Adjudicators are immutable once built and may be shared across threads.
// Any randomness must come from the supplied stream.
class Adjudicator {
 public:
  virtual ~Adjudicator() = default;
  virtual Verdict adjudicate(const std::string& query_id, std::span<const AttackerId> subset,
                             Rng& rng) const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic oracle

struct SyntheticRoster {
  std::map<AttackerId, double> true_strengths;
  double no_winner_prob = 0.0;

  AttackerList roster() const {
    AttackerList ids;
    for (const auto& [id, s] : true_strengths) ids.push_back(id);
    return ids;
  }
};

inline void validate(const SyntheticRoster& roster) {
  for (const auto& [id, s] : roster.true_strengths) {
    if (!std::isfinite(s)) {
      throw ArenaError(ErrorCode::kInvalidArgument,
                       "true strength of '" + id.str() + "' is not finite");
    }
  }
  // 1.0 is accepted and means "never a winner".
  if (!(roster.no_winner_prob >= 0.0 && roster.no_winner_prob <= 1.0)) {
    throw ArenaError(ErrorCode::kInvalidArgument, "no_winner_prob must lie in [0, 1]");
  }
}

// With probability no_winner_prob nobody wins; otherwise exactly one winner
// drawn from softmax(true_strengths) restricted to the subset. Consumes two
// draws from `rng` per call.
inline AttackerList synthetic_outcome(const SyntheticRoster& roster,
                                      std::span<const AttackerId> subset, Rng& rng) {
  if (subset.size() < 2) {
    throw ArenaError(ErrorCode::kInvalidArgument, "synthetic round needs at least 2 attackers");
  }
  std::vector<double> strengths;
  strengths.reserve(subset.size());
  for (const auto& id : subset) {
    auto it = roster.true_strengths.find(id);
    if (it == roster.true_strengths.end()) {
      throw ArenaError(ErrorCode::kMissingAttacker,
                       "no true strength for '" + id.str() + "'");
    }
    strengths.push_back(it->second);
  }
  const double gate = rng.uniform_unit();
  const double pick = rng.uniform_unit();
  if (gate < roster.no_winner_prob) return {};

  const double top = *std::max_element(strengths.begin(), strengths.end());
  double total = 0.0;
  for (double& s : strengths) {
    s = std::exp(s - top);
    total += s;
  }
  double target = pick * total;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    target -= strengths[i];
    if (target < 0.0) return {subset[i]};
  }
  return {subset.back()};
}

class SyntheticAdjudicator final : public Adjudicator {
 public:
  explicit SyntheticAdjudicator(SyntheticRoster roster) : roster_(std::move(roster)) {
    validate(roster_);
  }

  const SyntheticRoster& roster() const noexcept { return roster_; }

  Verdict adjudicate(const std::string&, std::span<const AttackerId> subset,
                     Rng& rng) const override {
    return {synthetic_outcome(roster_, subset, rng), std::nullopt};
  }

 private:
  SyntheticRoster roster_;
};

// ---------------------------------------------------------------------------
// Replay of recorded multi-attacker responses

struct RecordedResponse {
  std::string query_id;
  AttackerList participants;  // sorted by id
  std::string response_text;
  std::optional<RetrievalMap> retrieval;
  // Precomputed per-attacker verdicts (e.g. from an offline model judge).
  // An entry overrides substring matching for that attacker.
  std::map<AttackerId, bool> verdicts;

  friend bool operator==(const RecordedResponse&, const RecordedResponse&) = default;
};

struct LogMetadata {
  int k = kDefaultTopK;
  int n_poison = kDefaultPoisonBudget;
  std::string source;

  friend bool operator==(const LogMetadata&, const LogMetadata&) = default;
};

// Recorded competition evidence, keyed by (query id, canonical subset key).
// Rounds keep the order they were added in.
class CompetitionLog {
 public:
  CompetitionLog(AttackerList roster, LogMetadata metadata)
      : roster_(std::move(roster)), metadata_(std::move(metadata)) {
    AttackerList sorted = roster_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArenaError(ErrorCode::kDuplicateRecord, "roster lists an attacker twice");
    }
    if (roster_.size() < 2) {
      throw ArenaError(ErrorCode::kMalformedField, "roster needs at least 2 attackers");
    }
  }

  const AttackerList& roster() const noexcept { return roster_; }
  const LogMetadata& metadata() const noexcept { return metadata_; }
  const std::map<std::string, TargetAnswerMap>& targets() const noexcept { return targets_; }
  const std::vector<RecordedResponse>& rounds() const noexcept { return rounds_; }

  std::vector<std::string> query_ids() const {
    std::vector<std::string> ids;
    for (const auto& [q, t] : targets_) ids.push_back(q);
    return ids;
  }

  void set_targets(const std::string& query_id, TargetAnswerMap targets) {
    for (const auto& [id, answer] : targets.answers()) {
      if (!in_roster(id)) {
        throw ArenaError(ErrorCode::kMissingAttacker, "targets for query '" + query_id +
                                                          "' name unknown attacker '" +
                                                          id.str() + "'");
      }
    }
    targets_.insert_or_assign(query_id, std::move(targets));
  }

  void add_round(RecordedResponse round) {
    std::sort(round.participants.begin(), round.participants.end());
    const std::string key = canonical_subset_key(round.participants);
    const std::string where = "round (" + round.query_id + ", " + key + ")";
    if (round.participants.size() < 2) {
      throw ArenaError(ErrorCode::kMalformedField, where + " has fewer than 2 participants");
    }
    for (const auto& id : round.participants) {
      if (!in_roster(id)) {
        throw ArenaError(ErrorCode::kMissingAttacker,
                         where + " names unknown attacker '" + id.str() + "'");
      }
    }
    auto targets = targets_.find(round.query_id);
    for (const auto& id : round.participants) {
      if (targets == targets_.end() || !targets->second.contains(id)) {
        throw ArenaError(ErrorCode::kMissingTarget,
                         where + ": '" + id.str() + "' has no target answer for query '" +
                             round.query_id + "'");
      }
    }
    auto is_participant = [&](const AttackerId& id) {
      return std::binary_search(round.participants.begin(), round.participants.end(), id);
    };
    if (round.retrieval) {
      for (const auto& [id, counts] : *round.retrieval) {
        if (!is_participant(id)) {
          throw ArenaError(ErrorCode::kMalformedField,
                           where + ": retrieval counts for non-participant '" + id.str() + "'");
        }
        try {
          validate(counts);
        } catch (const ArenaError& e) {
          throw ArenaError(ErrorCode::kMalformedField,
                           where + ": retrieval of '" + id.str() + "': " + e.what());
        }
      }
    }
    for (const auto& [id, v] : round.verdicts) {
      if (!is_participant(id)) {
        throw ArenaError(ErrorCode::kMalformedField,
                         where + ": verdict for non-participant '" + id.str() + "'");
      }
    }
    if (!index_.emplace(std::pair{round.query_id, key}, rounds_.size()).second) {
      throw ArenaError(ErrorCode::kDuplicateRecord, where + " recorded twice");
    }
    rounds_.push_back(std::move(round));
  }

  const RecordedResponse* find(const std::string& query_id,
                               std::span<const AttackerId> subset) const {
    auto it = index_.find({query_id, canonical_subset_key(subset)});
    return it == index_.end() ? nullptr : &rounds_[it->second];
  }

 private:
  bool in_roster(const AttackerId& id) const {
    return std::find(roster_.begin(), roster_.end(), id) != roster_.end();
  }

  AttackerList roster_;
  LogMetadata metadata_;
  std::map<std::string, TargetAnswerMap> targets_;
  std::vector<RecordedResponse> rounds_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

inline const RecordedResponse& replay_lookup(const CompetitionLog& log,
                                             const std::string& query_id,
                                             std::span<const AttackerId> subset) {
  if (const auto* rec = log.find(query_id, subset)) return *rec;
  throw ArenaError(ErrorCode::kMissingRecord, "no recorded round for (" + query_id + ", " +
                                                  canonical_subset_key(subset) + ")");
}

// Winners of a recorded round: precomputed verdicts where present, judged
// against the query's target answers otherwise.
inline AttackerList judge_recorded(const CompetitionLog& log, const RecordedResponse& rec,
                                   const AnswerJudge* judge = nullptr) {
  const TargetAnswerMap& targets = log.targets().at(rec.query_id);
  AttackerList unjudged;
  AttackerList winners;
  for (const auto& id : rec.participants) {
    if (auto v = rec.verdicts.find(id); v != rec.verdicts.end()) {
      if (v->second) winners.push_back(id);
    } else {
      unjudged.push_back(id);
    }
  }
  if (judge == nullptr) {
    for (auto& id : judge_substring(rec.response_text, targets, unjudged)) {
      winners.push_back(std::move(id));
    }
  } else {
    for (const auto& id : unjudged) {
      if (judge->matches(rec.response_text, targets.answer(id))) winners.push_back(id);
    }
  }
  std::sort(winners.begin(), winners.end());
  return winners;
}

class ReplayAdjudicator final : public Adjudicator {
 public:
  // The log must outlive the adjudicator. A null judge selects substring
  // matching.
  explicit ReplayAdjudicator(const CompetitionLog& log,
                             std::shared_ptr<const AnswerJudge> judge = nullptr)
      : log_(&log), judge_(std::move(judge)) {}

  Verdict adjudicate(const std::string& query_id, std::span<const AttackerId> subset,
                     Rng&) const override {
    const RecordedResponse& rec = replay_lookup(*log_, query_id, subset);
    return {judge_recorded(*log_, rec, judge_.get()), rec.retrieval};
  }

 private:
  const CompetitionLog* log_;
  std::shared_ptr<const AnswerJudge> judge_;
};

}  // namespace parena

#endif  // PARENA_ADJUDICATE_HPP_
