#ifndef PARENA_ARENA_HPP_
#define PARENA_ARENA_HPP_

// The competition loop. Every round samples a query and a participant
// subset, asks an adjudicator for the winner set, and moves the ratings one
// gradient step. The run ends once the ranking has held still for a full
// convergence window, or at the round cap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parena/adjudicate.hpp"
#include "parena/attacker_id.hpp"
#include "parena/error.hpp"
#include "parena/metrics.hpp"
#include "parena/ratings.hpp"
#include "parena/rng.hpp"

namespace parena {

inline constexpr std::size_t kDefaultMaxRounds = 20000;
inline constexpr std::uint64_t kDefaultSeed = 42;

struct SimulationConfig {
  AttackerList roster;
  std::vector<std::string> queries = {"q0"};
  std::size_t subset_min = 2;
  std::size_t subset_max = 2;
  double eta = kDefaultLearningRate;
  std::size_t convergence_window = kDefaultConvergenceWindow;
  std::size_t max_rounds = kDefaultMaxRounds;
  std::uint64_t seed = kDefaultSeed;
  GradientMode gradient_mode = GradientMode::kAnalytic;
};

inline void validate(const SimulationConfig& config) {
  auto fail = [](const std::string& msg) { throw ArenaError(ErrorCode::kConfig, msg); };
  AttackerList sorted = config.roster;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail("roster: attacker ids must be distinct");
  }
  if (sorted.size() < 2) fail("roster: at least 2 attackers are required");
  if (config.queries.empty()) fail("queries: at least one query is required");
  const std::size_t n = config.roster.size();
  if (config.subset_min < 2 || config.subset_min > config.subset_max || config.subset_max > n) {
    fail("subset_min/subset_max: need 2 <= subset_min <= subset_max <= roster size (m in [2, n], n = " +
         std::to_string(n) + "), got [" + std::to_string(config.subset_min) + ", " +
         std::to_string(config.subset_max) + "]");
  }
  if (!(config.eta > 0) || !std::isfinite(config.eta)) fail("eta: must be positive");
  if (config.convergence_window < 2) fail("window: convergence window must be at least 2");
  if (config.max_rounds == 0) fail("max_rounds: must be positive");
}

struct RoundOutcome {
  std::size_t round_index = 0;  // 1-based
  std::string query_id;
  AttackerList participants;  // sorted by id
  RoundPartition partition;
  std::optional<RetrievalMap> retrieval;
};

struct AttackerTally {
  double theta = 0.0;
  std::size_t wins = 0;
  std::size_t participations = 0;
  double win_rate = 0.0;
};

struct TrajectoryPoint {
  std::size_t round_index = 0;
  std::map<AttackerId, AttackerTally> attackers;
};

struct MAsrReport {
  std::map<AttackerId, double> rates;
  AttackerList unparticipated;  // rate reported as 0
};

struct SimulationResult {
  RatingState final_state;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<RoundOutcome> outcomes;
  std::optional<std::size_t> converged_at;
  MAsrReport m_asr;
  std::optional<F1Aggregate> m_f1;  // absent when no round carried retrieval counts
};

// m uniform on [subset_min, subset_max], then a uniform m-subset of the
// roster via partial Fisher-Yates. Result is sorted by id.
inline AttackerList sample_subset(Rng& rng, std::span<const AttackerId> roster,
                                  std::size_t subset_min, std::size_t subset_max) {
  const std::size_t m = subset_min + rng.uniform_index(subset_max - subset_min + 1);
  AttackerList pool(roster.begin(), roster.end());
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
  }
  pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(m), pool.end());
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline RoundOutcome run_round(std::span<const AttackerId> subset, const std::string& query_id,
                              const Adjudicator& adjudicator, Rng& rng,
                              std::size_t round_index = 0) {
  Verdict verdict = adjudicator.adjudicate(query_id, subset, rng);
  RoundOutcome out;
  out.round_index = round_index;
  out.query_id = query_id;
  out.participants.assign(subset.begin(), subset.end());
  std::sort(out.participants.begin(), out.participants.end());
  std::sort(verdict.winners.begin(), verdict.winners.end());
  verdict.winners.erase(std::unique(verdict.winners.begin(), verdict.winners.end()),
                        verdict.winners.end());
  for (const auto& w : verdict.winners) {
    if (!std::binary_search(out.participants.begin(), out.participants.end(), w)) {
      throw ArenaError(ErrorCode::kInvalidArgument,
                       "adjudicator named non-participant '" + w.str() + "' as winner");
    }
  }
  for (const auto& id : out.participants) {
    if (!std::binary_search(verdict.winners.begin(), verdict.winners.end(), id)) {
      out.partition.losers.push_back(id);
    }
  }
  out.partition.winners = std::move(verdict.winners);
  out.retrieval = std::move(verdict.retrieval);
  return out;
}

inline MAsrReport compute_m_asr(std::span<const AttackerId> roster,
                                std::span<const RoundOutcome> outcomes) {
  std::map<AttackerId, std::pair<std::size_t, std::size_t>> counts;  // wins, participations
  for (const auto& id : roster) counts.try_emplace(id);
  for (const auto& o : outcomes) {
    for (const auto& id : o.participants) ++counts[id].second;
    for (const auto& id : o.partition.winners) ++counts[id].first;
  }
  MAsrReport out;
  for (const auto& [id, c] : counts) {
    if (c.second == 0) {
      out.rates.emplace(id, 0.0);
      out.unparticipated.push_back(id);
    } else {
      out.rates.emplace(id, static_cast<double>(c.first) / static_cast<double>(c.second));
    }
  }
  return out;
}

// Mean F1 over the rounds each attacker took part in and has retrieval
// counts for. Rounds without counts for an attacker are left out of its
// denominator.
inline std::optional<F1Aggregate> compute_m_f1(std::span<const AttackerId> roster,
                                               std::span<const RoundOutcome> outcomes) {
  std::vector<F1Unit> units;
  bool any = false;
  for (const auto& o : outcomes) {
    if (!o.retrieval) continue;
    any = true;
    for (const auto& [id, counts] : *o.retrieval) {
      units.push_back({id, std::to_string(o.round_index), retrieval_prf(counts)});
    }
  }
  if (!any) return std::nullopt;
  return aggregate_f1(roster, units, F1Grouping::kPerRound);
}

// Accumulates rounds into ratings, tallies and a trajectory. Shared by the
// sampled simulation and by log replay.
class RoundLoop {
 public:
  RoundLoop(std::span<const AttackerId> roster, double eta, std::size_t window,
            GradientMode mode)
      : state_(roster, window), eta_(eta), window_(window), mode_(mode) {
    for (const auto& id : roster) tallies_.try_emplace(id);
  }

  const RatingState& state() const noexcept { return state_; }
  std::optional<std::size_t> converged_at() const noexcept { return converged_at_; }

  // Returns true when the stable-ranking criterion holds after this round.
  bool record(RoundOutcome outcome) {
    if (outcome.partition.degenerate()) {
      state_.skip_round();
    } else {
      state_.apply(round_gradient(state_, outcome.partition, mode_), eta_);
    }
    for (const auto& id : outcome.participants) ++tallies_.at(id).participations;
    for (const auto& id : outcome.partition.winners) ++tallies_.at(id).wins;

    TrajectoryPoint point;
    point.round_index = state_.round_index();
    for (auto& [id, tally] : tallies_) {
      tally.theta = state_.theta(id);
      tally.win_rate = tally.participations > 0 ? static_cast<double>(tally.wins) /
                                                      static_cast<double>(tally.participations)
                                                : 0.0;
      point.attackers.emplace(id, tally);
    }
    trajectory_.push_back(std::move(point));
    outcome.round_index = state_.round_index();
    outcomes_.push_back(std::move(outcome));

    const bool stable = check_convergence(state_, window_);
    if (stable && !converged_at_) converged_at_ = state_.round_index();
    return stable;
  }

  SimulationResult finish() && {
    AttackerList roster;
    for (const auto& [id, t] : tallies_) roster.push_back(id);
    MAsrReport m_asr = compute_m_asr(roster, outcomes_);
    auto m_f1 = compute_m_f1(roster, outcomes_);
    return SimulationResult{std::move(state_),   std::move(trajectory_), std::move(outcomes_),
                            converged_at_,       std::move(m_asr),       std::move(m_f1)};
  }

 private:
  RatingState state_;
  double eta_;
  std::size_t window_;
  GradientMode mode_;
  std::map<AttackerId, AttackerTally> tallies_;
  std::vector<TrajectoryPoint> trajectory_;
  std::vector<RoundOutcome> outcomes_;
  std::optional<std::size_t> converged_at_;
};

namespace detail {

template <typename Fn>
decltype(auto) annotate_round(std::size_t round, Fn&& fn) {
  try {
    return fn();
  } catch (const ArenaError& e) {
    throw ArenaError(e.code(), "round " + std::to_string(round) + ": " + e.what());
  }
}

}  // namespace detail

// Runs rounds until the ranking is stable for convergence_window rounds or
// max_rounds is reached. Query, subset and adjudication draw from separate
// per-round streams of `seed`, so the result is a pure function of
// (config, adjudicator).
inline SimulationResult simulate(const SimulationConfig& config, const Adjudicator& adjudicator) {
  validate(config);
  RoundLoop loop(config.roster, config.eta, config.convergence_window, config.gradient_mode);
  for (std::size_t t = 1; t <= config.max_rounds; ++t) {
    Rng query_rng = Rng::for_round(config.seed, t, Stream::kQuery);
    Rng subset_rng = Rng::for_round(config.seed, t, Stream::kSubset);
    Rng judge_rng = Rng::for_round(config.seed, t, Stream::kAdjudication);
    const std::string& query = config.queries[query_rng.uniform_index(config.queries.size())];
    const AttackerList subset =
        sample_subset(subset_rng, config.roster, config.subset_min, config.subset_max);
    RoundOutcome outcome = detail::annotate_round(
        t, [&] { return run_round(subset, query, adjudicator, judge_rng, t); });
    const bool stable = detail::annotate_round(t, [&] { return loop.record(std::move(outcome)); });
    if (stable) break;
  }
  return std::move(loop).finish();
}

struct ReplayOptions {
  double eta = kDefaultLearningRate;
  std::size_t convergence_window = kDefaultConvergenceWindow;
  GradientMode gradient_mode = GradientMode::kAnalytic;
  bool shuffle = false;
  std::uint64_t seed = kDefaultSeed;
  std::shared_ptr<const AnswerJudge> judge;  // null: substring matching
};

// Fits ratings online over every recorded round, in stored order or in a
// seeded shuffle. All evidence is consumed; converged_at reports the first
// round at which the ranking had been stable for a full window.
inline SimulationResult replay(const CompetitionLog& log, const ReplayOptions& options) {
  if (options.convergence_window < 2) {
    throw ArenaError(ErrorCode::kConfig, "window: convergence window must be at least 2");
  }
  if (!(options.eta > 0) || !std::isfinite(options.eta)) {
    throw ArenaError(ErrorCode::kConfig, "eta: must be positive");
  }
  std::vector<std::size_t> order(log.rounds().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (options.shuffle && order.size() > 1) {
    Rng rng = Rng::for_round(options.seed, 0, Stream::kShuffle);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_index(i + 1)]);
    }
  }
  ReplayAdjudicator adjudicator(log, options.judge);
  RoundLoop loop(log.roster(), options.eta, options.convergence_window, options.gradient_mode);
  std::size_t t = 0;
  for (std::size_t idx : order) {
    ++t;
    const RecordedResponse& rec = log.rounds()[idx];
    Rng judge_rng = Rng::for_round(options.seed, t, Stream::kAdjudication);
    RoundOutcome outcome = detail::annotate_round(
        t, [&] { return run_round(rec.participants, rec.query_id, adjudicator, judge_rng, t); });
    loop.record(std::move(outcome));
  }
  return std::move(loop).finish();
}

}  // namespace parena

#endif  // PARENA_ARENA_HPP_
