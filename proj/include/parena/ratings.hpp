#ifndef PARENA_RATINGS_HPP_
#define PARENA_RATINGS_HPP_

// Bradley-Terry competitive coefficients fitted by online gradient ascent.
//
// Each attacker i carries a real coefficient theta_i and beats attacker j
// with probability exp(theta_i) / (exp(theta_i) + exp(theta_j)). A round
// splits its participants into winners W and losers L and contributes
//
//   sum_{i in W} sum_{j in L} log P(i beats j)
//
// to the log-likelihood. Coefficients are never re-centred, so only
// differences between them carry meaning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "parena/attacker_id.hpp"
#include "parena/error.hpp"

namespace parena {

inline constexpr double kDefaultLearningRate = 0.1;
inline constexpr std::size_t kDefaultConvergenceWindow = 50;

using ThetaMap = std::map<AttackerId, double>;
using Gradient = std::map<AttackerId, double>;

// Attackers sorted by theta descending, ties broken by id ascending.
using RankVector = AttackerList;

// How the loser component of the per-round gradient is computed.
//   kAnalytic:     d/d theta_i of the round log-likelihood,
//                  -sum_{j in W} exp(theta_i) / (exp(theta_i) + exp(theta_j)).
//   kPaperLiteral: -sum_{j in W} exp(theta_j) / (exp(theta_i) + exp(theta_j)),
//                  the form printed alongside the original method. It is not
//                  the derivative of the likelihood and is kept for comparison.
// Winner components are identical in both modes.
enum class GradientMode { kAnalytic, kPaperLiteral };

inline std::string_view gradient_mode_name(GradientMode mode) {
  return mode == GradientMode::kAnalytic ? "analytic" : "paper-literal";
}

inline GradientMode parse_gradient_mode(std::string_view text) {
  if (text == "analytic") return GradientMode::kAnalytic;
  if (text == "paper-literal") return GradientMode::kPaperLiteral;
  throw ArenaError(ErrorCode::kInvalidArgument,
                   "unknown gradient mode '" + std::string(text) +
                       "' (expected analytic or paper-literal)");
}

struct RoundPartition {
  AttackerList winners;
  AttackerList losers;

  // A round with no winners or no losers has an empty likelihood sum.
  bool degenerate() const noexcept { return winners.empty() || losers.empty(); }
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw ArenaError(ErrorCode::kInvalidArgument, std::string(what) + " is not finite");
  }
}

// logistic(x) = 1 / (1 + exp(-x)), evaluated without overflow.
inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

// log(logistic(x)).
inline double log_logistic(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline RankVector rank_thetas(const ThetaMap& thetas) {
  std::vector<std::pair<double, const AttackerId*>> order;
  order.reserve(thetas.size());
  for (const auto& [id, theta] : thetas) order.emplace_back(theta, &id);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  RankVector ranking;
  ranking.reserve(order.size());
  for (const auto& entry : order) ranking.push_back(*entry.second);
  return ranking;
}

}  // namespace detail

// P(i beats j) = exp(theta_i) / (exp(theta_i) + exp(theta_j)), computed as
// logistic(theta_i - theta_j).
inline double pairwise_win_prob(double theta_i, double theta_j) {
  detail::require_finite(theta_i, "theta_i");
  detail::require_finite(theta_j, "theta_j");
  return detail::logistic(theta_i - theta_j);
}

// Per-attacker coefficients plus the trailing window of rank vectors used by
// the stable-ranking stopping rule. A single writer mutates a state; const
// access is safe from any thread.
class RatingState {
 public:
  explicit RatingState(std::span<const AttackerId> roster,
                       std::size_t window = kDefaultConvergenceWindow)
      : window_(window) {
    if (roster.empty()) {
      throw ArenaError(ErrorCode::kInvalidArgument, "roster must be non-empty");
    }
    if (window_ == 0) {
      throw ArenaError(ErrorCode::kInvalidArgument, "convergence window must be positive");
    }
    for (const auto& id : roster) {
      if (!thetas_.emplace(id, 0.0).second) {
        throw ArenaError(ErrorCode::kInvalidArgument,
                         "attacker '" + id.str() + "' appears twice in roster");
      }
    }
  }

  const ThetaMap& thetas() const noexcept { return thetas_; }
  std::size_t round_index() const noexcept { return round_index_; }
  std::size_t window() const noexcept { return window_; }
  const std::deque<RankVector>& rank_history() const noexcept { return rank_history_; }
  bool converged() const noexcept { return converged_; }

  bool contains(const AttackerId& id) const { return thetas_.contains(id); }

  double theta(const AttackerId& id) const {
    auto it = thetas_.find(id);
    if (it == thetas_.end()) {
      throw ArenaError(ErrorCode::kMissingAttacker, "unknown attacker '" + id.str() + "'");
    }
    return it->second;
  }

  // Overwrites one coefficient without advancing the round; for fixtures
  // and warm starts.
  void set_theta(const AttackerId& id, double value) {
    detail::require_finite(value, "theta");
    auto it = thetas_.find(id);
    if (it == thetas_.end()) {
      throw ArenaError(ErrorCode::kMissingAttacker, "unknown attacker '" + id.str() + "'");
    }
    it->second = value;
  }

  // theta_i += eta * gradient_i for every key. On any error the state is left
  // untouched.
  void apply(const Gradient& gradient, double eta) {
    if (!(eta > 0) || !std::isfinite(eta)) {
      throw ArenaError(ErrorCode::kInvalidArgument, "learning rate must be positive and finite");
    }
    std::vector<std::pair<ThetaMap::iterator, double>> staged;
    staged.reserve(gradient.size());
    for (const auto& [id, g] : gradient) {
      auto it = thetas_.find(id);
      if (it == thetas_.end()) {
        throw ArenaError(ErrorCode::kMissingAttacker,
                         "gradient names unknown attacker '" + id.str() + "'");
      }
      const double next = it->second + eta * g;
      if (!std::isfinite(next)) {
        throw ArenaError(ErrorCode::kNumericOverflow,
                         "update for '" + id.str() + "' at round " +
                             std::to_string(round_index_ + 1) + " is not finite");
      }
      staged.emplace_back(it, next);
    }
    for (auto& [it, next] : staged) it->second = next;
    advance();
  }

  // Advances the round counter for a round that produced no likelihood term.
  void skip_round() { advance(); }

 private:
  void advance() {
    ++round_index_;
    rank_history_.push_back(detail::rank_thetas(thetas_));
    while (rank_history_.size() > window_) rank_history_.pop_front();
    converged_ = rank_history_.size() == window_ &&
                 std::all_of(rank_history_.begin(), rank_history_.end(),
                             [&](const RankVector& r) { return r == rank_history_.back(); });
  }

  ThetaMap thetas_;
  std::size_t round_index_ = 0;
  std::size_t window_;
  std::deque<RankVector> rank_history_;
  bool converged_ = false;
};

namespace detail {

inline void validate_partition(const RatingState& state, const RoundPartition& partition) {
  for (const auto* side : {&partition.winners, &partition.losers}) {
    for (const auto& id : *side) {
      if (!state.contains(id)) {
        throw ArenaError(ErrorCode::kMissingAttacker,
                         "partition names unknown attacker '" + id.str() + "'");
      }
    }
  }
  for (const auto& w : partition.winners) {
    if (std::find(partition.losers.begin(), partition.losers.end(), w) !=
        partition.losers.end()) {
      throw ArenaError(ErrorCode::kInvalidArgument,
                       "attacker '" + w.str() + "' is both winner and loser");
    }
  }
}

}  // namespace detail

inline double round_log_likelihood(const RatingState& state, const RoundPartition& partition) {
  detail::validate_partition(state, partition);
  double total = 0.0;
  for (const auto& w : partition.winners) {
    const double tw = state.theta(w);
    for (const auto& l : partition.losers) {
      total += detail::log_logistic(tw - state.theta(l));
    }
  }
  return total;
}

// Gradient of the round log-likelihood with respect to every roster member.
// Attackers outside the partition get 0.
inline Gradient round_gradient(const RatingState& state, const RoundPartition& partition,
                               GradientMode mode = GradientMode::kAnalytic) {
  detail::validate_partition(state, partition);
  Gradient grad;
  for (const auto& [id, theta] : state.thetas()) grad.emplace(id, 0.0);
  for (const auto& w : partition.winners) {
    const double tw = state.theta(w);
    double sum = 0.0;
    for (const auto& l : partition.losers) sum += detail::logistic(state.theta(l) - tw);
    grad.at(w) = sum;
  }
  for (const auto& l : partition.losers) {
    const double tl = state.theta(l);
    double sum = 0.0;
    for (const auto& w : partition.winners) {
      const double tw = state.theta(w);
      sum += mode == GradientMode::kAnalytic ? detail::logistic(tl - tw)
                                             : detail::logistic(tw - tl);
    }
    grad.at(l) = -sum;
  }
  return grad;
}

inline RatingState apply_update(RatingState state, const Gradient& gradient, double eta) {
  state.apply(gradient, eta);
  return state;
}

inline RankVector rank_vector(const RatingState& state) {
  return detail::rank_thetas(state.thetas());
}

// True iff the last r recorded rank vectors exist and are identical. The
// state only retains its own window, so r larger than that is never met.
inline bool check_convergence(const RatingState& state, std::size_t r) {
  if (r < 2) {
    throw ArenaError(ErrorCode::kInvalidArgument, "convergence window must be at least 2");
  }
  const auto& history = state.rank_history();
  if (history.size() < r) return false;
  const auto first = history.end() - static_cast<std::ptrdiff_t>(r);
  return std::all_of(first, history.end(),
                     [&](const RankVector& v) { return v == history.back(); });
}

inline double cumulative_log_likelihood(const RatingState& state,
                                        std::span<const RoundPartition> history) {
  double total = 0.0;
  for (const auto& p : history) total += round_log_likelihood(state, p);
  return total;
}

// Full-batch gradient ascent on the cumulative log-likelihood of a frozen
// history, used to cross-check online estimates. Each epoch steps along the
// mean per-round analytic gradient (same maximiser as the sum, but a step
// size independent of history length) and stops once its Euclidean norm
// drops below `tolerance` or after `max_epochs`. round_index of the result
// counts epochs.
inline RatingState batch_refit(std::span<const RoundPartition> history,
                               std::span<const AttackerId> roster, double eta,
                               std::size_t max_epochs, double tolerance,
                               std::size_t window = kDefaultConvergenceWindow) {
  if (history.empty()) {
    throw ArenaError(ErrorCode::kEmptyInput, "batch refit needs a non-empty history");
  }
  RatingState state(roster, window);
  for (std::size_t t = 0; t < history.size(); ++t) {
    if (history[t].degenerate()) {
      throw ArenaError(ErrorCode::kInvalidArgument,
                       "history round " + std::to_string(t) + " has no winners or no losers");
    }
    detail::validate_partition(state, history[t]);
  }
  const double scale = 1.0 / static_cast<double>(history.size());
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    Gradient mean;
    for (const auto& [id, theta] : state.thetas()) mean.emplace(id, 0.0);
    for (const auto& p : history) {
      for (const auto& [id, g] : round_gradient(state, p, GradientMode::kAnalytic)) {
        mean.at(id) += g * scale;
      }
    }
    double norm_sq = 0.0;
    for (const auto& [id, g] : mean) norm_sq += g * g;
    if (std::sqrt(norm_sq) < tolerance) break;
    state.apply(mean, eta);
  }
  return state;
}

}  // namespace parena

#endif  // PARENA_RATINGS_HPP_
