#ifndef PARENA_ATTACKER_ID_HPP_
#define PARENA_ATTACKER_ID_HPP_

#include <algorithm>
#include <compare>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "parena/error.hpp"

namespace parena {

// Separator used by canonical subset keys. Ids may not contain it, which
// keeps the key injective over subsets.
inline constexpr char kSubsetKeySeparator = '|';

// Opaque, non-empty identifier for one attack method. Ordered
// lexicographically; that order is the deterministic tie-break everywhere.
class AttackerId {
 public:
  AttackerId() = delete;
  explicit AttackerId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) {
      throw ArenaError(ErrorCode::kInvalidArgument, "attacker id must be non-empty");
    }
    if (value_.find(kSubsetKeySeparator) != std::string::npos) {
      throw ArenaError(ErrorCode::kInvalidArgument,
                       "attacker id '" + value_ + "' contains reserved separator '|'");
    }
  }

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const AttackerId&, const AttackerId&) = default;
  friend bool operator==(const AttackerId&, const AttackerId&) = default;

  friend std::ostream& operator<<(std::ostream& os, const AttackerId& id) {
    return os << id.value_;
  }

 private:
  std::string value_;
};

using AttackerList = std::vector<AttackerId>;

inline AttackerList make_ids(std::initializer_list<std::string_view> names) {
  AttackerList out;
  out.reserve(names.size());
  for (auto n : names) out.emplace_back(std::string(n));
  return out;
}

// Sorted ids joined by '|'. Order-insensitive; duplicates are rejected
// because a subset cannot name the same attacker twice.
inline std::string canonical_subset_key(std::span<const AttackerId> subset) {
  AttackerList sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArenaError(ErrorCode::kInvalidArgument, "subset lists an attacker twice");
  }
  std::string key;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) key += kSubsetKeySeparator;
    key += sorted[i].str();
  }
  return key;
}

}  // namespace parena

template <>
struct std::hash<parena::AttackerId> {
  std::size_t operator()(const parena::AttackerId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

#endif  // PARENA_ATTACKER_ID_HPP_
