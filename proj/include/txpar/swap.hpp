// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "txpar/core.hpp"
#include "txpar/platform.hpp"
#include "txpar/rw.hpp"

/// Swappability relations: the pairwise strong-swappability matrix over a
/// block, the sample-based observational oracle, Mazurkiewicz trace
/// equivalence, and the brute-force validator for safe approximations.
namespace txpar {

/// Symmetric irreflexive boolean matrix over block positions (0-based
/// internally; reports render 1-based).
class SwapRelation {
public:
  SwapRelation() = default;
  explicit SwapRelation(std::size_t n) : n_(n), cells_(n * n, false) {}

  std::size_t size() const { return n_; }

  bool related(std::size_t i, std::size_t j) const {
    return i != j && i < n_ && j < n_ && cells_[i * n_ + j];
  }

  void relate(std::size_t i, std::size_t j, bool value = true) {
    if (i == j || i >= n_ || j >= n_) return;
    cells_[i * n_ + j] = value;
    cells_[j * n_ + i] = value;
  }

  /// All related pairs (i, j) with i < j, in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (related(i, j)) out.emplace_back(i, j);
    return out;
  }

  bool operator==(const SwapRelation&) const = default;

private:
  std::size_t n_ = 0;
  std::vector<bool> cells_;
};

/// Relation plus the per-transaction sets it was derived from and the
/// positions whose analysis fell back to the trivially safe pair.
struct SwapAnalysis {
  SwapRelation relation;
  std::vector<RwSets> sets;
  std::vector<std::size_t> flagged;
};

/// Builds the strong-swappability matrix for a block from a per-position
/// analysis. A transaction whose analysis yields the trivially safe pair
/// gets an all-false row (conservatively dependent) and is flagged.
inline SwapAnalysis build_swap_relation(
    const Blockchain& block,
    const std::function<RwSets(std::size_t, const Transaction&)>& analysis) {
  SwapAnalysis out;
  const std::size_t n = block.size();
  out.relation = SwapRelation(n);
  out.sets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.sets.push_back(analysis(i, block[i]));
    if (out.sets.back().top) out.flagged.push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out.relation.relate(i, j, strong_swap(out.sets[i], out.sets[j]));
  return out;
}

inline SwapAnalysis build_swap_relation(const Blockchain& block,
                                        const PlatformSemantics& platform) {
  return build_swap_relation(
      block, [&](std::size_t, const Transaction& tx) { return analyze_transaction(tx, platform); });
}

/// Verdict of the observational swappability oracle. The positive answer
/// is only relative to the states it was given.
struct SwapVerdict {
  bool swappable_on_sample = false;
  std::optional<BlockchainState> witness;  // a state where the two orders diverge
};

/// Executes both orders of two transactions from every supplied state and
/// reports either agreement on the whole sample or a counterexample
/// state. Exhaustive exactly when the sample enumerates all states of
/// interest (e.g. the reachable states of a small fixture).
inline SwapVerdict swap_oracle(const Transaction& t1, const Transaction& t2,
                               const std::vector<BlockchainState>& states,
                               const PlatformSemantics& platform) {
  for (const BlockchainState& state : states) {
    const BlockchainState first = platform.apply(platform.apply(state, t1), t2);
    const BlockchainState second = platform.apply(platform.apply(state, t2), t1);
    if (!(first == second)) return {false, state};
  }
  return {true, std::nullopt};
}

/// All states reachable from `initial` by applying sequences over
/// `universe` (breadth-first closure; finite whenever the transition
/// system is, as with spend-once UTXO fixtures and guarded contracts).
inline std::vector<BlockchainState> reachable_states(const BlockchainState& initial,
                                                     const Blockchain& universe,
                                                     const PlatformSemantics& platform,
                                                     std::size_t limit = 100000) {
  std::vector<BlockchainState> out{initial};
  std::set<BlockchainState::Map> seen{initial.bindings()};
  for (std::size_t next = 0; next < out.size(); ++next) {
    const BlockchainState current = out[next];
    for (const Transaction& tx : universe) {
      BlockchainState successor = platform.apply(current, tx);
      if (seen.insert(successor.bindings()).second) {
        out.push_back(std::move(successor));
        if (out.size() > limit) return out;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mazurkiewicz trace equivalence.

/// Word over an alphabet of letters 0..k-1 (letters may repeat).
using Word = std::vector<std::size_t>;

namespace detail {

inline Word project(const Word& w, std::size_t a, std::size_t b) {
  Word out;
  for (std::size_t letter : w)
    if (letter == a || letter == b) out.push_back(letter);
  return out;
}

}  // namespace detail

/// Trace equivalence of two words under an independence relation: equal
/// letter multisets, and identical projections onto every dependent pair.
inline bool mazurkiewicz_equiv(const Word& w1, const Word& w2, const SwapRelation& indep) {
  if (w1.size() != w2.size()) return false;
  std::map<std::size_t, std::size_t> count;
  for (std::size_t letter : w1) ++count[letter];
  for (std::size_t letter : w2) {
    auto it = count.find(letter);
    if (it == count.end() || it->second == 0) return false;
    --it->second;
  }
  std::set<std::size_t> letters(w1.begin(), w1.end());
  for (auto a = letters.begin(); a != letters.end(); ++a)
    for (auto b = std::next(a); b != letters.end(); ++b) {
      if (indep.related(*a, *b)) continue;
      if (detail::project(w1, *a, *b) != detail::project(w2, *a, *b)) return false;
    }
  return true;
}

/// The full equivalence class of a word: closure under swapping adjacent
/// independent letters. Sorted for deterministic comparison. Empty result
/// when the class exceeds `limit`.
inline std::vector<Word> trace_class(const Word& word, const SwapRelation& indep,
                                     std::size_t limit = 10000) {
  std::set<Word> seen{word};
  std::vector<Word> frontier{word};
  while (!frontier.empty()) {
    Word current = std::move(frontier.back());
    frontier.pop_back();
    for (std::size_t i = 0; i + 1 < current.size(); ++i) {
      if (!indep.related(current[i], current[i + 1])) continue;
      Word swapped = current;
      std::swap(swapped[i], swapped[i + 1]);
      if (seen.insert(swapped).second) {
        if (seen.size() > limit) return {};
        frontier.push_back(std::move(swapped));
      }
    }
  }
  return {seen.begin(), seen.end()};
}

// ---------------------------------------------------------------------------
// Brute-force validation of safe approximations.

enum class ApproxMode { Read, Write };

struct ApproxCheck {
  enum class Outcome { Safe, Unsafe, Refused };
  Outcome outcome = Outcome::Safe;
  std::optional<BlockchainState> witness_state;
  std::optional<BlockchainState> witness_other;  // read mode: second state of the pair
  std::optional<Observable> witness_observable;

  bool safe() const { return outcome == Outcome::Safe; }
};

/// Checks by brute force that `q` is a safe approximation for `tx` over
/// an enumerated state space.
///
/// Write mode: applying the transaction never changes an observable
/// outside `q`. Read mode: for every pair of states agreeing on `q`,
/// applying the transaction preserves every agreement the pair already
/// had. States should satisfy the platform's validity constraints.
/// Refuses state spaces larger than `bound`.
inline ApproxCheck check_safe_approx(const std::set<Observable>& q, const Transaction& tx,
                                     ApproxMode mode, const std::vector<BlockchainState>& states,
                                     const PlatformSemantics& platform, std::size_t bound = 4096) {
  ApproxCheck result;
  if (states.size() > bound) {
    result.outcome = ApproxCheck::Outcome::Refused;
    return result;
  }

  auto observables_of = [](const BlockchainState& a, const BlockchainState& b) {
    std::set<Observable> universe;
    for (const auto& [obs, v] : a.bindings()) universe.insert(obs);
    for (const auto& [obs, v] : b.bindings()) universe.insert(obs);
    return universe;
  };

  if (mode == ApproxMode::Write) {
    for (const BlockchainState& state : states) {
      const BlockchainState after = platform.apply(state, tx);
      for (const Observable& obs : observables_of(state, after)) {
        if (q.count(obs) != 0) continue;
        if (state.get(obs) != after.get(obs)) {
          result.outcome = ApproxCheck::Outcome::Unsafe;
          result.witness_state = state;
          result.witness_observable = obs;
          return result;
        }
      }
    }
    return result;
  }

  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i; j < states.size(); ++j) {
      const BlockchainState& s1 = states[i];
      const BlockchainState& s2 = states[j];
      if (!obs_equiv(s1, s2, q)) continue;
      const BlockchainState a1 = platform.apply(s1, tx);
      const BlockchainState a2 = platform.apply(s2, tx);
      std::set<Observable> universe = observables_of(s1, s2);
      for (const auto& [obs, v] : a1.bindings()) universe.insert(obs);
      for (const auto& [obs, v] : a2.bindings()) universe.insert(obs);
      for (const Observable& obs : universe) {
        if (s1.get(obs) != s2.get(obs)) continue;  // agreement set before
        if (a1.get(obs) != a2.get(obs)) {
          result.outcome = ApproxCheck::Outcome::Unsafe;
          result.witness_state = s1;
          result.witness_other = s2;
          result.witness_observable = obs;
          return result;
        }
      }
    }
  }
  return result;
}

}  // namespace txpar
