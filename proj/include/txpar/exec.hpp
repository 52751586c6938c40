// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "txpar/core.hpp"
#include "txpar/net.hpp"
#include "txpar/platform.hpp"
#include "txpar/swap.hpp"

/// Concurrent execution of a block: update collectors, disjoint merge,
/// step semantics, the greedy maximal-step scheduler, and the worker-pool
/// executor whose final state must always equal the serial one.
namespace txpar {

/// Produces, for (state, transaction), an update whose application
/// reproduces the transaction's semantics:
/// apply_update(s, collect(s, tx)) == platform.apply(s, tx).
class UpdateCollector {
public:
  virtual ~UpdateCollector() = default;
  virtual StateUpdate collect(const BlockchainState& state, const Transaction& tx) const = 0;
};

/// The least collector: the state difference induced by the transaction,
/// binding exactly the changed observables.
class LeastCollector final : public UpdateCollector {
public:
  explicit LeastCollector(const PlatformSemantics& platform) : platform_(&platform) {}

  StateUpdate collect(const BlockchainState& state, const Transaction& tx) const override {
    return state_diff(platform_->apply(state, tx), state);
  }

private:
  const PlatformSemantics* platform_;
};

inline StateUpdate least_collector(const BlockchainState& state, const Transaction& tx,
                                   const PlatformSemantics& platform) {
  return LeastCollector(platform).collect(state, tx);
}

/// Overlapping update domains make the merge undefined; the conflict
/// carries one witnessing observable. A conflict signals an unsound
/// analysis or a scheduler bug, so parallel runs must abort on it.
struct MergeConflict {
  Observable witness;
};

inline std::variant<StateUpdate, MergeConflict> merge_updates(std::span<const StateUpdate> updates) {
  StateUpdate merged;
  for (const StateUpdate& update : updates)
    for (const auto& [obs, v] : update.bindings()) {
      if (merged.binds(obs)) return MergeConflict{obs};
      merged.bind(obs, v);
    }
  return merged;
}

inline std::variant<StateUpdate, MergeConflict> merge_updates(
    const std::vector<StateUpdate>& updates) {
  return merge_updates(std::span<const StateUpdate>(updates));
}

/// Semantics of one step: every member's update is collected against the
/// same snapshot, the updates are merged, and the merge is applied once.
inline std::variant<BlockchainState, MergeConflict> exec_step(const BlockchainState& state,
                                                              const Blockchain& block,
                                                              const Step& step,
                                                              const UpdateCollector& collector) {
  std::vector<StateUpdate> updates;
  updates.reserve(step.size());
  for (std::size_t t : step) updates.push_back(collector.collect(state, block[t]));
  auto merged = merge_updates(updates);
  if (const auto* conflict = std::get_if<MergeConflict>(&merged)) return *conflict;
  return apply_update(state, std::get<StateUpdate>(merged));
}

/// Left fold of exec_step; the empty sequence is the identity.
inline std::variant<BlockchainState, MergeConflict> exec_step_sequence(
    const BlockchainState& state, const Blockchain& block, const std::vector<Step>& seq,
    const UpdateCollector& collector) {
  BlockchainState current = state;
  for (const Step& step : seq) {
    auto next = exec_step(current, block, step, collector);
    if (const auto* conflict = std::get_if<MergeConflict>(&next)) return *conflict;
    current = std::get<BlockchainState>(std::move(next));
  }
  return current;
}

/// Greedy maximal-step schedule: repeatedly fires the set of all
/// currently enabled transitions as one step until the net drains.
/// Deterministic (enabled sets are in canonical order), and always a
/// valid maximal step firing sequence on built nets, which are acyclic.
inline std::vector<Step> schedule_greedy(const PetriNet& net) {
  std::vector<Step> schedule;
  Marking marking = net.initial_marking();
  std::vector<bool> fired(net.transition_count(), false);
  std::size_t remaining = net.transition_count();
  while (remaining > 0) {
    Step step;
    for (std::size_t t = 0; t < net.transition_count(); ++t)
      if (!fired[t] && is_enabled(net, marking, {t})) step.push_back(t);
    if (step.empty()) throw std::logic_error("schedule_greedy: net does not drain");
    marking = fire(net, marking, step);
    for (std::size_t t : step) fired[t] = true;
    remaining -= step.size();
    schedule.push_back(std::move(step));
  }
  return schedule;
}

/// Per-transaction wall-clock figures for one step (milliseconds), plus
/// the coordinator's merge-and-apply time.
struct StepTiming {
  std::vector<std::pair<std::size_t, double>> tx_millis;  // (position index, elapsed)
  double merge_millis = 0.0;
};

/// Schedule plus the updates collected per step; serializable for the
/// CLI's trace output.
struct ExecTrace {
  std::vector<Step> schedule;
  std::vector<std::vector<std::pair<std::size_t, StateUpdate>>> step_updates;
};

struct ParallelResult {
  BlockchainState state;
  std::vector<Step> schedule;
  std::vector<StepTiming> timings;
  ExecTrace trace;
};

struct ParallelConflict {
  Observable witness;
  std::size_t step_index = 0;
};

struct ParallelOptions {
  std::uint64_t work_amplify = 0;  // busy-work cycles added per transaction
  bool capture_trace = false;
  std::size_t max_block = 4096;
};

namespace detail {

/// Deterministic busy work emulating heavier transaction bodies; the
/// result is discarded but kept observable so the loop survives -O2.
inline void amplify_work(std::uint64_t cycles) {
  volatile std::uint64_t acc = 0x9e3779b97f4a7c15ull;
  for (std::uint64_t i = 0; i < cycles; ++i) acc = acc * 6364136223846793005ull + 1442695040888963407ull;
}

}  // namespace detail

/// Full pipeline: analysis -> relation -> net -> greedy schedule, then
/// per-step execution where transactions run against an immutable
/// snapshot on up to `workers` threads and a single coordinator merges.
/// The final state equals exec_serial on the same block whenever the
/// supplied analysis is sound; a conflict aborts the run.
inline std::variant<ParallelResult, ParallelConflict> exec_parallel(
    const Blockchain& block, const BlockchainState& state, const PlatformSemantics& platform,
    const std::function<RwSets(std::size_t, const Transaction&)>& analysis, std::size_t workers,
    const ParallelOptions& options = {}) {
  if (workers == 0) workers = 1;
  const SwapAnalysis swap = build_swap_relation(block, analysis);
  const PetriNet net = build_net(block, swap.relation, options.max_block);
  const std::vector<Step> schedule = schedule_greedy(net);

  ParallelResult result;
  result.schedule = schedule;
  result.trace.schedule = schedule;
  BlockchainState current = state;

  using Clock = std::chrono::steady_clock;
  for (std::size_t step_index = 0; step_index < schedule.size(); ++step_index) {
    const Step& step = schedule[step_index];
    std::vector<StateUpdate> updates(step.size());
    std::vector<double> elapsed(step.size(), 0.0);

    const std::size_t lanes = std::min(workers, step.size());
    auto run_lane = [&](std::size_t lane) {
      // Round-robin assignment in canonical order.
      for (std::size_t slot = lane; slot < step.size(); slot += lanes) {
        const auto start = Clock::now();
        updates[slot] = least_collector(current, block[step[slot]], platform);
        detail::amplify_work(options.work_amplify);
        elapsed[slot] =
            std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      }
    };
    if (lanes <= 1) {
      run_lane(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(lanes);
      for (std::size_t lane = 0; lane < lanes; ++lane) pool.emplace_back(run_lane, lane);
      for (std::thread& worker : pool) worker.join();
    }

    const auto merge_start = Clock::now();
    auto merged = merge_updates(updates);
    if (const auto* conflict = std::get_if<MergeConflict>(&merged))
      return ParallelConflict{conflict->witness, step_index};
    current = apply_update(current, std::get<StateUpdate>(merged));

    StepTiming timing;
    timing.merge_millis =
        std::chrono::duration<double, std::milli>(Clock::now() - merge_start).count();
    for (std::size_t slot = 0; slot < step.size(); ++slot)
      timing.tx_millis.emplace_back(step[slot], elapsed[slot]);
    result.timings.push_back(std::move(timing));

    if (options.capture_trace) {
      std::vector<std::pair<std::size_t, StateUpdate>> recorded;
      recorded.reserve(step.size());
      for (std::size_t slot = 0; slot < step.size(); ++slot)
        recorded.emplace_back(step[slot], updates[slot]);
      result.trace.step_updates.push_back(std::move(recorded));
    }
  }

  result.state = std::move(current);
  return result;
}

inline std::variant<ParallelResult, ParallelConflict> exec_parallel(
    const Blockchain& block, const BlockchainState& state, const PlatformSemantics& platform,
    std::size_t workers, const ParallelOptions& options = {}) {
  return exec_parallel(
      block, state, platform,
      [&](std::size_t, const Transaction& tx) { return analyze_transaction(tx, platform); },
      workers, options);
}

/// Serial execution with the same per-transaction busy work the parallel
/// path applies; the benchmark baseline.
inline BlockchainState exec_serial_amplified(const Blockchain& block, const BlockchainState& state,
                                             const PlatformSemantics& platform,
                                             std::uint64_t work_amplify) {
  BlockchainState current = state;
  for (const Transaction& tx : block) {
    current = platform.apply(current, tx);
    detail::amplify_work(work_amplify);
  }
  return current;
}

}  // namespace txpar
