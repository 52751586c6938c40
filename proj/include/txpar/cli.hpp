// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "txpar/blockfile.hpp"
#include "txpar/exec.hpp"
#include "txpar/net.hpp"
#include "txpar/swap.hpp"

/// Command implementations behind the txpar tool. Kept separate from the
/// argv front end so tests can drive them directly.
namespace txpar::cli {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitIo = 3;
constexpr int kExitConflict = 4;
constexpr int kExitMismatch = 5;

inline std::size_t default_workers() {
  if (const char* env = std::getenv("TXPAR_WORKERS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed > 0) return static_cast<std::size_t>(parsed);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 2 : hw;
}

/// Test hook: marks one pair of positions mutually independent in the
/// analysis, regardless of their real sets. Lets the compare command
/// demonstrate that it detects an unsound analysis.
inline std::optional<std::pair<std::size_t, std::size_t>> corrupt_analysis_hook() {
  const char* env = std::getenv("TXPAR_CORRUPT_ANALYSIS");
  if (env == nullptr) return std::nullopt;
  std::istringstream in(env);
  std::size_t i = 0, j = 0;
  char comma = 0;
  if (!(in >> i >> comma >> j) || comma != ',' || i == 0 || j == 0) return std::nullopt;
  return std::make_pair(i - 1, j - 1);
}

inline std::function<RwSets(std::size_t, const Transaction&)> analysis_for(
    const LoadedBlock& loaded) {
  auto corrupt = corrupt_analysis_hook();
  const PlatformSemantics* platform = loaded.platform.get();
  return [platform, corrupt](std::size_t position, const Transaction& tx) {
    if (corrupt && (position == corrupt->first || position == corrupt->second))
      return RwSets{};  // empty sets: swappable with everything
    return analyze_transaction(tx, *platform);
  };
}

inline std::optional<LoadedBlock> load_path(const std::string& path, std::ostream& err,
                                            int& exit_code) {
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot open '" << path << "'\n";
    exit_code = kExitIo;
    return std::nullopt;
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    err << "error: " << path << " is not valid JSON: " << e.what() << "\n";
    exit_code = kExitSchema;
    return std::nullopt;
  }
  try {
    return load_block(parse_block_file(j));
  } catch (const ParseError& e) {
    err << "error: " << path << ": " << e.what() << "\n";
    exit_code = kExitSchema;
    return std::nullopt;
  }
}

inline std::string format_pattern_set(const std::set<ObsPattern>& patterns) {
  std::string out = "{";
  bool first = true;
  for (const ObsPattern& p : patterns) {
    if (!first) out += ", ";
    out += to_string(p);
    first = false;
  }
  return out + "}";
}

/// Per-transaction R/W sets and the strong-swappability matrix.
inline int cmd_analyze(const std::string& path, std::ostream& out, std::ostream& err) {
  int exit_code = kExitOk;
  auto loaded = load_path(path, err, exit_code);
  if (!loaded) return exit_code;

  const SwapAnalysis analysis = build_swap_relation(loaded->block, analysis_for(*loaded));
  for (std::size_t i = 0; i < loaded->block.size(); ++i) {
    out << "tx " << (i + 1) << " " << loaded->labels[i] << ": ";
    if (analysis.sets[i].top) {
      out << "analysis fallback (reads/writes unknown, treated as everything)\n";
      continue;
    }
    out << "R = " << format_pattern_set(analysis.sets[i].reads)
        << ", W = " << format_pattern_set(analysis.sets[i].writes) << "\n";
  }
  out << "swappable pairs:";
  for (const auto& [i, j] : analysis.relation.pairs()) out << " (" << (i + 1) << "," << (j + 1) << ")";
  out << "\n";
  const std::size_t n = loaded->block.size();
  out << "matrix:\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << "  ";
    for (std::size_t j = 0; j < n; ++j)
      out << (i == j ? '-' : analysis.relation.related(i, j) ? '1' : '0');
    out << "\n";
  }
  if (!analysis.flagged.empty()) {
    out << "flagged:";
    for (std::size_t i : analysis.flagged) out << " " << (i + 1);
    out << "\n";
  }
  return kExitOk;
}

/// Occurrence net as deterministic DOT (or JSON with as_json).
inline int cmd_net(const std::string& path, const std::optional<std::string>& out_path,
                   bool as_json, std::ostream& out, std::ostream& err) {
  int exit_code = kExitOk;
  auto loaded = load_path(path, err, exit_code);
  if (!loaded) return exit_code;

  const SwapAnalysis analysis = build_swap_relation(loaded->block, analysis_for(*loaded));
  const PetriNet net = build_net(loaded->labels, analysis.relation);
  const std::string rendered = as_json ? net_to_json(net).dump(2) + "\n" : export_dot(net);
  if (out_path) {
    std::ofstream file(*out_path);
    if (!file || !(file << rendered) || !file.flush()) {
      err << "error: cannot write '" << *out_path << "'\n";
      return kExitIo;
    }
    return kExitOk;
  }
  out << rendered;
  return kExitOk;
}

struct RunOptions {
  std::string mode = "parallel";  // serial | parallel
  std::size_t workers = 0;        // 0: default
  std::optional<std::string> trace_path;
  bool fallback_serial = false;
};

/// Executes the block and prints the canonical final-state JSON. Serial
/// and parallel modes print identical output for identical inputs.
inline int cmd_run(const std::string& path, const RunOptions& options, std::ostream& out,
                   std::ostream& err) {
  int exit_code = kExitOk;
  auto loaded = load_path(path, err, exit_code);
  if (!loaded) return exit_code;

  BlockchainState final_state;
  if (options.mode == "serial") {
    if (options.trace_path) err << "note: --trace applies to parallel runs only\n";
    final_state = exec_serial(loaded->block, loaded->initial, *loaded->platform);
  } else {
    ParallelOptions parallel;
    parallel.capture_trace = options.trace_path.has_value();
    const std::size_t workers = options.workers == 0 ? default_workers() : options.workers;
    auto result = exec_parallel(loaded->block, loaded->initial, *loaded->platform,
                                analysis_for(*loaded), workers, parallel);
    if (const auto* conflict = std::get_if<ParallelConflict>(&result)) {
      if (!options.fallback_serial) {
        err << "conflict: overlapping updates on " << to_string(conflict->witness) << " in step "
            << (conflict->step_index + 1) << "\n";
        return kExitConflict;
      }
      err << "conflict on " << to_string(conflict->witness) << "; falling back to serial\n";
      final_state = exec_serial(loaded->block, loaded->initial, *loaded->platform);
    } else {
      auto& parallel_result = std::get<ParallelResult>(result);
      final_state = parallel_result.state;
      if (options.trace_path) {
        std::ofstream file(*options.trace_path);
        if (!file || !(file << trace_to_json(parallel_result.trace).dump(2) << "\n")) {
          err << "error: cannot write '" << *options.trace_path << "'\n";
          return kExitIo;
        }
      }
    }
  }
  out << state_to_json(final_state).dump(2) << "\n";
  return kExitOk;
}

/// Runs serial once and parallel `repeat` times and demands bit-exact
/// agreement of the final states.
inline int cmd_compare(const std::string& path, std::size_t workers, std::size_t repeat,
                       std::ostream& out, std::ostream& err) {
  int exit_code = kExitOk;
  auto loaded = load_path(path, err, exit_code);
  if (!loaded) return exit_code;
  if (workers == 0) workers = default_workers();
  if (repeat == 0) repeat = 1;

  const BlockchainState serial = exec_serial(loaded->block, loaded->initial, *loaded->platform);
  for (std::size_t round = 0; round < repeat; ++round) {
    auto result = exec_parallel(loaded->block, loaded->initial, *loaded->platform,
                                analysis_for(*loaded), workers);
    if (const auto* conflict = std::get_if<ParallelConflict>(&result)) {
      err << "mismatch: parallel run " << (round + 1) << " hit a conflict on "
          << to_string(conflict->witness) << "\n";
      return kExitMismatch;
    }
    if (!(std::get<ParallelResult>(result).state == serial)) {
      err << "mismatch: parallel run " << (round + 1) << " differs from serial execution\n";
      return kExitMismatch;
    }
  }
  out << "serial and parallel agree (" << repeat << " parallel run(s), " << workers
      << " worker(s))\n";
  return kExitOk;
}

/// Wall-clock comparison of serial and parallel execution, with optional
/// per-transaction busy work emulating heavier contracts.
inline int cmd_bench(const std::string& path, std::size_t workers, std::size_t repeat,
                     std::uint64_t work_amplify, std::ostream& out, std::ostream& err) {
  int exit_code = kExitOk;
  auto loaded = load_path(path, err, exit_code);
  if (!loaded) return exit_code;
  if (workers == 0) workers = default_workers();
  if (repeat == 0) repeat = 1;

  using Clock = std::chrono::steady_clock;
  auto millis_since = [](Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  double serial_ms = 0.0;
  double analysis_net_ms = 0.0;
  double parallel_ms = 0.0;
  BlockchainState serial_state;
  for (std::size_t round = 0; round < repeat; ++round) {
    const auto serial_start = Clock::now();
    serial_state =
        exec_serial_amplified(loaded->block, loaded->initial, *loaded->platform, work_amplify);
    serial_ms += millis_since(serial_start);

    const auto analysis_start = Clock::now();
    const SwapAnalysis analysis = build_swap_relation(loaded->block, analysis_for(*loaded));
    const PetriNet net = build_net(loaded->labels, analysis.relation);
    analysis_net_ms += millis_since(analysis_start);
    (void)net;

    ParallelOptions parallel;
    parallel.work_amplify = work_amplify;
    const auto parallel_start = Clock::now();
    auto result = exec_parallel(loaded->block, loaded->initial, *loaded->platform,
                                analysis_for(*loaded), workers, parallel);
    parallel_ms += millis_since(parallel_start);
    if (const auto* conflict = std::get_if<ParallelConflict>(&result)) {
      err << "conflict during bench on " << to_string(conflict->witness) << "\n";
      return kExitConflict;
    }
    if (!(std::get<ParallelResult>(result).state == serial_state)) {
      err << "mismatch between serial and parallel states during bench\n";
      return kExitMismatch;
    }
  }
  serial_ms /= static_cast<double>(repeat);
  analysis_net_ms /= static_cast<double>(repeat);
  parallel_ms /= static_cast<double>(repeat);

  out << std::fixed << std::setprecision(3);
  out << "transactions     " << loaded->block.size() << "\n";
  out << "workers          " << workers << "\n";
  out << "serial_ms        " << serial_ms << "\n";
  out << "analysis_net_ms  " << analysis_net_ms << "\n";
  out << "parallel_ms      " << parallel_ms << "\n";
  out << "speedup          " << (parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0) << "\n";
  return kExitOk;
}

}  // namespace txpar::cli
