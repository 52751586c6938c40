// SPDX-License-Identifier: Apache-2.0
//
// txpar: static transaction-parallelism toolkit. Analyzes a block of
// transactions for strong swappability, builds the occurrence net, and
// executes the block serially or in parallel with identical results.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "txpar/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"static transaction parallelism: analyze, schedule and execute blocks"};
  app.require_subcommand(1);

  std::string path;
  std::optional<std::string> out_path;
  bool as_json = false;
  txpar::cli::RunOptions run_options;
  std::size_t workers = 0;
  std::size_t repeat = 10;
  std::uint64_t work_amplify = 0;

  CLI::App* analyze = app.add_subcommand("analyze", "print per-transaction read/write sets and the swappability matrix");
  analyze->add_option("file", path, "block file (txpar-block/1)")->required();

  CLI::App* net = app.add_subcommand("net", "emit the occurrence net as GraphViz DOT");
  net->add_option("file", path, "block file (txpar-block/1)")->required();
  net->add_option("--out", out_path, "write to a file instead of stdout");
  net->add_flag("--json", as_json, "emit the net as JSON instead of DOT");

  CLI::App* run = app.add_subcommand("run", "execute the block and print the final state");
  run->add_option("file", path, "block file (txpar-block/1)")->required();
  run->add_option("--mode", run_options.mode, "serial or parallel")
      ->check(CLI::IsMember({"serial", "parallel"}))
      ->capture_default_str();
  run->add_option("--workers", run_options.workers, "worker threads (default: TXPAR_WORKERS or hardware)");
  run->add_option("--trace", run_options.trace_path, "write the schedule and per-step updates to a JSON file");
  run->add_flag("--fallback-serial", run_options.fallback_serial,
                "rerun the whole block serially if the parallel run conflicts");

  CLI::App* compare = app.add_subcommand("compare", "check that parallel execution equals serial");
  compare->add_option("file", path, "block file (txpar-block/1)")->required();
  compare->add_option("--workers", workers, "worker threads");
  compare->add_option("--repeat", repeat, "number of parallel runs")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench", "time serial vs parallel execution");
  bench->add_option("file", path, "block file (txpar-block/1)")->required();
  bench->add_option("--workers", workers, "worker threads");
  bench->add_option("--repeat", repeat, "measurement rounds")->capture_default_str();
  bench->add_option("--work-amplify", work_amplify, "busy-work cycles added per transaction");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) return txpar::cli::cmd_analyze(path, std::cout, std::cerr);
  if (net->parsed()) return txpar::cli::cmd_net(path, out_path, as_json, std::cout, std::cerr);
  if (run->parsed()) return txpar::cli::cmd_run(path, run_options, std::cout, std::cerr);
  if (compare->parsed()) return txpar::cli::cmd_compare(path, workers, repeat, std::cout, std::cerr);
  if (bench->parsed())
    return txpar::cli::cmd_bench(path, workers, repeat, work_amplify, std::cout, std::cerr);
  return 1;
}
