// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coreagent/error.hpp"
#include "coreagent/gateway.hpp"
#include "coreagent/runtime.hpp"
#include "coreagent/task.hpp"

namespace coreagent::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDivergence = 2;  // replay divergence or script miss
inline constexpr int kBackend = 3;     // model backend or device failure
inline constexpr int kSchema = 4;      // malformed inputs or run directories
}  // namespace exit_code

int exit_code_for(ErrorKind kind);
/// Maps a trace error-kind label back to an exit code; 0 for empty.
int exit_code_for_label(const std::string& label);

enum class EnvKind { Replay, BridgeProcess, BridgeTcp };

struct EnvOptions {
  EnvKind kind = EnvKind::Replay;
  bool strict = true;
  std::string bridge_command;
  std::string host = "127.0.0.1";
  int port = 0;
  int timeout_ms = 30000;
};

using EnvFactory =
    std::function<std::unique_ptr<runtime::Environment>(const std::filesystem::path& task_dir, const TaskSpec& spec)>;

EnvFactory make_env_factory(const EnvOptions& options);

struct HarnessResult {
  std::vector<runtime::Trace> traces;  // sorted by task id
  int exit_code = exit_code::kOk;
};

/// Runs every task under tasks_dir (jobs in parallel, each with its own
/// environment) and writes the run directory. Output does not depend on jobs.
HarnessResult run_harness(const std::filesystem::path& tasks_dir, const std::filesystem::path& out_dir,
                          const llm::Gateway& gateway, const runtime::RunConfig& cfg, const EnvFactory& env_factory,
                          int jobs);

// ---------------------------------------------------------------------------
// Subcommands. Each returns a process exit code and throws Error on bad input.

struct PartitionArgs {
  std::filesystem::path dump;
  int max_blocks = 0;
  int threshold = 3;
  bool json = false;
};
int cmd_partition(const PartitionArgs& args, std::ostream& out);

struct CommonRunArgs {
  std::filesystem::path tasks_dir;
  std::filesystem::path out_dir;
  std::string mode;  // empty: config file or "core"
  std::optional<int> step_limit;
  std::optional<int> max_scrolls;
  std::optional<int> max_blocks;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> on_giveup;
  int jobs = 1;
  std::filesystem::path config;  // optional gateway/run config JSON
  bool lenient = false;
};

/// Builds the run configuration: defaults, then the config file's "run"
/// object, then explicit flags.
runtime::RunConfig resolve_run_config(const CommonRunArgs& args);

struct RunArgs {
  CommonRunArgs common;
  EnvOptions env;
  /// When set, every model exchange is saved as a replayable script manifest here.
  std::filesystem::path record_scripts;
};
int cmd_run(const RunArgs& args, std::ostream& out);

struct ReplayArgs {
  CommonRunArgs common;
  std::filesystem::path scripts;
  /// Lenient mode only: unmatched requests are written here as a manifest.
  std::filesystem::path record_misses;
};
int cmd_replay(const ReplayArgs& args, std::ostream& out);

struct EvalArgs {
  std::filesystem::path baseline;
  std::filesystem::path ours;
  std::optional<std::filesystem::path> oracle_dir;
  std::filesystem::path json_out;
  std::filesystem::path rules;
  /// "rules" (default) or "llm" (needs config with a cloud backend).
  std::string classifier = "rules";
  std::filesystem::path config;
};
int cmd_eval(const EvalArgs& args, std::ostream& out);

int cmd_report(const std::filesystem::path& report_json, std::ostream& out);

/// Runs fn, printing any Error to err and translating it to an exit code.
int guarded(const std::function<int()>& fn, std::ostream& err);

}  // namespace coreagent::cli
