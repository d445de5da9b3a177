// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coreagent/action.hpp"

namespace coreagent::runtime {

/// The device the agent drives.
class Environment {
 public:
  virtual ~Environment() = default;
  /// Current UI hierarchy dump.
  virtual std::string capture() = 0;
  virtual void execute(const Action& action) = 0;
};

/// Serves screens from a recorded task directory:
///   screens/NNN.xml, transitions.tsv (screen_from <TAB> action <TAB> screen_to).
/// Actions follow the recorded transition graph. Unrecorded scroll/launch
/// actions leave the screen unchanged; other unrecorded actions raise
/// ReplayDivergence in strict mode and are ignored in lenient mode.
class TraceReplayEnv final : public Environment {
 public:
  struct Transition {
    std::string action;  // canonical form
    std::string to;
  };

  TraceReplayEnv(const std::filesystem::path& task_dir, std::string initial_screen, bool strict = true);

  std::string capture() override;
  void execute(const Action& action) override;

  [[nodiscard]] const std::string& current_screen() const { return current_; }
  [[nodiscard]] int divergences() const { return divergences_; }

 private:
  std::map<std::string, std::string> screens_;  // id -> xml
  std::map<std::string, std::vector<Transition>> transitions_;
  std::string current_;
  bool strict_;
  int divergences_ = 0;
};

std::map<std::string, std::vector<TraceReplayEnv::Transition>> read_transitions(const std::filesystem::path& file);

/// Byte stream to an external device controller.
class BridgeChannel {
 public:
  virtual ~BridgeChannel() = default;
  virtual void write_all(const std::string& data) = 0;
  /// Reads one '\n'-terminated line (terminator stripped). Throws BridgeTimeout.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
  /// Reads exactly n bytes. Throws BridgeTimeout.
  virtual std::string read_bytes(std::size_t n, std::chrono::milliseconds timeout) = 0;
};

/// Runs `/bin/sh -c command` and talks to it over its stdin/stdout.
std::unique_ptr<BridgeChannel> spawn_bridge_process(const std::string& command);
/// Connects to a controller listening on host:port.
std::unique_ptr<BridgeChannel> connect_bridge_tcp(const std::string& host, int port);

/// Forwards actions as newline-delimited commands:
///   CAPTURE | TAP x y | LONGTAP x y | INPUT x y <base64> | SCROLL dir | LAUNCH pkg
/// Replies: "OK" (actions), "OK <nbytes>" followed by the dump (CAPTURE), or
/// "ERR <message>".
class CommandBridgeEnv final : public Environment {
 public:
  explicit CommandBridgeEnv(std::unique_ptr<BridgeChannel> channel,
                            std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::string capture() override;
  void execute(const Action& action) override;

  /// Protocol line for an action (coordinates must already be resolved).
  static std::string command_line(const Action& action);

 private:
  std::string expect_ok();

  std::unique_ptr<BridgeChannel> channel_;
  std::chrono::milliseconds timeout_;
};

}  // namespace coreagent::runtime
