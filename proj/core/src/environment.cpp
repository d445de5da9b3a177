// SPDX-License-Identifier: Apache-2.0

#include "coreagent/environment.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coreagent/digest.hpp"
#include "coreagent/error.hpp"

namespace coreagent::runtime {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::EnvironmentFailure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::map<std::string, std::vector<TraceReplayEnv::Transition>> read_transitions(const fs::path& file) {
  std::map<std::string, std::vector<TraceReplayEnv::Transition>> out;
  if (!fs::exists(file)) return out;
  std::ifstream in(file);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error(ErrorKind::SchemaMismatch, file.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    }
    const std::string from = line.substr(0, t1);
    if (lineno == 1 && from == "screen_from") continue;
    // Round-trip through the parser so spelling variants compare equal.
    const std::string action = canonical(parse_action(line.substr(t1 + 1, t2 - t1 - 1)));
    out[from].push_back({action, line.substr(t2 + 1)});
  }
  return out;
}

TraceReplayEnv::TraceReplayEnv(const fs::path& task_dir, std::string initial_screen, bool strict)
    : current_(std::move(initial_screen)), strict_(strict) {
  const auto screens_dir = task_dir / "screens";
  if (!fs::is_directory(screens_dir)) {
    throw Error(ErrorKind::EnvironmentFailure, "replay task has no screens/: " + task_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(screens_dir)) {
    if (entry.path().extension() == ".xml") screens_[entry.path().stem().string()] = read_file(entry.path());
  }
  transitions_ = read_transitions(task_dir / "transitions.tsv");
  if (!screens_.count(current_)) {
    throw Error(ErrorKind::EnvironmentFailure, "initial screen '" + current_ + "' not found");
  }
}

std::string TraceReplayEnv::capture() { return screens_.at(current_); }

void TraceReplayEnv::execute(const Action& action) {
  const std::string key = canonical(action);
  const auto it = transitions_.find(current_);
  if (it != transitions_.end()) {
    for (const auto& t : it->second) {
      if (t.action == key) {
        if (!screens_.count(t.to)) {
          throw Error(ErrorKind::EnvironmentFailure, "transition to unknown screen '" + t.to + "'");
        }
        current_ = t.to;
        return;
      }
    }
  }
  if (action.kind == ActionKind::Scroll || action.kind == ActionKind::Launch) return;
  ++divergences_;
  if (!strict_) return;
  std::string expected;
  if (it != transitions_.end()) {
    for (const auto& t : it->second) {
      if (!expected.empty()) expected += " | ";
      expected += t.action;
    }
  }
  if (expected.empty()) expected = "<none>";
  throw Error(ErrorKind::ReplayDivergence,
              "screen " + current_ + ": executed '" + key + "' but recording expects '" + expected + "'");
}

// ---------------------------------------------------------------------------
// Bridge channels

namespace {

class FdChannel final : public BridgeChannel {
 public:
  FdChannel(int read_fd, int write_fd, pid_t child) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}

  ~FdChannel() override {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      if (::waitpid(child_, &status, WNOHANG) == 0) {
        ::kill(child_, SIGTERM);
        ::waitpid(child_, &status, 0);
      }
    }
  }

  void write_all(const std::string& data) override {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::EnvironmentFailure, std::string("bridge write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      fill(deadline);
    }
  }

  std::string read_bytes(std::size_t n, std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (buffer_.size() < n) fill(deadline);
    std::string out = buffer_.substr(0, n);
    buffer_.erase(0, n);
    return out;
  }

 private:
  void fill(std::chrono::steady_clock::time_point deadline) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw Error(ErrorKind::BridgeTimeout, "no reply from device bridge");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (r == 0) throw Error(ErrorKind::BridgeTimeout, "no reply from device bridge");
    if (r < 0) {
      if (errno == EINTR) return;
      throw Error(ErrorKind::EnvironmentFailure, std::string("bridge poll failed: ") + std::strerror(errno));
    }
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n == 0) throw Error(ErrorKind::EnvironmentFailure, "device bridge closed the connection");
    if (n < 0) {
      if (errno == EINTR) return;
      throw Error(ErrorKind::EnvironmentFailure, std::string("bridge read failed: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }

  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
};

}  // namespace

std::unique_ptr<BridgeChannel> spawn_bridge_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
    throw Error(ErrorKind::EnvironmentFailure, std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorKind::EnvironmentFailure, std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  // A controller that exits early must surface as an error, not kill us.
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<BridgeChannel> connect_bridge_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorKind::EnvironmentFailure, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorKind::EnvironmentFailure, "cannot connect to " + host + ":" + service);
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(fd, fd, -1);
}

// ---------------------------------------------------------------------------

CommandBridgeEnv::CommandBridgeEnv(std::unique_ptr<BridgeChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {}

std::string CommandBridgeEnv::command_line(const Action& action) {
  const std::string xy = std::to_string(action.x) + " " + std::to_string(action.y);
  switch (action.kind) {
    case ActionKind::Tap: return "TAP " + xy;
    case ActionKind::LongTap: return "LONGTAP " + xy;
    case ActionKind::Input: return "INPUT " + xy + " " + base64_encode(action.text);
    case ActionKind::Scroll: return "SCROLL " + (action.direction.empty() ? std::string("down") : action.direction);
    case ActionKind::Launch: return "LAUNCH " + action.app;
  }
  return {};
}

std::string CommandBridgeEnv::expect_ok() {
  const std::string reply = channel_->read_line(timeout_);
  if (reply.rfind("OK", 0) == 0) return reply.size() > 3 ? reply.substr(3) : std::string{};
  if (reply.rfind("ERR", 0) == 0) {
    throw Error(ErrorKind::EnvironmentFailure, "bridge error: " + (reply.size() > 4 ? reply.substr(4) : reply));
  }
  throw Error(ErrorKind::EnvironmentFailure, "unexpected bridge reply: " + reply);
}

std::string CommandBridgeEnv::capture() {
  channel_->write_all("CAPTURE\n");
  const std::string size_field = expect_ok();
  std::size_t n = 0;
  try {
    n = std::stoul(size_field);
  } catch (const std::exception&) {
    throw Error(ErrorKind::EnvironmentFailure, "CAPTURE reply without byte count");
  }
  return channel_->read_bytes(n, timeout_);
}

void CommandBridgeEnv::execute(const Action& action) {
  channel_->write_all(command_line(action) + "\n");
  expect_ok();
}

}  // namespace coreagent::runtime
