// Copyright (c) 2026 The cbias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client side of the line-oriented scorer protocol:
//
//   peer   -> client  HELLO <protocol-version> <vocab-size>
//   client -> peer    SCORE <utterance-id> <n> <tok_1> ... <tok_n>
//   peer   -> client  LOGP <utterance-id> <vocab-size floats>
//   client -> peer    RESET <utterance-id> | BYE
//
// A peer may answer any request with `ERROR <message>`. Anything that does
// not parse ends the session with ScorerFailure.

#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "cbias/scorer.h"
#include "cbias/text.h"

namespace cbias {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxProtocolLine = 64u << 20;

// Formats a log-probability with 9 significant digits; -inf stays "-inf".
inline std::string FormatLogProb(double x) {
  if (std::isinf(x) && x < 0) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::string FormatScoreRequest(std::string_view utterance_id,
                                      std::span<const TokenId> context) {
  std::string line = "SCORE ";
  line += utterance_id;
  line += ' ';
  line += std::to_string(context.size());
  for (TokenId t : context) {
    line += ' ';
    line += std::to_string(t);
  }
  return line;
}

inline std::string FormatLogProbLine(std::string_view utterance_id,
                                     std::span<const double> logp) {
  std::string line = "LOGP ";
  line += utterance_id;
  for (double x : logp) {
    line += ' ';
    line += FormatLogProb(x);
  }
  return line;
}

// Validates a LOGP line: id, length, finiteness (except -inf) and that the
// probabilities sum to 1 within 1e-6.
inline std::vector<double> ParseLogProbLine(std::string_view line,
                                            std::string_view utterance_id,
                                            std::size_t vocab_size) {
  std::vector<std::string> fields = SplitWords(line);
  if (fields.size() >= 2 && fields[0] == "ERROR") {
    throw Error(ErrorCode::kScorerFailure,
                "peer error: " + std::string(line.substr(6)));
  }
  if (fields.size() < 2 || fields[0] != "LOGP") {
    throw Error(ErrorCode::kScorerFailure,
                "expected LOGP line, got '" + std::string(line.substr(0, 80)) +
                    "'");
  }
  if (fields[1] != utterance_id) {
    throw Error(ErrorCode::kScorerFailure,
                "LOGP for utterance '" + fields[1] + "', expected '" +
                    std::string(utterance_id) + "'");
  }
  if (fields.size() - 2 != vocab_size) {
    throw Error(ErrorCode::kScorerFailure,
                "LOGP has " + std::to_string(fields.size() - 2) +
                    " entries, expected " + std::to_string(vocab_size));
  }
  std::vector<double> logp(vocab_size);
  double mass = 0.0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    const std::string& f = fields[i + 2];
    char* end = nullptr;
    double x = std::strtod(f.c_str(), &end);
    if (end != f.c_str() + f.size() || std::isnan(x) || x > 0.0 ||
        (std::isinf(x) && x > 0)) {
      throw Error(ErrorCode::kScorerFailure,
                  "bad log-probability '" + f + "' at index " +
                      std::to_string(i));
    }
    logp[i] = x;
    mass += std::exp(x);
  }
  if (std::fabs(mass - 1.0) > 1e-6) {
    throw Error(ErrorCode::kScorerFailure,
                "probabilities sum to " + std::to_string(mass));
  }
  return logp;
}

// Bidirectional line channel over a pair of file descriptors (the same fd
// twice for sockets). Owns the descriptors and, optionally, a child process.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd, pid_t child = -1)
      : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  ~LineChannel() {
    CloseWrite();
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) Reap();
  }

  void WriteLine(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      if (write_fd_ < 0) {
        throw Error(ErrorCode::kIoFailure, "channel closed for writing");
      }
      ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIoFailure,
                    std::string("write to scorer failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Returns false on a clean EOF with no partial line buffered.
  bool ReadLine(std::string& line) {
    while (true) {
      auto nl = buffer_.find('\n', scan_from_);
      if (nl != std::string::npos) {
        line.assign(buffer_, 0, nl);
        buffer_.erase(0, nl + 1);
        scan_from_ = 0;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      scan_from_ = buffer_.size();
      if (buffer_.size() > kMaxProtocolLine) {
        throw Error(ErrorCode::kScorerFailure, "protocol line too long");
      }
      char chunk[65536];
      ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIoFailure,
                    std::string("read from scorer failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (!buffer_.empty()) {
          throw Error(ErrorCode::kScorerFailure, "truncated line at end of stream");
        }
        return false;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void CloseWrite() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (write_fd_ == read_fd_ && write_fd_ >= 0) ::shutdown(write_fd_, SHUT_WR);
    write_fd_ = -1;
  }

 private:
  void Reap() {
    using namespace std::chrono_literals;
    int status = 0;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(child_, &status, WNOHANG) != 0) return;
      std::this_thread::sleep_for(5ms);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
  }

  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
  std::size_t scan_from_ = 0;
};

// Launches `command` through /bin/sh with its stdin/stdout wired to us.
inline std::unique_ptr<LineChannel> SpawnPeer(const std::string& command) {
  // A dead peer must surface as a write error, not kill the process.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::kIoFailure, "pipe() failed");
  }
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(ErrorCode::kIoFailure, "pipe() failed");
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
      ::close(fd);
    }
    throw Error(ErrorCode::kIoFailure, "fork() failed");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<LineChannel>(from_child[0], to_child[1], pid);
}

inline std::unique_ptr<LineChannel> ConnectUnixSocket(const std::string& path) {
  ::signal(SIGPIPE, SIG_IGN);
  int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorCode::kIoFailure, "socket() failed");
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) {
    ::close(fd);
    throw Error(ErrorCode::kIoFailure, "socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd);
    throw Error(ErrorCode::kIoFailure,
                "cannot connect to " + path + ": " + std::strerror(err));
  }
  return std::make_unique<LineChannel>(fd, fd);
}

class ExternalScorer : public Scorer {
 public:
  // Reads the HELLO line and checks the announced vocabulary size.
  ExternalScorer(std::unique_ptr<LineChannel> channel,
                 std::size_t expected_vocab_size)
      : channel_(std::move(channel)) {
    std::string line;
    if (!channel_->ReadLine(line)) {
      throw Error(ErrorCode::kIoFailure, "scorer closed before HELLO");
    }
    std::vector<std::string> f = SplitWords(line);
    if (f.size() != 3 || f[0] != "HELLO") {
      throw Error(ErrorCode::kScorerFailure, "bad handshake '" + line + "'");
    }
    long version = 0;
    unsigned long size = 0;
    try {
      version = std::stol(f[1]);
      size = std::stoul(f[2]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kScorerFailure, "bad handshake '" + line + "'");
    }
    if (version != kProtocolVersion) {
      throw Error(ErrorCode::kHandshakeMismatch,
                  "peer speaks protocol " + f[1] + ", expected " +
                      std::to_string(kProtocolVersion));
    }
    if (size != expected_vocab_size) {
      throw Error(ErrorCode::kHandshakeMismatch,
                  "peer vocabulary size " + f[2] + " != " +
                      std::to_string(expected_vocab_size));
    }
    vocab_size_ = size;
  }

  ~ExternalScorer() override {
    try {
      if (alive_) channel_->WriteLine("BYE");
    } catch (const Error&) {
    }
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  ScorerCapabilities capabilities() const override { return {true, false}; }

  void BeginUtterance(const UtteranceInput& utterance) override {
    utterance_id_ = utterance.id;
  }

  void EndUtterance() override {
    if (!alive_ || utterance_id_.empty()) return;
    Guard([&] { channel_->WriteLine("RESET " + utterance_id_); });
    utterance_id_.clear();
  }

  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    if (!alive_) throw Error(ErrorCode::kScorerFailure, "session already failed");
    std::vector<double> out;
    Guard([&] {
      channel_->WriteLine(FormatScoreRequest(utterance_id_, context));
      std::string line;
      if (!channel_->ReadLine(line)) {
        throw Error(ErrorCode::kScorerFailure, "peer closed the session");
      }
      out = ParseLogProbLine(line, utterance_id_, vocab_size_);
    });
    return out;
  }

 private:
  // Any failure poisons the session; I/O errors are reported as scorer
  // failures so callers see one error kind mid-session.
  template <typename Fn>
  void Guard(Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      alive_ = false;
      if (e.code() == ErrorCode::kScorerFailure) throw;
      throw Error(ErrorCode::kScorerFailure, e.what());
    }
  }

  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_ = 0;
  std::string utterance_id_;
  bool alive_ = true;
};

// `exec:<shell command>` or `unix:<socket path>`.
inline std::unique_ptr<ExternalScorer> ConnectExternalScorer(
    const std::string& endpoint, std::size_t expected_vocab_size) {
  std::unique_ptr<LineChannel> channel;
  if (endpoint.rfind("exec:", 0) == 0) {
    channel = SpawnPeer(endpoint.substr(5));
  } else if (endpoint.rfind("unix:", 0) == 0) {
    channel = ConnectUnixSocket(endpoint.substr(5));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown endpoint '" + endpoint + "'");
  }
  return std::make_unique<ExternalScorer>(std::move(channel), expected_vocab_size);
}

}  // namespace cbias
