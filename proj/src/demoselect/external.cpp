// Copyright 2026 The demoselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "demoselect/external.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "demoselect/errors.hpp"

namespace demoselect::oracle {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int RemainingMs(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

ExternalEvaluator::ExternalEvaluator(ExternalConfig config)
    : config_(std::move(config)) {
  if (config_.command.empty()) {
    throw Error(ErrorKind::kConfig, "external evaluator command is empty");
  }
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorKind::kEvaluatorCrashed, std::strerror(errno));
  }
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw Error(ErrorKind::kEvaluatorCrashed, std::strerror(errno));
  }

  std::vector<char*> argv;
  for (auto& a : config_.command) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) {
    throw Error(ErrorKind::kEvaluatorCrashed, std::strerror(errno));
  }
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    const auto deadline = Clock::now() + config_.handshake_timeout;
    const std::string line = ReadLine(deadline);
    json hello = json::parse(line, nullptr, false);
    if (hello.is_discarded() || !hello.is_object() ||
        hello.value("type", "") != "hello") {
      throw Error(ErrorKind::kProtocol, "bad handshake: " + line);
    }
    if (!hello.contains("version") || hello["version"] != 1) {
      throw Error(ErrorKind::kProtocol, "unsupported protocol version: " + line);
    }
    const std::string orientation = hello.value("orientation", "");
    if (orientation == "higher_better") {
      orientation_ = Orientation::kHigherBetter;
    } else if (orientation == "lower_better") {
      orientation_ = Orientation::kLowerBetter;
    } else {
      throw Error(ErrorKind::kProtocol, "bad orientation in handshake: " + line);
    }
  } catch (...) {
    Kill();
    throw;
  }
}

ExternalEvaluator::~ExternalEvaluator() {
  if (!exited_) {
    try {
      Shutdown();
    } catch (...) {
    }
  }
  Kill();
}

void ExternalEvaluator::Kill() noexcept {
  if (pid_ > 0 && !exited_) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
    exited_ = true;
  }
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
}

int ExternalEvaluator::Shutdown() {
  std::lock_guard lock(mu_);
  if (exited_) return 0;
  if (to_child_ >= 0) {
    const std::string msg = "{\"type\":\"shutdown\"}\n";
    [[maybe_unused]] auto n = write(to_child_, msg.data(), msg.size());
    close(to_child_);
    to_child_ = -1;
  }
  const auto deadline = Clock::now() + config_.shutdown_grace;
  int status = 0;
  while (true) {
    pid_t r = waitpid(pid_, &status, WNOHANG);
    if (r == pid_) break;
    if (r < 0 && errno != EINTR) {
      exited_ = true;
      return 0;
    }
    if (Clock::now() >= deadline) {
      Kill();
      throw Error(ErrorKind::kTimeout, "evaluator did not exit within grace period");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  exited_ = true;
  if (from_child_ >= 0) close(from_child_);
  from_child_ = -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

std::string ExternalEvaluator::ReadLine(Clock::time_point deadline) const {
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    int ready = poll(&pfd, 1, RemainingMs(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      ThrowCrashed(std::strerror(errno));
    }
    if (ready == 0) {
      broken_ = true;
      throw Error(ErrorKind::kTimeout, "no response from evaluator before deadline");
    }
    char chunk[4096];
    ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      ThrowCrashed(std::strerror(errno));
    }
    if (n == 0) ThrowCrashed("evaluator closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void ExternalEvaluator::WriteLine(const std::string& line) const {
  std::size_t off = 0;
  while (off < line.size()) {
    ssize_t n = write(to_child_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ThrowCrashed(std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void ExternalEvaluator::ThrowCrashed(const std::string& context) const {
  broken_ = true;
  int status = 0;
  std::string detail = context;
  // Give a dying child a moment to be reaped so the exit status is reported.
  for (int i = 0; i < 50; ++i) {
    if (waitpid(pid_, &status, WNOHANG) == pid_) {
      exited_ = true;
      if (WIFEXITED(status)) {
        detail += " (exit code " + std::to_string(WEXITSTATUS(status)) + ")";
      } else if (WIFSIGNALED(status)) {
        detail += " (signal " + std::to_string(WTERMSIG(status)) + ")";
      }
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  throw Error(ErrorKind::kEvaluatorCrashed, detail);
}

Utility ExternalEvaluator::DoEvaluate(const DemoSet& demos, SampleId query) const {
  std::lock_guard lock(mu_);
  if (broken_ || exited_ || to_child_ < 0) {
    throw Error(ErrorKind::kEvaluatorCrashed, "evaluator is no longer usable");
  }
  const std::uint64_t id = next_id_++;
  const json members = FromIds(demos.members());
  // Fixed key order on the wire.
  std::string line = "{\"type\":\"evaluate\",\"id\":" + std::to_string(id) +
                     ",\"demos\":" + members.dump() +
                     ",\"query\":" + std::to_string(query.value) + "}\n";
  WriteLine(line);

  const std::string reply = ReadLine(Clock::now() + config_.request_timeout);
  json resp = json::parse(reply, nullptr, false);
  if (resp.is_discarded() || !resp.is_object()) {
    broken_ = true;
    throw Error(ErrorKind::kProtocol, "malformed response: " + reply);
  }
  const std::string type = resp.value("type", "");
  if (!resp.contains("id") || !resp["id"].is_number_unsigned() ||
      resp["id"].get<std::uint64_t>() != id) {
    broken_ = true;
    throw Error(ErrorKind::kProtocol,
                "response id does not match request " + std::to_string(id) +
                    ": " + reply);
  }
  if (type == "error") {
    const auto msg = resp.contains("message") && resp["message"].is_string()
                         ? resp["message"].get<std::string>()
                         : std::string("(no message)");
    throw Error(ErrorKind::kProtocol, "evaluator error: " + msg);
  }
  if (type != "result" || !resp.contains("score") || !resp["score"].is_number()) {
    broken_ = true;
    throw Error(ErrorKind::kProtocol, "malformed response: " + reply);
  }
  const double score = resp["score"].get<double>();
  const double utility =
      orientation_ == Orientation::kLowerBetter ? 0.0 - score : score;
  try {
    return Utility::Make(utility, MetricTag::kExternal);
  } catch (const Error&) {
    broken_ = true;
    throw Error(ErrorKind::kProtocol, "non-finite score: " + reply);
  }
}

}  // namespace demoselect::oracle
