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

#ifndef DEMOSELECT_EXTERNAL_HPP_
#define DEMOSELECT_EXTERNAL_HPP_

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <vector>

#include "demoselect/oracle.hpp"

namespace demoselect::oracle {

struct ExternalConfig {
  // argv of the child; argv[0] is resolved through PATH.
  std::vector<std::string> command;
  std::chrono::milliseconds request_timeout{60'000};
  std::chrono::milliseconds handshake_timeout{60'000};
  std::chrono::milliseconds shutdown_grace{5'000};
};

enum class Orientation { kHigherBetter, kLowerBetter };

// Drives a child evaluator over newline-delimited JSON on its stdin/stdout:
//
//   child  -> {"type":"hello","version":1,"orientation":"higher_better"}
//   parent -> {"type":"evaluate","id":7,"demos":[1,2],"query":9}
//   child  -> {"type":"result","id":7,"score":0.41}
//          |  {"type":"error","id":7,"message":"..."}
//   parent -> {"type":"shutdown"}
//
// One request is in flight at a time; concurrent callers are serialized.
// Lower-is-better scores are negated into utilities. SIGPIPE is ignored
// process-wide once the first child is started.
class ExternalEvaluator final : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalConfig config);
  ~ExternalEvaluator() override;

  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  Orientation orientation() const noexcept { return orientation_; }
  bool thread_safe() const noexcept override { return false; }

  // Sends shutdown and waits for the child. Returns its exit code; throws
  // kTimeout if it does not exit within the grace period (it is then killed).
  int Shutdown();

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override;

 private:
  std::string ReadLine(std::chrono::steady_clock::time_point deadline) const;
  void WriteLine(const std::string& line) const;
  [[noreturn]] void ThrowCrashed(const std::string& context) const;
  void Kill() noexcept;

  ExternalConfig config_;
  Orientation orientation_ = Orientation::kHigherBetter;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::mutex mu_;
  mutable std::string buffer_;
  mutable std::uint64_t next_id_ = 1;
  mutable bool broken_ = false;
  mutable bool exited_ = false;
};

}  // namespace demoselect::oracle

#endif  // DEMOSELECT_EXTERNAL_HPP_
