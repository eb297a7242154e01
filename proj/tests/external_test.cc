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

#include <chrono>
#include <sstream>

#include "gtest/gtest.h"
#include "demoselect/text.hpp"
#include "mock_score.hpp"
#include "test_util.hpp"

namespace demoselect::oracle {
namespace {

using namespace std::chrono_literals;
using testing::KindOf;
using testing::MockScore;
using testing::TempDir;

ExternalConfig Mock(const std::string& mode, std::chrono::milliseconds timeout = 5000ms) {
  ExternalConfig c;
  c.command = {MOCK_EVALUATOR_PATH, mode};
  c.request_timeout = timeout;
  c.handshake_timeout = timeout;
  c.shutdown_grace = std::min<std::chrono::milliseconds>(timeout, 2000ms);
  return c;
}

TEST(ExternalTest, PassThroughScores) {
  ExternalEvaluator ev(Mock("higher"));
  EXPECT_EQ(ev.orientation(), Orientation::kHigherBetter);
  EXPECT_FALSE(ev.thread_safe());
  EXPECT_EQ(ev.Evaluate(DemoSet::Of({1, 2}), SampleId(7)).value(), MockScore({1, 2}, 7));
  EXPECT_EQ(ev.Evaluate(DemoSet::Of({5}), SampleId(3)).value(), MockScore({5}, 3));
  EXPECT_EQ(ev.calls(), 2u);
  EXPECT_EQ(ev.Shutdown(), 0);
}

TEST(ExternalTest, LowerBetterIsNegated) {
  ExternalEvaluator ev(Mock("lower"));
  EXPECT_EQ(ev.orientation(), Orientation::kLowerBetter);
  EXPECT_EQ(ev.Evaluate(DemoSet::Of({4}), SampleId(9)).value(), -MockScore({4}, 9));
}

TEST(ExternalTest, RequestWireFormat) {
  TempDir dir;
  const auto log = dir / "requests.jsonl";
  {
    auto config = Mock("record");
    config.command.push_back(log.string());
    ExternalEvaluator ev(config);
    ev.Evaluate(DemoSet::Of({2, 1}), SampleId(7));
    ev.Evaluate(DemoSet::Of({3}), SampleId(8));
    EXPECT_EQ(ev.Shutdown(), 0);
  }
  EXPECT_EQ(text::ReadFile(log),
            "{\"type\":\"evaluate\",\"id\":1,\"demos\":[1,2],\"query\":7}\n"
            "{\"type\":\"evaluate\",\"id\":2,\"demos\":[3],\"query\":8}\n"
            "{\"type\":\"shutdown\"}\n");
}

TEST(ExternalTest, ErrorReplyCarriesMessageAndProtocolContinues) {
  ExternalEvaluator ev(Mock("error_on_99"));
  try {
    ev.Evaluate(DemoSet::Of({1}), SampleId(99));
    FAIL() << "expected a protocol error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kProtocol);
    EXPECT_NE(std::string(e.what()).find("no such query 99"), std::string::npos);
  }
  EXPECT_EQ(ev.Evaluate(DemoSet::Of({1}), SampleId(4)).value(), MockScore({1}, 4));
}

TEST(ExternalTest, CrashMidRequest) {
  ExternalEvaluator ev(Mock("crash_after_1"));
  ev.Evaluate(DemoSet::Of({1}), SampleId(4));
  try {
    ev.Evaluate(DemoSet::Of({1}), SampleId(5));
    FAIL() << "expected a crash";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEvaluatorCrashed);
    EXPECT_NE(std::string(e.what()).find("exit code 7"), std::string::npos) << e.what();
  }
  EXPECT_EQ(KindOf([&] { ev.Evaluate(DemoSet::Of({1}), SampleId(4)); }),
            ErrorKind::kEvaluatorCrashed);
}

TEST(ExternalTest, RequestTimeout) {
  ExternalEvaluator ev(Mock("hang", 200ms));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(KindOf([&] { ev.Evaluate(DemoSet::Of({1}), SampleId(4)); }), ErrorKind::kTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(ExternalTest, HandshakeTimeout) {
  EXPECT_EQ(KindOf([] { ExternalEvaluator ev(Mock("silent", 200ms)); }), ErrorKind::kTimeout);
}

TEST(ExternalTest, IdMismatchIsProtocolError) {
  ExternalEvaluator ev(Mock("wrong_id"));
  EXPECT_EQ(KindOf([&] { ev.Evaluate(DemoSet::Of({1}), SampleId(4)); }), ErrorKind::kProtocol);
}

TEST(ExternalTest, MalformedReplyIsProtocolError) {
  ExternalEvaluator ev(Mock("garbage"));
  EXPECT_EQ(KindOf([&] { ev.Evaluate(DemoSet::Of({1}), SampleId(4)); }), ErrorKind::kProtocol);
}

TEST(ExternalTest, BadHandshake) {
  EXPECT_EQ(KindOf([] { ExternalEvaluator ev(Mock("bad_hello")); }), ErrorKind::kProtocol);
  EXPECT_EQ(KindOf([] { ExternalEvaluator ev(Mock("version2")); }), ErrorKind::kProtocol);
}

TEST(ExternalTest, MissingExecutable) {
  ExternalConfig c;
  c.command = {"/nonexistent/evaluator"};
  EXPECT_EQ(KindOf([&] { ExternalEvaluator ev(c); }), ErrorKind::kEvaluatorCrashed);
  EXPECT_EQ(KindOf([] { ExternalEvaluator ev(ExternalConfig{}); }), ErrorKind::kConfig);
}

TEST(ExternalTest, ShutdownGraceExpires) {
  auto config = Mock("ignore_shutdown");
  config.shutdown_grace = 200ms;
  ExternalEvaluator ev(config);
  EXPECT_EQ(KindOf([&] { ev.Shutdown(); }), ErrorKind::kTimeout);
}

TEST(ExternalTest, CleanShutdownIsFast) {
  ExternalEvaluator ev(Mock("higher"));
  ev.Evaluate(DemoSet::Of({1}), SampleId(2));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(ev.Shutdown(), 0);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(ExternalTest, PurityReplay) {
  ExternalEvaluator ev(Mock("higher"));
  std::vector<double> first;
  for (std::uint32_t q = 0; q < 50; ++q) {
    first.push_back(ev.Evaluate(DemoSet::Of({q % 5, 7}), SampleId(q)).value());
  }
  for (std::uint32_t q = 0; q < 50; ++q) {
    EXPECT_EQ(ev.Evaluate(DemoSet::Of({q % 5, 7}), SampleId(q)).value(), first[q]);
  }
}

}  // namespace
}  // namespace demoselect::oracle
