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

// Exercises the shared library strictly through its C header.

#include "demoselect/demoselect.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtest/gtest.h"
#include "mock_score.hpp"

namespace {

using nlohmann::json;

class ScopedDir {
 public:
  ScopedDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ds-capi-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) std::abort();
    path_ = tmpl;
  }
  ~ScopedDir() { std::filesystem::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

std::string Take(char* s) {
  std::string out = s ? s : "";
  ds_string_free(s);
  return out;
}

ds_evaluator* Synthetic(uint32_t n_demos, uint32_t n_queries, uint64_t seed) {
  ds_landscape_params p;
  ds_landscape_params_default(&p);
  p.n_demos = n_demos;
  p.n_queries = n_queries;
  p.seed = seed;
  ds_evaluator* ev = nullptr;
  EXPECT_EQ(ds_evaluator_open_synthetic(&p, &ev), DS_OK) << ds_last_error();
  return ev;
}

TEST(CApiTest, VersionAndDefaults) {
  EXPECT_STREQ(ds_version(), "1.0.0");
  ds_landscape_params p;
  ds_landscape_params_default(&p);
  EXPECT_EQ(p.n_demos, 6u);
  EXPECT_EQ(p.n_queries, 10u);
  EXPECT_EQ(p.planted, 0);
}

TEST(CApiTest, EvaluateCountsAndIds) {
  ds_evaluator* ev = Synthetic(4, 3, 1);
  const uint32_t one[] = {1};
  const uint32_t two[] = {2, 1};
  double a = 0, b = 0, ab = 0;
  ASSERT_EQ(ds_evaluator_evaluate(ev, one, 1, 5, &a), DS_OK);
  const uint32_t only_two[] = {2};
  ASSERT_EQ(ds_evaluator_evaluate(ev, only_two, 1, 5, &b), DS_OK);
  ASSERT_EQ(ds_evaluator_evaluate(ev, two, 2, 5, &ab), DS_OK);
  EXPECT_EQ(ab, a + b);
  EXPECT_EQ(ds_evaluator_calls(ev), 3u);

  char* ids = nullptr;
  ASSERT_EQ(ds_evaluator_ids(ev, &ids), DS_OK);
  const auto j = json::parse(Take(ids));
  EXPECT_EQ(j["demos"], json({0, 1, 2, 3}));
  EXPECT_EQ(j["queries"], json({4, 5, 6}));

  const uint32_t qs[] = {4, 5};
  double agg = 0;
  ASSERT_EQ(ds_evaluator_aggregate(ev, one, 1, qs, 2, &agg), DS_OK);
  ds_evaluator_free(ev);
}

TEST(CApiTest, ErrorCodesAndMessages) {
  ds_evaluator* ev = Synthetic(4, 3, 1);
  double u = 0;
  EXPECT_EQ(ds_evaluator_evaluate(ev, nullptr, 0, 5, &u), DS_ERR_USAGE);
  EXPECT_STREQ(ds_last_error_kind(), "EmptyInput");
  const uint32_t bad[] = {99};
  EXPECT_EQ(ds_evaluator_evaluate(ev, bad, 1, 5, &u), DS_ERR_ORACLE);
  EXPECT_STREQ(ds_last_error_kind(), "IndexOutOfRange");
  EXPECT_NE(std::string(ds_last_error()).find("99"), std::string::npos);
  EXPECT_EQ(ds_evaluator_evaluate(nullptr, bad, 1, 5, &u), DS_ERR_USAGE);
  EXPECT_EQ(ds_evaluator_shutdown(ev, nullptr), DS_ERR_USAGE);
  ds_evaluator_free(ev);
  ds_evaluator_free(nullptr);

  ds_evaluator* none = nullptr;
  EXPECT_EQ(ds_evaluator_open_matrix("/nonexistent.csv", &none), DS_ERR_DATA);
  EXPECT_STREQ(ds_last_error_kind(), "MissingFile");
  EXPECT_EQ(none, nullptr);
  EXPECT_EQ(ds_evaluator_open_json("{", nullptr, &none), DS_ERR_USAGE);
  EXPECT_EQ(ds_evaluator_open_json(R"({"backend":"nope"})", nullptr, &none), DS_ERR_USAGE);
}

TEST(CApiTest, SelectStrategies) {
  ds_evaluator* ev = Synthetic(6, 10, 0);
  char* out = nullptr;
  ASSERT_EQ(ds_select(ev, R"({"strategy":"greedy"})", &out), DS_OK) << ds_last_error();
  auto g = json::parse(Take(out));
  EXPECT_EQ(g["chosen"].size(), 6u);
  EXPECT_EQ(g["trace"][0]["kind"], "considered");

  ASSERT_EQ(ds_select(ev, R"({"strategy":"topk","k":1})", &out), DS_OK);
  auto t = json::parse(Take(out));
  EXPECT_EQ(t["set_evaluations"], 6);
  uint32_t first = 0;
  for (const auto& step : g["trace"]) {
    if (step["kind"] == "accepted") {
      first = step["candidate"];
      break;
    }
  }
  EXPECT_EQ(t["chosen"][0], first);

  ASSERT_EQ(ds_select(ev, R"({"strategy":"exhaustive"})", &out), DS_OK);
  EXPECT_EQ(json::parse(Take(out))["oracle_calls"], 630);

  EXPECT_EQ(ds_select(ev, R"({"strategy":"topk"})", &out), DS_ERR_USAGE);
  EXPECT_EQ(ds_select(ev, R"({"strategy":"beam"})", &out), DS_ERR_USAGE);
  EXPECT_EQ(ds_select(ev, "not json", &out), DS_ERR_USAGE);
  EXPECT_EQ(ds_select(ev, R"({"strategy":"exhaustive","holdout":"loocv"})", &out),
            DS_ERR_USAGE);
  ds_evaluator_free(ev);
}

TEST(CApiTest, ExternalEvaluatorLifecycle) {
  const char* argv[] = {MOCK_EVALUATOR_PATH, "lower"};
  ds_evaluator* ev = nullptr;
  ASSERT_EQ(ds_evaluator_open_external(argv, 2, 2000, &ev), DS_OK) << ds_last_error();
  const uint32_t demos[] = {3, 1};
  double u = 0;
  ASSERT_EQ(ds_evaluator_evaluate(ev, demos, 2, 7, &u), DS_OK);
  EXPECT_EQ(u, -demoselect::testing::MockScore({1, 3}, 7));
  int code = -1;
  EXPECT_EQ(ds_evaluator_shutdown(ev, &code), DS_OK);
  EXPECT_EQ(code, 0);
  ds_evaluator_free(ev);

  const char* crash[] = {MOCK_EVALUATOR_PATH, "bad_hello"};
  EXPECT_EQ(ds_evaluator_open_external(crash, 2, 2000, &ev), DS_ERR_ORACLE);
  EXPECT_STREQ(ds_last_error_kind(), "ProtocolError");
}

TEST(CApiTest, GenerateCompareAuditAnalyze) {
  ScopedDir dir;
  const json gen = {{"out", dir / "land"}, {"n_demos", 8}, {"n_queries", 12}, {"seed", 2},
                    {"planted_gamma", 0.5}, {"demo_columns", true}};
  char* summary = nullptr;
  ASSERT_EQ(ds_generate(gen.dump().c_str(), &summary), DS_OK) << ds_last_error();
  const auto s = json::parse(Take(summary));
  EXPECT_EQ(s["planted_columns"], 6);

  ds_evaluator* ev = nullptr;
  const json spec = {{"backend", "table"}, {"path", "land/subsets.jsonl"}};
  ASSERT_EQ(ds_evaluator_open_json(spec.dump().c_str(), dir.str().c_str(), &ev), DS_OK)
      << ds_last_error();
  ds_evaluator_free(ev);

  const json config = {{"oracle", spec},
                       {"manifest", "land/manifest.json"},
                       {"n_prime", 5},
                       {"seeds", {0, 1}},
                       {"output_dir", "out"},
                       {"strategies",
                        {{{"name", "topk"}, {"k", 2}},
                         {{"name", "greedy"}},
                         {{"name", "nn"}, {"k", 2}},
                         {{"name", "exhaustive"}, {"select_on", "validation"}}}}};
  {
    std::ofstream(dir / "config.json") << config.dump();
  }
  char* report = nullptr;
  char* table = nullptr;
  ASSERT_EQ(ds_compare((dir / "config.json").c_str(), nullptr, &report, &table), DS_OK)
      << ds_last_error();
  const std::string report_text = Take(report);
  EXPECT_NE(Take(table).find("nn(k=2)"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "out/report.json"));

  char* dir_out = nullptr;
  ASSERT_EQ(ds_config_output_dir((dir / "config.json").c_str(), &dir_out), DS_OK);
  EXPECT_EQ(std::filesystem::path(Take(dir_out)), std::filesystem::path(dir / "out"));

  char* audit = nullptr;
  int all_pass = 0;
  ASSERT_EQ(ds_audit_report(report_text.c_str(), &audit, &table, &all_pass), DS_OK);
  EXPECT_EQ(all_pass, 1);
  EXPECT_EQ(json::parse(Take(audit)).size(), 8u);
  ds_string_free(table);

  char* analysis = nullptr;
  char* text = nullptr;
  ASSERT_EQ(ds_analyze((dir / "config.json").c_str(), (dir / "an").c_str(), &analysis, &text),
            DS_OK)
      << ds_last_error();
  EXPECT_TRUE(std::filesystem::exists(dir / "an/rank_histograms.csv"));
  EXPECT_NE(Take(text).find("coincidence"), std::string::npos);
  EXPECT_TRUE(json::parse(Take(analysis)).contains("summary"));

  EXPECT_EQ(ds_compare((dir / "absent.json").c_str(), nullptr, &report, &table), DS_ERR_DATA);
  EXPECT_EQ(ds_audit_report("{}", &audit, &table, &all_pass), DS_ERR_DATA);
  EXPECT_EQ(ds_generate(R"({"n_demos":3})", &summary), DS_ERR_USAGE);
  EXPECT_EQ(ds_generate(R"({"out":"x","n_demos":0})", nullptr), DS_ERR_USAGE);
}

TEST(CApiTest, MetricsFromFiles) {
  ScopedDir dir;
  {
    std::ofstream(dir / "p.pgm", std::ios::binary) << "P5\n2 2\n255\n" << std::string("\xff\x00\xff\x00", 4);
    std::ofstream(dir / "t.pgm", std::ios::binary) << "P5\n2 2\n255\n" << std::string("\x00\x00\xff\xff", 4);
    std::ofstream(dir / "a.pgm", std::ios::binary) << "P5\n2 1\n255\n" << std::string("\xff\x00", 2);
    std::ofstream(dir / "b.pgm", std::ios::binary) << "P5\n2 1\n255\n" << std::string("\x00\x00", 2);
  }
  double iou = 0;
  ASSERT_EQ(ds_mask_iou((dir / "p.pgm").c_str(), (dir / "t.pgm").c_str(), &iou), DS_OK);
  EXPECT_NEAR(iou, 1.0 / 3.0, 1e-12);
  double mse = 0;
  ASSERT_EQ(ds_image_mse((dir / "a.pgm").c_str(), (dir / "b.pgm").c_str(), &mse), DS_OK);
  EXPECT_EQ(mse, 50.0);
  EXPECT_EQ(ds_mask_iou((dir / "p.pgm").c_str(), (dir / "a.pgm").c_str(), &iou), DS_ERR_DATA);
  EXPECT_STREQ(ds_last_error_kind(), "ShapeMismatch");

  char* summary = nullptr;
  {
    std::ofstream(dir / "m.json") << R"({"version":1,"samples":[{"id":3,"mask":"p.pgm"},)"
                                     R"({"id":4,"mask":"t.pgm","role":"query"}]})";
  }
  ASSERT_EQ(ds_ingest_manifest((dir / "m.json").c_str(), &summary), DS_OK) << ds_last_error();
  const auto j = json::parse(Take(summary));
  EXPECT_EQ(j["candidates"], json({3}));
  EXPECT_EQ(j["queries"], json({4}));
}

}  // namespace
