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

#include "demoselect/demoselect.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "demoselect/errors.hpp"
#include "demoselect/harness.hpp"
#include "demoselect/ingest.hpp"
#include "demoselect/metrics.hpp"
#include "demoselect/text.hpp"

using demoselect::Error;
using demoselect::ErrorKind;
using nlohmann::json;
namespace ds = demoselect;
namespace harness = demoselect::harness;

struct ds_evaluator {
  harness::OracleHandle handle;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_kind;

ds_status Fail(ds_status status, std::string_view kind, std::string message) {
  g_error_kind = kind;
  g_error = std::move(message);
  return status;
}

template <typename Fn>
ds_status Guard(Fn&& fn) {
  try {
    fn();
    return DS_OK;
  } catch (const Error& e) {
    return Fail(static_cast<ds_status>(ds::ClassOf(e.kind())), ds::ErrorKindName(e.kind()),
                e.what());
  } catch (const json::exception& e) {
    return Fail(DS_ERR_DATA, "ParseError", e.what());
  } catch (const std::bad_alloc&) {
    return Fail(DS_ERR_DATA, "OutOfMemory", "allocation failed");
  } catch (const std::exception& e) {
    return Fail(DS_ERR_DATA, "Internal", e.what());
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Require(const void* p, const char* what) {
  if (!p) throw Error(ErrorKind::kUsage, std::string(what) + " is null");
}

json ParseJson(const char* text, const char* what) {
  Require(text, what);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kUsage, std::string(what) + " is not valid JSON");
  return j;
}

std::vector<ds::SampleId> Ids(const uint32_t* raw, size_t n) {
  if (n > 0) Require(raw, "id array");
  return ds::ToIds(std::span<const uint32_t>(raw, n));
}

ds_evaluator* Wrap(harness::OracleHandle h) {
  return new ds_evaluator{std::move(h)};
}

}  // namespace

extern "C" {

const char* ds_version(void) { return "1.0.0"; }
const char* ds_last_error(void) { return g_error.c_str(); }
const char* ds_last_error_kind(void) { return g_error_kind.c_str(); }
void ds_string_free(char* s) { std::free(s); }

void ds_landscape_params_default(ds_landscape_params* p) {
  if (!p) return;
  *p = ds_landscape_params{};
  p->n_demos = 6;
  p->n_queries = 10;
  p->aggregator = DS_AGG_SUM;
  p->planted_gamma = 0.3;
  p->planted_high = 0.9;
}

ds_status ds_evaluator_open_synthetic(const ds_landscape_params* params, ds_evaluator** out) {
  return Guard([&] {
    Require(params, "params");
    Require(out, "out");
    harness::OracleSpec spec;
    spec.backend = harness::Backend::kSynthetic;
    auto& l = spec.landscape;
    l.n_demos = params->n_demos;
    l.n_queries = params->n_queries;
    l.seed = params->seed;
    l.aggregator = params->aggregator == DS_AGG_MEAN ? ds::oracle::Aggregator::kMean
                                                     : ds::oracle::Aggregator::kSum;
    l.interaction_scale = params->interaction_scale;
    l.noise_scale = params->noise_scale;
    if (params->planted) {
      l.planted = ds::oracle::PlantedDemo{params->planted_demo, params->planted_gamma,
                                          params->planted_high};
    }
    *out = Wrap(harness::OpenOracle(spec));
  });
}

ds_status ds_evaluator_open_matrix(const char* csv_path, ds_evaluator** out) {
  return Guard([&] {
    Require(csv_path, "path");
    Require(out, "out");
    harness::OracleSpec spec;
    spec.backend = harness::Backend::kMatrix;
    spec.path = csv_path;
    *out = Wrap(harness::OpenOracle(spec));
  });
}

ds_status ds_evaluator_open_table(const char* jsonl_path, ds_evaluator** out) {
  return Guard([&] {
    Require(jsonl_path, "path");
    Require(out, "out");
    harness::OracleSpec spec;
    spec.backend = harness::Backend::kTable;
    spec.path = jsonl_path;
    *out = Wrap(harness::OpenOracle(spec));
  });
}

ds_status ds_evaluator_open_external(const char* const* argv, size_t argc,
                                     uint32_t timeout_ms, ds_evaluator** out) {
  return Guard([&] {
    Require(argv, "argv");
    Require(out, "out");
    harness::OracleSpec spec;
    spec.backend = harness::Backend::kExternal;
    for (size_t i = 0; i < argc; ++i) {
      Require(argv[i], "argv entry");
      spec.external.command.emplace_back(argv[i]);
    }
    if (timeout_ms > 0) spec.external.request_timeout = std::chrono::milliseconds(timeout_ms);
    *out = Wrap(harness::OpenOracle(spec));
  });
}

ds_status ds_evaluator_open_json(const char* spec_json, const char* base_dir,
                                 ds_evaluator** out) {
  return Guard([&] {
    Require(out, "out");
    auto spec = harness::ParseOracleSpec(ParseJson(spec_json, "spec"),
                                         base_dir ? base_dir : ".");
    *out = Wrap(harness::OpenOracle(spec));
  });
}

void ds_evaluator_free(ds_evaluator* evaluator) { delete evaluator; }

ds_status ds_evaluator_evaluate(ds_evaluator* evaluator, const uint32_t* demos,
                                size_t n_demos, uint32_t query, double* out_utility) {
  return Guard([&] {
    Require(evaluator, "evaluator");
    Require(out_utility, "out_utility");
    auto set = ds::DemoSet::Canonicalize(Ids(demos, n_demos));
    *out_utility = evaluator->handle.evaluator->Evaluate(set, ds::SampleId(query)).value();
  });
}

ds_status ds_evaluator_aggregate(ds_evaluator* evaluator, const uint32_t* demos,
                                 size_t n_demos, const uint32_t* queries, size_t n_queries,
                                 double* out_utility) {
  return Guard([&] {
    Require(evaluator, "evaluator");
    Require(out_utility, "out_utility");
    auto set = ds::DemoSet::Canonicalize(Ids(demos, n_demos));
    auto qs = Ids(queries, n_queries);
    *out_utility =
        ds::oracle::AggregateHeldoutScore(*evaluator->handle.evaluator, set, qs).value();
  });
}

uint64_t ds_evaluator_calls(const ds_evaluator* evaluator) {
  return evaluator ? evaluator->handle.evaluator->calls() : 0;
}

ds_status ds_evaluator_ids(const ds_evaluator* evaluator, char** out_json) {
  return Guard([&] {
    Require(evaluator, "evaluator");
    Require(out_json, "out_json");
    json j;
    j["demos"] = ds::FromIds(evaluator->handle.demo_ids);
    j["queries"] = ds::FromIds(evaluator->handle.query_ids);
    *out_json = Dup(j.dump());
  });
}

ds_status ds_evaluator_shutdown(ds_evaluator* evaluator, int* exit_code) {
  return Guard([&] {
    Require(evaluator, "evaluator");
    auto* ext =
        dynamic_cast<ds::oracle::ExternalEvaluator*>(evaluator->handle.evaluator.get());
    if (!ext) throw Error(ErrorKind::kUsage, "not an external evaluator");
    const int code = ext->Shutdown();
    if (exit_code) *exit_code = code;
  });
}

ds_status ds_select(ds_evaluator* evaluator, const char* request_json,
                    char** out_result_json) {
  return Guard([&] {
    Require(evaluator, "evaluator");
    Require(out_result_json, "out_result_json");
    auto result = harness::RunSelectionRequest(evaluator->handle,
                                               ParseJson(request_json, "request"));
    *out_result_json = Dup(result.dump(2));
  });
}

ds_status ds_generate(const char* request_json, char** out_summary_json) {
  return Guard([&] {
    json r = ParseJson(request_json, "request");
    harness::GenOptions opts;
    auto get = [&](const char* key, auto fallback) {
      using T = decltype(fallback);
      if (!r.contains(key) || r[key].is_null()) return fallback;
      try {
        return r[key].get<T>();
      } catch (const json::exception&) {
        throw Error(ErrorKind::kUsage, std::string("bad value for ") + key);
      }
    };
    opts.out_dir = get("out", std::string());
    if (opts.out_dir.empty()) throw Error(ErrorKind::kUsage, "out directory is required");
    auto& l = opts.landscape;
    l.n_demos = get("n_demos", std::uint32_t{6});
    l.n_queries = get("n_queries", std::uint32_t{10});
    l.seed = get("seed", std::uint64_t{0});
    const auto agg = get("aggregator", std::string("sum"));
    if (agg != "sum" && agg != "mean") throw Error(ErrorKind::kUsage, "aggregator must be sum or mean");
    l.aggregator = agg == "mean" ? ds::oracle::Aggregator::kMean : ds::oracle::Aggregator::kSum;
    l.interaction_scale = get("lambda", 0.0);
    l.noise_scale = get("sigma", 0.0);
    if (r.contains("planted_gamma") && !r["planted_gamma"].is_null()) {
      l.planted = ds::oracle::PlantedDemo{get("planted_demo", std::uint32_t{0}),
                                          get("planted_gamma", 0.3),
                                          get("planted_high", 0.9)};
    }
    if (r.contains("table_max_size") && !r["table_max_size"].is_null()) {
      opts.table_max_size = get("table_max_size", std::size_t{0});
    }
    opts.demo_columns = get("demo_columns", false);
    opts.feature_dim = get("feature_dim", std::size_t{8});
    try {
      auto summary = harness::GenerateLandscapeFiles(opts);
      if (out_summary_json) {
        nlohmann::ordered_json j;
        j["matrix"] = summary.matrix.string();
        j["table"] = summary.table.string();
        j["manifest"] = summary.manifest.string();
        j["features"] = summary.features.string();
        j["landscape"] = summary.landscape.string();
        j["table_entries"] = summary.table_entries;
        j["planted_columns"] = summary.planted_columns;
        *out_summary_json = Dup(j.dump(2));
      }
    } catch (const Error& e) {
      // Landscape parameter problems are usage errors here.
      if (e.kind() == ErrorKind::kConfig) throw Error(ErrorKind::kUsage, e.detail());
      throw;
    }
  });
}

ds_status ds_compare(const char* config_path, const char* out_dir, char** out_report_json,
                     char** out_table) {
  return Guard([&] {
    Require(config_path, "config_path");
    auto config = harness::LoadExperimentConfig(config_path);
    if (out_dir) config.output_dir = out_dir;
    auto report = harness::RunExperiment(config);
    const std::string doc = harness::ReportToJson(report).dump(2) + "\n";
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + config.output_dir.string());
    ds::text::WriteFile(config.output_dir / "report.json", doc);
    if (out_report_json) *out_report_json = Dup(doc);
    if (out_table) *out_table = Dup(harness::RenderReport(report));
  });
}

ds_status ds_analyze(const char* config_path, const char* out_dir, char** out_analysis_json,
                     char** out_text) {
  return Guard([&] {
    Require(config_path, "config_path");
    auto config = harness::LoadExperimentConfig(config_path);
    if (out_dir) config.output_dir = out_dir;
    auto analysis = harness::RunAnalysis(config);
    if (out_analysis_json) *out_analysis_json = Dup(analysis.dump(2) + "\n");
    if (out_text) *out_text = Dup(harness::RenderAnalysis(analysis));
  });
}

ds_status ds_config_output_dir(const char* config_path, char** out_dir) {
  return Guard([&] {
    Require(config_path, "config_path");
    Require(out_dir, "out_dir");
    *out_dir = Dup(harness::LoadExperimentConfig(config_path).output_dir.string());
  });
}

ds_status ds_audit_report(const char* report_json, char** out_audit_json, char** out_table,
                          int* all_pass) {
  return Guard([&] {
    json j = ParseJson(report_json, "report");
    auto report = harness::ReportFromJson(j);
    bool ok = true;
    for (const auto& row : report.audit) ok = ok && row.pass;
    if (all_pass) *all_pass = ok ? 1 : 0;
    if (out_audit_json) {
      *out_audit_json = Dup(harness::ReportToJson(report)["audit"].dump(2) + "\n");
    }
    if (out_table) *out_table = Dup(harness::RenderAudit(report.audit));
  });
}

ds_status ds_ingest_manifest(const char* path, char** out_summary_json) {
  return Guard([&] {
    Require(path, "path");
    auto pool = harness::IngestManifest(path);
    nlohmann::ordered_json j;
    j["samples"] = nlohmann::ordered_json::array();
    for (const auto& s : pool.samples) {
      nlohmann::ordered_json e;
      e["id"] = s.sample.id.value;
      e["role"] = s.role == harness::SampleRole::kQuery       ? "query"
                  : s.role == harness::SampleRole::kCandidate ? "candidate"
                                                              : "any";
      e["mask"] = s.mask.has_value();
      e["image"] = s.image.has_value();
      e["feature_dim"] = s.feature ? s.feature->size() : 0;
      j["samples"].push_back(e);
    }
    j["candidates"] = ds::FromIds(pool.Candidates());
    j["queries"] = ds::FromIds(pool.Queries());
    if (out_summary_json) *out_summary_json = Dup(j.dump(2));
  });
}

ds_status ds_mask_iou(const char* pred_pgm, const char* truth_pgm, double* out) {
  return Guard([&] {
    Require(pred_pgm, "pred");
    Require(truth_pgm, "truth");
    Require(out, "out");
    *out = ds::metrics::BinaryIou(harness::LoadMask(pred_pgm), harness::LoadMask(truth_pgm));
  });
}

ds_status ds_image_mse(const char* pred_path, const char* truth_path, double* out) {
  return Guard([&] {
    Require(pred_path, "pred");
    Require(truth_path, "truth");
    Require(out, "out");
    *out = ds::metrics::MseScaled(harness::LoadImage(pred_path), harness::LoadImage(truth_path));
  });
}

}  // extern "C"
